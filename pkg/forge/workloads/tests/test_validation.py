import pytest
from django.conf import settings

from workloads.utils.catalog import load_catalog
from workloads.utils.sql_ast import ColumnRef
from workloads.utils.sql_parser import parse_sql
from workloads.utils.validation import qualify_query, resolved_columns, validate

CATALOG = load_catalog(settings.FORGE_SCHEMA_FILE)


def codes(sql):
    return [v.code for v in validate(parse_sql(sql), CATALOG).errors]


class TestValidation:

    def test_valid_join_query(self):
        report = validate(parse_sql(
            'SELECT t.kind, COUNT(*) FROM movies m, title t '
            'WHERE m.id = t.movie_id AND m.rating BETWEEN 5.0 AND 8 GROUP BY t.kind'
        ), CATALOG)
        assert report.is_valid
        assert report.violations == []

    @pytest.mark.parametrize('sql, code', [
        ('SELECT * FROM films', 'unknown_table'),
        ('SELECT * FROM movies m, title m WHERE m.id = 1', 'duplicate_qualifier'),
        ('SELECT score FROM movies', 'unknown_column'),
        ('SELECT id FROM movies m, title t WHERE m.id = t.movie_id', 'ambiguous_column'),
        ("SELECT * FROM movies WHERE rating = 'high'", 'type_mismatch'),
        ('SELECT * FROM movies WHERE genre IN (1, 2)', 'type_mismatch'),
        ('SELECT SUM(genre) FROM movies', 'type_mismatch'),
        ('SELECT genre, COUNT(*) FROM movies', 'group_by'),
        ('SELECT * FROM movies GROUP BY genre', 'group_by'),
        ('SELECT * FROM movies WHERE rating BETWEEN 9 AND 2', 'between_order'),
        ('SELECT * FROM movies m, title t', 'disconnected_join'),
        ('SELECT * FROM movies WHERE id IN (SELECT movie_id, kind FROM title)', 'subquery_projection'),
        ("SELECT * FROM movies WHERE id IN (SELECT kind FROM title)", 'type_mismatch'),
    ])
    def test_error_codes(self, sql, code):
        assert code in codes(sql)

    def test_join_within_one_table(self):
        q = parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND m.budget = m.revenue')
        assert 'join_within_table' in [v.code for v in validate(q, CATALOG).errors]

    def test_join_off_the_foreign_key_graph_is_a_warning(self):
        report = validate(parse_sql('SELECT * FROM movies m, title t WHERE m.duration = t.runtime'), CATALOG)
        assert report.is_valid
        assert [w.code for w in report.warnings] == ['non_fk_join']

    def test_subquery_sees_its_own_scope(self):
        q = parse_sql("SELECT title FROM movies WHERE id IN (SELECT movie_id FROM title WHERE kind = 'movie')")
        assert validate(q, CATALOG).is_valid


class TestResolution:

    def test_qualify_query_adds_qualifiers(self):
        q = qualify_query(parse_sql('SELECT genre FROM movies WHERE rating > 5'), CATALOG)
        assert q.projections[0].expr == ColumnRef('genre', 'movies')
        assert q.where.column == ColumnRef('rating', 'movies')

    def test_resolved_columns_cover_subqueries(self):
        q = parse_sql('SELECT genre FROM movies WHERE id IN (SELECT movie_id FROM cast_info WHERE nr_order = 1)')
        found = {(c.table, c.column) for c in resolved_columns(q, CATALOG)}
        assert {('movies', 'genre'), ('movies', 'id'), ('cast_info', 'movie_id'), ('cast_info', 'nr_order')} <= found
