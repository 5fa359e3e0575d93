"""
Parser and printer tests
"""
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from workloads.exceptions import SqlSyntaxError, UnsupportedConstructError
from workloads.utils.sql_ast import (
    AggregateCall, And, Between, ColumnRef, Comparison, InList, InSubquery, JoinPredicate,
    Or, PredicateKind, Projection, QueryAst, QueryCategory, Star, TableRef,
    classify, conjoin, disjoin, predicate_kind, query_from_dict, query_to_dict,
)
from workloads.utils.sql_parser import parse_sql, split_statements
from workloads.utils.sql_printer import Dialect, canonical_key, format_literal, print_sql, skeleton

COLUMNS = ('rating', 'budget', 'genre', 'runtime', 'start_year')

integers = st.integers(-10 ** 9, 10 ** 9)
decimals = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
texts = st.text(alphabet="abcxyz XYZ019'_", min_size=1, max_size=12)
literals = st.one_of(integers, decimals, texts)


def atoms_over(columns):
    column = st.sampled_from(columns)
    return st.one_of(
        st.builds(Comparison, column, st.sampled_from(['=', '<>', '<', '<=', '>', '>=']), literals),
        st.builds(Between, column, integers, integers),
        st.builds(InList, column, st.lists(literals, min_size=1, max_size=4).map(tuple)),
    )


def predicates_over(columns):
    return st.recursive(
        atoms_over(columns),
        lambda children: st.one_of(
            st.lists(children, min_size=2, max_size=3).map(lambda parts: conjoin(*parts)),
            st.lists(children, min_size=2, max_size=3).map(lambda parts: disjoin(*parts)),
        ),
        max_leaves=6,
    )


single_table_queries = st.builds(
    QueryAst,
    projections=st.one_of(
        st.just((Projection(Star()),)),
        st.lists(st.sampled_from(COLUMNS), min_size=1, max_size=3, unique=True).map(
            lambda names: tuple(Projection(ColumnRef(n)) for n in names)),
        st.just((Projection(AggregateCall('COUNT'), 'total'),)),
    ),
    from_tables=st.just((TableRef('movies'),)),
    where=st.one_of(st.none(), predicates_over([ColumnRef(c) for c in COLUMNS])),
)

join_queries = st.builds(
    QueryAst,
    projections=st.just((Projection(ColumnRef('genre', 'm')), Projection(AggregateCall('SUM', ColumnRef('runtime', 't'))))),
    from_tables=st.just((TableRef('movies', 'm'), TableRef('title', 't'))),
    join_predicates=st.just((JoinPredicate(ColumnRef('id', 'm'), ColumnRef('movie_id', 't')),)),
    where=st.one_of(st.none(), predicates_over([ColumnRef('rating', 'm'), ColumnRef('start_year', 't')])),
    group_by=st.just((ColumnRef('genre', 'm'),)),
)


class TestRoundTrip:

    @hypothesis_settings(max_examples=150, deadline=None)
    @given(q=st.one_of(single_table_queries, join_queries), dialect=st.sampled_from(list(Dialect)))
    def test_printed_query_parses_back_equal(self, q, dialect):
        assert parse_sql(print_sql(q, dialect)) == q

    @hypothesis_settings(max_examples=50, deadline=None)
    @given(q=st.one_of(single_table_queries, join_queries))
    def test_ast_json_form_round_trips(self, q):
        assert query_from_dict(query_to_dict(q)) == q

    def test_subquery_round_trips(self):
        sql = ('SELECT COUNT(*) FROM cast_info ci WHERE ci.movie_id IN '
               '(SELECT id FROM movies WHERE genre = \'drama\') AND ci.nr_order <= 3')
        q = parse_sql(sql)
        assert isinstance(q.where, And) and isinstance(q.where.children[0], InSubquery)
        assert parse_sql(print_sql(q)) == q

    def test_decimal_literals_keep_their_point(self):
        assert format_literal(5.0) == '5.0'
        assert format_literal(0.1) == '0.1'
        assert format_literal("o'hara") == "'o''hara'"


class TestParsing:

    def test_join_on_becomes_join_predicate(self):
        q = parse_sql('SELECT * FROM movies m JOIN title t ON m.id = t.movie_id WHERE t.start_year > 2000')
        assert q.join_predicates == (JoinPredicate(ColumnRef('id', 'm'), ColumnRef('movie_id', 't')),)
        assert q.where == Comparison(ColumnRef('start_year', 't'), '>', 2000)

    def test_literal_on_the_left_flips_operator(self):
        q = parse_sql('select * from movies where 2000 < release_year')
        assert q.where == Comparison(ColumnRef('release_year'), '>', 2000)

    def test_not_equal_spellings(self):
        assert parse_sql("SELECT * FROM movies WHERE genre != 'drama'").where.op == '<>'

    def test_identifiers_are_lowercased(self):
        q = parse_sql('SELECT Rating FROM "Movies"')
        assert q.from_tables == (TableRef('movies'),)
        assert q.projections == (Projection(ColumnRef('rating')),)

    def test_negative_literals(self):
        q = parse_sql('SELECT * FROM movies WHERE rating BETWEEN -1.5 AND 3')
        assert q.where == Between(ColumnRef('rating'), -1.5, 3)

    @pytest.mark.parametrize('sql, construct', [
        ('SELECT * FROM movies ORDER BY rating', 'ORDER BY'),
        ('SELECT * FROM movies LIMIT 5', 'LIMIT'),
        ('SELECT DISTINCT genre FROM movies', 'DISTINCT'),
        ("SELECT * FROM movies WHERE title LIKE 'a%'", 'LIKE'),
        ('SELECT * FROM movies WHERE rating IS NULL', 'IS NULL'),
        ('SELECT * FROM movies WHERE NOT rating = 1', 'NOT'),
        ('SELECT MAX(rating) FROM movies', 'aggregate MAX'),
        ('SELECT * FROM movies m LEFT JOIN title t ON m.id = t.movie_id', 'LEFT JOIN'),
        ('SELECT * FROM (SELECT * FROM movies) x', 'subquery in FROM'),
        ('SELECT * FROM movies m, title t WHERE m.id < t.movie_id', 'non-equality join predicate'),
        ('SELECT * FROM movies m, title t WHERE m.id = t.movie_id OR m.rating = 1', 'join predicate under OR'),
        ('SELECT genre, COUNT(*) FROM movies GROUP BY genre HAVING COUNT(*) > 2', 'HAVING'),
    ])
    def test_unsupported_constructs_are_named(self, sql, construct):
        with pytest.raises(UnsupportedConstructError) as error:
            parse_sql(sql)
        assert error.value.construct == construct

    def test_nested_subqueries_are_rejected(self):
        sql = ('SELECT * FROM movies WHERE id IN (SELECT movie_id FROM title WHERE id IN '
               '(SELECT movie_id FROM cast_info))')
        with pytest.raises(UnsupportedConstructError):
            parse_sql(sql)

    def test_syntax_error_carries_offset(self):
        with pytest.raises(SqlSyntaxError) as error:
            parse_sql('SELECT * FROM movies WHERE rating >')
        assert error.value.offset == len('SELECT * FROM movies WHERE rating >')

    def test_split_statements_drops_terminators(self):
        text = "SELECT * FROM movies;\n\nSELECT id FROM title WHERE kind = 'a;b';\n"
        assert split_statements(text) == ['SELECT * FROM movies', "SELECT id FROM title WHERE kind = 'a;b'"]


class TestNormalForms:

    def test_canonical_key_ignores_commutative_order(self):
        a = parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND t.kind IN (\'b\', \'a\') AND m.rating > 5')
        b = parse_sql('SELECT * FROM title t, movies m WHERE m.rating > 5 AND t.movie_id = m.id AND t.kind IN (\'a\', \'b\')')
        assert canonical_key(a) == canonical_key(b)

    def test_canonical_key_keeps_constants(self):
        assert canonical_key(parse_sql('SELECT * FROM movies WHERE rating > 5')) != \
            canonical_key(parse_sql('SELECT * FROM movies WHERE rating > 6'))

    def test_skeleton_replaces_constants(self):
        q = parse_sql("SELECT * FROM movies WHERE genre = 'drama' AND rating BETWEEN 5 AND 7")
        other = parse_sql("SELECT * FROM movies WHERE rating BETWEEN 1 AND 2 AND genre = 'comedy'")
        assert '?' in skeleton(q) and 'drama' not in skeleton(q)
        assert skeleton(q) == skeleton(other)


class TestClassification:

    @pytest.mark.parametrize('sql, category, kind', [
        ('SELECT * FROM movies', QueryCategory.SIMPLE_SELECTION, PredicateKind.NONE),
        ('SELECT * FROM movies WHERE rating > 5', QueryCategory.SIMPLE_SELECTION, PredicateKind.RANGE),
        ('SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND t.kind = \'movie\'',
         QueryCategory.COMPLEX_JOIN, PredicateKind.EQUALITY),
        ('SELECT genre, COUNT(*) FROM movies m, title t WHERE m.id = t.movie_id GROUP BY genre',
         QueryCategory.AGGREGATION, PredicateKind.NONE),
        ('SELECT * FROM movies WHERE rating > 5 OR genre IN (\'drama\')',
         QueryCategory.SIMPLE_SELECTION, PredicateKind.MIXED),
        ('SELECT * FROM movies WHERE id IN (SELECT movie_id FROM title) AND rating = 1',
         QueryCategory.SIMPLE_SELECTION, PredicateKind.SUBQUERY),
    ])
    def test_category_and_predicate_kind(self, sql, category, kind):
        q = parse_sql(sql)
        assert classify(q) == category
        assert predicate_kind(q) == kind

    def test_or_of_atoms_is_flat(self):
        q = parse_sql('SELECT * FROM movies WHERE (rating = 1 OR rating = 2) OR rating = 3')
        assert isinstance(q.where, Or) and len(q.where.children) == 3
