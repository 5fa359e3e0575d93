"""
Executor results against a nested-loop oracle
"""
import itertools
import operator

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from workloads.exceptions import LabelingError
from workloads.utils.executor import QueryExecutor, execute_count
from workloads.utils.sql_ast import And, Between, Comparison, InList, InSubquery, Or
from workloads.utils.sql_parser import parse_sql
from workloads.utils.validation import qualify_query

from .factories import movie_desk

OPS = {
    '=': operator.eq, '<>': operator.ne, '<': operator.lt,
    '<=': operator.le, '>': operator.gt, '>=': operator.ge,
}

CATALOG, DATA = movie_desk()


def rows_of(name, qualifier):
    frame = DATA[name].frame
    return [{f'{qualifier}.{c}': row[c] for c in frame.columns} for _, row in frame.iterrows()]


def holds(predicate, row):
    if predicate is None:
        return True
    if isinstance(predicate, And):
        return all(holds(child, row) for child in predicate.children)
    if isinstance(predicate, Or):
        return any(holds(child, row) for child in predicate.children)
    value = row[str(predicate.column)]
    if isinstance(predicate, Comparison):
        return OPS[predicate.op](value, predicate.value)
    if isinstance(predicate, Between):
        return predicate.low <= value <= predicate.high
    if isinstance(predicate, InList):
        return value in predicate.values
    if isinstance(predicate, InSubquery):
        return value in oracle_projection(predicate.query)
    raise TypeError(predicate)


def oracle_rows(q):
    q = qualify_query(q, CATALOG)
    tables = [rows_of(ref.name, ref.qualifier) for ref in q.from_tables]
    matched = []
    for combination in itertools.product(*tables):
        row = {}
        for part in combination:
            row.update(part)
        if all(row[str(j.left)] == row[str(j.right)] for j in q.join_predicates) and holds(q.where, row):
            matched.append(row)
    return q, matched


def oracle_projection(q):
    q, rows = oracle_rows(q)
    return {row[str(q.projections[0].expr)] for row in rows}


def oracle_count(q):
    q, rows = oracle_rows(q)
    if not q.is_aggregation:
        return len(rows)
    if not q.group_by:
        return 1
    return len({tuple(row[str(c)] for c in q.group_by) for row in rows})


QUERIES = [
    'SELECT * FROM movies',
    "SELECT * FROM movies WHERE genre = 'drama'",
    'SELECT * FROM movies WHERE rating > 5.9 AND rating <= 7.5',
    "SELECT * FROM movies WHERE genre IN ('comedy', 'horror') OR rating BETWEEN 8 AND 9",
    'SELECT * FROM movies m, title t WHERE m.id = t.movie_id',
    "SELECT * FROM movies m, title t WHERE m.id = t.movie_id AND (t.start_year < 2000 OR m.genre = 'comedy')",
    'SELECT * FROM movies m, title t, cast_info c WHERE m.id = t.movie_id AND c.movie_id = m.id AND c.nr_order = 1',
    'SELECT genre, COUNT(*) FROM movies GROUP BY genre',
    'SELECT m.genre, t.start_year, COUNT(*) FROM movies m, title t WHERE m.id = t.movie_id GROUP BY m.genre, t.start_year',
    'SELECT COUNT(*) FROM movies WHERE rating > 100',
    'SELECT genre, COUNT(*) FROM movies WHERE rating > 100 GROUP BY genre',
    'SELECT * FROM movies WHERE id IN (SELECT movie_id FROM title WHERE start_year = 2004)',
    'SELECT * FROM title WHERE movie_id IN (SELECT id FROM movies WHERE rating > 100)',
    'SELECT * FROM movies m, title t WHERE m.rating < 7',
]


class TestExecutor:

    @pytest.mark.parametrize('sql', QUERIES)
    def test_matches_nested_loop_oracle(self, sql):
        q = parse_sql(sql)
        assert execute_count(q, DATA, CATALOG) == oracle_count(q)

    @hypothesis_settings(max_examples=80, deadline=None)
    @given(
        low=st.integers(1980, 2025), width=st.integers(0, 30),
        rating=st.sampled_from([4.2, 5.5, 6.0, 7.5, 8.1]),
        op=st.sampled_from(['=', '<>', '<', '<=', '>', '>=']),
    )
    def test_random_filters_match_oracle(self, low, width, rating, op):
        q = parse_sql(
            f'SELECT * FROM movies m, title t WHERE m.id = t.movie_id '
            f'AND t.start_year BETWEEN {low} AND {low + width} AND m.rating {op} {rating}'
        )
        assert execute_count(q, DATA, CATALOG) == oracle_count(q)

    def test_universe_is_product_of_row_counts(self):
        executor = QueryExecutor(parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id'), DATA, CATALOG)
        assert executor.universe_size() == 6 * 8

    def test_universe_overflow(self):
        q = parse_sql('SELECT * FROM movies m, title t WHERE m.id = t.movie_id')
        with pytest.raises(LabelingError, match='overflow'):
            QueryExecutor(q, DATA, CATALOG, max_universe=10).universe_size()

    def test_unloaded_table(self):
        with pytest.raises(LabelingError, match='not loaded'):
            QueryExecutor(parse_sql('SELECT * FROM persons'), DATA, CATALOG)

    def test_unknown_column_is_a_labeling_error(self):
        with pytest.raises(LabelingError):
            QueryExecutor(parse_sql('SELECT * FROM movies WHERE score = 1'), DATA, CATALOG)

    def test_subquery_values_are_distinct_and_sorted(self):
        executor = QueryExecutor(parse_sql('SELECT movie_id FROM title'), DATA, CATALOG)
        assert executor.projected_values() == [1, 2, 3, 5, 9]
