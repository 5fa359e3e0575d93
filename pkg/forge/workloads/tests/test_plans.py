import numpy as np
import pytest

from workloads.exceptions import PlanningError
from workloads.services.plan_service import plan_service
from workloads.utils.cost_model import CostModelParams
from workloads.utils.executor import QueryExecutor, execute_count
from workloads.utils.plans import (
    FULL_SCAN, INDEX_SCAN, JoinGraph, PlanSpace, enumerate_plans, execute_plan, plan_from_dict, plan_to_dict,
)
from workloads.utils.sql_parser import parse_sql
from workloads.utils.validation import qualify_query

from .factories import movie_desk, tiny_tables

KEYED = tiny_tables({
    'a': {'id': np.arange(40), 'x': np.arange(40) % 7},
    'b': {'id': np.arange(30), 'y': np.arange(30) % 3},
    'c': {'id': np.arange(25), 'z': np.arange(25) % 5},
})

PAIR = 'SELECT * FROM a, b WHERE a.id = b.id'
CHAIN = 'SELECT * FROM a, b, c WHERE a.id = b.id AND b.id = c.id'


def qualified(sql, catalog):
    return qualify_query(parse_sql(sql), catalog)


class TestPlanSpace:

    def test_two_table_key_join(self):
        catalog, data = KEYED
        plan_set = plan_service.label_plans(parse_sql(PAIR), data, catalog, limit=1000)
        assert len(plan_set.plans) == 2 * 3 * 4
        assert [p.plan_id for p in plan_set.plans] == list(range(24))

    def test_chain_with_implied_predicate(self):
        catalog, _ = KEYED
        q = qualified(CHAIN, catalog)
        graph = JoinGraph(q)
        assert len(graph.valid_orders()) == 6
        assert PlanSpace(q, catalog).size == 6 * 9 * 8
        assert len(enumerate_plans(q, catalog, limit=1000, seed=0)) == 432

    def test_access_menu_uses_referenced_indexes_only(self):
        catalog, _ = KEYED
        q = qualified('SELECT * FROM a WHERE x = 3', catalog)
        plans = enumerate_plans(q, catalog, limit=10, seed=0)
        assert [leaf.access for plan in plans for leaf in plan.leaves()] == [FULL_SCAN]

        q = qualified('SELECT * FROM a WHERE id < 10', catalog)
        accesses = [plan.root.access for plan in enumerate_plans(q, catalog, limit=10, seed=0)]
        assert accesses == [FULL_SCAN, INDEX_SCAN]

    def test_truncation_is_seeded(self):
        catalog, _ = KEYED
        q = qualified(CHAIN, catalog)
        first = enumerate_plans(q, catalog, limit=50, seed=3)
        again = enumerate_plans(q, catalog, limit=50, seed=3)
        other = enumerate_plans(q, catalog, limit=50, seed=4)
        assert len(first) == 50
        assert first == again
        assert first != other

    def test_disconnected_graph(self):
        catalog, _ = KEYED
        with pytest.raises(PlanningError, match='disconnected'):
            enumerate_plans(qualified('SELECT * FROM a, b', catalog), catalog, limit=10, seed=0)

    def test_limit_must_be_positive(self):
        catalog, _ = KEYED
        with pytest.raises(PlanningError):
            enumerate_plans(qualified(PAIR, catalog), catalog, limit=0, seed=0)


class TestPlanCosts:

    def test_optimal_plan_is_the_argmin(self):
        catalog, data = KEYED
        plan_set = plan_service.label_plans(parse_sql(CHAIN), data, catalog)
        assert plan_set.optimal.cost == min(plan_set.costs)
        assert plan_set.optimal_plan_id == plan_set.costs.index(min(plan_set.costs))

    def test_scaling_cost_units_keeps_the_argmin(self):
        catalog, data = KEYED
        base = plan_service.label_plans(parse_sql(CHAIN), data, catalog)
        [scaled] = plan_service.recost([base], catalog, CostModelParams().scaled(2))
        assert scaled.optimal_plan_id == base.optimal_plan_id
        assert scaled.costs == pytest.approx([2 * cost for cost in base.costs])

    def test_parameters_must_be_positive(self):
        with pytest.raises(ValueError):
            CostModelParams(cpu_tuple_cost=0)

    def test_every_plan_returns_the_query_result(self):
        catalog, data = movie_desk()
        q = parse_sql(
            'SELECT * FROM movies m, title t, cast_info c '
            'WHERE m.id = t.movie_id AND c.movie_id = m.id AND t.start_year >= 2000'
        )
        expected = execute_count(q, data, catalog)
        plan_set = plan_service.label_plans(q, data, catalog)
        executor = QueryExecutor(q, data, catalog)
        for labeled in plan_set.plans:
            assert execute_plan(labeled.plan, executor) == expected

    def test_aggregate_plans_count_groups(self):
        catalog, data = movie_desk()
        q = parse_sql('SELECT m.genre, COUNT(*) FROM movies m, title t WHERE m.id = t.movie_id GROUP BY m.genre')
        plan_set = plan_service.label_plans(q, data, catalog)
        executor = QueryExecutor(q, data, catalog)
        assert all(execute_plan(p.plan, executor) == 2 for p in plan_set.plans)


class TestPlanDataset:

    def test_rows_recost_to_the_same_value(self):
        catalog, data = KEYED
        plan_set = plan_service.label_plans(parse_sql(CHAIN), data, catalog, limit=40, seed=1, query_id='q7')
        params = CostModelParams()
        rows = plan_service.plan_rows([plan_set])
        assert sum(row['is_optimal'] for row in rows) == 1
        for row in rows:
            assert plan_service.recost_row(row, catalog, params) == pytest.approx(float(row['cost']))

    def test_plan_json_round_trip(self):
        catalog, data = KEYED
        plan_set = plan_service.label_plans(parse_sql(PAIR), data, catalog)
        for labeled in plan_set.plans:
            assert plan_from_dict(plan_to_dict(labeled.plan)) == labeled.plan

    def test_empty_export_writes_header(self, tmp_path):
        path = tmp_path / 'plans.csv'
        assert plan_service.export_plan_dataset([], path, seed=5) == 0
        lines = path.read_text().splitlines()
        assert lines[0] == '# forge seed=5'
        assert lines[1].split(',') == ['query_id', 'plan_id', 'plan_json', 'cost', 'is_optimal']

    def test_failures_are_isolated(self):
        catalog, data = KEYED
        result = plan_service.label_workload(
            [parse_sql(PAIR), parse_sql('SELECT * FROM a, b')], ['ok', 'bad'], data, catalog)
        assert [s.query_id for s in result.sets] == ['ok']
        assert [f.query_id for f in result.failures] == ['bad']
