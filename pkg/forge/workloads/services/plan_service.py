"""
Plan Service for Forge
Enumerates candidate plans, costs them with true cardinalities and picks the optimum
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from django.conf import settings

from ..utils.artifacts import write_csv
from ..utils.catalog import SchemaCatalog, TableData
from ..utils.cost_model import (
    CostModelParams, PlanCardinalities, annotate, cards_from_dict, cost_plan, optimal_index,
)
from ..utils.executor import QueryExecutor
from ..utils.plans import PlanTree, enumerate_plans, plan_from_dict, plan_to_dict
from ..utils.sql_ast import QueryAst
from ..utils.sql_printer import print_sql

logger = logging.getLogger(__name__)

PLAN_COLUMNS = ['query_id', 'plan_id', 'plan_json', 'cost', 'is_optimal']


@dataclass(frozen=True)
class LabeledPlan:
    plan_id: int
    plan: PlanTree
    cost: float
    node_costs: Dict[tuple, float] = field(default_factory=dict, compare=False)

    def to_dict(self, cards: PlanCardinalities) -> dict:
        return plan_to_dict(self.plan, self.node_costs, cards)


@dataclass
class LabeledPlanSet:
    query: QueryAst
    plans: List[LabeledPlan]
    optimal_plan_id: int
    cards: PlanCardinalities
    query_id: str = ''

    @property
    def optimal(self) -> LabeledPlan:
        return self.plans[self.optimal_plan_id]

    @property
    def costs(self) -> List[float]:
        return [plan.cost for plan in self.plans]


@dataclass(frozen=True)
class PlanFailure:
    query_id: str
    sql: str
    reason: str


@dataclass
class PlanLabelingResult:
    sets: List[LabeledPlanSet] = field(default_factory=list)
    failures: List[PlanFailure] = field(default_factory=list)


def primary_keys(catalog: SchemaCatalog) -> Dict[str, str]:
    return {table.name: table.primary_key for table in catalog.tables}


class PlanService:
    """
    Service for producing (query, plan, cost) training triples
    """

    def __init__(self):
        self.default_limit = int(getattr(settings, 'FORGE_PLANNER', {}).get('LIMIT', 1000))

    def label_plans(self, q: QueryAst, data: Dict[str, TableData], catalog: SchemaCatalog,
                    params: Optional[CostModelParams] = None, limit: Optional[int] = None,
                    seed: int = 0, query_id: str = '') -> LabeledPlanSet:
        """
        Cost every enumerated plan of q with the same exact cardinalities

        Args:
            q: Query (validated against catalog)
            data: Loaded tables by name
            catalog: Catalog with declared indexes
            params: Cost model parameters (settings defaults when omitted)
            limit: Maximum plans (settings default when omitted)
            seed: Truncation sampling seed
            query_id: Id carried into the set

        Returns:
            LabeledPlanSet with dense plan ids and the argmin plan (lowest id on ties)
        """
        params = params or CostModelParams.from_settings()
        limit = self.default_limit if limit is None else limit

        executor = QueryExecutor(q, data, catalog)
        plans = enumerate_plans(executor.query, catalog, limit, seed)
        cards = annotate(executor, plans)
        keys = primary_keys(catalog)

        labeled = []
        for plan_id, plan in enumerate(plans):
            cost, node_costs = cost_plan(plan, params, cards, keys)
            labeled.append(LabeledPlan(plan_id, plan, cost, node_costs))

        optimal = optimal_index([plan.cost for plan in labeled])
        logger.debug(
            f'{query_id or "query"}: {len(labeled)} plans, optimal {optimal} '
            f'({labeled[optimal].plan.describe()}, cost={labeled[optimal].cost:.3f})'
        )
        return LabeledPlanSet(executor.query, labeled, optimal, cards, query_id)

    def recost(self, sets: Sequence[LabeledPlanSet], catalog: SchemaCatalog,
               params: CostModelParams) -> List[LabeledPlanSet]:
        """Same plans and annotations under other parameters"""
        keys = primary_keys(catalog)
        result = []
        for plan_set in sets:
            labeled = []
            for plan in plan_set.plans:
                cost, node_costs = cost_plan(plan.plan, params, plan_set.cards, keys)
                labeled.append(LabeledPlan(plan.plan_id, plan.plan, cost, node_costs))
            optimal = optimal_index([plan.cost for plan in labeled])
            result.append(LabeledPlanSet(plan_set.query, labeled, optimal, plan_set.cards, plan_set.query_id))
        return result

    def label_workload(self, queries: Sequence[QueryAst], query_ids: Sequence[str],
                       data: Dict[str, TableData], catalog: SchemaCatalog,
                       params: Optional[CostModelParams] = None, limit: Optional[int] = None,
                       seed: int = 0, jobs: int = 1) -> PlanLabelingResult:
        """Plan sets for a batch; failures isolated per query, output in input order"""

        def label_one(index):
            try:
                return self.label_plans(queries[index], data, catalog, params, limit, seed, query_ids[index])
            except Exception as e:
                return PlanFailure(query_ids[index], print_sql(queries[index]), str(e) or type(e).__name__)

        if jobs > 1 and len(queries) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(label_one, range(len(queries))))
        else:
            outcomes = [label_one(i) for i in range(len(queries))]

        result = PlanLabelingResult()
        for outcome in outcomes:
            if isinstance(outcome, PlanFailure):
                logger.warning(f'Plan labeling failed for {outcome.query_id}: {outcome.reason}')
                result.failures.append(outcome)
            else:
                result.sets.append(outcome)
        logger.info(f'Plan-labeled {len(result.sets)} queries ({sum(len(s.plans) for s in result.sets)} plans)')
        return result

    def plan_rows(self, sets: Sequence[LabeledPlanSet]) -> List[dict]:
        """One row per (query, plan): query_id, plan_id, plan_json, cost, is_optimal"""
        rows = []
        for plan_set in sets:
            for plan in plan_set.plans:
                rows.append({
                    'query_id': plan_set.query_id,
                    'plan_id': plan.plan_id,
                    'plan_json': json.dumps(plan.to_dict(plan_set.cards), sort_keys=True),
                    'cost': repr(plan.cost),
                    'is_optimal': int(plan.plan_id == plan_set.optimal_plan_id),
                })
        return rows

    def export_plan_dataset(self, sets: Sequence[LabeledPlanSet], path, seed: int) -> int:
        """Write plans.csv; an empty input yields a header-only file"""
        rows = self.plan_rows(sets)
        write_csv(path, rows, PLAN_COLUMNS, seed)
        logger.info(f'Plan dataset written to {path}: {len(rows)} rows')
        return len(rows)

    def recost_row(self, row: dict, catalog: SchemaCatalog, params: CostModelParams) -> float:
        """Cost of a serialized plan row under params"""
        document = json.loads(row['plan_json'])
        cost, _ = cost_plan(plan_from_dict(document), params, cards_from_dict(document), primary_keys(catalog))
        return cost


# Singleton instance
plan_service = PlanService()
