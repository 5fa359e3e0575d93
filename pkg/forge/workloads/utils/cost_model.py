"""
Deterministic plan cost model
Linear in the cost units (io, cpu, index lookup); fed with true cardinalities
"""
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from django.conf import settings

from ..exceptions import PlanningError
from .executor import predicate_mask
from .plans import (
    FULL_SCAN, HASH_JOIN, INDEX_SCAN, MERGE_JOIN, NESTED_LOOP_JOIN, PlanTree,
    ScanNode, node_key, sargable_atoms,
)

logger = logging.getLogger(__name__)

# Parameters that carry cost units; scaling these scales every plan cost
COST_UNIT_PARAMS = ('io_page_cost', 'cpu_tuple_cost', 'index_lookup_cost')


@dataclass(frozen=True)
class CostModelParams:
    io_page_cost: float = 1.0
    cpu_tuple_cost: float = 0.01
    hash_build_factor: float = 1.2
    sort_factor: float = 2.0
    index_lookup_cost: float = 0.5
    page_size_tuples: int = 100
    memory_budget_pages: int = 64

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f'{f.name} must be strictly positive')

    @classmethod
    def from_settings(cls, **overrides) -> 'CostModelParams':
        config = {key.lower(): value for key, value in getattr(settings, 'FORGE_COST_MODEL', {}).items()}
        config.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in config.items() if k in known})

    def scaled(self, factor: float) -> 'CostModelParams':
        """Every cost-unit parameter multiplied by factor"""
        return replace(self, **{name: getattr(self, name) * factor for name in COST_UNIT_PARAMS})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ScanCards:
    base_rows: int
    rows: int
    index_rows: Dict[str, int] = field(default_factory=dict)


class PlanCardinalities:
    """
    Cardinality annotations for the nodes of a query's plans

    Scan nodes are keyed by alias, join nodes by their qualifier set;
    groups is the aggregate output size.
    """

    def __init__(self, scans: Dict[str, ScanCards], joins: Dict[frozenset, int], groups: Optional[int] = None):
        self.scans = scans
        self.joins = joins
        self.groups = groups

    def scan(self, alias: str) -> ScanCards:
        if alias not in self.scans:
            raise PlanningError(f'missing cardinality annotation for scan {alias}')
        return self.scans[alias]

    def join(self, qualifiers) -> int:
        key = frozenset(qualifiers)
        if len(key) == 1:
            return self.scan(next(iter(key))).rows
        if key not in self.joins:
            raise PlanningError(f'missing cardinality annotation for join {sorted(key)}')
        return self.joins[key]


def annotate(executor, plans) -> PlanCardinalities:
    """
    Exact annotations for every node of the given plans

    Args:
        executor: QueryExecutor of the (qualified) query
        plans: Plans whose nodes need annotations

    Returns:
        PlanCardinalities; each distinct join prefix is executed once
    """
    query = executor.query
    scans = {}
    for alias in executor.qualifiers:
        raw = executor.raw_frame(alias)
        index_rows = {}
        for column in {leaf.index_column for plan in plans for leaf in plan.leaves()
                       if leaf.alias == alias and leaf.access == INDEX_SCAN}:
            atoms = sargable_atoms(query, alias, column)
            if atoms:
                mask = predicate_mask(raw, atoms[0])
                for atom in atoms[1:]:
                    mask &= predicate_mask(raw, atom)
                index_rows[column] = int(mask.sum())
            else:
                index_rows[column] = len(raw)
        scans[alias] = ScanCards(len(raw), len(executor.base_frame(alias)), index_rows)

    joins = {}
    for plan in plans:
        for join in plan.joins():
            key = frozenset(join.qualifiers)
            if key not in joins:
                joins[key] = executor.matching_rows(key)

    groups = executor.result_count() if query.is_aggregation else None
    return PlanCardinalities(scans, joins, groups)


def cards_from_dict(document: dict) -> PlanCardinalities:
    """Annotations carried by a serialized plan"""
    scans, joins = {}, {}
    groups = None

    def walk(node):
        if node['op'] == 'Scan':
            index_rows = {}
            if node.get('index_column'):
                index_rows[node['index_column']] = int(node.get('index_rows', node['base_rows']))
            scans[node['alias']] = ScanCards(int(node['base_rows']), int(node['card']), index_rows)
            return (node['alias'],)
        qualifiers = ()
        for child in node['children']:
            qualifiers += walk(child)
        if node['op'] == 'Join':
            joins[frozenset(qualifiers)] = int(node['card'])
        return qualifiers

    walk(document)
    if document['op'] == 'Aggregate':
        groups = int(document['card'])
    return PlanCardinalities(scans, joins, groups)


# ==================== COST FORMULAS ====================

def _pages(rows: float, params: CostModelParams) -> int:
    return math.ceil(rows / params.page_size_tuples)


def scan_cost(node: ScanNode, cards: ScanCards, params: CostModelParams, is_primary_key: bool) -> float:
    if node.access == FULL_SCAN:
        return _pages(cards.base_rows, params) * params.io_page_cost + cards.base_rows * params.cpu_tuple_cost
    match = cards.index_rows.get(node.index_column, cards.base_rows)
    if is_primary_key:
        pages = match // params.page_size_tuples
    else:
        pages = match
    return params.index_lookup_cost + match * params.cpu_tuple_cost + pages * params.io_page_cost


def _sort_cost(rows: float, params: CostModelParams) -> float:
    if rows <= 1:
        return 0.0
    return params.sort_factor * rows * math.log2(rows) * params.cpu_tuple_cost


def cost_plan(plan: PlanTree, params: CostModelParams, cards: PlanCardinalities,
              primary_keys: Dict[str, str]) -> Tuple[float, Dict[tuple, float]]:
    """
    Cost of a plan under the model

    Args:
        plan: Plan tree
        params: Cost model parameters
        cards: Cardinality annotation for every node
        primary_keys: table name -> primary key column (clustered index)

    Returns:
        (total cost, cumulative cost per node keyed by node_key)
    """
    node_costs = {}

    def is_pk(node: ScanNode) -> bool:
        return primary_keys.get(node.table) == node.index_column

    def cost(node) -> float:
        if isinstance(node, ScanNode):
            value = scan_cost(node, cards.scan(node.alias), params, is_pk(node))
            node_costs[node_key(node)] = value
            return value

        left_cost = cost(node.left)
        right = node.right
        right_cards = cards.scan(right.alias)
        rows_left = cards.join(node.left.qualifiers)
        rows_right = right_cards.rows
        rows_out = cards.join(node.qualifiers)
        cpu = params.cpu_tuple_cost

        if node.method == NESTED_LOOP_JOIN:
            probe_columns = {p.right.name for p in node.predicates}
            if right.access == INDEX_SCAN and right.index_column in probe_columns:
                node_costs[node_key(right)] = scan_cost(right, right_cards, params, is_pk(right))
                per_row_matches = rows_out / rows_left if rows_left else 0.0
                per_probe = params.index_lookup_cost + per_row_matches * cpu
                if not is_pk(right):
                    per_probe += per_row_matches * params.io_page_cost
                value = left_cost + rows_left * per_probe + rows_out * cpu
            else:
                rescan = cost(right)
                value = left_cost + rows_left * rescan + rows_out * cpu
        elif node.method == HASH_JOIN:
            value = (left_cost + cost(right)
                     + params.hash_build_factor * rows_right * cpu
                     + rows_left * cpu + rows_out * cpu)
            build_pages = _pages(rows_right, params)
            if build_pages > params.memory_budget_pages:
                value += 2 * (build_pages + _pages(rows_left, params)) * params.io_page_cost
        elif node.method == MERGE_JOIN:
            value = left_cost + cost(right) + (rows_left + rows_right) * cpu + rows_out * cpu
            left_keys = {p.left.name for p in node.predicates if p.left.qualifier == getattr(node.left, 'alias', None)}
            right_keys = {p.right.name for p in node.predicates}
            if not (isinstance(node.left, ScanNode) and node.left.access == INDEX_SCAN
                    and node.left.index_column in left_keys):
                value += _sort_cost(rows_left, params)
            if not (right.access == INDEX_SCAN and right.index_column in right_keys):
                value += _sort_cost(rows_right, params)
        else:
            raise PlanningError(f'unknown join method {node.method!r}')

        node_costs[node_key(node)] = value
        return value

    total = cost(plan.root)
    if plan.aggregate:
        if cards.groups is None:
            raise PlanningError('missing cardinality annotation for aggregate')
        input_rows = cards.join(plan.qualifiers)
        total += params.hash_build_factor * input_rows * params.cpu_tuple_cost + cards.groups * params.cpu_tuple_cost
        node_costs[('aggregate',)] = total
    return total, node_costs


def optimal_index(costs) -> int:
    """Position of the minimum cost, lowest position on ties"""
    if not costs:
        raise PlanningError('no plans to choose from')
    return min(range(len(costs)), key=lambda i: (costs[i], i))
