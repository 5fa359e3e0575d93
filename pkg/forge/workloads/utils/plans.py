"""
Left-deep physical plans
Plan trees, plan-space enumeration, JSON serialization and a reference interpreter
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import PlanningError
from .catalog import SchemaCatalog
from .executor import group_count, predicate_mask
from .sql_ast import Between, ColumnRef, Comparison, InList, JoinPredicate, QueryAst, conjuncts

logger = logging.getLogger(__name__)

FULL_SCAN = 'FullScan'
INDEX_SCAN = 'IndexScan'
HASH_JOIN = 'HashJoin'
NESTED_LOOP_JOIN = 'NestedLoopJoin'
MERGE_JOIN = 'MergeJoin'
JOIN_METHODS = (HASH_JOIN, NESTED_LOOP_JOIN, MERGE_JOIN)

EXHAUSTIVE_MAX_TABLES = 4
SARGABLE_OPS = ('=', '<', '<=', '>', '>=')


@dataclass(frozen=True)
class ScanNode:
    table: str
    alias: str
    access: str = FULL_SCAN
    index_column: Optional[str] = None

    @property
    def qualifiers(self) -> Tuple[str, ...]:
        return (self.alias,)

    def describe(self) -> str:
        if self.access == INDEX_SCAN:
            return f'IndexScan({self.alias}.{self.index_column})'
        return f'FullScan({self.alias})'


@dataclass(frozen=True)
class JoinNode:
    method: str
    left: Union['JoinNode', ScanNode]
    right: ScanNode
    predicates: Tuple[JoinPredicate, ...] = ()

    @property
    def qualifiers(self) -> Tuple[str, ...]:
        return self.left.qualifiers + self.right.qualifiers

    def describe(self) -> str:
        return f'{self.method}({self.left.describe()}, {self.right.describe()})'


PlanNode = Union[JoinNode, ScanNode]


@dataclass(frozen=True)
class PlanTree:
    root: PlanNode
    aggregate: bool = False
    group_by: Tuple[ColumnRef, ...] = ()

    @property
    def qualifiers(self) -> Tuple[str, ...]:
        return self.root.qualifiers

    def leaves(self) -> List[ScanNode]:
        node, leaves = self.root, []
        while isinstance(node, JoinNode):
            leaves.append(node.right)
            node = node.left
        leaves.append(node)
        return list(reversed(leaves))

    def joins(self) -> List[JoinNode]:
        """Join nodes bottom-up"""
        node, joins = self.root, []
        while isinstance(node, JoinNode):
            joins.append(node)
            node = node.left
        return list(reversed(joins))

    def describe(self) -> str:
        text = self.root.describe()
        return f'Aggregate({text})' if self.aggregate else text


# ==================== JOIN GRAPH ====================

class JoinGraph:
    """Column equivalence classes induced by the equality join predicates of a qualified query"""

    def __init__(self, q: QueryAst):
        self.qualifiers = list(q.qualifiers)
        position = {qualifier: i for i, qualifier in enumerate(self.qualifiers)}
        parent: Dict[ColumnRef, ColumnRef] = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for join in q.join_predicates:
            parent[find(join.left)] = find(join.right)

        groups: Dict[ColumnRef, List[ColumnRef]] = {}
        for column in list(parent):
            groups.setdefault(find(column), []).append(column)

        def order(ref):
            return (position.get(ref.qualifier, len(position)), ref.name)

        self.classes = sorted((sorted(members, key=order) for members in groups.values()),
                              key=lambda members: [order(m) for m in members])

    def predicates_between(self, joined: Sequence[str], qualifier: str) -> Tuple[JoinPredicate, ...]:
        """One equality per class linking the joined prefix to qualifier (implied ones included)"""
        joined = set(joined)
        predicates = []
        for members in self.classes:
            left = next((m for m in members if m.qualifier in joined), None)
            right = next((m for m in members if m.qualifier == qualifier), None)
            if left is not None and right is not None:
                predicates.append(JoinPredicate(left, right))
        return tuple(predicates)

    def join_columns(self, qualifier: str) -> List[str]:
        return [m.name for members in self.classes if len({x.qualifier for x in members}) > 1
                for m in members if m.qualifier == qualifier]

    def valid_orders(self) -> List[Tuple[str, ...]]:
        """Left-deep orders whose every join has an applicable predicate"""
        if len(self.qualifiers) == 1:
            return [tuple(self.qualifiers)]
        orders = []
        for order in itertools.permutations(self.qualifiers):
            if all(self.predicates_between(order[:i], order[i]) for i in range(1, len(order))):
                orders.append(order)
        return orders


def sargable_atoms(q: QueryAst, qualifier: str, column: Optional[str] = None) -> list:
    """Top-level single-atom filters on one table usable by an index"""
    found = []
    for conjunct in conjuncts(q.where):
        if isinstance(conjunct, Comparison) and conjunct.op not in SARGABLE_OPS:
            continue
        if not isinstance(conjunct, (Comparison, Between, InList)):
            continue
        ref = conjunct.column
        if ref.qualifier == qualifier and (column is None or ref.name == column):
            found.append(conjunct)
    return found


def access_menu(q: QueryAst, catalog: SchemaCatalog, graph: JoinGraph) -> Dict[str, List[ScanNode]]:
    """FullScan plus one IndexScan per indexed column referenced by a sargable filter or join"""
    menu = {}
    for ref in q.from_tables:
        table = catalog.table(ref.name)
        if table is None:
            raise PlanningError(f'unknown table {ref.name}')
        used = {atom.column.name for atom in sargable_atoms(q, ref.qualifier)}
        used.update(graph.join_columns(ref.qualifier))
        options = [ScanNode(table.name, ref.qualifier, FULL_SCAN)]
        options.extend(
            ScanNode(table.name, ref.qualifier, INDEX_SCAN, column)
            for column in table.indexed_columns if column in used
        )
        menu[ref.qualifier] = options
    return menu


# ==================== ENUMERATION ====================

class PlanSpace:
    """Mixed-radix indexing of (join order, join methods, access methods)"""

    def __init__(self, q: QueryAst, catalog: SchemaCatalog):
        self.query = q
        self.graph = JoinGraph(q)
        self.menu = access_menu(q, catalog, self.graph)
        self.orders = self.graph.valid_orders()
        self.joins = len(q.from_tables) - 1
        self.method_count = len(JOIN_METHODS) ** self.joins
        self.access_count = int(np.prod([len(options) for options in self.menu.values()]))

    @property
    def size(self) -> int:
        return len(self.orders) * self.method_count * self.access_count

    def plan_at(self, index: int) -> PlanTree:
        per_order = self.method_count * self.access_count
        order = self.orders[index // per_order]
        rest = index % per_order
        return self.build(order, _digits(rest // self.access_count, [len(JOIN_METHODS)] * self.joins),
                          _digits(rest % self.access_count, [len(self.menu[q]) for q in order]))

    def build(self, order, method_digits, access_digits) -> PlanTree:
        root = self.menu[order[0]][access_digits[0]]
        for i in range(1, len(order)):
            root = JoinNode(
                JOIN_METHODS[method_digits[i - 1]],
                root,
                self.menu[order[i]][access_digits[i]],
                self.graph.predicates_between(order[:i], order[i]),
            )
        return PlanTree(root, self.query.is_aggregation, tuple(self.query.group_by))


def _digits(value: int, radices: List[int]) -> List[int]:
    """Mixed-radix digits, most significant first (itertools.product order)"""
    digits = []
    for radix in reversed(radices):
        digits.append(value % radix)
        value //= radix
    return list(reversed(digits))


def enumerate_plans(q: QueryAst, catalog: SchemaCatalog, limit: int, seed: int) -> List[PlanTree]:
    """
    Candidate left-deep plans for a qualified query

    Args:
        q: Query whose column references are qualified
        catalog: Catalog with declared indexes
        limit: Maximum plans returned
        seed: Seed for truncation sampling

    Returns:
        Plans in canonical enumeration order (sampled subsets keep that order)
    """
    if limit < 1:
        raise PlanningError('plan limit must be >= 1')
    if not q.from_tables:
        raise PlanningError('query has no tables')

    space = PlanSpace(q, catalog)
    if not space.orders:
        raise PlanningError('join graph is disconnected; no plan without a cross product')

    rng = np.random.default_rng(seed)
    if len(q.from_tables) <= EXHAUSTIVE_MAX_TABLES:
        if space.size <= limit:
            indices = range(space.size)
        else:
            indices = np.sort(rng.choice(space.size, size=limit, replace=False))
            logger.debug(f'Plan space of {space.size} truncated to {limit}')
        return [space.plan_at(int(i)) for i in indices]

    # Wide queries: seeded random draws from the plan space, deduplicated
    plans, seen = [], set()
    attempts = 0
    while len(plans) < min(limit, space.size) and attempts < limit * 20:
        attempts += 1
        order = space.orders[int(rng.integers(len(space.orders)))]
        methods = [int(rng.integers(len(JOIN_METHODS))) for _ in range(space.joins)]
        access = [int(rng.integers(len(space.menu[q_]))) for q_ in order]
        key = (order, tuple(methods), tuple(access))
        if key in seen:
            continue
        seen.add(key)
        plans.append(space.build(order, methods, access))
    return plans


# ==================== SERIALIZATION ====================

def _predicate_text(predicate: JoinPredicate) -> str:
    return f'{predicate.left} = {predicate.right}'


def _parse_predicate_text(text: str) -> JoinPredicate:
    left, right = (side.strip() for side in text.split('='))
    lq, lc = left.split('.')
    rq, rc = right.split('.')
    return JoinPredicate(ColumnRef(lc, lq), ColumnRef(rc, rq))


def node_key(node) -> tuple:
    if isinstance(node, ScanNode):
        return ('scan', node.alias)
    return ('join',) + tuple(sorted(node.qualifiers))


def plan_to_dict(plan: PlanTree, node_costs: Optional[dict] = None, cards=None) -> dict:
    """JSON tree {op, table?, access?, method?, children[], card, cost}"""
    node_costs = node_costs or {}

    def card_fields(key, node):
        if cards is None:
            return {}
        if isinstance(node, ScanNode):
            scan = cards.scan(node.alias)
            fields = {'card': scan.rows, 'base_rows': scan.base_rows}
            if node.access == INDEX_SCAN:
                fields['index_rows'] = scan.index_rows.get(node.index_column, scan.base_rows)
            return fields
        return {'card': cards.join(node.qualifiers)}

    def encode(node):
        key = node_key(node)
        if isinstance(node, ScanNode):
            out = {'op': 'Scan', 'table': node.table, 'alias': node.alias, 'access': node.access,
                   'index_column': node.index_column, 'children': []}
        else:
            out = {'op': 'Join', 'method': node.method,
                   'predicates': [_predicate_text(p) for p in node.predicates],
                   'children': [encode(node.left), encode(node.right)]}
        out.update(card_fields(key, node))
        if key in node_costs:
            out['cost'] = node_costs[key]
        return out

    body = encode(plan.root)
    if not plan.aggregate:
        return body
    out = {'op': 'Aggregate', 'group_by': [str(c) for c in plan.group_by], 'children': [body]}
    if cards is not None:
        out['card'] = cards.groups
        out['input_rows'] = cards.join(plan.qualifiers)
    if ('aggregate',) in node_costs:
        out['cost'] = node_costs[('aggregate',)]
    return out


def plan_from_dict(document: dict) -> PlanTree:
    def decode(node):
        if node['op'] == 'Scan':
            return ScanNode(node['table'], node['alias'], node['access'], node.get('index_column'))
        if node['op'] == 'Join':
            left, right = (decode(child) for child in node['children'])
            return JoinNode(node['method'], left, right,
                            tuple(_parse_predicate_text(p) for p in node.get('predicates', [])))
        raise PlanningError(f'unknown plan node {node.get("op")!r}')

    if document.get('op') == 'Aggregate':
        group_by = []
        for text in document.get('group_by', []):
            qualifier, name = text.split('.')
            group_by.append(ColumnRef(name, qualifier))
        return PlanTree(decode(document['children'][0]), True, tuple(group_by))
    return PlanTree(decode(document))


# ==================== REFERENCE INTERPRETER ====================

def execute_plan(plan: PlanTree, executor) -> int:
    """
    Run a plan over desk data operator by operator

    Args:
        plan: Plan of the executor's query
        executor: QueryExecutor over the same query

    Returns:
        Result cardinality (group count for aggregate roots)
    """
    query = executor.query

    def scan(node: ScanNode) -> pd.DataFrame:
        frame = executor.raw_frame(node.alias)
        remaining = list(executor.filters[node.alias])
        if node.access == INDEX_SCAN:
            keyed = sargable_atoms(query, node.alias, node.index_column)
            for atom in keyed:
                frame = frame[predicate_mask(frame, atom)]
                remaining.remove(atom)
        for predicate in remaining:
            frame = frame[predicate_mask(frame, predicate)]
        return frame.reset_index(drop=True)

    def run(node) -> pd.DataFrame:
        if isinstance(node, ScanNode):
            return scan(node)
        left, right = run(node.left), scan(node.right)
        left_on = [str(p.left) for p in node.predicates]
        right_on = [str(p.right) for p in node.predicates]
        if node.method == NESTED_LOOP_JOIN:
            joined = left.merge(right, how='cross')
            for lcol, rcol in zip(left_on, right_on):
                joined = joined[joined[lcol].to_numpy() == joined[rcol].to_numpy()]
            return joined.reset_index(drop=True)
        if node.method == MERGE_JOIN:
            return pd.merge_ordered(
                left.sort_values(left_on), right.sort_values(right_on),
                left_on=left_on, right_on=right_on, how='inner'
            )
        return left.merge(right, left_on=left_on, right_on=right_on, how='inner')

    frame = run(plan.root)
    for join in query.join_predicates:
        frame = frame[frame[str(join.left)].to_numpy() == frame[str(join.right)].to_numpy()]
    for _, predicate in executor.cross_filters:
        frame = frame[predicate_mask(frame, predicate)]
    if not plan.aggregate:
        return len(frame)
    if not plan.group_by:
        return 1
    return group_count(frame, [str(c) for c in plan.group_by])
