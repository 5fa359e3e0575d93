"""
Query mutation
Single-edit variants of a query, used to top up under-delivered generations
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .catalog import SchemaCatalog
from .sql_ast import (
    Between, ColumnRef, Comparison, InList, InSubquery, JoinPredicate, QueryAst,
    RANGE_OPS, atoms, conjoin, conjuncts, map_atoms,
)
from .sql_printer import canonical_key
from .statistics import ColumnStatistics, StatisticsMap
from .validation import QueryScope, ScopeError, validate

logger = logging.getLogger(__name__)

REPLACE_CONSTANT = 'replace_constant'
SHIFT_RANGE = 'shift_range'
SWAP_JOIN_EDGE = 'swap_join_edge'
ADD_CONJUNCT = 'add_conjunct'
REMOVE_CONJUNCT = 'remove_conjunct'
EDIT_KINDS = (REPLACE_CONSTANT, SHIFT_RANGE, SWAP_JOIN_EDGE, ADD_CONJUNCT, REMOVE_CONJUNCT)

ATTEMPTS_PER_VARIANT = 20


@dataclass(frozen=True)
class Mutation:
    query: QueryAst
    edit: str


def draw_value(stats: ColumnStatistics, rng: np.random.Generator):
    """A value of the column: from the sample, else uniform within its boundaries"""
    if stats.sample:
        return stats.sample[int(rng.integers(len(stats.sample)))]
    if stats.is_numeric and stats.min is not None:
        if stats.value_type == 'integer':
            return int(rng.integers(int(stats.min), int(stats.max) + 1))
        return round(float(rng.uniform(float(stats.min), float(stats.max))), 2)
    return None


def shift_value(value, stats: ColumnStatistics, direction: int, rng: np.random.Generator):
    """value moved by 5-25% of the column span"""
    delta = stats.span * float(rng.uniform(0.05, 0.25))
    if stats.value_type == 'integer':
        return int(value) + direction * max(1, int(round(delta)))
    return round(float(value) + direction * max(delta, 0.01), 2)


class _Mutator:

    def __init__(self, q: QueryAst, stats: StatisticsMap, catalog: SchemaCatalog, rng: np.random.Generator):
        self.query = q
        self.stats = stats
        self.catalog = catalog
        self.rng = rng
        self.scope = QueryScope(q, catalog)
        self.atoms = list(atoms(q.where))

    def column_stats(self, ref: ColumnRef) -> Optional[ColumnStatistics]:
        try:
            resolved = self.scope.resolve(ref)
        except ScopeError:
            return None
        stats = self.stats.get((resolved.table, resolved.column))
        if stats is None or stats.is_empty:
            return None
        return stats

    def constant_atoms(self) -> List[int]:
        return [
            i for i, atom in enumerate(self.atoms)
            if not isinstance(atom, InSubquery) and self.column_stats(atom.column) is not None
        ]

    def range_atoms(self) -> List[int]:
        result = []
        for i, atom in enumerate(self.atoms):
            is_range = isinstance(atom, Between) or (isinstance(atom, Comparison) and atom.op in RANGE_OPS)
            stats = self.column_stats(atom.column) if is_range else None
            if stats is not None and stats.is_numeric and stats.span > 0:
                result.append(i)
        return result

    def swappable_joins(self) -> List[int]:
        return [i for i, join in enumerate(self.query.join_predicates) if self.alternative_edges(join)]

    def alternative_edges(self, join: JoinPredicate):
        try:
            left = self.scope.resolve(join.left)
            right = self.scope.resolve(join.right)
        except ScopeError:
            return []
        return [
            fk for fk in self.catalog.edges_between(left.table, right.table)
            if not fk.links(left.table, left.column, right.table, right.column)
        ]

    def applicable(self) -> List[str]:
        kinds = []
        if self.constant_atoms():
            kinds.append(REPLACE_CONSTANT)
        if self.range_atoms():
            kinds.append(SHIFT_RANGE)
        if self.swappable_joins():
            kinds.append(SWAP_JOIN_EDGE)
        kinds.append(ADD_CONJUNCT)
        if self.query.where is not None:
            kinds.append(REMOVE_CONJUNCT)
        return kinds

    def pick(self, items):
        return items[int(self.rng.integers(len(items)))]

    def replace_atom(self, index: int, new_atom) -> QueryAst:
        position = iter(range(len(self.atoms)))

        def swap(atom):
            return new_atom if next(position) == index else atom

        return self.query.replace(where=map_atoms(self.query.where, swap))

    # ==================== EDITS ====================

    def apply(self, kind: str) -> Optional[QueryAst]:
        return getattr(self, kind)()

    def replace_constant(self) -> Optional[QueryAst]:
        index = self.pick(self.constant_atoms())
        atom = self.atoms[index]
        value = draw_value(self.column_stats(atom.column), self.rng)
        if value is None:
            return None
        if isinstance(atom, Comparison):
            if value == atom.value:
                return None
            return self.replace_atom(index, Comparison(atom.column, atom.op, value))
        if isinstance(atom, Between):
            low, high = (value, atom.high) if self.rng.random() < 0.5 else (atom.low, value)
            if low > high or (low, high) == (atom.low, atom.high):
                return None
            return self.replace_atom(index, Between(atom.column, low, high))
        if value in atom.values:
            return None
        values = list(atom.values)
        values[int(self.rng.integers(len(values)))] = value
        return self.replace_atom(index, InList(atom.column, tuple(values)))

    def shift_range(self) -> Optional[QueryAst]:
        index = self.pick(self.range_atoms())
        atom = self.atoms[index]
        stats = self.column_stats(atom.column)
        direction = 1 if self.rng.random() < 0.5 else -1
        if isinstance(atom, Comparison):
            return self.replace_atom(index, Comparison(atom.column, atom.op, shift_value(atom.value, stats, direction, self.rng)))
        if self.rng.random() < 0.5:
            low, high = shift_value(atom.low, stats, direction, self.rng), atom.high
        else:
            low, high = atom.low, shift_value(atom.high, stats, direction, self.rng)
        if low > high:
            return None
        return self.replace_atom(index, Between(atom.column, low, high))

    def swap_join_edge(self) -> Optional[QueryAst]:
        index = self.pick(self.swappable_joins())
        join = self.query.join_predicates[index]
        left = self.scope.resolve(join.left)
        fk = self.pick(self.alternative_edges(join))
        if fk.child_table == left.table:
            left_col, right_col = fk.child_column, fk.parent_column
        else:
            left_col, right_col = fk.parent_column, fk.child_column
        swapped = JoinPredicate(
            ColumnRef(left_col, join.left.qualifier),
            ColumnRef(right_col, join.right.qualifier),
        )
        joins = list(self.query.join_predicates)
        joins[index] = swapped
        return self.query.replace(join_predicates=tuple(joins))

    def add_conjunct(self) -> Optional[QueryAst]:
        ref = self.pick(self.query.from_tables)
        table = self.catalog.table(ref.name)
        if table is None:
            return None
        candidates = [
            column for column in table.columns
            if column.name != table.primary_key
            and (self.stats.get((table.name, column.name)) is not None)
            and not self.stats[(table.name, column.name)].is_empty
        ]
        if not candidates:
            return None
        column = self.pick(candidates)
        stats = self.stats[(table.name, column.name)]
        qualifier = ref.qualifier if len(self.query.from_tables) > 1 else None
        column_ref = ColumnRef(column.name, qualifier)
        value = draw_value(stats, self.rng)
        if value is None:
            return None
        if stats.is_numeric and stats.span > 0 and self.rng.random() < 0.5:
            op = self.pick(list(RANGE_OPS))
            atom = Comparison(column_ref, op, value)
        else:
            atom = Comparison(column_ref, '=', value)
        return self.query.replace(where=conjoin(self.query.where, atom))

    def remove_conjunct(self) -> Optional[QueryAst]:
        parts = conjuncts(self.query.where)
        drop = int(self.rng.integers(len(parts)))
        remaining = [part for i, part in enumerate(parts) if i != drop]
        return self.query.replace(where=conjoin(*remaining))


def mutations(q: QueryAst, stats: StatisticsMap, seed: int, n: int, catalog: SchemaCatalog,
              kinds: Sequence[str] = EDIT_KINDS) -> List[Mutation]:
    """
    Up to n distinct valid single-edit variants of q

    Args:
        q: Valid query
        stats: Column statistics (constants are drawn from them)
        seed: RNG seed; the same arguments give the same variants
        n: Variants wanted
        catalog: Schema catalog (FK edges, column types)
        kinds: Edit kinds allowed

    Returns:
        Mutations in discovery order; fewer than n when the edit space runs dry
    """
    rng = np.random.default_rng(seed)
    mutator = _Mutator(q, stats, catalog, rng)
    seen = {canonical_key(q)}
    found: List[Mutation] = []

    for _ in range(max(n, 1) * ATTEMPTS_PER_VARIANT):
        if len(found) >= n:
            break
        allowed = [kind for kind in mutator.applicable() if kind in kinds]
        if not allowed:
            break
        kind = mutator.pick(allowed)
        variant = mutator.apply(kind)
        if variant is None or not validate(variant, catalog).is_valid:
            continue
        key = canonical_key(variant)
        if key in seen:
            continue
        seen.add(key)
        found.append(Mutation(variant, kind))

    if len(found) < n:
        logger.warning(f'Only {len(found)} of {n} mutations found for query over {", ".join(q.qualifiers)}')
    return found


def mutate_query(q: QueryAst, stats: StatisticsMap, seed: int, n: int, catalog: SchemaCatalog) -> List[QueryAst]:
    return [mutation.query for mutation in mutations(q, stats, seed, n, catalog)]
