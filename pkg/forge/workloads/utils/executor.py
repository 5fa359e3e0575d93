"""
In-memory query executor
Exact result counts over pandas frames: filters pushed to base tables,
hash joins through DataFrame.merge, group counting for aggregations
"""
import logging
import zlib
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..exceptions import LabelingError
from .catalog import ColumnDef, SchemaCatalog, TableData, TableDef
from .sql_ast import (
    And, Between, ColumnRef, Comparison, InList, InSubquery, JoinPredicate, Or, QueryAst,
    atoms, conjuncts, map_atoms,
)
from .validation import ScopeError, qualify_query

logger = logging.getLogger(__name__)

DEFAULT_MAX_UNIVERSE = 2 ** 63 - 1

_OPS = {
    '=': lambda s, v: s == v,
    '<>': lambda s, v: s != v,
    '<': lambda s, v: s < v,
    '<=': lambda s, v: s <= v,
    '>': lambda s, v: s > v,
    '>=': lambda s, v: s >= v,
}


def catalog_from_data(data: Dict[str, TableData]) -> SchemaCatalog:
    """Minimal catalog inferred from loaded frames (dtype -> value type)"""
    tables = []
    for name, table_data in data.items():
        columns = []
        for column, dtype in table_data.frame.dtypes.items():
            if pd.api.types.is_integer_dtype(dtype):
                value_type = 'integer'
            elif pd.api.types.is_float_dtype(dtype):
                value_type = 'decimal'
            else:
                value_type = 'text'
            columns.append(ColumnDef(str(column), value_type))
        tables.append(TableDef(name, tuple(columns), columns[0].name if columns else ''))
    return SchemaCatalog(tuple(tables))


def predicate_mask(frame: pd.DataFrame, predicate) -> np.ndarray:
    """Boolean row mask of a qualified predicate over a frame with 'qualifier.column' columns"""
    if isinstance(predicate, And):
        mask = np.ones(len(frame), dtype=bool)
        for child in predicate.children:
            mask &= predicate_mask(frame, child)
        return mask
    if isinstance(predicate, Or):
        mask = np.zeros(len(frame), dtype=bool)
        for child in predicate.children:
            mask |= predicate_mask(frame, child)
        return mask

    series = frame[str(predicate.column)]
    if isinstance(predicate, Comparison):
        return np.asarray(_OPS[predicate.op](series, predicate.value), dtype=bool)
    if isinstance(predicate, Between):
        return np.asarray((series >= predicate.low) & (series <= predicate.high), dtype=bool)
    if isinstance(predicate, InList):
        return np.asarray(series.isin(list(predicate.values)), dtype=bool)
    raise LabelingError(f'unresolved predicate {predicate!r}')


def predicate_qualifiers(predicate) -> set:
    return {atom.column.qualifier for atom in atoms(predicate)}


class QueryExecutor:
    """
    Executes one query over loaded tables

    Args:
        q: Parsed (optionally unqualified) query
        data: Loaded tables by name
        catalog: Catalog used for name resolution; inferred from data if omitted
        sample: Optional (fraction, seed) for Bernoulli sampling of each base table
        max_universe: Ceiling on the cartesian universe size
    """

    def __init__(self, q: QueryAst, data: Dict[str, TableData], catalog: Optional[SchemaCatalog] = None,
                 sample: Optional[Tuple[float, int]] = None, max_universe: int = DEFAULT_MAX_UNIVERSE):
        for ref in q.from_tables:
            if ref.name not in data:
                raise LabelingError(f'table {ref.name} is not loaded')

        self.data = data
        self.catalog = catalog or catalog_from_data(data)
        self.sample = sample
        self.max_universe = max_universe
        try:
            qualified = qualify_query(q, self.catalog)
        except ScopeError as e:
            raise LabelingError(str(e))

        self.source = qualified
        self.query = qualified.replace(where=self._resolve_subqueries(qualified.where))
        self.tables = {ref.qualifier: ref.name for ref in self.query.from_tables}
        self.qualifiers = [ref.qualifier for ref in self.query.from_tables]
        self.joins: List[JoinPredicate] = list(self.query.join_predicates)

        self.filters: Dict[str, List] = {qualifier: [] for qualifier in self.qualifiers}
        self.cross_filters: List[Tuple[frozenset, object]] = []
        for conjunct in conjuncts(self.query.where):
            owners = predicate_qualifiers(conjunct)
            if len(owners) == 1:
                self.filters[next(iter(owners))].append(conjunct)
            else:
                self.cross_filters.append((frozenset(owners), conjunct))

        self._needed = self._needed_columns()
        self._base_cache: Dict[str, pd.DataFrame] = {}

    # ---------- setup ----------

    def _resolve_subqueries(self, predicate):
        """IN-subqueries become value lists, evaluated exactly over full data"""
        def resolve(atom):
            if not isinstance(atom, InSubquery):
                return atom
            inner = QueryExecutor(atom.query, self.data, self.catalog, max_universe=self.max_universe)
            values = inner.projected_values()
            return InList(atom.column, tuple(values))
        return map_atoms(predicate, resolve)

    def _needed_columns(self) -> Dict[str, List[str]]:
        needed = {qualifier: [] for qualifier in self.qualifiers}

        def add(ref):
            if ref is not None and ref.name not in needed[ref.qualifier]:
                needed[ref.qualifier].append(ref.name)

        for join in self.joins:
            add(join.left)
            add(join.right)
        for atom in atoms(self.query.where):
            add(atom.column)
        for ref in self.query.group_by:
            add(ref)
        for projection in self.query.projections:
            if isinstance(projection.expr, ColumnRef):
                add(projection.expr)
        for qualifier, columns in needed.items():
            if not columns:
                columns.append(self.data[self.tables[qualifier]].frame.columns[0])
        return needed

    # ---------- sizes ----------

    def universe_size(self) -> int:
        size = 1
        for qualifier in self.qualifiers:
            size *= self.data[self.tables[qualifier]].row_count
            if size > self.max_universe:
                raise LabelingError(f'universe size overflow (> {self.max_universe})')
        return size

    # ---------- frames ----------

    def raw_frame(self, qualifier: str) -> pd.DataFrame:
        """Base rows of one qualifier (sampled if configured), columns named 'qualifier.column'"""
        frame = self.data[self.tables[qualifier]].frame
        if self.sample is not None:
            fraction, seed = self.sample
            rng = np.random.default_rng(_qualifier_seed(seed, qualifier))
            frame = frame[rng.random(len(frame)) < fraction]
        return pd.DataFrame(
            {f'{qualifier}.{column}': frame[column].to_numpy() for column in self._needed[qualifier]}
        )

    def base_frame(self, qualifier: str) -> pd.DataFrame:
        """raw_frame with the single-table filters applied"""
        if qualifier not in self._base_cache:
            frame = self.raw_frame(qualifier)
            predicate = And(tuple(self.filters[qualifier])) if self.filters[qualifier] else None
            if predicate is not None:
                frame = frame[predicate_mask(frame, predicate)].reset_index(drop=True)
            self._base_cache[qualifier] = frame
        return self._base_cache[qualifier]

    def join_order(self, qualifiers: Sequence[str]) -> List[str]:
        """FROM order, each next qualifier connected to the prefix when possible"""
        remaining = list(qualifiers)
        order = [remaining.pop(0)]
        while remaining:
            joined = set(order)
            pick = next(
                (q for q in remaining if any(self._links(j, joined, q) for j in self.joins)),
                remaining[0]
            )
            remaining.remove(pick)
            order.append(pick)
        return order

    @staticmethod
    def _links(join: JoinPredicate, joined: set, qualifier: str) -> bool:
        sides = (join.left.qualifier, join.right.qualifier)
        return (sides[0] in joined and sides[1] == qualifier) or (sides[1] in joined and sides[0] == qualifier)

    def join_frame(self, qualifiers: Optional[Iterable[str]] = None) -> pd.DataFrame:
        """Rows of the join over the given qualifiers with every applicable predicate applied"""
        subset = [q for q in self.qualifiers if qualifiers is None or q in set(qualifiers)]
        order = self.join_order(subset)
        result = self.base_frame(order[0])
        joined = {order[0]}
        applied = set()

        for qualifier in order[1:]:
            keys = [j for j in self.joins if self._links(j, joined, qualifier)]
            right = self.base_frame(qualifier)
            if keys:
                left_on, right_on = [], []
                for join in keys:
                    inner, outer = (join.left, join.right) if join.right.qualifier == qualifier else (join.right, join.left)
                    left_on.append(str(inner))
                    right_on.append(str(outer))
                    applied.add(join)
                result = result.merge(right, left_on=left_on, right_on=right_on, how='inner')
            else:
                result = result.merge(right, how='cross')
            joined.add(qualifier)

            for join in self.joins:
                if join in applied:
                    continue
                if join.left.qualifier in joined and join.right.qualifier in joined:
                    result = result[result[str(join.left)].to_numpy() == result[str(join.right)].to_numpy()]
                    applied.add(join)

        for owners, predicate in self.cross_filters:
            if owners <= joined:
                result = result[predicate_mask(result, predicate)]
        return result.reset_index(drop=True)

    # ---------- results ----------

    def matching_rows(self, qualifiers: Optional[Iterable[str]] = None) -> int:
        """Rows satisfying joins and filters, before any grouping"""
        subset = list(qualifiers) if qualifiers is not None else self.qualifiers
        if len(subset) == 1:
            return len(self.base_frame(subset[0]))
        return len(self.join_frame(subset))

    def result_count(self) -> int:
        """|R(Q, D)|: rows, or output groups for aggregation queries"""
        if not self.query.is_aggregation:
            return self.matching_rows()
        if not self.query.group_by:
            return 1
        frame = self.join_frame() if len(self.qualifiers) > 1 else self.base_frame(self.qualifiers[0])
        return group_count(frame, [str(c) for c in self.query.group_by])

    def projected_values(self) -> List:
        """Distinct values of a single-column projection (IN-subquery body)"""
        column = str(self.query.projections[0].expr)
        frame = self.join_frame()
        values = pd.unique(frame[column].to_numpy())
        return sorted(v.item() if hasattr(v, 'item') else v for v in values)


def group_count(frame: pd.DataFrame, columns: List[str]) -> int:
    if frame.empty:
        return 0
    return int(frame.groupby(columns, sort=False).ngroups)


def _qualifier_seed(seed: int, qualifier: str) -> int:
    return (int(seed) * 1_000_003 + zlib.crc32(qualifier.encode('utf-8'))) % (2 ** 32)


def execute_count(q: QueryAst, data: Dict[str, TableData], catalog: Optional[SchemaCatalog] = None) -> int:
    """
    Exact result cardinality of q over the loaded data

    Args:
        q: Query
        data: Loaded tables by name
        catalog: Optional catalog for name resolution

    Returns:
        Row count; group count for aggregation queries
    """
    executor = QueryExecutor(q, data, catalog)
    executor.universe_size()
    return executor.result_count()

