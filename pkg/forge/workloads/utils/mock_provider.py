"""
MockGrammar provider
Offline stand-in for a chat model: seeded weighted choice over query templates.
It reads the structured request carried by the call; the prompt is built and logged but not parsed.
"""
import logging
import math
import re
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from ..exceptions import MissingStatisticsError
from .catalog import SchemaCatalog
from .generation import (
    GenerationRequest, Intent, PredicateFamily, SelectivityLevel, Slot, SlotBook, StatsStrategy,
)
from .mutation import ADD_CONJUNCT, REPLACE_CONSTANT, SHIFT_RANGE, draw_value, mutations
from .providers import MOCK_GRAMMAR, GenerationProvider, ProviderCall, ProviderResponse
from .sql_ast import (
    AggregateCall, Between, ColumnRef, Comparison, InList, InSubquery, JoinPredicate, PredicateKind,
    Projection, QueryAst, QueryCategory, RANGE_OPS, Star, TableRef, conjoin, conjuncts, disjoin,
)
from .sql_printer import print_sql
from .statistics import ColumnStatistics, StatisticsMap

logger = logging.getLogger(__name__)

# Text columns with more distinct values than this are never filtered or grouped on
LOW_CARDINALITY_LIMIT = 50
ATTEMPTS_PER_QUERY = 8

CATEGORY_WEIGHTS = {
    QueryCategory.SIMPLE_SELECTION: 0.4,
    QueryCategory.COMPLEX_JOIN: 0.35,
    QueryCategory.AGGREGATION: 0.25,
}

# Equality first, then range, mixed and nested, as in typical hand-written workloads
KIND_WEIGHTS = {
    PredicateKind.EQUALITY: 0.34,
    PredicateKind.RANGE: 0.24,
    PredicateKind.BETWEEN: 0.1,
    PredicateKind.IN_LIST: 0.08,
    PredicateKind.MIXED: 0.14,
    PredicateKind.SUBQUERY: 0.06,
    PredicateKind.NONE: 0.04,
}

SIMPLE_KINDS = (PredicateKind.EQUALITY, PredicateKind.RANGE, PredicateKind.BETWEEN, PredicateKind.IN_LIST)


def _weighted(rng: np.random.Generator, weights: Dict):
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def context_focus(context_text: str, catalog: SchemaCatalog, hints: Optional[Dict[str, List[str]]] = None):
    """(tables, columns) named in the context text or hinted by its words"""
    words = set(re.findall(r'[a-z_]+', (context_text or '').lower()))
    hints = hints if hints is not None else getattr(settings, 'FORGE_CONTEXT_HINTS', {})
    tables = {name for name in catalog.table_names if name in words}
    columns = set()
    for table in catalog.tables:
        columns.update(c.name for c in table.columns if c.name in words)
    for word in words:
        columns.update(hints.get(word, ()))
    return tables, columns


class _Grammar:
    """Query templates over one catalog, driven by one RNG"""

    def __init__(self, catalog: SchemaCatalog, stats: StatisticsMap, rng: np.random.Generator,
                 focus_tables=(), focus_columns=()):
        self.catalog = catalog
        self.stats = stats
        self.rng = rng
        self.focus_tables = set(focus_tables)
        self.focus_columns = set(focus_columns)
        self.fk_columns = {(fk.child_table, fk.child_column) for fk in catalog.foreign_keys}

    def pick(self, items: Sequence):
        return items[int(self.rng.integers(len(items)))]

    def prefer(self, items: Sequence, preferred) -> object:
        """Item from the preferred subset most of the time, when there is one"""
        favoured = [item for item in items if item in preferred]
        if favoured and self.rng.random() < 0.8:
            return self.pick(favoured)
        return self.pick(items)

    def column_stats(self, table: str, column: str) -> Optional[ColumnStatistics]:
        stats = self.stats.get((table, column))
        if stats is None or stats.is_empty:
            return None
        return stats

    def filter_columns(self, table: str, numeric_only: bool = False) -> List[str]:
        table_def = self.catalog.table(table)
        result = []
        for column in table_def.columns:
            if column.name == table_def.primary_key or (table, column.name) in self.fk_columns:
                continue
            stats = self.column_stats(table, column.name)
            if stats is None:
                continue
            if stats.is_numeric:
                if stats.span > 0:
                    result.append(column.name)
            elif not numeric_only and stats.distinct_count <= LOW_CARDINALITY_LIMIT:
                result.append(column.name)
        return result

    def group_columns(self, table: str) -> List[str]:
        table_def = self.catalog.table(table)
        return [
            column.name for column in table_def.columns
            if column.name != table_def.primary_key
            and (table, column.name) not in self.fk_columns
            and self.column_stats(table, column.name) is not None
            and self.column_stats(table, column.name).distinct_count <= LOW_CARDINALITY_LIMIT
        ]

    def edges_of(self, table: str):
        return [
            fk for fk in self.catalog.foreign_keys
            if table in (fk.child_table, fk.parent_table) and fk.child_table != fk.parent_table
        ]

    # ==================== FROM ====================

    def single_table(self, need_filters: bool) -> Optional[str]:
        tables = [t for t in self.catalog.table_names if not need_filters or self.filter_columns(t)]
        if not tables:
            return None
        focused = self.focus_tables | {
            t for t in tables if set(self.catalog.table(t).column_names) & self.focus_columns
        }
        return self.prefer(tables, focused)

    def join_tables(self, size: int) -> Tuple[List[str], List[JoinPredicate]]:
        starts = [t for t in self.catalog.table_names if self.edges_of(t)]
        if not starts:
            return [], []
        chosen = [self.prefer(starts, self.focus_tables)]
        joins = []
        while len(chosen) < size:
            options = [
                fk for fk in self.catalog.foreign_keys
                if (fk.child_table in chosen) != (fk.parent_table in chosen)
            ]
            if not options:
                break
            fk = self.pick(options)
            chosen.append(fk.parent_table if fk.child_table in chosen else fk.child_table)
            joins.append(JoinPredicate(
                ColumnRef(fk.child_column, fk.child_table),
                ColumnRef(fk.parent_column, fk.parent_table),
            ))
        return chosen, joins

    # ==================== WHERE ====================

    def column_for(self, tables: List[str], numeric_only: bool) -> Optional[Tuple[str, str]]:
        candidates = [
            (table, column) for table in tables
            for column in self.filter_columns(table, numeric_only)
        ]
        if not candidates:
            return None
        preferred = [c for c in candidates if c[1] in self.focus_columns]
        return self.prefer(candidates, preferred)

    def atom(self, kind: PredicateKind, tables: List[str], qualify: bool):
        numeric_only = kind in (PredicateKind.RANGE, PredicateKind.BETWEEN)
        picked = self.column_for(tables, numeric_only)
        if picked is None:
            return None
        table, column = picked
        stats = self.column_stats(table, column)
        ref = ColumnRef(column, table if qualify else None)

        if kind == PredicateKind.EQUALITY:
            value = draw_value(stats, self.rng)
            return None if value is None else Comparison(ref, '=', value)
        if kind == PredicateKind.RANGE:
            return Comparison(ref, self.pick(RANGE_OPS), draw_value(stats, self.rng))
        if kind == PredicateKind.BETWEEN:
            low, high = sorted((draw_value(stats, self.rng), draw_value(stats, self.rng)))
            return Between(ref, low, high)
        if kind == PredicateKind.IN_LIST:
            values = []
            for _ in range(int(self.rng.integers(2, 5))):
                value = draw_value(stats, self.rng)
                if value is not None and value not in values:
                    values.append(value)
            return InList(ref, tuple(values)) if len(values) >= 2 else None
        return None

    def subquery_atom(self, tables: List[str], qualify: bool) -> Optional[InSubquery]:
        options = [(table, fk) for table in tables for fk in self.edges_of(table)]
        if not options:
            return None
        table, fk = self.pick(options)
        if fk.parent_table == table:
            outer, inner_table, inner = fk.parent_column, fk.child_table, fk.child_column
        else:
            outer, inner_table, inner = fk.child_column, fk.parent_table, fk.parent_column
        inner_where = self.atom(self.pick(SIMPLE_KINDS[:3]), [inner_table], qualify=False)
        sub = QueryAst(
            projections=(Projection(ColumnRef(inner)),),
            from_tables=(TableRef(inner_table),),
            where=inner_where,
        )
        return InSubquery(ColumnRef(outer, table if qualify else None), sub)

    def where(self, kind: PredicateKind, tables: List[str]):
        qualify = len(tables) > 1
        if kind == PredicateKind.NONE:
            return None
        if kind == PredicateKind.SUBQUERY:
            nested = self.subquery_atom(tables, qualify)
            if nested is None:
                return None
            extra = self.atom(self.pick(SIMPLE_KINDS), tables, qualify) if self.rng.random() < 0.4 else None
            return conjoin(nested, extra)
        if kind == PredicateKind.MIXED:
            first, second = self.rng.choice(len(SIMPLE_KINDS), size=2, replace=False)
            parts = [self.atom(SIMPLE_KINDS[first], tables, qualify), self.atom(SIMPLE_KINDS[second], tables, qualify)]
            if any(part is None for part in parts):
                return None
            return conjoin(*parts)

        count = 1 if self.rng.random() < 0.6 else 2
        parts = [self.atom(kind, tables, qualify) for _ in range(count)]
        if any(part is None for part in parts):
            return None
        if count == 2 and self.rng.random() < 0.15:
            return disjoin(*parts)
        return conjoin(*parts)

    # ==================== SELECT ====================

    def plain_projections(self, tables: List[str]) -> Tuple[Projection, ...]:
        if self.rng.random() < 0.5:
            return (Projection(Star()),)
        qualify = len(tables) > 1
        columns = [(t, c) for t in tables for c in self.catalog.table(t).column_names]
        picked = self.rng.choice(len(columns), size=min(len(columns), int(self.rng.integers(1, 4))), replace=False)
        return tuple(
            Projection(ColumnRef(columns[i][1], columns[i][0] if qualify else None)) for i in sorted(picked)
        )

    def aggregate_parts(self, tables: List[str]):
        qualify = len(tables) > 1
        groupable = [(t, c) for t in tables for c in self.group_columns(t)]
        group_by = ()
        if groupable and self.rng.random() < 0.75:
            table, column = self.pick(groupable)
            group_by = (ColumnRef(column, table if qualify else None),)

        projections = [Projection(ref) for ref in group_by]
        projections.append(Projection(AggregateCall('COUNT')))
        numeric = self.column_for(tables, numeric_only=True)
        if numeric is not None and self.rng.random() < 0.5:
            table, column = numeric
            function = self.pick(('SUM', 'AVG'))
            projections.append(Projection(AggregateCall(function, ColumnRef(column, table if qualify else None))))
        return tuple(projections), group_by

    # ==================== QUERIES ====================

    def query(self, category: Optional[QueryCategory], kind: Optional[PredicateKind]) -> Optional[QueryAst]:
        category = category or _weighted(self.rng, CATEGORY_WEIGHTS)
        kind = kind or _weighted(self.rng, KIND_WEIGHTS)

        if category == QueryCategory.SIMPLE_SELECTION:
            table = self.single_table(need_filters=kind != PredicateKind.NONE)
            if table is None:
                return None
            tables, joins = [table], []
        elif category == QueryCategory.COMPLEX_JOIN:
            tables, joins = self.join_tables(2 if self.rng.random() < 0.6 else 3)
            if len(tables) < 2:
                return None
        elif self.rng.random() < 0.6:
            table = self.single_table(need_filters=kind != PredicateKind.NONE)
            if table is None:
                return None
            tables, joins = [table], []
        else:
            tables, joins = self.join_tables(2)
            if len(tables) < 2:
                return None

        where = self.where(kind, tables)
        if where is None and kind != PredicateKind.NONE:
            return None

        if category == QueryCategory.AGGREGATION:
            projections, group_by = self.aggregate_parts(tables)
        else:
            projections, group_by = self.plain_projections(tables), ()

        return QueryAst(
            projections=projections,
            from_tables=tuple(TableRef(t) for t in tables),
            join_predicates=tuple(joins),
            where=where,
            group_by=group_by,
        )


# ==================== SELECTIVITY-TARGETED ====================

class _SelectivityDrafter:
    """Constants for one target column under one statistics strategy"""

    def __init__(self, column: str, stats: ColumnStatistics, strategy: StatsStrategy, rng: np.random.Generator):
        self.column = column
        self.stats = stats
        self.strategy = StatsStrategy(strategy)
        self.rng = rng
        self.ref = ColumnRef(stats.column)

        if self.strategy == StatsStrategy.BOUNDARIES_ONLY and (stats.min is None or stats.max is None):
            raise MissingStatisticsError(column, 'boundaries')
        if self.strategy == StatsStrategy.SAMPLE_ONLY and not stats.sample:
            raise MissingStatisticsError(column, 'sample')
        if self.strategy == StatsStrategy.HISTOGRAM_ONLY and not stats.histogram:
            raise MissingStatisticsError(column, 'histogram')

    def atom(self, level: SelectivityLevel, family: PredicateFamily):
        selective = SelectivityLevel(level) == SelectivityLevel.SELECTIVE
        if PredicateFamily(family) == PredicateFamily.EQUALITY_ONLY:
            return Comparison(self.ref, '=', getattr(self, f'{self.strategy_name}_point')(selective))
        return getattr(self, f'{self.strategy_name}_range')(selective)

    @property
    def strategy_name(self) -> str:
        return {
            StatsStrategy.BOUNDARIES_ONLY: 'boundaries',
            StatsStrategy.SAMPLE_ONLY: 'sample',
            StatsStrategy.HISTOGRAM_ONLY: 'histogram',
        }[self.strategy]

    # Boundaries: only [min, max] is known

    def boundaries_point(self, selective: bool):
        lo, hi = float(self.stats.min), float(self.stats.max)
        # non-selective points are drawn uniformly from the upper quarter of [min, max]
        if not selective:
            lo = lo + 0.75 * (hi - lo)
        return self._uniform_value(lo, hi)

    def boundaries_range(self, selective: bool):
        lo, hi = float(self.stats.min), float(self.stats.max)
        span = hi - lo
        if selective:
            width = span * float(self.rng.uniform(0.0, 0.02))
            start = float(self.rng.uniform(lo, hi - width))
            if self.stats.value_type == 'integer':
                low = math.ceil(start)
                return Between(self.ref, low, max(low, math.floor(start + width)))
            return Between(self.ref, round(start, 2), round(start + width, 2))

        if self.rng.random() < 0.4:
            if self.rng.random() < 0.5:
                cut = lo + span * float(self.rng.uniform(0.0, 0.5))
                return Comparison(self.ref, '>=', self._floor(cut))
            cut = lo + span * float(self.rng.uniform(0.5, 1.0))
            return Comparison(self.ref, '<=', self._ceil(cut))
        width = span * float(self.rng.uniform(0.5, 0.9))
        start = float(self.rng.uniform(lo, hi - width))
        return Between(self.ref, self._floor(start), self._ceil(start + width))

    # Sample: only the drawn values are known

    def _sample_pool(self, rare: bool) -> np.ndarray:
        values, counts = np.unique(np.asarray(self.stats.sample), return_counts=True)
        order = np.lexsort((values, counts if rare else -counts))
        size = max(1, math.ceil(len(values) / 4))
        return values[order[:size]]

    def sample_point(self, selective: bool):
        pool = self._sample_pool(rare=selective)
        return self._python(pool[int(self.rng.integers(len(pool)))])

    def sample_range(self, selective: bool):
        ordered = np.sort(np.asarray(self.stats.sample))
        last = len(ordered) - 1
        if selective:
            q0 = float(self.rng.uniform(0.0, 0.98))
            q1 = q0 + 0.02
        else:
            q0 = float(self.rng.uniform(0.0, 0.45))
            q1 = q0 + float(self.rng.uniform(0.5, 1.0 - q0))
        low = ordered[int(math.floor(q0 * last))]
        high = ordered[int(math.ceil(min(q1, 1.0) * last))]
        return Between(self.ref, self._python(low), self._python(high))

    # Histogram: bucket bounds and frequencies are known

    def _bucket_weights(self, selective: bool) -> np.ndarray:
        frequencies = np.array([b.frequency for b in self.stats.histogram], dtype=float)
        weights = 1.0 / (frequencies + 1.0) if selective else frequencies
        if weights.sum() <= 0:
            weights = np.ones_like(weights)
        return weights / weights.sum()

    def _bucket_values(self, index: int) -> List:
        bucket = self.stats.histogram[index]
        last = index == len(self.stats.histogram) - 1
        if self.stats.value_type != 'integer':
            return []
        values = [v for v in range(math.ceil(bucket.lo), math.floor(bucket.hi) + 1)
                  if v < bucket.hi or last or bucket.lo == bucket.hi]
        return values or [int(round(bucket.lo))]

    def histogram_point(self, selective: bool):
        index = int(self.rng.choice(len(self.stats.histogram), p=self._bucket_weights(selective)))
        values = self._bucket_values(index)
        if values:
            return values[int(self.rng.integers(len(values)))]
        bucket = self.stats.histogram[index]
        return round(float(self.rng.uniform(bucket.lo, bucket.hi)), 2)

    def histogram_range(self, selective: bool):
        buckets = self.stats.histogram
        index = int(self.rng.choice(len(buckets), p=self._bucket_weights(selective)))
        first = last = index
        if not selective:
            total = sum(b.frequency for b in buckets) or 1
            target = float(self.rng.uniform(0.5, 0.9)) * total
            covered = buckets[index].frequency
            rightward = self.rng.random() < 0.5
            while covered < target and (first > 0 or last < len(buckets) - 1):
                grow_right = (rightward and last < len(buckets) - 1) or first == 0
                if grow_right:
                    last += 1
                    covered += buckets[last].frequency
                else:
                    first -= 1
                    covered += buckets[first].frequency
        return Between(self.ref, self._lower_bound(first), self._upper_bound(last))

    def _lower_bound(self, index: int):
        values = self._bucket_values(index)
        return values[0] if values else round(float(self.stats.histogram[index].lo), 2)

    def _upper_bound(self, index: int):
        values = self._bucket_values(index)
        return values[-1] if values else round(float(self.stats.histogram[index].hi), 2)

    # helpers

    def _uniform_value(self, lo: float, hi: float):
        if self.stats.value_type == 'integer':
            return int(self.rng.integers(math.ceil(lo), math.floor(hi) + 1))
        return round(float(self.rng.uniform(lo, hi)), 2)

    def _floor(self, value: float):
        return math.floor(value) if self.stats.value_type == 'integer' else round(value, 2)

    def _ceil(self, value: float):
        return math.ceil(value) if self.stats.value_type == 'integer' else round(value, 2)

    def _python(self, value):
        if self.stats.value_type == 'integer':
            return int(value)
        if self.stats.value_type == 'decimal':
            return float(value)
        return str(value)


def _target_stats(column: str, stats: StatisticsMap) -> ColumnStatistics:
    table, _, name = column.partition('.')
    column_stats = stats.get((table, name))
    if column_stats is None or column_stats.is_empty:
        raise MissingStatisticsError(column)
    return column_stats


# ==================== ENTRY POINTS ====================

def mock_generate(request: GenerationRequest, seed: int, catalog: SchemaCatalog, stats: StatisticsMap,
                  slots: Optional[Sequence[Slot]] = None,
                  context_hints: Optional[Dict[str, List[str]]] = None) -> List[str]:
    """
    SQL statements for a request, one per slot

    Args:
        request: Structured generation request
        seed: RNG seed; (request, seed) fully determines the output
        catalog: Schema catalog
        stats: Column statistics
        slots: (category, predicate kind) per statement; derived from the request when omitted
        context_hints: Context word -> column hints (settings default when omitted)

    Returns:
        SQL texts (possibly fewer than requested when templates run dry)

    Raises:
        MissingStatisticsError: a selectivity target lacks the statistics its strategy needs
    """
    rng = np.random.default_rng(seed)
    slots = list(slots) if slots is not None else SlotBook.for_request(request).slots()
    intent = Intent(request.intent)

    if intent == Intent.SELECTIVITY_TARGETED:
        drafters = {
            column: _SelectivityDrafter(column, _target_stats(column, stats), request.stats_strategy, rng)
            for column in request.target_columns
        }
        target = request.selectivity_target

        def draw(_slot):
            column = request.target_columns[int(rng.integers(len(request.target_columns)))]
            atom = drafters[column].atom(target.level, target.predicate_kind)
            return QueryAst((Projection(Star()),), (TableRef(column.partition('.')[0]),), where=atom)

        return _distinct_statements(draw, slots)

    if intent == Intent.WORKLOAD_EXPANSION:
        return _expansions(request, len(slots), rng, catalog, stats)

    focus_tables, focus_columns = (), ()
    if intent == Intent.CONTEXT_AWARE:
        focus_tables, focus_columns = context_focus(request.context_text, catalog, context_hints)
    grammar = _Grammar(catalog, stats, rng, focus_tables, focus_columns)

    return _distinct_statements(lambda slot: grammar.query(*slot), slots)


def _distinct_statements(draw, slots: Sequence[Slot]) -> List[str]:
    """One statement per slot, redrawing texts already emitted in this call"""
    statements, emitted = [], set()
    for slot in slots:
        for _ in range(ATTEMPTS_PER_QUERY):
            q = draw(slot)
            if q is None:
                continue
            sql = print_sql(q)
            if sql not in emitted:
                emitted.add(sql)
                statements.append(sql)
                break
    return statements


def _expansions(request: GenerationRequest, count: int, rng: np.random.Generator,
                catalog: SchemaCatalog, stats: StatisticsMap) -> List[str]:
    """Seed queries with varied ranges, or with conditions of a sibling seed query added"""
    seeds = list(request.seed_workload)
    produced, emitted = [], {print_sql(q) for q in seeds}

    def emit(q: QueryAst):
        sql = print_sql(q)
        if sql not in emitted:
            emitted.add(sql)
            produced.append(sql)

    for _ in range(count * ATTEMPTS_PER_QUERY):
        if len(produced) >= count:
            break
        base = seeds[int(rng.integers(len(seeds)))]
        siblings = [
            q for q in seeds
            if q is not base and [t.name for t in q.from_tables] == [t.name for t in base.from_tables]
            and q.qualifiers == base.qualifiers and q.where is not None
        ]
        if siblings and rng.random() < 0.4:
            other = siblings[int(rng.integers(len(siblings)))]
            parts = conjuncts(other.where)
            emit(base.replace(where=conjoin(base.where, parts[int(rng.integers(len(parts)))])))
            continue
        varied = mutations(base, stats, int(rng.integers(2 ** 31)), 1, catalog, kinds=(REPLACE_CONSTANT, SHIFT_RANGE))
        if not varied:
            varied = mutations(base, stats, int(rng.integers(2 ** 31)), 1, catalog, kinds=(ADD_CONJUNCT,))
        for mutation in varied:
            emit(mutation.query)
    return produced


class MockGrammarProvider(GenerationProvider):
    """Deterministic offline provider over a catalog and its statistics"""

    kind = MOCK_GRAMMAR

    def __init__(self, catalog: SchemaCatalog, stats: StatisticsMap,
                 context_hints: Optional[Dict[str, List[str]]] = None):
        self.catalog = catalog
        self.stats = stats
        self.context_hints = context_hints

    def generate(self, call: ProviderCall) -> ProviderResponse:
        start = time.perf_counter()
        try:
            statements = mock_generate(call.request, call.seed, self.catalog, self.stats,
                                       call.slots, self.context_hints)
        except MissingStatisticsError as e:
            return ProviderResponse(False, error=str(e), latency_ms=(time.perf_counter() - start) * 1000)
        text = ''.join(f'{sql};\n' for sql in statements)
        return ProviderResponse(True, text=text, latency_ms=(time.perf_counter() - start) * 1000)
