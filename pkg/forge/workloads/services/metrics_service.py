"""
Metrics Service for Forge
Workload diversity, fidelity to a reference workload, and the selectivity and timing studies
"""
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

from django.conf import settings

from ..exceptions import ForgeError
from ..utils.artifacts import derive_seed
from ..utils.catalog import SchemaCatalog, TableData
from ..utils.generation import (
    DEFAULT_TARGET_COLUMN, GenerationRequest, Intent, PredicateFamily, SelectivityLevel,
    SelectivityTarget, StatsStrategy,
)
from ..utils.providers import GenerationProvider, ProviderProfile
from ..utils.sql_ast import (
    AggregateCall, PredicateKind, QueryAst, QueryCategory, classify, predicate_kind,
    referenced_tables, subqueries,
)
from ..utils.sql_printer import canonical_key, skeleton
from ..utils.statistics import StatisticsMap
from ..utils.validation import resolved_columns
from .generation_service import generation_service
from .labeling_service import LabelingMode, labeling_service

logger = logging.getLogger(__name__)

STRATEGY_ROWS = (StatsStrategy.BOUNDARIES_ONLY, StatsStrategy.SAMPLE_ONLY, StatsStrategy.HISTOGRAM_ONLY)
CELL_COLUMNS = tuple(product(
    (PredicateFamily.EQUALITY_ONLY, PredicateFamily.INEQUALITY_ONLY),
    (SelectivityLevel.SELECTIVE, SelectivityLevel.NON_SELECTIVE),
))


@dataclass
class DiversityReport:
    size: int
    empty: bool
    category_counts: Dict[str, int]
    predicate_kinds: Dict[str, int]
    join_counts: Dict[int, int]
    table_coverage: float
    column_coverage: float
    dedup_rate: float

    def to_dict(self) -> dict:
        return {
            'size': self.size,
            'empty': self.empty,
            'category_counts': self.category_counts,
            'predicate_kinds': self.predicate_kinds,
            'join_counts': {str(k): v for k, v in sorted(self.join_counts.items())},
            'table_coverage': self.table_coverage,
            'column_coverage': self.column_coverage,
            'dedup_rate': self.dedup_rate,
        }


@dataclass
class FidelityReport:
    template_overlap: float
    join_edge_jaccard: float
    predicate_kind_distance: float
    unmatched: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'template_overlap': self.template_overlap,
            'join_edge_jaccard': self.join_edge_jaccard,
            'predicate_kind_distance': self.predicate_kind_distance,
            'unmatched': self.unmatched,
        }


@dataclass(frozen=True)
class SelectivityCell:
    strategy: StatsStrategy
    family: PredicateFamily
    level: SelectivityLevel
    average: Optional[float]
    count: int
    sparse: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            'strategy': self.strategy.value,
            'predicate_kind': self.family.value,
            'level': self.level.value,
            'average_selectivity': self.average,
            'labeled_queries': self.count,
            'sparse': self.sparse,
            'error': self.error,
        }


@dataclass
class SelectivityMatrix:
    cells: Dict[Tuple[StatsStrategy, PredicateFamily, SelectivityLevel], SelectivityCell]
    queries_per_cell: int
    min_bucket_size: int
    columns: Tuple[str, ...]

    def cell(self, strategy, family, level) -> SelectivityCell:
        return self.cells[(StatsStrategy(strategy), PredicateFamily(family), SelectivityLevel(level))]

    def to_dict(self) -> dict:
        return {
            'queries_per_cell': self.queries_per_cell,
            'min_bucket_size': self.min_bucket_size,
            'columns': list(self.columns),
            'cells': [
                self.cells[(strategy, family, level)].to_dict()
                for strategy in STRATEGY_ROWS for family, level in CELL_COLUMNS
            ],
        }


@dataclass(frozen=True)
class TimingRow:
    n: int
    total_ms: float
    accepted: int
    calls_made: int
    incomplete: bool

    @property
    def avg_ms_per_query(self) -> Optional[float]:
        return self.total_ms / self.accepted if self.accepted else None

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'total_ms': self.total_ms,
            'accepted': self.accepted,
            'avg_ms_per_query': self.avg_ms_per_query,
            'calls_made': self.calls_made,
            'incomplete': self.incomplete,
        }


@dataclass
class TimingReport:
    rows: List[TimingRow]

    def to_dict(self) -> dict:
        return {'rows': [row.to_dict() for row in self.rows]}


# ==================== HELPERS ====================

def join_edges(q: QueryAst) -> set:
    """Join predicates as unordered pairs of table.column names"""
    edges = set()
    for join in q.join_predicates:
        ends = []
        for ref in (join.left, join.right):
            table_ref = q.ref(ref.qualifier) if ref.qualifier else None
            ends.append(f'{table_ref.name}.{ref.name}' if table_ref else ref.name)
        edges.add(tuple(sorted(ends)))
    return edges


def kind_distribution(queries: Sequence[QueryAst]) -> Dict[str, float]:
    counts = Counter(predicate_kind(q) for q in queries)
    total = sum(counts.values())
    return {kind.value: counts.get(kind, 0) / total if total else 0.0 for kind in PredicateKind}


def total_variation(p: Dict[str, float], q: Dict[str, float]) -> float:
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q))


def _constructs(queries: Sequence[QueryAst]) -> set:
    found = set()
    for q in queries:
        found.add(f'predicate:{predicate_kind(q).value}')
        for projection in q.projections:
            if isinstance(projection.expr, AggregateCall):
                found.add(f'aggregate:{projection.expr.function}')
        if q.group_by:
            found.add('group_by')
        if subqueries(q):
            found.add('in_subquery')
        found.update(f'join:{a}={b}' for a, b in join_edges(q))
    return found


class MetricsService:
    """
    Service for workload diagnostics
    """

    def __init__(self):
        config = getattr(settings, 'FORGE_METRICS', {})
        self.min_bucket_size = int(config.get('MIN_BUCKET_SIZE', 20))
        self.study_columns = tuple(config.get('STUDY_COLUMNS', [DEFAULT_TARGET_COLUMN]))
        self.timing_sizes = list(config.get('TIMING_SIZES', [10, 20, 30, 40, 50, 100]))

    def diversity(self, corpus: Sequence[QueryAst], catalog: SchemaCatalog) -> DiversityReport:
        """
        Category, predicate-kind and join-count distributions plus schema coverage

        Args:
            corpus: Validated queries
            catalog: Schema catalog (coverage denominators)

        Returns:
            DiversityReport; an empty corpus gives an all-zero report flagged empty
        """
        categories = Counter(classify(q) for q in corpus)
        kinds = Counter(predicate_kind(q) for q in corpus)
        joins = Counter(len(q.join_predicates) for q in corpus)

        tables, columns = set(), set()
        for q in corpus:
            tables.update(referenced_tables(q))
            columns.update((c.table, c.column) for c in resolved_columns(q, catalog))

        size = len(corpus)
        distinct = len({canonical_key(q) for q in corpus})
        return DiversityReport(
            size=size,
            empty=size == 0,
            category_counts={c.value: categories.get(c, 0) for c in QueryCategory},
            predicate_kinds={k.value: kinds.get(k, 0) for k in PredicateKind},
            join_counts=dict(joins),
            table_coverage=len(tables) / len(catalog.tables) if catalog.tables else 0.0,
            column_coverage=len(columns) / catalog.total_columns if catalog.total_columns else 0.0,
            dedup_rate=(size - distinct) / size if size else 0.0,
        )

    def fidelity(self, corpus: Sequence[QueryAst], reference: Sequence[QueryAst]) -> FidelityReport:
        """
        How closely a corpus follows a reference workload

        Returns:
            FidelityReport: share of corpus queries whose skeleton occurs in the reference,
            Jaccard similarity of join edges, total variation between predicate-kind
            distributions, and reference constructs the corpus never uses
        """
        if not reference:
            raise ValueError('reference workload is empty')
        if not corpus:
            raise ValueError('corpus is empty')

        reference_skeletons = {skeleton(q) for q in reference}
        overlap = sum(skeleton(q) in reference_skeletons for q in corpus) / len(corpus)

        corpus_edges = set().union(*(join_edges(q) for q in corpus))
        reference_edges = set().union(*(join_edges(q) for q in reference))
        union = corpus_edges | reference_edges
        jaccard = len(corpus_edges & reference_edges) / len(union) if union else 1.0

        distance = total_variation(kind_distribution(corpus), kind_distribution(reference))
        unmatched = sorted(_constructs(reference) - _constructs(corpus))
        return FidelityReport(overlap, jaccard, min(1.0, distance), unmatched)

    # ==================== STUDIES ====================

    def selectivity_study(self, catalog: SchemaCatalog, data: Dict[str, TableData], stats: StatisticsMap,
                          profile: ProviderProfile, queries_per_cell: int, seed: int,
                          columns: Optional[Sequence[str]] = None,
                          provider: Optional[GenerationProvider] = None, jobs: int = 1) -> SelectivityMatrix:
        """
        Average exact selectivity per (strategy, predicate kind, level) cell

        Args:
            catalog: Schema catalog
            data: Loaded tables
            stats: Statistics of the study columns
            profile: Provider profile
            queries_per_cell: Queries requested per cell (>= 1)
            seed: Study seed; every cell derives its own
            columns: Study columns (settings default when omitted)
            provider: Provider override
            jobs: Cells run concurrently

        Returns:
            SelectivityMatrix; cells under min_bucket_size labels are marked sparse
        """
        if queries_per_cell < 1:
            raise ValueError('queries_per_cell must be >= 1')
        columns = tuple(columns or self.study_columns)
        keys = [(strategy, family, level) for strategy in STRATEGY_ROWS for family, level in CELL_COLUMNS]

        def run_cell(key):
            strategy, family, level = key
            cell_seed = derive_seed(seed, f'selectivity-{strategy.value}-{family.value}-{level.value}')
            try:
                req = GenerationRequest(
                    Intent.SELECTIVITY_TARGETED, queries_per_cell,
                    selectivity_target=SelectivityTarget(level, family),
                    stats_strategy=strategy,
                    target_columns=columns,
                )
                generated = generation_service.generate_workload(
                    req, replace(profile, seed=cell_seed), catalog, stats, provider
                )
                labels = labeling_service.label_workload(
                    generated.queries, data, LabelingMode(), catalog, generated.query_ids
                ).labels
            except (ForgeError, ValueError) as e:
                logger.warning(f'Selectivity cell {strategy.value}/{family.value}/{level.value} failed: {e}')
                return SelectivityCell(strategy, family, level, None, 0, True, str(e))

            average = float(sum((label.selectivity for label in labels), Fraction(0)) / len(labels)) if labels else None
            return SelectivityCell(strategy, family, level, average, len(labels), len(labels) < self.min_bucket_size)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                cells = list(pool.map(run_cell, keys))
        else:
            cells = [run_cell(key) for key in keys]

        matrix = SelectivityMatrix(dict(zip(keys, cells)), queries_per_cell, self.min_bucket_size, columns)
        sparse = sum(cell.sparse for cell in cells)
        logger.info(f'Selectivity study over {", ".join(columns)}: {len(cells)} cells, {sparse} sparse')
        return matrix

    def timing_study(self, profile: ProviderProfile, catalog: SchemaCatalog, sizes: Sequence[int],
                     stats: Optional[StatisticsMap] = None,
                     provider: Optional[GenerationProvider] = None) -> TimingReport:
        """Wall-clock generation time per batch size n"""
        if not sizes:
            raise ValueError('sizes must not be empty')

        rows = []
        for n in sizes:
            req = GenerationRequest(Intent.SCHEMA_AWARE, int(n))
            result = generation_service.generate_workload(req, profile, catalog, stats or {}, provider)
            rows.append(TimingRow(int(n), result.duration_ms, len(result.accepted),
                                  result.calls_made, result.incomplete))
            logger.info(f'Timing n={n}: {result.duration_ms:.1f} ms for {len(result.accepted)} queries')
        return TimingReport(rows)


# Singleton instance
metrics_service = MetricsService()
