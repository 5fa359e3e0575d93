"""
Labeling Service for Forge
Exact and sampled cardinality/selectivity labels from query execution
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from django.conf import settings

from ..exceptions import LabelingError
from ..signals import query_labeled
from ..utils.artifacts import read_json, write_csv, write_json
from ..utils.catalog import SchemaCatalog, TableData
from ..utils.executor import QueryExecutor
from ..utils.sql_ast import QueryAst, QueryCategory, classify, query_from_dict, query_to_dict
from ..utils.sql_printer import print_sql

logger = logging.getLogger(__name__)

EXACT = 'Exact'

LABEL_COLUMNS = [
    'query_id', 'sql', 'category', 'cardinality', 'universe_size', 'selectivity', 'label_mode', 'label_ms',
]
FAILURE_COLUMNS = ['query_id', 'sql', 'reason']


def sampled_mode(fraction: float) -> str:
    return f'Sampled({fraction:g})'


@dataclass(frozen=True)
class LabeledQuery:
    query: QueryAst
    cardinality: int
    universe_size: int
    selectivity: Fraction
    label_mode: str = EXACT
    query_id: str = ''
    category: QueryCategory = QueryCategory.SIMPLE_SELECTION
    label_ms: float = 0.0
    low_confidence: bool = False

    @property
    def sql(self) -> str:
        return print_sql(self.query)

    def to_row(self) -> dict:
        return {
            'query_id': self.query_id,
            'sql': self.sql,
            'category': self.category.value,
            'cardinality': self.cardinality,
            'universe_size': self.universe_size,
            'selectivity': repr(float(self.selectivity)),
            'label_mode': self.label_mode,
            'label_ms': f'{self.label_ms:.3f}',
        }


@dataclass(frozen=True)
class LabelFailure:
    query_id: str
    sql: str
    reason: str


@dataclass(frozen=True)
class LabelingMode:
    kind: str = 'exact'          # exact | sampled
    fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ('exact', 'sampled'):
            raise ValueError(f'unknown labeling mode {self.kind!r}')
        if not 0 < self.fraction <= 1:
            raise ValueError('sample fraction must be in (0, 1]')


@dataclass
class LabelingResult:
    labels: List[LabeledQuery] = field(default_factory=list)
    failures: List[LabelFailure] = field(default_factory=list)


def _selectivity(cardinality: int, universe: int) -> Fraction:
    if universe <= 0:
        return Fraction(0)
    return Fraction(cardinality, universe)


class LabelingService:
    """
    Service for labeling queries with their true cardinality
    Exact labels execute the query; sampled labels scale counts over Bernoulli samples
    """

    def __init__(self):
        config = getattr(settings, 'FORGE_LABELING', {})
        self.low_confidence_min_matches = int(config.get('LOW_CONFIDENCE_MIN_MATCHES', 10))
        self.max_universe = int(config.get('MAX_UNIVERSE_SIZE', 2 ** 63 - 1))

    def label_exact(self, q: QueryAst, data: Dict[str, TableData],
                    catalog: Optional[SchemaCatalog] = None, query_id: str = '') -> LabeledQuery:
        """
        Label a query by executing it over the full data

        Args:
            q: Query to label
            data: Loaded tables by name
            catalog: Optional catalog for name resolution
            query_id: Id carried into the label

        Returns:
            LabeledQuery in Exact mode
        """
        started = time.perf_counter()
        executor = QueryExecutor(q, data, catalog, max_universe=self.max_universe)
        universe = executor.universe_size()
        cardinality = executor.result_count()
        return LabeledQuery(
            query=q,
            cardinality=cardinality,
            universe_size=universe,
            selectivity=_selectivity(cardinality, universe),
            label_mode=EXACT,
            query_id=query_id,
            category=classify(q),
            label_ms=(time.perf_counter() - started) * 1000,
        )

    def label_sampled(self, q: QueryAst, data: Dict[str, TableData], fraction: float, seed: int,
                      catalog: Optional[SchemaCatalog] = None, query_id: str = '') -> LabeledQuery:
        """
        Label a query from seeded Bernoulli samples of its base tables

        The matching count is scaled by 1/fraction per joined table. Aggregation
        group counts are not scalable; they are reported unscaled and flagged, as is
        any estimate resting on fewer than LOW_CONFIDENCE_MIN_MATCHES sampled rows.
        """
        if not 0 < fraction <= 1:
            raise ValueError('sample fraction must be in (0, 1]')

        started = time.perf_counter()
        executor = QueryExecutor(q, data, catalog, sample=(fraction, seed), max_universe=self.max_universe)
        universe = executor.universe_size()

        matched = executor.matching_rows()
        if q.is_aggregation:
            cardinality = executor.result_count()
            low_confidence = fraction < 1 and (bool(q.group_by) or matched < self.low_confidence_min_matches)
        else:
            scale = Fraction(fraction) ** len(q.from_tables)
            cardinality = min(round(Fraction(matched) / scale), universe)
            low_confidence = fraction < 1 and matched < self.low_confidence_min_matches

        if low_confidence:
            logger.debug(f'Sampled label for {query_id or "query"} is low-confidence (fraction={fraction})')

        return LabeledQuery(
            query=q,
            cardinality=cardinality,
            universe_size=universe,
            selectivity=_selectivity(cardinality, universe),
            label_mode=sampled_mode(fraction),
            query_id=query_id,
            category=classify(q),
            label_ms=(time.perf_counter() - started) * 1000,
            low_confidence=low_confidence,
        )

    def label_workload(self, queries: Sequence[QueryAst], data: Dict[str, TableData],
                       mode: LabelingMode = LabelingMode(), catalog: Optional[SchemaCatalog] = None,
                       query_ids: Optional[Sequence[str]] = None, jobs: int = 1) -> LabelingResult:
        """
        Label a batch; per-query failures are collected, never raised

        Args:
            queries: Queries to label
            data: Loaded tables by name
            mode: Exact or sampled labeling
            catalog: Optional catalog for name resolution
            query_ids: Ids parallel to queries (default q00000...)
            jobs: Queries labeled concurrently

        Returns:
            LabelingResult with labels and failures, both in input order
        """
        ids = list(query_ids) if query_ids is not None else [f'q{i:05d}' for i in range(len(queries))]

        def label_one(index):
            q, query_id = queries[index], ids[index]
            try:
                if mode.kind == 'sampled':
                    labeled = self.label_sampled(q, data, mode.fraction, mode.seed, catalog, query_id)
                else:
                    labeled = self.label_exact(q, data, catalog, query_id)
                check_label(labeled)
                return labeled
            except Exception as e:
                return LabelFailure(query_id, print_sql(q), str(e) or type(e).__name__)

        if jobs > 1 and len(queries) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(label_one, range(len(queries))))
        else:
            outcomes = [label_one(i) for i in range(len(queries))]

        result = LabelingResult()
        for outcome in outcomes:
            if isinstance(outcome, LabelFailure):
                logger.warning(f'Labeling failed for {outcome.query_id}: {outcome.reason}')
                result.failures.append(outcome)
            else:
                query_labeled.send(sender=self.__class__, labeled=outcome)
                result.labels.append(outcome)

        logger.info(f'Labeled {len(result.labels)} queries, {len(result.failures)} failures')
        return result

    def export_labels(self, result: LabelingResult, paths: dict, seed: int) -> int:
        """labels.csv, labels.json (with ASTs and exact fractions) and label_failures.csv"""
        write_csv(paths['labels_csv'], [label.to_row() for label in result.labels], LABEL_COLUMNS, seed)
        write_json(paths['labels_json'], {
            'labels': [
                dict(
                    label.to_row(),
                    selectivity_exact=f'{label.selectivity.numerator}/{label.selectivity.denominator}',
                    low_confidence=label.low_confidence,
                    ast=query_to_dict(label.query),
                )
                for label in result.labels
            ],
        }, seed)
        write_csv(
            paths['label_failures'],
            [{'query_id': f.query_id, 'sql': f.sql, 'reason': f.reason} for f in result.failures],
            FAILURE_COLUMNS, seed,
        )
        logger.info(f'Wrote {len(result.labels)} labels and {len(result.failures)} label failures')
        return len(result.labels)

    def read_labels(self, path) -> List[LabeledQuery]:
        """Labeled queries back from a labels.json artifact"""
        labels = []
        for item in read_json(path, 'label')['labels']:
            q = query_from_dict(item['ast'])
            labels.append(LabeledQuery(
                query=q,
                cardinality=int(item['cardinality']),
                universe_size=int(item['universe_size']),
                selectivity=Fraction(item['selectivity_exact']),
                label_mode=item['label_mode'],
                query_id=item['query_id'],
                category=QueryCategory(item['category']),
                label_ms=float(item['label_ms']),
                low_confidence=bool(item.get('low_confidence', False)),
            ))
        return labels


def check_label(labeled: LabeledQuery):
    """Raise LabelingError when a label breaks the selectivity identities"""
    if not 0 <= labeled.selectivity <= 1:
        raise LabelingError(f'{labeled.query_id}: selectivity {labeled.selectivity} outside [0, 1]')
    if labeled.universe_size > 0 and labeled.selectivity * labeled.universe_size != labeled.cardinality:
        raise LabelingError(f'{labeled.query_id}: selectivity does not reproduce the cardinality')


# Singleton instance
labeling_service = LabelingService()
