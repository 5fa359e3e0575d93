"""
Column statistics: boundaries, seeded sample, equi-width histogram
The three artifacts a generation prompt may be given
"""
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .catalog import NUMERIC_TYPES, SchemaCatalog, TableData

logger = logging.getLogger(__name__)

StatisticsMap = Dict[Tuple[str, str], 'ColumnStatistics']


@dataclass(frozen=True)
class HistogramBucket:
    lo: float
    hi: float
    frequency: int

    def contains(self, value, last: bool = False) -> bool:
        return self.lo <= value <= self.hi if last else self.lo <= value < self.hi


@dataclass(frozen=True)
class ColumnStatistics:
    table: str
    column: str
    value_type: str
    row_count: int
    distinct_count: int
    sample: Tuple = ()
    min: Optional[object] = None
    max: Optional[object] = None
    histogram: Tuple[HistogramBucket, ...] = field(default=())

    @property
    def qualified_name(self) -> str:
        return f'{self.table}.{self.column}'

    @property
    def is_empty(self) -> bool:
        return self.row_count == 0

    @property
    def is_numeric(self) -> bool:
        return self.value_type in NUMERIC_TYPES

    @property
    def span(self) -> float:
        if self.min is None or self.max is None:
            return 0.0
        return float(self.max) - float(self.min)

    def bucket_index(self, value) -> Optional[int]:
        """Index of the bucket holding value (lo <= v < hi, last bucket inclusive)"""
        if not self.histogram:
            return None
        last = len(self.histogram) - 1
        for index, bucket in enumerate(self.histogram):
            if bucket.contains(value, last=index == last):
                return index
        return None

    def to_dict(self) -> dict:
        return {
            'table': self.table,
            'column': self.column,
            'value_type': self.value_type,
            'row_count': self.row_count,
            'distinct_count': self.distinct_count,
            'min': self.min,
            'max': self.max,
            'sample': list(self.sample),
            'histogram': [[b.lo, b.hi, b.frequency] for b in self.histogram],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ColumnStatistics':
        return cls(
            table=data['table'],
            column=data['column'],
            value_type=data['value_type'],
            row_count=int(data['row_count']),
            distinct_count=int(data['distinct_count']),
            sample=tuple(data.get('sample') or ()),
            min=data.get('min'),
            max=data.get('max'),
            histogram=tuple(
                HistogramBucket(lo, hi, int(freq)) for lo, hi, freq in data.get('histogram') or ()
            ),
        )


def column_seed(seed: int, table: str, column: str) -> int:
    """Per-column sub-seed so sampling does not depend on scheduling order"""
    return (int(seed) * 1_000_003 + zlib.crc32(f'{table}.{column}'.encode('utf-8'))) % (2 ** 32)


def _python_value(value, value_type):
    if value_type == 'integer':
        return int(value)
    if value_type == 'decimal':
        return float(value)
    return str(value)


def column_statistics(data: TableData, column: str, value_type: str,
                      sample_size: int, bucket_count: int, seed: int) -> ColumnStatistics:
    """Statistics of one column"""
    values = data.values(column)
    row_count = len(values)
    if row_count == 0:
        return ColumnStatistics(data.table, column, value_type, 0, 0)

    distinct = np.unique(values)
    rng = np.random.default_rng(column_seed(seed, data.table, column))
    picked = rng.choice(row_count, size=min(sample_size, row_count), replace=False)
    sample = tuple(_python_value(v, value_type) for v in values[np.sort(picked)])

    if value_type not in NUMERIC_TYPES:
        return ColumnStatistics(
            data.table, column, value_type, row_count, len(distinct), sample
        )

    lo = _python_value(distinct[0], value_type)
    hi = _python_value(distinct[-1], value_type)
    if lo == hi:
        # Zero-width buckets, every row in the last (inclusive) one
        histogram = tuple(
            HistogramBucket(float(lo), float(hi), row_count if i == bucket_count - 1 else 0)
            for i in range(bucket_count)
        )
    else:
        counts, edges = np.histogram(values.astype(float), bins=bucket_count, range=(float(lo), float(hi)))
        histogram = tuple(
            HistogramBucket(float(edges[i]), float(edges[i + 1]), int(counts[i]))
            for i in range(bucket_count)
        )

    return ColumnStatistics(
        data.table, column, value_type, row_count, len(distinct), sample, lo, hi, histogram
    )


def compute_statistics(data: TableData, catalog: SchemaCatalog, sample_size: int,
                       bucket_count: int, seed: int, jobs: int = 1) -> List[ColumnStatistics]:
    """
    Statistics for every column of one table

    Args:
        data: Loaded table
        catalog: Catalog giving the column types
        sample_size: Maximum sample values kept per column
        bucket_count: Equi-width buckets per numeric column
        seed: Sampling seed
        jobs: Columns computed in parallel

    Returns:
        One ColumnStatistics per column, in schema order
    """
    if bucket_count < 1:
        raise ValueError('bucket_count must be >= 1')
    if sample_size < 1:
        raise ValueError('sample_size must be >= 1')

    table = catalog.table(data.table)
    columns = [(c.name, c.value_type) for c in table.columns]

    def compute(spec):
        name, value_type = spec
        return column_statistics(data, name, value_type, sample_size, bucket_count, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            result = list(pool.map(compute, columns))
    else:
        result = [compute(spec) for spec in columns]

    if data.row_count == 0:
        logger.warning(f'Table {data.table} is empty; statistics marked empty')
    return result


def compute_catalog_statistics(tables: Dict[str, TableData], catalog: SchemaCatalog,
                               sample_size: int, bucket_count: int, seed: int,
                               jobs: int = 1) -> StatisticsMap:
    """Statistics for every loaded table, keyed by (table, column)"""
    stats = {}
    for name in catalog.table_names:
        if name not in tables:
            continue
        for column_stats in compute_statistics(tables[name], catalog, sample_size, bucket_count, seed, jobs):
            stats[(column_stats.table, column_stats.column)] = column_stats
    logger.info(f'Computed statistics for {len(stats)} columns')
    return stats


def statistics_to_list(stats: StatisticsMap) -> List[dict]:
    return [stats[key].to_dict() for key in sorted(stats)]


def statistics_from_list(items: List[dict]) -> StatisticsMap:
    result = {}
    for item in items:
        column_stats = ColumnStatistics.from_dict(item)
        result[(column_stats.table, column_stats.column)] = column_stats
    return result
