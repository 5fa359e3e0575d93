"""
Test factories and the shared desk dataset
"""
import tempfile
from functools import lru_cache
from pathlib import Path

import factory
import pandas as pd
from django.conf import settings

from workloads.utils.catalog import TableData, catalog_from_dict, load_catalog, load_table_data
from workloads.utils.datasets import build_imdb_lite
from workloads.utils.generation import (
    GenerationRequest, Intent, PredicateFamily, SelectivityLevel, SelectivityTarget, StatsStrategy,
)
from workloads.utils.providers import MOCK_GRAMMAR, ProviderProfile
from workloads.utils.statistics import compute_catalog_statistics

DESK_SEED = 7


class ProviderProfileFactory(factory.Factory):
    class Meta:
        model = ProviderProfile

    kind = MOCK_GRAMMAR
    endpoint = 'http://provider.test/v1'
    model = 'test-model'
    api_key_env = 'FORGE_TEST_API_KEY'
    timeout = 5.0
    max_retries = 3
    max_queries_per_call = 20
    parallelism = 1
    seed = factory.Sequence(lambda n: 1000 + n)


class GenerationRequestFactory(factory.Factory):
    class Meta:
        model = GenerationRequest

    intent = Intent.SCHEMA_AWARE
    n = 10


class SelectivityRequestFactory(GenerationRequestFactory):
    intent = Intent.SELECTIVITY_TARGETED
    selectivity_target = SelectivityTarget(SelectivityLevel.SELECTIVE, PredicateFamily.EQUALITY_ONLY)
    stats_strategy = StatsStrategy.HISTOGRAM_ONLY
    target_columns = ('title.start_year',)


class DeskDataset:
    """imdb_lite written to a temp directory, loaded, with statistics"""

    def __init__(self, scale: float):
        self._tmp = tempfile.TemporaryDirectory(prefix='forge-desk-')
        self.data_dir = Path(self._tmp.name)
        build_imdb_lite(self.data_dir, DESK_SEED, scale)
        self.catalog = load_catalog(settings.FORGE_SCHEMA_FILE)
        self.data = load_table_data(self.catalog, self.data_dir)
        self.stats = compute_catalog_statistics(self.data, self.catalog, 1000, 32, seed=11, jobs=1)


@lru_cache(maxsize=None)
def desk_dataset(scale: float = 1.0) -> DeskDataset:
    return DeskDataset(scale)


def tiny_tables(tables: dict, foreign_keys=(), indexes=None):
    """
    Catalog and data from {table: {column: values}}; every table is keyed on 'id'

    Integer columns become 'integer', float columns 'decimal', anything else 'text'
    """
    indexes = indexes or {}
    document = {'tables': [], 'foreign_keys': [{'from': a, 'to': b} for a, b in foreign_keys]}
    data = {}
    for name, columns in tables.items():
        frame = pd.DataFrame(columns)
        document['tables'].append({
            'name': name,
            'columns': [{'name': c, 'type': _value_type(frame[c])} for c in frame.columns],
            'primary_key': 'id',
            'indexes': list(indexes.get(name, ())),
        })
        data[name] = TableData(name, frame)
    return catalog_from_dict(document), data


def _value_type(series: pd.Series) -> str:
    if pd.api.types.is_integer_dtype(series):
        return 'integer'
    if pd.api.types.is_float_dtype(series):
        return 'decimal'
    return 'text'


def movie_desk():
    """Three small related tables with hand-checkable join results"""
    return tiny_tables(
        {
            'movies': {
                'id': [1, 2, 3, 4, 5, 6],
                'genre': ['drama', 'comedy', 'drama', 'horror', 'drama', 'comedy'],
                'rating': [7.5, 6.0, 8.1, 4.2, 5.5, 6.0],
            },
            'title': {
                'id': [10, 11, 12, 13, 14, 15, 16, 17],
                'movie_id': [1, 1, 2, 3, 3, 3, 5, 9],
                'start_year': [1999, 2004, 2010, 1985, 2004, 2020, 2001, 2004],
            },
            'cast_info': {
                'id': [100, 101, 102, 103, 104],
                'movie_id': [1, 3, 3, 6, 2],
                'nr_order': [1, 2, 1, 1, 3],
            },
        },
        foreign_keys=[('title.movie_id', 'movies.id'), ('cast_info.movie_id', 'movies.id')],
        indexes={'title': ['movie_id']},
    )
