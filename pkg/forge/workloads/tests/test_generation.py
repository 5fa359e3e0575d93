from collections import Counter

import pytest

from workloads.exceptions import MissingStatisticsError
from workloads.services.generation_service import MUTATION, PROVIDER, generation_service
from workloads.utils.artifacts import output_paths, read_csv, read_seed
from workloads.utils.providers import GenerationProvider, ProviderResponse
from workloads.utils.sql_ast import QueryCategory, classify
from workloads.utils.sql_parser import parse_sql
from workloads.utils.sql_printer import canonical_key
from workloads.utils.validation import validate

from .factories import GenerationRequestFactory, ProviderProfileFactory, SelectivityRequestFactory, desk_dataset

SEEDS = [
    parse_sql('SELECT * FROM movies WHERE release_year BETWEEN 1990 AND 2000'),
    parse_sql('SELECT m.genre, COUNT(*) FROM movies m, title t WHERE m.id = t.movie_id AND t.start_year > 2005 '
              'GROUP BY m.genre'),
]


class ScriptedProvider(GenerationProvider):
    """Answers every call with the same text"""

    kind = 'Scripted'

    def __init__(self, text='', ok=True):
        self.text = text
        self.ok = ok
        self.calls = []

    def generate(self, call):
        self.calls.append(call)
        if not self.ok:
            return ProviderResponse(False, error='unavailable')
        return ProviderResponse(True, text=self.text, latency_ms=1.0)


class TestGenerateWorkload:

    def test_schema_aware_workload_is_valid_and_distinct(self):
        desk = desk_dataset()
        result = generation_service.generate_workload(
            GenerationRequestFactory(n=30), ProviderProfileFactory(), desk.catalog, desk.stats)
        assert len(result.accepted) == 30
        assert not result.incomplete
        assert result.query_ids == [f'q{i:05d}' for i in range(30)]
        assert len({canonical_key(q) for q in result.queries}) == 30
        assert all(validate(q, desk.catalog).is_valid for q in result.queries)
        assert {item.provenance for item in result.accepted} == {PROVIDER}

    def test_category_mix_is_honoured(self):
        desk = desk_dataset()
        mix = {QueryCategory.SIMPLE_SELECTION: 4, QueryCategory.COMPLEX_JOIN: 5, QueryCategory.AGGREGATION: 6}
        result = generation_service.generate_workload(
            GenerationRequestFactory(n=15, category_mix=mix), ProviderProfileFactory(), desk.catalog, desk.stats)
        assert Counter(classify(q) for q in result.queries) == mix

    def test_same_profile_seed_same_workload(self):
        desk = desk_dataset()
        req = GenerationRequestFactory(n=25)
        first = generation_service.generate_workload(req, ProviderProfileFactory(seed=5, parallelism=4),
                                                     desk.catalog, desk.stats)
        again = generation_service.generate_workload(req, ProviderProfileFactory(seed=5, parallelism=4),
                                                     desk.catalog, desk.stats)
        assert [item.sql for item in first.accepted] == [item.sql for item in again.accepted]

    def test_batches_respect_the_per_call_limit(self):
        desk = desk_dataset()
        result = generation_service.generate_workload(
            GenerationRequestFactory(n=45), ProviderProfileFactory(max_queries_per_call=10), desk.catalog, desk.stats)
        assert len(result.accepted) == 45
        assert result.calls_made >= 5

    def test_rejections_carry_reasons(self):
        desk = desk_dataset()
        provider = ScriptedProvider(
            'SELECT * FROM movies; SELECT * FROM movies; SELECT * FROM films; SELEC x FROM movies')
        result = generation_service.generate_workload(
            GenerationRequestFactory(n=3), ProviderProfileFactory(), desk.catalog, desk.stats, provider=provider)
        assert len(result.accepted) == 1
        assert result.incomplete
        assert result.calls_made == 4
        reasons = [r.reason for r in result.rejected if r.call_index == 0]
        assert reasons[0] == 'duplicate'
        assert reasons[1].startswith('invalid: ')
        assert reasons[2].startswith('parse error: ')

    def test_failing_provider_exhausts_retries(self):
        desk = desk_dataset()
        result = generation_service.generate_workload(
            GenerationRequestFactory(n=5), ProviderProfileFactory(max_retries=2), desk.catalog, desk.stats,
            provider=ScriptedProvider(ok=False))
        assert result.accepted == []
        assert result.failed_calls == 2
        assert result.incomplete

    def test_selectivity_request_without_statistics(self):
        desk = desk_dataset()
        with pytest.raises(MissingStatisticsError):
            generation_service.generate_workload(SelectivityRequestFactory(), ProviderProfileFactory(),
                                                 desk.catalog, {})


class TestExpandWorkload:

    def test_new_queries_avoid_the_seeds(self):
        desk = desk_dataset()
        result = generation_service.expand_workload(SEEDS, 10, ProviderProfileFactory(), desk.catalog, desk.stats)
        seed_keys = {canonical_key(q) for q in SEEDS}
        assert len(result.accepted) == 10
        assert not seed_keys & {canonical_key(q) for q in result.queries}

    def test_mutations_fill_what_the_provider_leaves(self):
        desk = desk_dataset()
        result = generation_service.expand_workload(SEEDS, 5, ProviderProfileFactory(), desk.catalog, desk.stats,
                                                    provider=ScriptedProvider(ok=False))
        assert len(result.accepted) == 5
        assert {item.provenance for item in result.accepted} == {MUTATION}
        assert all(validate(q, desk.catalog).is_valid for q in result.queries)

    @pytest.mark.parametrize('seeds, n', [
        ([], 5),
        (SEEDS, 0),
        ([parse_sql('SELECT * FROM films')], 5),
    ])
    def test_bad_arguments(self, seeds, n):
        desk = desk_dataset()
        with pytest.raises(ValueError):
            generation_service.expand_workload(seeds, n, ProviderProfileFactory(), desk.catalog, desk.stats)


class TestExport:

    def test_queries_and_rejects_are_written(self, tmp_path):
        desk = desk_dataset()
        result = generation_service.generate_all(
            [GenerationRequestFactory(n=8), GenerationRequestFactory(n=4)], ProviderProfileFactory(),
            desk.catalog, desk.stats)
        paths = output_paths(tmp_path)
        assert generation_service.export_queries(result, paths, seed=42) == 12

        frame = read_csv(paths['queries_csv'])
        assert list(frame['query_id']) == [f'q{i:05d}' for i in range(12)]
        assert read_seed(paths['queries_json']) == 42
        assert read_seed(paths['rejected']) == 42
        assert all(parse_sql(sql) for sql in frame['sql'])
