import json
from pathlib import Path

import pytest
from django.conf import settings

from workloads.exceptions import ConfigError
from workloads.serializers import load_config
from workloads.utils.generation import Intent, StatsStrategy
from workloads.utils.providers import MOCK_GRAMMAR
from workloads.utils.sql_ast import QueryCategory


def write_config(tmp_path, **document):
    document.setdefault('data_dir', 'data')
    document.setdefault('requests', [{'intent': 'SchemaAware', 'n': 5}])
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(document))
    return path


class TestLoadConfig:

    def test_example_config(self):
        config = load_config(settings.FORGE_EXAMPLE_CONFIG)
        base = Path(settings.FORGE_EXAMPLE_CONFIG).resolve().parent
        assert config.seed == 42
        assert config.schema_path == (base / 'imdb_lite' / 'schema.json').resolve()
        assert config.dataset.build
        assert config.profile.kind == MOCK_GRAMMAR
        assert [req.intent for req in config.requests] == [
            Intent.SCHEMA_AWARE, Intent.CONTEXT_AWARE, Intent.WORKLOAD_EXPANSION, Intent.SELECTIVITY_TARGETED,
        ]
        assert len(config.requests[2].seed_workload) == 8
        assert config.requests[0].category_mix[QueryCategory.COMPLEX_JOIN] == 20
        assert config.requests[3].stats_strategy == StatsStrategy.HISTOGRAM_ONLY
        assert config.metrics.fidelity_reference == base / 'reference_workload.sql'
        assert config.metrics.timing_sizes == (10, 20, 30, 40, 50, 100)

    def test_defaults_and_relative_paths(self, tmp_path):
        config = load_config(write_config(tmp_path))
        assert config.data_dir == tmp_path.resolve() / 'data'
        assert config.output_dir == tmp_path.resolve() / 'out'
        assert config.seed == 0
        assert config.labeling.kind == 'exact'
        assert config.metrics.fidelity_reference is None
        assert config.sample_size == settings.FORGE_STATISTICS['SAMPLE_SIZE']

    def test_flag_overrides(self, tmp_path):
        config = load_config(write_config(tmp_path, seed=1), seed=9, jobs=3, output_dir=tmp_path / 'elsewhere')
        assert (config.seed, config.jobs) == (9, 3)
        assert config.output_dir == (tmp_path / 'elsewhere').resolve()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match='config file not found'):
            load_config(tmp_path / 'absent.json')

    def test_malformed_json(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text('{"data_dir": "x",\n "seed": }')
        with pytest.raises(ConfigError, match=r'run\.json:2:'):
            load_config(path)

    def test_every_error_is_reported_with_its_path(self, tmp_path):
        path = write_config(
            tmp_path,
            seed=-1,
            provider={'kind': 'Telepathy'},
            requests=[{'intent': 'SchemaAware', 'n': 3}, {'intent': 'SchemaAware', 'n': 0}],
        )
        with pytest.raises(ConfigError) as caught:
            load_config(path)
        message = str(caught.value)
        assert 'seed:' in message
        assert 'provider.kind:' in message
        assert 'requests[1].n:' in message

    def test_request_rules_surface_as_errors(self, tmp_path):
        path = write_config(tmp_path, requests=[{
            'intent': 'SelectivityTargeted', 'n': 5,
            'selectivity_level': 'Selective', 'predicate_family': 'EqualityOnly',
        }])
        with pytest.raises(ConfigError, match=r'requests\[0\]: SelectivityTargeted requires'):
            load_config(path)

    def test_unknown_category(self, tmp_path):
        path = write_config(tmp_path, requests=[{'intent': 'SchemaAware', 'n': 5, 'category_mix': {'Window': 1}}])
        with pytest.raises(ConfigError, match='unknown categories: Window'):
            load_config(path)

    def test_sampled_fraction_bounds(self, tmp_path):
        with pytest.raises(ConfigError, match='labeling.fraction'):
            load_config(write_config(tmp_path, labeling={'mode': 'sampled', 'fraction': 1.5}))


class TestProviderSection:

    def test_api_key_env_substitution(self, tmp_path, monkeypatch):
        monkeypatch.setenv('FORGE_KEY_NAME', 'TEAM_LLM_KEY')
        config = load_config(write_config(tmp_path, provider={'api_key_env': '${FORGE_KEY_NAME}'}))
        assert config.profile.api_key_env == 'TEAM_LLM_KEY'

    def test_unset_variable(self, tmp_path, monkeypatch):
        monkeypatch.delenv('FORGE_KEY_NAME', raising=False)
        with pytest.raises(ConfigError, match='FORGE_KEY_NAME is not set'):
            load_config(write_config(tmp_path, provider={'api_key_env': '${FORGE_KEY_NAME}'}))

    def test_cost_model_overrides(self, tmp_path):
        config = load_config(write_config(tmp_path, planner={'limit': 50, 'cost_model': {'io_page_cost': 4.0}}))
        assert config.plan_limit == 50
        assert config.cost_params.io_page_cost == 4.0
