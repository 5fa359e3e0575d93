"""
Run configuration
A run is one JSON document validated by these serializers; omitted values fall back to settings
"""
import json
import logging
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

from django.conf import settings
from rest_framework import serializers

from .exceptions import ConfigError, ForgeError
from .services.labeling_service import LabelingMode
from .utils.artifacts import read_queries
from .utils.cost_model import CostModelParams
from .utils.generation import (
    DEFAULT_TARGET_COLUMN, GenerationRequest, Intent, PredicateFamily, SelectivityLevel,
    SelectivityTarget, StatsStrategy,
)
from .utils.providers import PROVIDER_KINDS, ProviderProfile
from .utils.sql_ast import PredicateKind, QueryCategory
from .utils.sql_parser import parse_sql

logger = logging.getLogger(__name__)

_ENV_REF = re.compile(r'\$\{([A-Za-z_][A-Za-z0-9_]*)\}')


@dataclass(frozen=True)
class DatasetOptions:
    build: bool = False
    seed: int = 7
    scale: float = 1.0


@dataclass(frozen=True)
class MetricsOptions:
    diversity: bool = True
    fidelity_reference: Optional[Path] = None
    selectivity: bool = False
    queries_per_cell: int = 20
    columns: Tuple[str, ...] = (DEFAULT_TARGET_COLUMN,)
    timing: bool = False
    timing_sizes: Tuple[int, ...] = (10, 20, 30, 40, 50, 100)


@dataclass(frozen=True)
class RunConfig:
    schema_path: Path
    data_dir: Path
    output_dir: Path
    seed: int = 0
    jobs: int = 1
    dataset: DatasetOptions = field(default_factory=DatasetOptions)
    sample_size: int = 1000
    bucket_count: int = 32
    profile: ProviderProfile = field(default_factory=ProviderProfile)
    requests: Tuple[GenerationRequest, ...] = ()
    labeling: LabelingMode = field(default_factory=LabelingMode)
    plan_limit: Optional[int] = None
    cost_params: CostModelParams = field(default_factory=CostModelParams)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)


def _resolve(base_dir, raw) -> Path:
    path = Path(raw).expanduser()
    return path if path.is_absolute() else (Path(base_dir) / path).resolve()


class DatasetSerializer(serializers.Serializer):
    """Build the bundled desk-scale data into data_dir when it is missing"""
    build = serializers.BooleanField(default=False)
    seed = serializers.IntegerField(default=7)
    scale = serializers.FloatField(default=1.0, min_value=0.01, max_value=1.0)


class StatisticsSerializer(serializers.Serializer):
    sample_size = serializers.IntegerField(required=False, min_value=1)
    bucket_count = serializers.IntegerField(required=False, min_value=1)


class ProviderProfileSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=PROVIDER_KINDS, required=False)
    endpoint = serializers.URLField(required=False)
    model = serializers.CharField(required=False)
    temperature = serializers.FloatField(required=False, min_value=0.0, max_value=2.0)
    api_key_env = serializers.CharField(required=False)
    timeout = serializers.FloatField(required=False)
    max_retries = serializers.IntegerField(required=False, min_value=1)
    max_queries_per_call = serializers.IntegerField(required=False, min_value=1)
    parallelism = serializers.IntegerField(required=False, min_value=1)

    def validate_api_key_env(self, value):
        """Resolve ${VAR} references; the result must be an environment variable name"""
        def substitute(match):
            resolved = os.getenv(match.group(1))
            if resolved is None:
                raise serializers.ValidationError(f'environment variable {match.group(1)} is not set')
            return resolved

        value = _ENV_REF.sub(substitute, value)
        if not re.fullmatch(r'[A-Za-z_][A-Za-z0-9_]*', value):
            raise serializers.ValidationError('must be the name of an environment variable')
        return value

    def validate(self, attrs):
        try:
            return ProviderProfile.from_settings(**attrs)
        except ValueError as e:
            raise serializers.ValidationError(str(e))


class GenerationRequestSerializer(serializers.Serializer):
    """
    One generation request

    Expansion seeds come from seed_sql statements or a seed_file (.sql, queries.json, queries.csv).
    """
    intent = serializers.ChoiceField(choices=[i.value for i in Intent])
    n = serializers.IntegerField(min_value=1)
    category_mix = serializers.DictField(child=serializers.IntegerField(min_value=0), required=False)
    predicate_mix = serializers.DictField(child=serializers.IntegerField(min_value=0), required=False)
    context_text = serializers.CharField(required=False, allow_blank=True)
    seed_sql = serializers.ListField(child=serializers.CharField(), required=False)
    seed_file = serializers.CharField(required=False)
    selectivity_level = serializers.ChoiceField(choices=[level.value for level in SelectivityLevel], required=False)
    predicate_family = serializers.ChoiceField(choices=[f.value for f in PredicateFamily], required=False)
    stats_strategy = serializers.ChoiceField(choices=[s.value for s in StatsStrategy], required=False)
    target_columns = serializers.ListField(child=serializers.CharField(), required=False, allow_empty=False)

    def validate_category_mix(self, value):
        unknown = sorted(set(value) - {c.value for c in QueryCategory})
        if unknown:
            raise serializers.ValidationError(f'unknown categories: {", ".join(unknown)}')
        return {QueryCategory(k): v for k, v in value.items()}

    def validate_predicate_mix(self, value):
        unknown = sorted(set(value) - {k.value for k in PredicateKind})
        if unknown:
            raise serializers.ValidationError(f'unknown predicate kinds: {", ".join(unknown)}')
        return {PredicateKind(k): v for k, v in value.items()}

    def validate_seed_sql(self, value):
        try:
            return [parse_sql(sql) for sql in value]
        except ForgeError as e:
            raise serializers.ValidationError(str(e))

    def validate_seed_file(self, value):
        path = _resolve(self.root.context.get('base_dir', '.'), value)
        try:
            _, queries, bad = read_queries(path)
        except ForgeError as e:
            raise serializers.ValidationError(str(e))
        if bad:
            raise serializers.ValidationError(f'{bad[0][0]}: {bad[0][2]}')
        return queries

    def validate(self, attrs):
        seeds = tuple(attrs.get('seed_sql', [])) + tuple(attrs.get('seed_file', []))
        target = None
        if 'selectivity_level' in attrs or 'predicate_family' in attrs:
            if not ('selectivity_level' in attrs and 'predicate_family' in attrs):
                raise serializers.ValidationError(
                    {'selectivity_level': 'selectivity_level and predicate_family go together'}
                )
            target = SelectivityTarget(
                SelectivityLevel(attrs['selectivity_level']), PredicateFamily(attrs['predicate_family'])
            )
        try:
            return GenerationRequest(
                intent=Intent(attrs['intent']),
                n=attrs['n'],
                category_mix=attrs.get('category_mix'),
                context_text=attrs.get('context_text'),
                seed_workload=seeds,
                selectivity_target=target,
                stats_strategy=StatsStrategy(attrs['stats_strategy']) if 'stats_strategy' in attrs else None,
                predicate_mix=attrs.get('predicate_mix'),
                target_columns=tuple(attrs.get('target_columns', [DEFAULT_TARGET_COLUMN])),
            )
        except ValueError as e:
            raise serializers.ValidationError(str(e))


class LabelingSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=['exact', 'sampled'], default='exact')
    fraction = serializers.FloatField(default=1.0)

    def validate(self, attrs):
        try:
            return LabelingMode(attrs['mode'], attrs['fraction'])
        except ValueError as e:
            raise serializers.ValidationError({'fraction': str(e)})


class CostModelParamsSerializer(serializers.Serializer):
    io_page_cost = serializers.FloatField(required=False)
    cpu_tuple_cost = serializers.FloatField(required=False)
    hash_build_factor = serializers.FloatField(required=False)
    sort_factor = serializers.FloatField(required=False)
    index_lookup_cost = serializers.FloatField(required=False)
    page_size_tuples = serializers.IntegerField(required=False)
    memory_budget_pages = serializers.IntegerField(required=False)

    def validate(self, attrs):
        try:
            return CostModelParams.from_settings(**attrs)
        except ValueError as e:
            raise serializers.ValidationError(str(e))


class PlannerSerializer(serializers.Serializer):
    limit = serializers.IntegerField(required=False, min_value=1)
    cost_model = CostModelParamsSerializer(required=False)


class MetricsSerializer(serializers.Serializer):
    diversity = serializers.BooleanField(default=True)
    fidelity_reference = serializers.CharField(required=False, allow_null=True)
    selectivity = serializers.BooleanField(default=False)
    queries_per_cell = serializers.IntegerField(default=20, min_value=1)
    columns = serializers.ListField(child=serializers.CharField(), required=False, allow_empty=False)
    timing = serializers.BooleanField(default=False)
    timing_sizes = serializers.ListField(
        child=serializers.IntegerField(min_value=1), required=False, allow_empty=False
    )


class RunConfigSerializer(serializers.Serializer):
    """
    The whole run document; relative paths resolve against the config file's directory
    """
    schema = serializers.CharField(required=False)
    data_dir = serializers.CharField()
    output_dir = serializers.CharField(default='out')
    seed = serializers.IntegerField(default=0, min_value=0)
    jobs = serializers.IntegerField(required=False, min_value=1)
    dataset = DatasetSerializer(required=False)
    statistics = StatisticsSerializer(required=False)
    provider = ProviderProfileSerializer(required=False)
    requests = GenerationRequestSerializer(many=True, allow_empty=False)
    labeling = LabelingSerializer(required=False)
    planner = PlannerSerializer(required=False)
    metrics = MetricsSerializer(required=False)

    def create(self, validated_data) -> RunConfig:
        base_dir = self.context.get('base_dir', '.')
        stats_config = getattr(settings, 'FORGE_STATISTICS', {})
        statistics = validated_data.get('statistics', {})
        planner = validated_data.get('planner', {})
        metrics = validated_data.get('metrics', {})
        metrics_config = getattr(settings, 'FORGE_METRICS', {})
        reference = metrics.get('fidelity_reference')

        return RunConfig(
            schema_path=_resolve(base_dir, validated_data.get('schema') or settings.FORGE_SCHEMA_FILE),
            data_dir=_resolve(base_dir, validated_data['data_dir']),
            output_dir=_resolve(base_dir, validated_data['output_dir']),
            seed=validated_data['seed'],
            jobs=validated_data.get('jobs', getattr(settings, 'FORGE_JOBS', 1)),
            dataset=DatasetOptions(**validated_data.get('dataset', {})),
            sample_size=statistics.get('sample_size', int(stats_config.get('SAMPLE_SIZE', 1000))),
            bucket_count=statistics.get('bucket_count', int(stats_config.get('BUCKET_COUNT', 32))),
            profile=validated_data.get('provider') or ProviderProfile.from_settings(),
            requests=tuple(validated_data['requests']),
            labeling=validated_data.get('labeling') or LabelingMode(),
            plan_limit=planner.get('limit'),
            cost_params=planner.get('cost_model') or CostModelParams.from_settings(),
            metrics=MetricsOptions(
                diversity=metrics.get('diversity', True),
                fidelity_reference=_resolve(base_dir, reference) if reference else None,
                selectivity=metrics.get('selectivity', False),
                queries_per_cell=metrics.get('queries_per_cell', 20),
                columns=tuple(metrics.get('columns') or metrics_config.get('STUDY_COLUMNS', [DEFAULT_TARGET_COLUMN])),
                timing=metrics.get('timing', False),
                timing_sizes=tuple(metrics.get('timing_sizes') or metrics_config.get('TIMING_SIZES', [10])),
            ),
        )


def error_lines(detail, path: str = '') -> List[str]:
    """Flatten DRF error detail into 'field.path: message' lines"""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            if key == 'non_field_errors':
                lines.extend(error_lines(value, path))
            else:
                lines.extend(error_lines(value, f'{path}.{key}' if path else str(key)))
        return lines
    if isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            return [f'{path or "config"}: {item}' for item in detail]
        lines = []
        for index, item in enumerate(detail):
            lines.extend(error_lines(item, f'{path}[{index}]'))
        return lines
    return [f'{path or "config"}: {detail}']


def load_config(config_file, seed: Optional[int] = None, jobs: Optional[int] = None,
                output_dir=None) -> RunConfig:
    """
    Read and validate a run config; flags given here override the document

    Raises:
        ConfigError: unreadable document or validation errors (all of them, with field paths)
    """
    path = Path(config_file)
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigError(f'config file not found: {path}')
    except json.JSONDecodeError as e:
        raise ConfigError(f'{path}:{e.lineno}:{e.colno}: {e.msg}')

    serializer = RunConfigSerializer(data=document, context={'base_dir': path.resolve().parent})
    if not serializer.is_valid():
        raise ConfigError('; '.join(error_lines(serializer.errors)))
    config = serializer.save()

    overrides = {}
    if seed is not None:
        overrides['seed'] = seed
    if jobs is not None:
        overrides['jobs'] = jobs
    if output_dir is not None:
        overrides['output_dir'] = Path(output_dir).resolve()
    if overrides:
        config = replace(config, **overrides)

    logger.info(f'Loaded run config {path}: {len(config.requests)} requests, seed={config.seed}')
    return config
