"""
Pipeline Service for Forge
Runs the stages (statistics, generation, labeling, plan labeling, reports) from a RunConfig
"""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from django.conf import settings

from ..exceptions import ConfigError
from ..serializers import RunConfig
from ..signals import stage_completed
from ..utils.artifacts import derive_seed, output_paths, read_json, read_queries, write_json
from ..utils.catalog import SchemaCatalog, TableData, load_catalog, load_table_data
from ..utils.datasets import build_imdb_lite
from ..utils.generation import GenerationRequest, Intent
from ..utils.providers import LIVE_HTTP, MOCK_GRAMMAR
from ..utils.reports import write_report
from ..utils.sql_ast import QueryAst
from ..utils.statistics import (
    StatisticsMap, compute_catalog_statistics, statistics_from_list, statistics_to_list,
)
from .generation_service import GenerationResult, generation_service
from .labeling_service import LabelingResult, labeling_service
from .metrics_service import metrics_service
from .plan_service import PlanLabelingResult, plan_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

PROVIDER_ALIASES = {
    'mock': MOCK_GRAMMAR,
    'live': LIVE_HTTP,
    MOCK_GRAMMAR.lower(): MOCK_GRAMMAR,
    LIVE_HTTP.lower(): LIVE_HTTP,
}

RUN_LOGGERS = ('workloads', 'provider_calls')


@dataclass
class PipelineOutcome:
    exit_code: int = EXIT_OK
    artifacts: List[Path] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    def partial(self, problem: str):
        self.problems.append(problem)
        self.exit_code = EXIT_PARTIAL


def provider_kind(name: str) -> str:
    try:
        return PROVIDER_ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f'unknown provider {name!r} (use mock or live)')


def with_overrides(config: RunConfig, n: Optional[int] = None, provider: Optional[str] = None) -> RunConfig:
    """--n replaces the configured requests with one schema-aware request; --provider switches the kind"""
    if n is not None:
        config = replace(config, requests=(GenerationRequest(Intent.SCHEMA_AWARE, n),))
    if provider is not None:
        config = replace(config, profile=replace(config.profile, kind=provider_kind(provider)))
    return config


@contextmanager
def run_log(path: Path, mode: str = 'w'):
    """Copy the forge loggers into run.log for the duration of a run (single stages append)"""
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode=mode, encoding='utf-8')
    handler.setFormatter(logging.Formatter('{levelname} {asctime} {module} {message}', style='{'))
    handler.setLevel(logging.DEBUG if settings.DEBUG else logging.INFO)
    loggers = [logging.getLogger(name) for name in RUN_LOGGERS]
    for run_logger in loggers:
        run_logger.addHandler(handler)
    try:
        yield path
    finally:
        for run_logger in loggers:
            run_logger.removeHandler(handler)
        handler.close()


class PipelineService:
    """
    Service for running forge stages
    Every stage reads its inputs from memory or from the artifacts of the stage before it
    """

    @contextmanager
    def _stage(self, name: str, artifacts: List[Path]):
        started = time.perf_counter()
        logger.info(f'Stage {name} started')
        yield
        stage_completed.send(
            sender=self.__class__, stage=name, artifacts=list(artifacts),
            duration_ms=(time.perf_counter() - started) * 1000,
        )

    # ==================== INPUTS ====================

    def load_inputs(self, config: RunConfig) -> Tuple[SchemaCatalog, Dict[str, TableData]]:
        """Catalog and table data; builds the bundled dataset first when configured to"""
        if not config.schema_path.is_file():
            raise ConfigError(f'schema file not found: {config.schema_path}')
        if config.metrics.fidelity_reference and not config.metrics.fidelity_reference.is_file():
            raise ConfigError(f'fidelity reference not found: {config.metrics.fidelity_reference}')

        catalog = load_catalog(config.schema_path)
        missing = [t for t in catalog.table_names if not (config.data_dir / f'{t}.csv').is_file()]
        if missing and config.dataset.build:
            logger.info(f'Building desk-scale dataset into {config.data_dir}')
            build_imdb_lite(config.data_dir, config.dataset.seed, config.dataset.scale)
        elif not config.data_dir.is_dir():
            raise ConfigError(f'data directory not found: {config.data_dir}')

        return catalog, load_table_data(catalog, config.data_dir)

    def load_statistics(self, paths: dict) -> StatisticsMap:
        return statistics_from_list(read_json(paths['statistics'], 'stats')['columns'])

    def load_queries(self, path) -> Tuple[List[str], List[QueryAst]]:
        ids, queries, bad = read_queries(path)
        for query_id, _, reason in bad:
            logger.warning(f'Skipping {query_id}: {reason}')
        return ids, queries

    # ==================== STAGES ====================

    def run_stats(self, config: RunConfig, catalog: SchemaCatalog, data: Dict[str, TableData],
                  paths: dict) -> StatisticsMap:
        with self._stage('stats', [paths['statistics']]):
            stats = compute_catalog_statistics(
                data, catalog, config.sample_size, config.bucket_count,
                derive_seed(config.seed, 'statistics'), config.jobs,
            )
            write_json(paths['statistics'], {'columns': statistics_to_list(stats)}, config.seed)
        return stats

    def run_generate(self, config: RunConfig, catalog: SchemaCatalog, stats: StatisticsMap,
                     paths: dict) -> GenerationResult:
        profile = replace(config.profile, seed=derive_seed(config.seed, 'generate'))
        artifacts = [paths['queries_csv'], paths['queries_json'], paths['rejected']]
        with self._stage('generate', artifacts):
            try:
                result = generation_service.generate_all(
                    config.requests, profile, catalog, stats,
                    transcript_dir=paths['transcript'] if profile.is_live else None,
                )
            except ValueError as e:
                raise ConfigError(f'generation request rejected: {e}')
            generation_service.export_queries(result, paths, config.seed)
        return result

    def run_label(self, config: RunConfig, catalog: SchemaCatalog, data: Dict[str, TableData],
                  paths: dict, ids: Sequence[str], queries: Sequence[QueryAst]) -> LabelingResult:
        mode = replace(config.labeling, seed=derive_seed(config.seed, 'label'))
        artifacts = [paths['labels_csv'], paths['labels_json'], paths['label_failures']]
        with self._stage('label', artifacts):
            result = labeling_service.label_workload(queries, data, mode, catalog, ids, config.jobs)
            labeling_service.export_labels(result, paths, config.seed)
        return result

    def run_plans(self, config: RunConfig, catalog: SchemaCatalog, data: Dict[str, TableData],
                  paths: dict, ids: Sequence[str], queries: Sequence[QueryAst]) -> PlanLabelingResult:
        with self._stage('plans', [paths['plans']]):
            result = plan_service.label_workload(
                queries, ids, data, catalog, config.cost_params, config.plan_limit,
                derive_seed(config.seed, 'plans'), config.jobs,
            )
            plan_service.export_plan_dataset(result.sets, paths['plans'], config.seed)
        return result

    def run_report(self, config: RunConfig, catalog: SchemaCatalog, data: Dict[str, TableData],
                   stats: StatisticsMap, paths: dict) -> List[Path]:
        """Reports over the labeled corpus; needs labels.json"""
        labels = labeling_service.read_labels(paths['labels_json'])
        corpus = [label.query for label in labels]
        options = config.metrics
        written = []
        with self._stage('report', written):
            if options.diversity:
                report = metrics_service.diversity(corpus, catalog)
                written.append(write_report(paths['reports'], 'diversity', report.to_dict(), config.seed))
            if options.fidelity_reference:
                _, reference = self.load_queries(options.fidelity_reference)
                if corpus and reference:
                    report = metrics_service.fidelity(corpus, reference)
                    written.append(write_report(paths['reports'], 'fidelity', report.to_dict(), config.seed))
                else:
                    logger.warning('Fidelity report skipped: corpus or reference is empty')
            if options.selectivity:
                matrix = metrics_service.selectivity_study(
                    catalog, data, stats, config.profile, options.queries_per_cell,
                    derive_seed(config.seed, 'selectivity'), options.columns, jobs=config.jobs,
                )
                written.append(write_report(paths['reports'], 'selectivity', matrix.to_dict(), config.seed))
            if options.timing:
                profile = replace(config.profile, seed=derive_seed(config.seed, 'timing'))
                timing = metrics_service.timing_study(profile, catalog, options.timing_sizes, stats)
                written.append(write_report(paths['reports'], 'timing', timing.to_dict(), config.seed))
        return written

    # ==================== FULL RUN ====================

    def run_pipeline(self, config: RunConfig) -> PipelineOutcome:
        """
        All stages in order, with run.log in the output directory

        Returns:
            PipelineOutcome; exit code 2 when a stage finished with per-query failures
            or generation came up short. Fatal problems raise ForgeError.
        """
        paths = output_paths(config.output_dir)
        outcome = PipelineOutcome()
        with run_log(paths['run_log']):
            logger.info(f'Run started: output {config.output_dir}, seed {config.seed}')
            catalog, data = self.load_inputs(config)
            stats = self.run_stats(config, catalog, data, paths)

            generated = self.run_generate(config, catalog, stats, paths)
            if generated.incomplete:
                outcome.partial(f'generation incomplete: {len(generated.accepted)} of {generated.requested} queries')

            labels = self.run_label(config, catalog, data, paths, generated.query_ids, generated.queries)
            if labels.failures:
                outcome.partial(f'{len(labels.failures)} queries failed labeling')

            plans = self.run_plans(config, catalog, data, paths, generated.query_ids, generated.queries)
            if plans.failures:
                outcome.partial(f'{len(plans.failures)} queries failed plan labeling')

            reports = self.run_report(config, catalog, data, stats, paths)

            outcome.artifacts = [
                paths['statistics'], paths['queries_csv'], paths['queries_json'], paths['rejected'],
                paths['labels_csv'], paths['labels_json'], paths['label_failures'], paths['plans'],
                *reports, paths['run_log'],
            ]
            logger.info(f'Run finished with exit code {outcome.exit_code}')
        return outcome


# Singleton instance
pipeline_service = PipelineService()
