"""
Forge workloads
Run the whole pipeline from a config, or one stage from the artifacts of the stage before it
"""
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from workloads.exceptions import ForgeError
from workloads.serializers import load_config
from workloads.services.pipeline_service import (
    EXIT_FATAL, EXIT_PARTIAL, pipeline_service, run_log, with_overrides,
)
from workloads.utils.artifacts import output_paths

logger = logging.getLogger(__name__)

STAGES = ('stats', 'generate', 'label', 'plans', 'report')


class Command(BaseCommand):
    help = 'Generate, label and plan-label SQL workloads (run <config> or one stage)'

    def add_arguments(self, parser):
        stages = parser.add_subparsers(dest='stage', required=True)

        run = stages.add_parser('run', help='Run every stage from a config file')
        run.add_argument('config', help='Path to a run config JSON document')
        self._common(run)

        for stage in STAGES:
            sub = stages.add_parser(stage, help=f'Run the {stage} stage only')
            sub.add_argument(
                '--config',
                default=str(settings.FORGE_EXAMPLE_CONFIG),
                help='Run config JSON document (default: the bundled example)'
            )
            self._common(sub)
            if stage == 'generate':
                sub.add_argument('--n', type=int, help='Generate N schema-aware queries instead of the configured requests')
                sub.add_argument('--provider', help='Provider: mock or live')
            if stage in ('label', 'plans'):
                sub.add_argument(
                    '--queries',
                    help='Queries file: .sql statements, queries.json or queries.csv (default: <out>/queries.json)'
                )

    def _common(self, parser):
        parser.add_argument('--seed', type=int, help='Global seed (overrides the config)')
        parser.add_argument('--jobs', type=int, help='Intra-stage parallelism (overrides the config)')
        parser.add_argument('--out', help='Output directory (overrides the config)')

    def handle(self, *args, **options):
        stage = options['stage']
        try:
            config = load_config(options['config'], options['seed'], options['jobs'], options['out'])
            if stage == 'generate':
                config = with_overrides(config, options.get('n'), options.get('provider'))
            if config.jobs < 1:
                raise CommandError('--jobs must be >= 1', returncode=EXIT_FATAL)

            if stage == 'run':
                outcome = pipeline_service.run_pipeline(config)
                problems = outcome.problems
                self.stdout.write(self.style.SUCCESS(f'Artifacts written to {config.output_dir}'))
            else:
                problems = self._run_stage(stage, config, options)
        except ForgeError as e:
            logger.error(f'forge {stage} failed: {e}')
            raise CommandError(str(e), returncode=EXIT_FATAL)

        if problems:
            raise CommandError('Finished with failures: ' + '; '.join(problems), returncode=EXIT_PARTIAL)

    def _run_stage(self, stage, config, options):
        paths = output_paths(config.output_dir)
        problems = []
        with run_log(paths['run_log'], mode='a'):
            catalog, data = pipeline_service.load_inputs(config)

            if stage == 'stats':
                stats = pipeline_service.run_stats(config, catalog, data, paths)
                self.stdout.write(self.style.SUCCESS(f'Statistics for {len(stats)} columns: {paths["statistics"]}'))

            elif stage == 'generate':
                stats = pipeline_service.load_statistics(paths)
                result = pipeline_service.run_generate(config, catalog, stats, paths)
                self.stdout.write(self.style.SUCCESS(
                    f'Generated {len(result.accepted)} queries '
                    f'({len(result.rejected)} rejected, {result.calls_made} calls): {paths["queries_csv"]}'
                ))
                if result.incomplete:
                    problems.append(f'generation incomplete: {len(result.accepted)} of {result.requested} queries')

            elif stage in ('label', 'plans'):
                source = Path(options['queries']) if options.get('queries') else paths['queries_json']
                ids, queries = pipeline_service.load_queries(source)
                if stage == 'label':
                    result = pipeline_service.run_label(config, catalog, data, paths, ids, queries)
                    self.stdout.write(self.style.SUCCESS(f'Labeled {len(result.labels)} queries: {paths["labels_csv"]}'))
                else:
                    result = pipeline_service.run_plans(config, catalog, data, paths, ids, queries)
                    plans = sum(len(s.plans) for s in result.sets)
                    self.stdout.write(self.style.SUCCESS(f'{plans} plans for {len(result.sets)} queries: {paths["plans"]}'))
                if result.failures:
                    problems.append(f'{len(result.failures)} queries failed {stage}')
                    for failure in result.failures:
                        self.stdout.write(self.style.WARNING(f'Failed: {failure.query_id} - {failure.reason}'))

            else:
                needs_stats = config.metrics.selectivity or config.metrics.timing
                stats = pipeline_service.load_statistics(paths) if needs_stats else {}
                written = pipeline_service.run_report(config, catalog, data, stats, paths)
                self.stdout.write(self.style.SUCCESS(f'{len(written)} reports written to {paths["reports"]}'))
        return problems
