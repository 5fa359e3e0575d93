"""
Write the bundled desk-scale dataset
One CSV per imdb_lite table, deterministic for a given seed and scale
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from workloads.utils.datasets import build_imdb_lite

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Write the imdb_lite desk-scale CSV data'

    def add_arguments(self, parser):
        parser.add_argument(
            '--out',
            required=True,
            help='Destination directory'
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=7,
            help='Generator seed (default: 7)'
        )
        parser.add_argument(
            '--scale',
            type=float,
            default=1.0,
            help='Row-count multiplier, at most 1.0 (default: 1.0)'
        )

    def handle(self, *args, **options):
        scale = options['scale']
        if not 0 < scale <= 1:
            raise CommandError('--scale must be in (0, 1]')

        counts = build_imdb_lite(options['out'], options['seed'], scale)
        for table, rows in counts.items():
            self.stdout.write(f'{table}: {rows} rows')
        self.stdout.write(
            self.style.SUCCESS(f'Dataset written to {options["out"]}')
        )
