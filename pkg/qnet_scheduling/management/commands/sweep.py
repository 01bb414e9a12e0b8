from dataclasses import replace

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ... import conf
from ...harness import METRICS, render_heatmap, run_sweep, write_csv
from ...models import Experiment
from ._options import add_config_arguments, command_error, load_experiment


class Command(BaseCommand):
    help = 'Sweeps the demand rates of two user pairs and writes the unserved fractions as CSV.'

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            '--out', required=True,
            help='CSV file for the sweep points.',
        )
        parser.add_argument(
            '--heatmap',
            help='Also render the grid to this image file.',
        )
        parser.add_argument(
            '--metric', choices=METRICS, default='max',
            help='Quantity shown in the heatmap.',
        )
        parser.add_argument(
            '--workers', type=int,
            help='Worker processes (default QNET_SCHEDULING_WORKERS).',
        )
        parser.add_argument(
            '--store', metavar='NAME',
            help='Save the sweep in the database as an experiment called NAME.',
        )

    def handle(self, *args, **options):
        experiment = load_experiment(options, seed=False)
        if experiment.sweep is None:
            raise CommandError('{} has no "sweep" section.'.format(options['config']))
        sweep = experiment.sweep
        if options.get('seed') is not None:
            try:
                sweep = replace(sweep, base_seed=options['seed'])
            except ValueError as exc:
                raise command_error(exc)
        workers = options.get('workers') or conf.get_workers()
        if workers < 1:
            raise CommandError('--workers must be at least 1.')

        try:
            result = run_sweep(sweep, experiment.sim, workers=workers)
            write_csv(result, options['out'])
            if options.get('heatmap'):
                render_heatmap(
                    result, options['heatmap'],
                    metric=options['metric'],
                    cell_size=conf.get_heatmap_cell_size(),
                )
        except (ValidationError, ValueError, OSError) as exc:
            raise command_error(exc)

        if options.get('store'):
            data = dict(experiment.data)
            data['sweep'] = dict(data['sweep'], base_seed=sweep.base_seed)
            Experiment.objects.create_from_sweep(options['store'], data, result)

        failures = result.failures
        self.stdout.write('{} points written to {}.'.format(len(result.points), options['out']))
        if failures:
            self.stderr.write('{} points failed, first: {}'.format(len(failures), failures[0].error))
