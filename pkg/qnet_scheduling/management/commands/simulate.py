from django.core.management.base import BaseCommand

from ...exceptions import SimulationError
from ...harness import run_simulation
from ._options import add_config_arguments, command_error, load_experiment


class Command(BaseCommand):
    help = 'Runs one simulation of an experiment file and prints the unserved fraction per user pair.'

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            '--trace',
            help='Write the per-step queues and decisions to this CSV file.',
        )

    def handle(self, *args, **options):
        experiment = load_experiment(options)
        try:
            report = run_simulation(experiment.sim, trace_path=options.get('trace'))
        except (SimulationError, OSError) as exc:
            raise command_error(exc)

        self.stdout.write('policy {}, {} steps, seed {}'.format(report.policy, report.steps, report.seed))
        for commodity in report.commodities:
            self.stdout.write('{}: arrived {}, served {}, unserved {:.4f}'.format(
                ''.join(commodity.pair) if all(len(node) == 1 for node in commodity.pair)
                else '-'.join(commodity.pair),
                commodity.arrived,
                commodity.served,
                commodity.unserved_fraction,
            ))
        self.stdout.write('final ebits {}, final demands {}, {:.1f} s'.format(
            report.final_q_total, report.final_d_total, report.wall_time,
        ))
        if report.ebit_balance:
            self.stderr.write('Ebit balance is off by {}.'.format(report.ebit_balance))
