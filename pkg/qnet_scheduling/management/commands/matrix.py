import numpy as np
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand

from ...topology import build_transition_system
from ._options import command_error, load_experiment


class Command(BaseCommand):
    help = 'Prints the queues, ranks, transitions and the matrices M~ and N~ of an experiment file.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Experiment file (JSON).')

    def handle(self, *args, **options):
        experiment = load_experiment(options)
        try:
            ts = build_transition_system(experiment.sim.spec)
        except ValidationError as exc:
            raise command_error(exc)

        labels = [ts.queue_label(e) for e in range(ts.n_queues)]
        self.stdout.write('queues:')
        for e, label in enumerate(labels):
            kind = 'physical' if ts.physical[e] else 'virtual'
            user = ', user' if ts.users[e] else ''
            self.stdout.write('  {:<8} rank {} ({}{})'.format(label, int(ts.ranks[e]), kind, user))
        self.stdout.write('transitions:')
        for k in range(ts.n_transitions):
            self.stdout.write('  {}'.format(ts.transition_label(k)))

        columns = ts.variable_labels()
        width = max(len(label) for label in columns + labels) + 1
        for name, matrix in (('M~', ts.m_tilde), ('N~', ts.n_tilde)):
            self.stdout.write('{}:'.format(name))
            self.stdout.write(' ' * width + ''.join(label.rjust(width) for label in columns))
            for e, row in enumerate(np.asarray(matrix)):
                self.stdout.write(labels[e].ljust(width) + ''.join(str(int(value)).rjust(width) for value in row))
