"""Options and error translation shared by the experiment commands."""
from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from ... import conf
from ...exceptions import SimulationError, SolverBudgetExhausted
from ...forms import load_config
from ...policies import policy_kinds


def add_config_arguments(parser):
    parser.add_argument(
        '--config', required=True,
        help='Experiment file (JSON).',
    )
    parser.add_argument(
        '--steps', type=int,
        help='Number of time steps, overriding the file.',
    )
    parser.add_argument(
        '--full-scale', action='store_true',
        help='Run QNET_SCHEDULING_FULL_SCALE_STEPS steps instead of the desk-scale default.',
    )
    parser.add_argument(
        '--seed', type=int,
        help='Random seed (base seed for sweeps), overriding the file.',
    )
    parser.add_argument(
        '--policy', choices=policy_kinds(),
        help='Scheduling policy, overriding the file.',
    )
    parser.add_argument(
        '--gamma', type=float,
        help='Demand weight of the Max-Weight policies, overriding the file.',
    )


def load_experiment(options, seed=True):
    """Loads --config with the command-line overrides applied."""
    steps = options.get('steps')
    if steps is None and options.get('full_scale'):
        steps = conf.get_full_scale_steps()
    try:
        return load_config(
            options['config'],
            steps=steps,
            policy=options.get('policy'),
            gamma=options.get('gamma'),
            seed=options.get('seed') if seed else None,
        )
    except ValidationError as exc:
        raise CommandError('; '.join(exc.messages))


def command_error(exc):
    if isinstance(exc, ValidationError):
        return CommandError('; '.join(exc.messages))
    if isinstance(exc, (SimulationError, SolverBudgetExhausted)):
        return CommandError('Simulation failed at {}'.format(exc))
    return CommandError(str(exc))
