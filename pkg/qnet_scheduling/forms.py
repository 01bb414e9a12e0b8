"""
Experiment files: JSON documents describing a network, a policy and
optionally a rate-region sweep. Validation goes through Django forms so the
same rules apply to files on disk and to configs stored on ``Experiment``.
"""
import json
import re
from typing import NamedTuple

from django import forms
from django.core.exceptions import ValidationError
from django.utils.translation import gettext

from . import conf
from .exceptions import ConfigurationError, SpecificationError
from .harness import SimConfig, SweepSpec
from .policies import GLOBAL_MW, PolicyConfig, policy_kinds
from .stochastic import eta_from_lifetime
from .topology import NetworkSpec


FREQUENCY_UNITS = {
    'hz': 1.0,
    'khz': 1e3,
    'mhz': 1e6,
    'ghz': 1e9,
}

TIME_UNITS = {
    's': 1.0,
    'ms': 1e-3,
    'us': 1e-6,
    'µs': 1e-6,
    'μs': 1e-6,
    'ns': 1e-9,
}

_QUANTITY = re.compile(r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S.*)?$')


def _split_quantity(value):
    if isinstance(value, bool):
        raise ValidationError(gettext('{!r} is not a number.').format(value))
    if isinstance(value, (int, float)):
        return float(value), None
    match = _QUANTITY.match(str(value))
    if not match:
        raise ValidationError(gettext('{!r} is not a number.').format(value))
    number, unit = match.groups()
    return float(number), unit.strip() if unit else None


def parse_time(value):
    """Seconds, from a number of seconds or a string such as ``"10 ms"``."""
    number, unit = _split_quantity(value)
    if unit is None:
        return number
    if unit not in TIME_UNITS:
        raise ValidationError(
            gettext('Unknown time unit {!r}; use one of {}.').format(unit, ', '.join(TIME_UNITS))
        )
    return number * TIME_UNITS[unit]


def parse_rate(value, dt=None):
    """
    Mean events per time step. Plain numbers already are; frequencies such
    as ``"300 kHz"`` are multiplied by the step duration ``dt``.
    """
    number, unit = _split_quantity(value)
    if unit is None:
        return number
    scale = FREQUENCY_UNITS.get(unit.lower())
    if scale is None:
        raise ValidationError(
            gettext('Unknown frequency unit {!r}; use Hz, kHz, MHz or GHz.').format(unit)
        )
    if dt is None:
        raise ValidationError(
            gettext('The rate {!r} has a unit, so the config must give dt.').format(value)
        )
    return number * scale * dt


def _policy_choices():
    return [(kind, kind) for kind in policy_kinds()]


def _triples(value, what):
    if not isinstance(value, (list, tuple)):
        raise ValidationError(gettext('{} must be a list.').format(what))
    for item in value:
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ValidationError(
                gettext('Every entry of {} must be [u, v, rate], got {!r}.').format(what, item)
            )
    return value


class SimConfigForm(forms.Form):
    nodes = forms.JSONField()
    edges = forms.JSONField()
    routes = forms.JSONField()
    users = forms.JSONField(required=False)
    eta = forms.FloatField(required=False, min_value=0.0, max_value=1.0)
    tau = forms.CharField(required=False)
    dt = forms.CharField(required=False)
    policy = forms.ChoiceField(choices=_policy_choices, required=False)
    gamma = forms.FloatField(required=False, min_value=0.0)
    steps = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0, max_value=(1 << 63) - 1)
    solver_budget = forms.IntegerField(required=False, min_value=1)

    def clean_nodes(self):
        nodes = self.cleaned_data['nodes']
        if not isinstance(nodes, list) or not all(isinstance(node, str) for node in nodes):
            raise ValidationError(gettext('nodes must be a list of node names.'))
        return nodes

    def clean_routes(self):
        routes = self.cleaned_data['routes']
        if not isinstance(routes, list) or not all(isinstance(route, (list, str)) for route in routes):
            raise ValidationError(gettext('routes must be a list of node sequences.'))
        # "ABCD" is shorthand for ["A", "B", "C", "D"]
        return [list(route) for route in routes]

    def clean_edges(self):
        return _triples(self.cleaned_data['edges'], 'edges')

    def clean_users(self):
        return _triples(self.cleaned_data['users'] or [], 'users')

    def clean(self):
        data = super().clean()
        if self.errors:
            return data

        dt = parse_time(data['dt']) if data.get('dt') else None
        data['dt'] = dt
        eta = data.get('eta')
        if data.get('tau'):
            if eta is not None:
                raise ValidationError(gettext('Give either eta or tau, not both.'))
            if dt is None:
                raise ValidationError(gettext('tau needs the step duration dt.'))
            data['tau'] = tau = parse_time(data['tau'])
            try:
                eta = eta_from_lifetime(tau, dt)
            except ValueError as exc:
                raise ValidationError(str(exc))
        else:
            data['tau'] = None
        if eta is None:
            eta = 1.0

        spec = NetworkSpec(
            nodes=data['nodes'],
            edges=[(u, v, parse_rate(alpha, dt)) for u, v, alpha in data['edges']],
            routes=data['routes'],
            users=[(u, v, parse_rate(beta, dt)) for u, v, beta in data['users']],
            eta=eta,
        )
        try:
            spec.validate()
        except SpecificationError as exc:
            raise ValidationError(exc.messages)
        data['spec'] = spec
        return data

    def to_sim_config(self):
        data = self.cleaned_data
        policy = PolicyConfig(
            kind=data.get('policy') or GLOBAL_MW,
            gamma=conf.get_gamma() if data.get('gamma') is None else data['gamma'],
            solver_budget=data.get('solver_budget') or conf.get_solver_node_budget(),
        )
        return SimConfig(
            spec=data['spec'],
            policy=policy,
            steps=data.get('steps') or conf.get_steps(),
            seed=data.get('seed') or 0,
            dt=data['dt'],
            tau=data['tau'],
        )


class SweepForm(forms.Form):
    axes = forms.JSONField()
    beta1 = forms.JSONField()
    beta2 = forms.JSONField()
    base_seed = forms.IntegerField(required=False, min_value=0)
    replications = forms.IntegerField(required=False, min_value=1)

    def __init__(self, *args, dt=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.dt = dt

    def _clean_grid(self, name):
        grid = self.cleaned_data[name]
        if not isinstance(grid, list) or len(grid) != 3:
            raise ValidationError(gettext('{} must be [min, max, count].').format(name))
        low, high, count = grid
        if isinstance(count, bool) or not isinstance(count, int):
            raise ValidationError(gettext('The grid count of {} must be an integer.').format(name))
        return (parse_rate(low, self.dt), parse_rate(high, self.dt), count)

    def clean_beta1(self):
        return self._clean_grid('beta1')

    def clean_beta2(self):
        return self._clean_grid('beta2')

    def clean_axes(self):
        axes = self.cleaned_data['axes']
        if (
            not isinstance(axes, list) or len(axes) != 2
            or not all(isinstance(pair, (list, str)) and len(pair) == 2 for pair in axes)
        ):
            raise ValidationError(gettext('axes must name two user pairs, e.g. [["A", "E"], ["B", "F"]].'))
        return [tuple(pair) for pair in axes]

    def clean(self):
        data = super().clean()
        if self.errors:
            return data
        try:
            data['sweep'] = SweepSpec(
                axes=data['axes'],
                beta1=data['beta1'],
                beta2=data['beta2'],
                base_seed=data.get('base_seed') or 0,
                replications=data.get('replications') or 1,
            )
        except ValueError as exc:
            raise ValidationError(str(exc))
        return data


class ExperimentConfig(NamedTuple):
    sim: SimConfig
    sweep: SweepSpec = None
    data: dict = None


def _form_messages(form, prefix=''):
    messages = []
    for field, errors in form.errors.items():
        label = prefix + field if field != '__all__' else prefix.rstrip('.')
        for error in errors:
            messages.append('{}: {}'.format(label, error) if label else error)
    return messages


SIM_KEYS = frozenset(SimConfigForm.base_fields)
OVERRIDABLE = ('steps', 'seed', 'policy', 'gamma', 'solver_budget')


def parse_config(data, source='<config>', **overrides):
    """
    Validates a decoded experiment document. Keyword overrides (``steps``,
    ``seed``, ``policy``, ``gamma``, ``solver_budget``) replace the file's
    values when not ``None``.
    """
    if not isinstance(data, dict):
        raise ConfigurationError(gettext('{}: the experiment must be a JSON object.').format(source))
    unknown = sorted(set(data) - SIM_KEYS - {'sweep'})
    if unknown:
        raise ConfigurationError(
            gettext('{}: unknown keys {}.').format(source, ', '.join(unknown))
        )
    data = dict(data)
    for key in OVERRIDABLE:
        if overrides.get(key) is not None:
            data[key] = overrides[key]

    form = SimConfigForm(data={key: value for key, value in data.items() if key != 'sweep'})
    if not form.is_valid():
        raise ConfigurationError(['{}: {}'.format(source, message) for message in _form_messages(form)])
    sim = form.to_sim_config()

    sweep = None
    if data.get('sweep') is not None:
        if not isinstance(data['sweep'], dict):
            raise ConfigurationError(gettext('{}: sweep must be a JSON object.').format(source))
        sweep_form = SweepForm(data=data['sweep'], dt=sim.dt)
        if not sweep_form.is_valid():
            raise ConfigurationError([
                '{}: {}'.format(source, message)
                for message in _form_messages(sweep_form, prefix='sweep.')
            ])
        sweep = sweep_form.cleaned_data['sweep']
    return ExperimentConfig(sim=sim, sweep=sweep, data=data)


def load_config(path, **overrides):
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigurationError(gettext('Cannot read {}: {}').format(path, exc.strerror or exc))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(gettext('{} is not valid JSON: {}').format(path, exc))
    return parse_config(data, source=str(path), **overrides)
