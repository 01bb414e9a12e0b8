"""
Simulation driver and rate-region sweeps.

A sweep varies the demand rate of two commodities over a grid, runs one
simulation per grid point and replication (each with its own derived seed)
and reports the unserved fraction of demands per commodity.
"""
import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from PIL import Image, ImageDraw

from .dynamics import NetworkState, StepTrace, apply_step, observe_step, total_ebit_balance
from .exceptions import InfeasibleDecisionError, SimulationError, SolverBudgetExhausted, UnknownQueueError
from .policies import PolicyConfig, decide
from .stochastic import RandomSource, derive_seed
from .topology import build_transition_system


logger = logging.getLogger(__name__)

CSV_HEADER = [
    'beta1', 'beta2', 'replication', 'seed',
    'unserved1', 'unserved2',
    'served1', 'arrived1', 'served2', 'arrived2',
    'final_q_total', 'final_d_total',
]
METRICS = ('unserved1', 'unserved2', 'max')

LOW_COLOUR = (31, 40, 120)
HIGH_COLOUR = (253, 231, 37)
MISSING_COLOUR = (128, 128, 128)
BOUND_COLOUR = (255, 255, 255)


@dataclass(frozen=True)
class SimConfig:
    spec: object
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    steps: int = 10_000
    seed: int = 0
    dt: float = None
    tau: float = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError('steps must be at least 1, got {}.'.format(self.steps))


@dataclass(frozen=True)
class CommodityReport:
    pair: tuple
    arrived: int
    served: int

    @property
    def unserved_fraction(self):
        if not self.arrived:
            return 0.0
        return 1.0 - self.served / self.arrived


@dataclass(frozen=True)
class RunReport:
    policy: str
    seed: int
    steps: int
    commodities: tuple
    final_q_total: int
    final_d_total: int
    mean_queue_lengths: tuple
    ebit_balance: int
    wall_time: float = field(default=0.0, compare=False)

    def commodity(self, pair):
        for report in self.commodities:
            if set(report.pair) == set(pair):
                return report
        raise LookupError('No commodity {}.'.format(pair))


def _report(cfg, ts, state, wall_time):
    commodities = []
    for u, v, _beta in cfg.spec.users:
        e = ts.queue_index((u, v))
        commodities.append(CommodityReport(
            pair=ts.queues[e],
            arrived=int(state.arrived_demands[e]),
            served=int(state.served_demands[e]),
        ))
    means = state.mean_queue_lengths()
    return RunReport(
        policy=cfg.policy.kind,
        seed=cfg.seed,
        steps=cfg.steps,
        commodities=tuple(commodities),
        final_q_total=int(state.q.sum()),
        final_d_total=int(state.d.sum()),
        mean_queue_lengths=tuple(
            (ts.queue_label(e), float(means[e])) for e in range(ts.n_queues)
        ),
        ebit_balance=total_ebit_balance(state),
        wall_time=wall_time,
    )


def run_simulation(cfg, trace_path=None):
    ts = build_transition_system(cfg.spec)
    rng = RandomSource(cfg.seed)
    state = NetworkState.empty(ts)
    started = time.perf_counter()
    logger.info(
        'Simulating %d steps with %s (seed %d, %d queues, %d transitions).',
        cfg.steps, cfg.policy.kind, cfg.seed, ts.n_queues, ts.n_transitions,
    )
    with ExitStack() as stack:
        trace = None
        if trace_path:
            trace = stack.enter_context(StepTrace(trace_path, ts))
        for _step in range(cfg.steps):
            try:
                obs = observe_step(state, ts, rng)
                decision = decide(cfg.policy, state, obs, ts, rng)
                if trace is not None:
                    trace.record(state, decision)
                state = apply_step(state, ts, obs, decision)
            except (InfeasibleDecisionError, SolverBudgetExhausted, ValueError, LookupError) as exc:
                raise SimulationError(state.t, exc) from exc
    wall_time = time.perf_counter() - started
    logger.info('Finished %d steps in %.1f s.', cfg.steps, wall_time)
    return _report(cfg, ts, state, wall_time)


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    beta1: tuple
    beta2: tuple
    base_seed: int = 0
    replications: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'axes', tuple(tuple(pair) for pair in self.axes))
        object.__setattr__(self, 'beta1', tuple(self.beta1))
        object.__setattr__(self, 'beta2', tuple(self.beta2))
        if len(self.axes) != 2 or any(len(pair) != 2 for pair in self.axes):
            raise ValueError('A sweep needs exactly two user pairs as axes.')
        if set(self.axes[0]) == set(self.axes[1]):
            raise ValueError('The two sweep axes must be different user pairs.')
        for axis, name in enumerate(('beta1', 'beta2')):
            low, high, count = getattr(self, name)
            if int(count) < 1:
                raise ValueError('{} needs at least one grid point.'.format(name))
            if low < 0 or low > high:
                raise ValueError('{} must satisfy 0 <= min <= max, got {}..{}.'.format(name, low, high))
            # grid cells are keyed by rate, so every value must be distinct
            distinct = len(set(self.values(axis)))
            if distinct < int(count):
                raise ValueError(
                    '{} asks for {} grid points but {}..{} only holds {} distinct rates; '
                    'use count 1 for a fixed rate.'.format(name, int(count), low, high, distinct)
                )
        if self.replications < 1:
            raise ValueError('replications must be at least 1.')

    def values(self, axis):
        low, high, count = (self.beta1, self.beta2)[axis]
        return tuple(round(float(value), 12) for value in np.linspace(low, high, int(count)))


@dataclass(frozen=True)
class SweepPoint:
    beta1: float
    beta2: float
    replication: int
    seed: int
    unserved1: float = None
    unserved2: float = None
    served1: int = None
    arrived1: int = None
    served2: int = None
    arrived2: int = None
    final_q_total: int = None
    final_d_total: int = None
    error: str = field(default=None, compare=False)

    @property
    def failed(self):
        return self.unserved1 is None

    def metric(self, name):
        if self.failed:
            return math.nan
        if name == 'max':
            return max(self.unserved1, self.unserved2)
        return getattr(self, name)


@dataclass(frozen=True)
class SweepResult:
    beta1_values: tuple
    beta2_values: tuple
    points: tuple
    axes: tuple = field(default=(), compare=False)
    policy: str = field(default='', compare=False)
    alpha: float = field(default=None, compare=False)

    @property
    def failures(self):
        return [point for point in self.points if point.failed]

    def grid(self, metric='max'):
        """Mean of ``metric`` over replications, indexed [beta1, beta2]; NaN where every run failed."""
        if metric not in METRICS:
            raise ValueError('Unknown metric {!r}; choose one of {}.'.format(metric, ', '.join(METRICS)))
        index1 = {value: i for i, value in enumerate(self.beta1_values)}
        index2 = {value: i for i, value in enumerate(self.beta2_values)}
        totals = np.zeros((len(index1), len(index2)))
        counts = np.zeros((len(index1), len(index2)))
        for point in self.points:
            value = point.metric(metric)
            if math.isnan(value):
                continue
            cell = (index1[point.beta1], index2[point.beta2])
            totals[cell] += value
            counts[cell] += 1
        with np.errstate(invalid='ignore', divide='ignore'):
            return np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)


@dataclass(frozen=True)
class _SweepJob:
    beta1: float
    beta2: float
    replication: int
    cfg: SimConfig
    axes: tuple


def _failed_point(job, exc):
    return SweepPoint(
        beta1=job.beta1, beta2=job.beta2, replication=job.replication,
        seed=job.cfg.seed, error=str(exc) or type(exc).__name__,
    )


def _run_job(job):
    try:
        report = run_simulation(job.cfg)
    except (SimulationError, ValidationError, ValueError) as exc:
        logger.warning(
            'Sweep point beta=(%g, %g) replication %d failed: %s',
            job.beta1, job.beta2, job.replication, exc,
        )
        return _failed_point(job, exc)
    except Exception as exc:
        logger.exception(
            'Sweep point beta=(%g, %g) replication %d crashed.',
            job.beta1, job.beta2, job.replication,
        )
        return _failed_point(job, exc)
    first = report.commodity(job.axes[0])
    second = report.commodity(job.axes[1])
    return SweepPoint(
        beta1=job.beta1,
        beta2=job.beta2,
        replication=job.replication,
        seed=job.cfg.seed,
        unserved1=first.unserved_fraction,
        unserved2=second.unserved_fraction,
        served1=first.served,
        arrived1=first.arrived,
        served2=second.served,
        arrived2=second.arrived,
        final_q_total=report.final_q_total,
        final_d_total=report.final_d_total,
    )


def generation_rate(spec):
    """Smallest physical generation rate: the alpha of the ideal (alpha, 0)-(0, alpha) bound."""
    rates = [alpha for _u, _v, alpha in spec.edges]
    return float(min(rates)) if rates else None


def run_sweep(sweep, base_cfg, workers=1):
    """
    Runs every grid point and replication. Point seeds derive from
    (base_seed, grid index, replication) only, so the result does not depend
    on ``workers`` or on the order in which workers finish.
    """
    ts = build_transition_system(base_cfg.spec)
    for pair in sweep.axes:
        try:
            is_user = ts.users[ts.queue_index(pair)]
        except UnknownQueueError:
            is_user = False
        if not is_user:
            raise ValueError('Sweep axis {} is not a user pair.'.format(pair))
    values1 = sweep.values(0)
    values2 = sweep.values(1)

    jobs = []
    for i1, beta1 in enumerate(values1):
        for i2, beta2 in enumerate(values2):
            grid_index = i1 * len(values2) + i2
            spec = base_cfg.spec.with_user_rates({sweep.axes[0]: beta1, sweep.axes[1]: beta2})
            for replication in range(sweep.replications):
                cfg = replace(
                    base_cfg,
                    spec=spec,
                    seed=derive_seed(sweep.base_seed, grid_index, replication),
                )
                jobs.append(_SweepJob(beta1, beta2, replication, cfg, sweep.axes))

    logger.info(
        'Sweeping %dx%d grid, %d replications, %d jobs on %d workers.',
        len(values1), len(values2), sweep.replications, len(jobs), workers,
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_job, jobs))
    else:
        points = [_run_job(job) for job in jobs]

    return SweepResult(
        beta1_values=values1,
        beta2_values=values2,
        points=tuple(points),
        axes=sweep.axes,
        policy=base_cfg.policy.kind,
        alpha=generation_rate(base_cfg.spec),
    )


def _csv_value(value):
    if value is None:
        return ''
    if isinstance(value, float):
        # shortest digits that read back to the same float, never exponent notation
        return np.format_float_positional(value, trim='0')
    return value


def write_csv(result, path):
    try:
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(CSV_HEADER)
            for point in result.points:
                writer.writerow([_csv_value(getattr(point, column)) for column in CSV_HEADER])
    except OSError as exc:
        raise OSError('Cannot write sweep results to {}: {}'.format(path, exc)) from exc


def _parse(value, kind):
    if value == '':
        return None
    return kind(value)


_COLUMN_TYPES = {
    'beta1': float, 'beta2': float, 'replication': int, 'seed': int,
    'unserved1': float, 'unserved2': float,
}


def read_csv(path, axes=(), alpha=None):
    try:
        with open(path, newline='') as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        raise OSError('Cannot read sweep results from {}: {}'.format(path, exc)) from exc
    points = tuple(
        SweepPoint(**{
            column: _parse(row[column], _COLUMN_TYPES.get(column, int))
            for column in CSV_HEADER
        })
        for row in rows
    )
    return SweepResult(
        beta1_values=tuple(sorted({point.beta1 for point in points})),
        beta2_values=tuple(sorted({point.beta2 for point in points})),
        points=points,
        axes=tuple(axes),
        alpha=alpha,
    )


def _colour(value):
    if math.isnan(value):
        return MISSING_COLOUR
    value = min(max(value, 0.0), 1.0)
    return tuple(
        int(round(low + (high - low) * value))
        for low, high in zip(LOW_COLOUR, HIGH_COLOUR)
    )


def render_heatmap(result, path, metric='max', cell_size=32, show_bound=True):
    """
    Writes the grid as a raster: beta1 grows to the right, beta2 upwards,
    colour runs from dark blue (all served) to yellow (nothing served). The
    ideal (alpha, 0)-(0, alpha) bound is drawn over it when known.
    """
    grid = result.grid(metric)
    if grid.size == 0:
        raise ValueError('Cannot render an empty sweep.')
    columns, rows = grid.shape
    image = Image.new('RGB', (columns * cell_size, rows * cell_size), MISSING_COLOUR)
    draw = ImageDraw.Draw(image)
    for i1 in range(columns):
        for i2 in range(rows):
            left = i1 * cell_size
            top = (rows - 1 - i2) * cell_size
            draw.rectangle(
                (left, top, left + cell_size - 1, top + cell_size - 1),
                fill=_colour(grid[i1, i2]),
            )

    if show_bound and result.alpha and columns > 1 and rows > 1:
        values1, values2 = result.beta1_values, result.beta2_values
        step1 = (values1[-1] - values1[0]) / (columns - 1)
        step2 = (values2[-1] - values2[0]) / (rows - 1)

        def pixel(beta1, beta2):
            x = cell_size / 2 + (beta1 - values1[0]) / step1 * cell_size
            y = rows * cell_size - (cell_size / 2 + (beta2 - values2[0]) / step2 * cell_size)
            return (x, y)

        draw.line([pixel(result.alpha, 0.0), pixel(0.0, result.alpha)], fill=BOUND_COLOUR, width=2)

    path = Path(path)
    try:
        image.save(path, format=None if path.suffix else 'PNG')
    except OSError as exc:
        raise OSError('Cannot write heatmap to {}: {}'.format(path, exc)) from exc
    return image
