"""
Network state and the per-step update

    q(t+1) = q(t) - l(t) + a(t) + M~ r(t)
    d(t+1) = d(t) + b(t) + N~ r(t)

Losses are drawn against the start-of-step queue only; ebits arriving during
the step are not subject to loss, and the decision sees q - l + a.
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleDecisionError
from .stochastic import sample_loss_vector


logger = logging.getLogger(__name__)


def _zeros(size):
    return np.zeros(size, dtype=np.int64)


@dataclass
class NetworkState:
    q: np.ndarray
    d: np.ndarray
    arrived_demands: np.ndarray
    served_demands: np.ndarray
    # running sum of end-of-step queue lengths, for time averages
    queue_length_sum: np.ndarray
    t: int = 0
    generated_ebits: int = 0
    lost_ebits: int = 0
    consumed_ebits: int = 0
    swaps_executed: int = 0

    @classmethod
    def empty(cls, ts):
        size = ts.n_queues
        return cls(
            q=_zeros(size),
            d=_zeros(size),
            arrived_demands=_zeros(size),
            served_demands=_zeros(size),
            queue_length_sum=_zeros(size),
        )

    @classmethod
    def from_queues(cls, ts, q=None, d=None):
        state = cls.empty(ts)
        if q is not None:
            state.q = np.array(q, dtype=np.int64)
        if d is not None:
            state.d = np.array(d, dtype=np.int64)
            state.arrived_demands = state.d.copy()
        # stock handed in from outside counts as generated for the balance audit
        state.generated_ebits = int(state.q.sum())
        return state

    def mean_queue_lengths(self):
        if self.t == 0:
            return self.q.astype(float)
        return self.queue_length_sum / self.t


@dataclass(frozen=True)
class StepObservation:
    a: np.ndarray
    l: np.ndarray  # noqa: E741
    b: np.ndarray

    @classmethod
    def quiet(cls, ts):
        return cls(a=_zeros(ts.n_queues), l=_zeros(ts.n_queues), b=_zeros(ts.n_queues))


@dataclass(frozen=True)
class Decision:
    r: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, ts):
        return cls(r=_zeros(ts.dim))

    @classmethod
    def from_counts(cls, ts, swaps=None, consumptions=None):
        """
        Builds a decision from label mappings, e.g. ``{'A[B]C': 1}`` and
        ``{'AD': 1}``.
        """
        r = _zeros(ts.dim)
        labels = {ts.transition_label(k): k for k in range(ts.n_transitions)}
        for label, count in (swaps or {}).items():
            r[labels[label]] = count
        queues = {ts.queue_label(e): e for e in range(ts.n_queues)}
        for label, count in (consumptions or {}).items():
            r[ts.n_transitions + queues[label]] = count
        return cls(r=r)

    def swaps(self, ts):
        return self.r[:ts.n_transitions]

    def consumptions(self, ts):
        return self.r[ts.n_transitions:]


def observe_step(state, ts, rng):
    """Draws a(t), l(t), b(t); the call order on ``rng`` is fixed."""
    a = rng.poisson(ts.alpha_vec)
    losses = sample_loss_vector(rng, state.q, ts.eta)
    b = rng.poisson(ts.beta_vec)
    return StepObservation(a=a, l=losses, b=b)


def availability(state, obs):
    """(q - l + a, d + b): what a decision may draw on this step."""
    return state.q - obs.l + obs.a, state.d + obs.b


def _first_violation(needed, available):
    excess = np.flatnonzero(needed > available)
    if excess.size:
        return int(excess[0])
    return None


def apply_step(state, ts, obs, decision):
    r = np.asarray(decision.r)
    if r.shape != (ts.dim,):
        raise InfeasibleDecisionError(
            'Decision has shape {}, expected ({},).'.format(r.shape, ts.dim)
        )
    if not np.issubdtype(r.dtype, np.integer):
        raise InfeasibleDecisionError('Decision components must be integers.')
    if np.any(r < 0):
        index = int(np.flatnonzero(r < 0)[0])
        raise InfeasibleDecisionError(
            'Decision component {} is negative.'.format(ts.variable_labels()[index])
        )

    ebit_avail, demand_avail = availability(state, obs)
    ebit_needed = -(ts.m_tilde @ r)
    violated = _first_violation(ebit_needed, ebit_avail)
    if violated is not None:
        raise InfeasibleDecisionError(
            'Decision draws {} ebits from queue {} but only {} are available.'.format(
                ebit_needed[violated], ts.queue_label(violated), ebit_avail[violated],
            )
        )
    demand_needed = -(ts.n_tilde @ r)
    violated = _first_violation(demand_needed, demand_avail)
    if violated is not None:
        raise InfeasibleDecisionError(
            'Decision serves {} demands on queue {} but only {} are pending.'.format(
                demand_needed[violated], ts.queue_label(violated), demand_avail[violated],
            )
        )

    q = ebit_avail + ts.m_tilde @ r
    d = demand_avail + ts.n_tilde @ r
    consumed = r[ts.n_transitions:]
    return NetworkState(
        q=q,
        d=d,
        arrived_demands=state.arrived_demands + obs.b,
        served_demands=state.served_demands + consumed,
        queue_length_sum=state.queue_length_sum + q,
        t=state.t + 1,
        generated_ebits=state.generated_ebits + int(obs.a.sum()),
        lost_ebits=state.lost_ebits + int(obs.l.sum()),
        consumed_ebits=state.consumed_ebits + int(consumed.sum()),
        swaps_executed=state.swaps_executed + int(r[:ts.n_transitions].sum()),
    )


def total_ebit_balance(state):
    """Zero whenever every ebit is accounted for: each swap nets one ebit away."""
    return (
        state.generated_ebits
        - state.lost_ebits
        - state.consumed_ebits
        - state.swaps_executed
        - int(state.q.sum())
    )


def demand_balance(state):
    return int(state.arrived_demands.sum() - state.served_demands.sum() - state.d.sum())


class StepTrace:
    """
    CSV trace of start-of-step queues and the decision taken, one row per
    step. Use as a context manager.
    """

    def __init__(self, path, ts):
        self.path = path
        self.ts = ts
        self._handle = None
        self._writer = None

    def __enter__(self):
        self._handle = open(self.path, 'w', newline='')
        self._writer = csv.writer(self._handle, lineterminator='\n')
        labels = [self.ts.queue_label(e) for e in range(self.ts.n_queues)]
        self._writer.writerow(
            ['step']
            + ['q_' + label for label in labels]
            + ['d_' + label for label in labels]
            + ['r_' + label for label in self.ts.variable_labels()]
        )
        return self

    def __exit__(self, *exc_info):
        self._handle.close()
        self._handle = None
        self._writer = None

    def record(self, state, decision):
        self._writer.writerow(
            [state.t] + state.q.tolist() + state.d.tolist() + np.asarray(decision.r).tolist()
        )
