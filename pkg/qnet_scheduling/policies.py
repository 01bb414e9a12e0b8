"""
Scheduling policies. Every policy maps the start-of-step state, the step's
observation and the transition system to a decision that ``apply_step``
accepts without clamping.

* greedy: serve what can be served, then swap uniformly at random among the
  route transitions whose inputs are both available.
* global_mw: Max-Weight with full knowledge of the step.
* local_mw: each node solves the Max-Weight program on its own information
  set, with expectations for remote queues; proposals are blended and
  executed in ascending rank order.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import Decision, availability
from .ilp import DEFAULT_NODE_BUDGET, IlpInstance, solve
from .topology import CONSUME


logger = logging.getLogger(__name__)

GREEDY = 'greedy'
GLOBAL_MW = 'global_mw'
LOCAL_MW = 'local_mw'

_REGISTRY = {}


def register_policy(kind):
    """Registers ``decide(state, obs, ts, cfg, rng)`` under ``kind``."""
    def decorator(function):
        _REGISTRY[kind] = function
        return function
    return decorator


def policy_kinds():
    return tuple(_REGISTRY)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = GLOBAL_MW
    gamma: float = 1.0
    solver_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if self.kind not in _REGISTRY:
            raise ValueError('Unknown policy {!r}; choose one of {}.'.format(
                self.kind, ', '.join(policy_kinds()),
            ))
        if self.gamma < 0:
            raise ValueError('gamma must be nonnegative, got {}.'.format(self.gamma))
        if self.solver_budget < 1:
            raise ValueError('solver_budget must be positive.')


def mw_weights(ts, ebit_supply, demand_supply, gamma):
    """w = gamma (d + b)^T N~ + (q - l + a)^T M~, or its conditional expectation."""
    return gamma * (demand_supply @ ts.n_tilde) + ebit_supply @ ts.m_tilde


def _serve_users(ts, r, ebit, demand):
    users = ts.user_queues
    served = np.minimum(ebit[users], demand[users])
    ebit[users] -= served
    demand[users] -= served
    r[ts.n_transitions + users] += served


def greedy_decide(state, obs, ts, rng):
    ebit, demand = availability(state, obs)
    ebit = ebit.copy()
    demand = demand.copy()
    r = np.zeros(ts.dim, dtype=np.int64)

    # user service first
    _serve_users(ts, r, ebit, demand)

    first, second, output = ts.transition_queues
    while ts.n_transitions:
        ready = np.flatnonzero((ebit[first] >= 1) & (ebit[second] >= 1))
        if not ready.size:
            break
        k = ready[rng.integers(ready.size)]
        ebit[first[k]] -= 1
        ebit[second[k]] -= 1
        ebit[output[k]] += 1
        r[k] += 1

    # end-to-end pairs produced by this step's swaps
    _serve_users(ts, r, ebit, demand)
    return Decision(r=r)


def global_mw_decide(state, obs, ts, cfg):
    ebit, demand = availability(state, obs)
    ebit = ebit.astype(float)
    demand = demand.astype(float)
    instance = IlpInstance(
        w=mw_weights(ts, ebit, demand, cfg.gamma),
        m_tilde=ts.m_tilde,
        n_tilde=ts.n_tilde,
        s=ebit,
        u=demand,
    )
    return solve(instance, budget=cfg.solver_budget)


@dataclass(frozen=True, eq=False)
class InfoSet:
    """
    What node ``node`` knows when it decides: the start-of-step queues, the
    exact arrivals and losses of the queues incident to it, and the means
    alpha, beta, eta for everything else.
    """
    node: str
    exact_edges: np.ndarray
    q: np.ndarray
    d: np.ndarray
    a: np.ndarray
    l: np.ndarray  # noqa: E741
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    eta: float

    @property
    def exact_mask(self):
        mask = np.zeros(self.q.shape, dtype=bool)
        mask[self.exact_edges] = True
        return mask

    def expected_ebit_supply(self):
        """E[q - l + a | I]: exact on incident queues, E[l] = (1 - eta) q elsewhere."""
        mask = self.exact_mask
        losses = np.where(mask, self.l, (1.0 - self.eta) * self.q)
        arrivals = np.where(mask, self.a, self.alpha)
        return self.q - losses + arrivals

    def expected_demand_supply(self):
        mask = self.exact_mask
        return self.d + np.where(mask, self.b, self.beta)


def build_info_set(state, obs, ts, node):
    exact = ts.incident_queues(node)
    mask = np.zeros(ts.n_queues, dtype=bool)
    mask[exact] = True
    return InfoSet(
        node=node,
        exact_edges=exact,
        q=state.q.copy(),
        d=state.d.copy(),
        a=np.where(mask, obs.a, 0),
        l=np.where(mask, obs.l, 0),
        b=np.where(mask, obs.b, 0),
        alpha=ts.alpha_vec,
        beta=ts.beta_vec,
        eta=ts.eta,
    )


def local_mw_node_decide(info, ts, cfg):
    ebit = np.maximum(info.expected_ebit_supply().astype(float), 0.0)
    demand = np.maximum(info.expected_demand_supply().astype(float), 0.0)
    instance = IlpInstance(
        w=mw_weights(ts, ebit, demand, cfg.gamma),
        m_tilde=ts.m_tilde,
        n_tilde=ts.n_tilde,
        s=ebit,
        u=demand,
    )
    return solve(instance, budget=cfg.solver_budget)


def _proposed(proposals, node, index):
    proposal = proposals.get(node)
    if proposal is None:
        return 0
    return int(proposal.r[index])


def blend(proposals, state, obs, ts):
    """
    Merges per-node proposals into one executable decision. A swap is taken
    from its middle node, a consumption is the smaller of its two endpoint
    proposals. Operations run in ascending rank order against the actual
    availability, so a swap whose inputs are missing fails and starves the
    operations that relied on its output.
    """
    ebit, demand = availability(state, obs)
    ebit = ebit.copy()
    demand = demand.copy()
    first, second, output = ts.transition_queues
    n_transitions = ts.n_transitions

    wanted = np.zeros(ts.dim, dtype=np.int64)
    for k, transition in enumerate(ts.transitions):
        wanted[k] = _proposed(proposals, transition.middle, k)
    for e, (u, v) in enumerate(ts.queues):
        index = n_transitions + e
        wanted[index] = min(_proposed(proposals, u, index), _proposed(proposals, v, index))

    r = np.zeros(ts.dim, dtype=np.int64)
    for kind, index in ts.operation_order:
        if kind == CONSUME:
            column = n_transitions + index
            executed = min(wanted[column], ebit[index], demand[index])
            ebit[index] -= executed
            demand[index] -= executed
            r[column] += executed
        else:
            executed = min(wanted[index], ebit[first[index]], ebit[second[index]])
            ebit[first[index]] -= executed
            ebit[second[index]] -= executed
            ebit[output[index]] += executed
            r[index] += executed

    # consumptions that were waiting on ebits swapped in during this step
    remaining = wanted[n_transitions:] - r[n_transitions:]
    top_up = np.minimum(remaining, np.minimum(ebit, demand))
    top_up = np.maximum(top_up, 0)
    r[n_transitions:] += top_up

    shortfall = int((wanted - r).sum())
    if shortfall:
        logger.debug('Blending dropped %d proposed operations.', shortfall)
    return Decision(r=r)


def decision_owners(ts):
    """Nodes whose proposal feeds the blend: swap middles and user endpoints."""
    owners = {transition.middle for transition in ts.transitions}
    for e in ts.user_queues:
        owners.update(ts.queues[e])
    return [node for node in ts.nodes if node in owners]


def local_mw_decide(state, obs, ts, cfg):
    proposals = {}
    for node in decision_owners(ts):
        info = build_info_set(state, obs, ts, node)
        proposals[node] = local_mw_node_decide(info, ts, cfg)
    return blend(proposals, state, obs, ts)


@register_policy(GREEDY)
def _greedy(state, obs, ts, cfg, rng):
    return greedy_decide(state, obs, ts, rng)


@register_policy(GLOBAL_MW)
def _global_mw(state, obs, ts, cfg, rng):
    return global_mw_decide(state, obs, ts, cfg)


@register_policy(LOCAL_MW)
def _local_mw(state, obs, ts, cfg, rng):
    return local_mw_decide(state, obs, ts, cfg)


def decide(cfg, state, obs, ts, rng):
    return _REGISTRY[cfg.kind](state, obs, ts, cfg, rng)
