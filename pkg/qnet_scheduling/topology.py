"""
Compiles a declarative network description (nodes, fibered edges, service
routes and user pairs) into the bookkeeping the simulator runs on: the queue
index, the swap transitions the routes allow, the extended matrices M~ and N~
and the rank of every queue.
"""
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .exceptions import SpecificationError, UnknownNodeError, UnknownQueueError


logger = logging.getLogger(__name__)

CONSUME = 'consume'
SWAP = 'swap'


def _pair_label(pair, compact):
    return ''.join(pair) if compact else '-'.join(pair)


class Transition(NamedTuple):
    """
    Swap ``left[middle]right``: consumes (left, middle) and (middle, right)
    and produces (left, right). ``left`` precedes ``right`` in node order.
    """
    left: str
    middle: str
    right: str

    def label(self, compact=True):
        if compact:
            return '{}[{}]{}'.format(*self)
        return '{}-[{}]-{}'.format(*self)


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple
    edges: tuple
    routes: tuple
    users: tuple
    eta: float = 1.0

    def __post_init__(self):
        # accept lists straight from a parsed config file
        object.__setattr__(self, 'nodes', tuple(str(node) for node in self.nodes))
        object.__setattr__(self, 'edges', tuple(
            (str(u), str(v), float(alpha)) for u, v, alpha in self.edges
        ))
        object.__setattr__(self, 'routes', tuple(
            tuple(str(node) for node in route) for route in self.routes
        ))
        object.__setattr__(self, 'users', tuple(
            (str(u), str(v), float(beta)) for u, v, beta in self.users
        ))
        object.__setattr__(self, 'eta', float(self.eta))

    @cached_property
    def node_order(self):
        return {node: position for position, node in enumerate(self.nodes)}

    @property
    def compact_labels(self):
        return all(len(node) == 1 for node in self.nodes)

    def canonical(self, u, v):
        """Unordered pair (u, v) with endpoints sorted by node order."""
        if self.node_order[u] > self.node_order[v]:
            return (v, u)
        return (u, v)

    def validate(self):
        errors = []
        if not self.nodes:
            errors.append('The network has no nodes.')
        if len(set(self.nodes)) != len(self.nodes):
            errors.append('Node identifiers must be unique.')
        if not 0.0 < self.eta <= 1.0:
            errors.append('eta must lie in (0, 1], got {}.'.format(self.eta))
        if errors:
            raise SpecificationError(errors)

        known = self.node_order
        fibered = set()
        for u, v, alpha in self.edges:
            if u not in known or v not in known:
                errors.append('Edge ({}, {}) names an unknown node.'.format(u, v))
                continue
            if u == v:
                errors.append('Edge ({}, {}) is a self-loop.'.format(u, v))
                continue
            pair = self.canonical(u, v)
            if pair in fibered:
                errors.append('Edge ({}, {}) is declared twice.'.format(u, v))
            fibered.add(pair)
            if alpha < 0:
                errors.append('Edge ({}, {}) has a negative generation rate {}.'.format(u, v, alpha))

        endpoints = set()
        for route in self.routes:
            name = '-'.join(route)
            if len(route) < 2:
                errors.append('Route {} needs at least two nodes.'.format(name))
                continue
            unknown = [node for node in route if node not in known]
            if unknown:
                errors.append('Route {} names unknown nodes: {}.'.format(name, ', '.join(unknown)))
                continue
            if len(set(route)) != len(route):
                errors.append('Route {} visits a node twice.'.format(name))
                continue
            for u, v in zip(route, route[1:]):
                if self.canonical(u, v) not in fibered:
                    errors.append('Route {}: ({}, {}) is not a physical edge.'.format(name, u, v))
            endpoints.add(self.canonical(route[0], route[-1]))

        users = set()
        for u, v, beta in self.users:
            if u not in known or v not in known or u == v:
                errors.append('User pair ({}, {}) is not a pair of distinct known nodes.'.format(u, v))
                continue
            pair = self.canonical(u, v)
            if pair in users:
                errors.append('User pair ({}, {}) is declared twice.'.format(u, v))
            users.add(pair)
            if beta < 0:
                errors.append('User pair ({}, {}) has a negative demand rate {}.'.format(u, v, beta))
            if pair not in endpoints:
                errors.append('User pair ({}, {}) is not the endpoint pair of any route.'.format(u, v))

        if errors:
            raise SpecificationError(errors)

    def with_user_rates(self, rates):
        """
        Returns a copy with the demand rate of some user pairs replaced.

        :param rates: mapping of node pair to demand rate per step
        """
        wanted = {self.canonical(*pair): float(beta) for pair, beta in rates.items()}
        declared = {self.canonical(u, v) for u, v, _beta in self.users}
        missing = [pair for pair in wanted if pair not in declared]
        if missing:
            raise SpecificationError(
                'Not a user pair: {}.'.format(', '.join('({}, {})'.format(*pair) for pair in missing))
            )
        users = tuple(
            (u, v, wanted.get(self.canonical(u, v), beta))
            for u, v, beta in self.users
        )
        return replace(self, users=users)


@dataclass(frozen=True, eq=False)
class TransitionSystem:
    nodes: tuple
    queues: tuple
    physical: np.ndarray
    transitions: tuple
    m_tilde: np.ndarray
    n_tilde: np.ndarray
    ranks: np.ndarray
    alpha_vec: np.ndarray
    beta_vec: np.ndarray
    users: np.ndarray
    eta: float
    compact_labels: bool = True

    @property
    def n_queues(self):
        return len(self.queues)

    @property
    def n_transitions(self):
        return len(self.transitions)

    @property
    def dim(self):
        return self.n_transitions + self.n_queues

    @cached_property
    def _queue_positions(self):
        positions = {}
        for index, (u, v) in enumerate(self.queues):
            positions[(u, v)] = index
            positions[(v, u)] = index
        return positions

    def queue_index(self, pair):
        try:
            return self._queue_positions[tuple(pair)]
        except KeyError:
            raise UnknownQueueError('Unknown queue {}.'.format(pair)) from None

    def queue_label(self, index):
        return _pair_label(self.queues[index], self.compact_labels)

    def transition_label(self, index):
        return self.transitions[index].label(self.compact_labels)

    def variable_labels(self):
        """Labels of the decision vector: swaps then consumptions."""
        swaps = [self.transition_label(k) for k in range(self.n_transitions)]
        consumptions = ['c_' + self.queue_label(e) for e in range(self.n_queues)]
        return swaps + consumptions

    @cached_property
    def transition_queues(self):
        """(first input, second input, output) queue index arrays, one entry per transition."""
        first, second, output = [], [], []
        for left, middle, right in self.transitions:
            first.append(self.queue_index((left, middle)))
            second.append(self.queue_index((middle, right)))
            output.append(self.queue_index((left, right)))
        return (
            np.array(first, dtype=np.int64),
            np.array(second, dtype=np.int64),
            np.array(output, dtype=np.int64),
        )

    @cached_property
    def user_queues(self):
        return np.flatnonzero(self.users)

    def incident_queues(self, node):
        """Indices of every queue (physical or virtual) with ``node`` as an endpoint."""
        if node not in self.nodes:
            raise UnknownNodeError('Unknown node {}.'.format(node))
        return np.array(
            [index for index, pair in enumerate(self.queues) if node in pair],
            dtype=np.int64,
        )

    @cached_property
    def operation_order(self):
        """
        Execution order of decision components: ascending rank of the queue
        an operation feeds (the output queue for a swap, the queue itself for
        a consumption); inside a rank consumptions first, then swaps by index.
        """
        _first, _second, output = self.transition_queues
        keyed = [
            ((int(self.ranks[e]), 0, e), (CONSUME, e))
            for e in range(self.n_queues)
        ]
        keyed += [
            ((int(self.ranks[output[k]]), 1, k), (SWAP, k))
            for k in range(self.n_transitions)
        ]
        keyed.sort(key=lambda item: item[0])
        return tuple(operation for _key, operation in keyed)


def _compute_ranks(queues, physical, transitions, position, canonical):
    ranks = [0 if is_physical else None for is_physical in physical]
    changed = True
    while changed:
        changed = False
        for left, middle, right in transitions:
            first = ranks[position[canonical(left, middle)]]
            second = ranks[position[canonical(middle, right)]]
            if first is None or second is None:
                continue
            candidate = first + second + 1
            target = position[(left, right)]
            if ranks[target] is None or candidate < ranks[target]:
                ranks[target] = candidate
                changed = True
    unreachable = [queues[index] for index, rank in enumerate(ranks) if rank is None]
    if unreachable:
        raise SpecificationError(
            'Queues cannot be fed by any swap sequence: {}.'.format(unreachable)
        )
    return ranks


def build_transition_system(spec):
    """
    Every contiguous sub-path (v_a, v_b) of a route is a queue and every
    position triple a < b < c of a route is a transition v_a[v_b]v_c.
    Queues and transitions shared by several routes appear once.
    """
    spec.validate()
    order = spec.node_order

    route_pairs = set()
    triples = set()
    for route in spec.routes:
        for a, b in combinations(range(len(route)), 2):
            route_pairs.add(spec.canonical(route[a], route[b]))
        for a, b, c in combinations(range(len(route)), 3):
            left, middle, right = route[a], route[b], route[c]
            if order[left] > order[right]:
                left, right = right, left
            triples.add(Transition(left, middle, right))

    alpha_by_pair = {}
    for u, v, alpha in spec.edges:
        pair = spec.canonical(u, v)
        if pair in route_pairs:
            alpha_by_pair[pair] = alpha
        else:
            logger.warning('Edge (%s, %s) is not on any service route and is ignored.', u, v)
    physical_pairs = list(alpha_by_pair)

    provisional = physical_pairs + sorted(
        route_pairs.difference(physical_pairs),
        key=lambda pair: (order[pair[0]], order[pair[1]]),
    )
    provisional_position = {pair: index for index, pair in enumerate(provisional)}
    provisional_ranks = _compute_ranks(
        provisional,
        [index < len(physical_pairs) for index in range(len(provisional))],
        sorted(triples),
        provisional_position,
        spec.canonical,
    )
    rank_of = dict(zip(provisional, provisional_ranks))

    virtual_pairs = sorted(
        route_pairs.difference(physical_pairs),
        key=lambda pair: (rank_of[pair], order[pair[0]], order[pair[1]]),
    )
    queues = tuple(physical_pairs + virtual_pairs)
    position = {pair: index for index, pair in enumerate(queues)}

    transitions = tuple(sorted(
        triples,
        key=lambda t: (rank_of[(t.left, t.right)], order[t.left], order[t.middle], order[t.right]),
    ))

    n_queues = len(queues)
    n_transitions = len(transitions)
    m_tilde = np.zeros((n_queues, n_transitions + n_queues), dtype=np.int64)
    for column, (left, middle, right) in enumerate(transitions):
        m_tilde[position[spec.canonical(left, middle)], column] -= 1
        m_tilde[position[spec.canonical(middle, right)], column] -= 1
        m_tilde[position[(left, right)], column] += 1
    m_tilde[:, n_transitions:] = -np.eye(n_queues, dtype=np.int64)
    n_tilde = np.zeros_like(m_tilde)
    n_tilde[:, n_transitions:] = -np.eye(n_queues, dtype=np.int64)

    alpha_vec = np.zeros(n_queues)
    for pair, alpha in alpha_by_pair.items():
        alpha_vec[position[pair]] = alpha
    beta_vec = np.zeros(n_queues)
    users = np.zeros(n_queues, dtype=bool)
    for u, v, beta in spec.users:
        index = position[spec.canonical(u, v)]
        beta_vec[index] = beta
        users[index] = True

    physical = np.zeros(n_queues, dtype=bool)
    physical[:len(physical_pairs)] = True

    logger.debug(
        'Compiled %d queues and %d transitions from %d routes.',
        n_queues, n_transitions, len(spec.routes),
    )
    return TransitionSystem(
        nodes=spec.nodes,
        queues=queues,
        physical=physical,
        transitions=transitions,
        m_tilde=m_tilde,
        n_tilde=n_tilde,
        ranks=np.array([rank_of[pair] for pair in queues], dtype=np.int64),
        alpha_vec=alpha_vec,
        beta_vec=beta_vec,
        users=users,
        eta=spec.eta,
        compact_labels=spec.compact_labels,
    )


def queue_rank(ts, queue):
    """Minimum number of swaps that places one ebit in ``queue`` from an empty network."""
    return int(ts.ranks[ts.queue_index(queue)])
