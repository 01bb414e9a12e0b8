import json
import math
import os
import string
from tempfile import mkdtemp

import numpy as np
from hypothesis import strategies as st

from qnet_scheduling.stochastic import RandomSource
from qnet_scheduling.topology import NetworkSpec


def line_spec(route='ABCD', alpha=1.0, eta=1.0, beta=0.0):
    """Single route over a chain of nodes, one user pair at its ends."""
    nodes = list(route)
    return NetworkSpec(
        nodes=nodes,
        edges=[(u, v, alpha) for u, v in zip(nodes, nodes[1:])],
        routes=[nodes],
        users=[(nodes[0], nodes[-1], beta)],
        eta=eta,
    )


def abcdef_spec(alpha=1.0, eta=0.9, beta1=0.0, beta2=0.0):
    """Two overlapping routes ABCDE and BCDEF competing for the BCDE core."""
    nodes = list('ABCDEF')
    return NetworkSpec(
        nodes=nodes,
        edges=[(u, v, alpha) for u, v in zip(nodes, nodes[1:])],
        routes=[list('ABCDE'), list('BCDEF')],
        users=[('A', 'E', beta1), ('B', 'F', beta2)],
        eta=eta,
    )


def abcdef_config(**extra):
    data = {
        'nodes': list('ABCDEF'),
        'edges': [[u, v, 1.0] for u, v in zip('ABCDE', 'BCDEF')],
        'routes': ['ABCDE', 'BCDEF'],
        'users': [['A', 'E', 0.1], ['B', 'F', 0.1]],
        'eta': 0.9,
        'steps': 50,
        'seed': 7,
    }
    data.update(extra)
    return data


@st.composite
def network_specs(draw, max_nodes=6, max_routes=3):
    """Random multi-route networks; every route is a simple path over declared edges."""
    n = draw(st.integers(min_value=3, max_value=max_nodes))
    nodes = list(string.ascii_uppercase[:n])
    routes = []
    for _index in range(draw(st.integers(min_value=1, max_value=max_routes))):
        length = draw(st.integers(min_value=2, max_value=n))
        route = draw(st.permutations(nodes))[:length]
        routes.append(route)

    position = {node: index for index, node in enumerate(nodes)}
    edges = {}
    endpoints = {}
    for route in routes:
        for u, v in zip(route, route[1:]):
            pair = tuple(sorted((u, v), key=position.get))
            edges.setdefault(pair, draw(st.sampled_from([0.0, 0.5, 1.0, 2.0])))
        pair = tuple(sorted((route[0], route[-1]), key=position.get))
        endpoints.setdefault(pair, draw(st.sampled_from([0.0, 0.1, 0.5])))
    return NetworkSpec(
        nodes=nodes,
        edges=[(u, v, alpha) for (u, v), alpha in edges.items()],
        routes=routes,
        users=[(u, v, beta) for (u, v), beta in endpoints.items()],
        eta=draw(st.sampled_from([1.0, 0.95, 0.8])),
    )


class ScriptedRandomSource(RandomSource):
    """
    Returns prescribed arrivals, losses and demands, step by step, e.g.
    ``[{'a': {'AB': 2}, 'l': {'CD': 1}}, {'l': {'AB': 1}}]``. Uniform
    draws still come from the seeded generator.
    """

    def __init__(self, ts, script, seed=0):
        super().__init__(seed)
        self._draws = []
        for step in script:
            for kind in ('a', 'l', 'b'):
                vector = np.zeros(ts.n_queues, dtype=np.int64)
                for label, count in step.get(kind, {}).items():
                    vector[ts.queue_index(tuple(label))] = count
                self._draws.append(vector)

    def poisson(self, means):
        return self._draws.pop(0)

    def binomial(self, counts, probability):
        return self._draws.pop(0)


def enumeration_size(inst):
    total = int(math.floor(inst.s.sum() + 1e-9))
    return math.comb(total + inst.dim, inst.dim)


def brute_force(inst):
    """
    Every feasible decision of a small instance, found by listing all
    nonnegative integer vectors with sum at most sum(s).

    :returns: (optimal objective, lexicographically smallest optimal r)
    """
    total = int(math.floor(inst.s.sum() + 1e-9))
    demand_rows = np.asarray(inst.n_tilde)
    caps = []
    for k in range(inst.dim):
        rows = np.flatnonzero(demand_rows[:, k])
        cap = total
        for row in rows:
            cap = min(cap, int(math.floor(inst.u[row] + 1e-9)))
        caps.append(cap)

    vectors = np.zeros((1, 0), dtype=np.int64)
    for k in range(inst.dim):
        sums = vectors.sum(axis=1)
        blocks = []
        for value in range(caps[k] + 1):
            keep = vectors[sums + value <= total]
            blocks.append(np.column_stack([keep, np.full(len(keep), value, dtype=np.int64)]))
        vectors = np.vstack(blocks)

    m_tilde = np.asarray(inst.m_tilde)
    feasible = np.all(-(vectors @ m_tilde.T) <= inst.s + 1e-9, axis=1)
    feasible &= np.all(-(vectors @ demand_rows.T) <= inst.u + 1e-9, axis=1)
    candidates = vectors[feasible]
    objectives = candidates @ inst.w
    best = objectives.min()
    optimal = candidates[objectives <= best + 1e-9]
    order = np.lexsort(optimal.T[::-1])
    return float(best), optimal[order[0]]


def temp_path(name):
    return os.path.join(mkdtemp(), name)


def write_config(data, name='experiment.json'):
    path = temp_path(name)
    with open(path, 'w') as handle:
        json.dump(data, handle)
    return path
