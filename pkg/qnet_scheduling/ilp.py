"""
Exact solver for the per-step scheduling program

    min  w . r
    s.t. -M~ r <= s,  -N~ r <= u,  r integer >= 0

Depth-first branch and bound over the decision components in column order.
Values are tried in ascending order and an incumbent is only replaced by a
strictly better one, so among optimal decisions the lexicographically
smallest is returned.

Searches that run long switch on a second bound built from the dual prices
of the LP relaxation, and stop as soon as the incumbent meets a proven lower
bound on the optimum.
"""
import logging
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from math import ceil, floor, inf

import numpy as np
from scipy.optimize import linprog

from .dynamics import Decision
from .exceptions import SolverBudgetExhausted


logger = logging.getLogger(__name__)

EPS = 1e-9
DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_LP_BOUND_AFTER = 10_000


@dataclass(frozen=True, eq=False)
class IlpInstance:
    w: np.ndarray
    m_tilde: np.ndarray
    n_tilde: np.ndarray
    s: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        for name in ('w', 's', 'u'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m_tilde = np.asarray(self.m_tilde)
        n_tilde = np.asarray(self.n_tilde)
        if m_tilde.ndim != 2 or n_tilde.shape != m_tilde.shape:
            raise ValueError(
                'M~ and N~ must be matrices of equal shape, got {} and {}.'.format(
                    m_tilde.shape, n_tilde.shape,
                )
            )
        rows, columns = m_tilde.shape
        if self.w.shape != (columns,):
            raise ValueError('w has shape {}, expected ({},).'.format(self.w.shape, columns))
        if self.s.shape != (rows,) or self.u.shape != (rows,):
            raise ValueError(
                's and u must have shape ({},), got {} and {}.'.format(rows, self.s.shape, self.u.shape)
            )
        if np.any(self.s < -EPS) or np.any(self.u < -EPS):
            raise ValueError('Supplies must be nonnegative.')

    @property
    def dim(self):
        return self.m_tilde.shape[1]


class _Structure:
    """Sparse view of the stacked constraints [-M~; -N~] r <= [s; u]."""

    def __init__(self, inst):
        self.matrix = constraints = np.vstack([-np.asarray(inst.m_tilde), -np.asarray(inst.n_tilde)])
        self.h = np.concatenate([inst.s, inst.u]).tolist()
        self.n_rows, self.dim = constraints.shape
        self.uses = []
        self.produces = []
        for k in range(self.dim):
            column = constraints[:, k]
            self.uses.append([(int(row), int(column[row])) for row in np.flatnonzero(column > 0)])
            self.produces.append([(int(row), int(-column[row])) for row in np.flatnonzero(column < 0)])
        # the ebit rows of M~ sum to -1 per column, so sum(r) <= sum(s)
        self.total = max(int(floor(float(np.sum(inst.s)) + EPS)), 0)

    def bounds(self):
        producers_of_row = [[] for _row in range(self.n_rows)]
        for k in range(self.dim):
            for row, _c in self.produces[k]:
                producers_of_row[row].append(k)
        graph = {
            k: {p for row, _c in self.uses[k] for p in producers_of_row[row]}
            for k in range(self.dim)
        }
        try:
            order = list(TopologicalSorter(graph).static_order())
        except CycleError:
            order = None

        inflow = [0.0] * self.n_rows
        bounds = [0] * self.dim
        if order is None:
            # producers feed each other in a loop: only the global cap is safe
            for k in range(self.dim):
                for row, c in self.produces[k]:
                    inflow[row] = inf
        for k in order or range(self.dim):
            limit = self.total
            for row, c in self.uses[k]:
                available = self.h[row] + inflow[row]
                if available != inf:
                    limit = min(limit, int(floor(available / c + EPS)))
            bounds[k] = max(limit, 0)
            if order is not None:
                for row, c in self.produces[k]:
                    inflow[row] += c * bounds[k]
        return bounds


def upper_bounds(inst):
    """
    Per-component bounds no feasible decision exceeds: a component is limited
    by each queue it draws from, counting that queue's supply plus whatever
    the swaps feeding it could add this step, and by the total supply.
    """
    return np.array(_Structure(inst).bounds(), dtype=np.int64)


class BranchAndBound:
    """
    One search over ``inst``. ``nodes`` counts the visited nodes once
    ``run()`` returns; ``lp_bound_after=None`` keeps the combinatorial
    bounds only.
    """

    def __init__(self, inst, budget=DEFAULT_NODE_BUDGET, lp_bound_after=DEFAULT_LP_BOUND_AFTER):
        self.structure = structure = _Structure(inst)
        self.weights = inst.w
        self.w = inst.w.tolist()
        self.uses = structure.uses
        self.produces = structure.produces
        self.ub = structure.bounds()
        self.active = [k for k in range(structure.dim) if self.ub[k] > 0]
        self.budget = budget
        self.lp_bound_after = lp_bound_after
        self.nodes = 0

        self.res = list(structure.h)
        self.fin = [0.0] * structure.n_rows
        for k in self.active:
            for row, c in self.produces[k]:
                self.fin[row] += c * self.ub[k]
        self.x = [0] * structure.dim
        self.best = None
        self.best_objective = inf
        self.target = 0.0

        # integer weights give integer objectives, so bounds round up
        self.integral = bool(np.all(inst.w == np.round(inst.w)))
        self.proven_bound = -inf
        self.proven = False
        self.priced = False
        self.price_tail = None
        self.prices = ()

    def _shift(self, k, value):
        res = self.res
        for row, c in self.uses[k]:
            res[row] -= c * value
        for row, c in self.produces[k]:
            res[row] += c * value

    def _dive(self):
        res = list(self.structure.h)
        objective = 0.0
        for k in self.active:
            if self.w[k] >= 0:
                continue
            value = self.ub[k]
            for row, c in self.uses[k]:
                value = min(value, int(floor(res[row] / c + EPS)))
            if value <= 0:
                continue
            for row, c in self.uses[k]:
                res[row] -= c * value
            for row, c in self.produces[k]:
                res[row] += c * value
            objective += self.w[k] * value
        return objective

    def _prove(self, bound):
        if self.integral:
            bound = ceil(bound - 1e-6)
        self.proven_bound = max(self.proven_bound, bound)
        if self.best is not None and self.best_objective <= self.proven_bound + EPS:
            self.proven = True

    def _price_rows(self):
        """
        Lagrangian bound from the LP relaxation's row duals: for any prices
        y >= 0 the remaining objective is at least
        sum(min(0, w_k + y.A_k) * ub_k) - y.res over the free components.
        """
        self.priced = True
        if not self.active:
            return
        structure = self.structure
        result = linprog(
            self.weights,
            A_ub=structure.matrix,
            b_ub=structure.h,
            bounds=[(0, bound) for bound in self.ub],
            method='highs',
        )
        if result.status != 0:
            logger.debug('LP relaxation not solved (%s), keeping the combinatorial bounds.', result.message)
            return
        prices = np.maximum(-np.asarray(result.ineqlin.marginals, dtype=float), 0.0)
        reduced = self.weights + structure.matrix.T @ prices
        tail = [0.0] * (len(self.active) + 1)
        for position in range(len(self.active) - 1, -1, -1):
            k = self.active[position]
            tail[position] = tail[position + 1] + min(0.0, float(reduced[k])) * self.ub[k]
        self.price_tail = tail
        self.prices = [(row, float(price)) for row, price in enumerate(prices) if price > 0.0]
        logger.debug(
            'Priced %d rows after %d nodes, LP value %g.', len(self.prices), self.nodes, result.fun,
        )
        self._prove(tail[0] - sum(price * structure.h[row] for row, price in self.prices))

    def _lower_bound(self, position):
        res, fin = self.res, self.fin
        boxed = 0.0
        pooled = 0.0
        cheapest = {}
        for k in self.active[position:]:
            weight = self.w[k]
            if weight >= 0:
                continue
            uses = self.uses[k]
            limit = self.ub[k]
            if not uses:
                boxed += weight * limit
                pooled += weight * limit
                continue
            share = weight / len(uses)
            for row, c in uses:
                limit = min(limit, int(floor((res[row] + fin[row]) / c + EPS)))
                rate = share / c
                if rate < cheapest.get(row, 0.0):
                    cheapest[row] = rate
            boxed += weight * max(limit, 0)
        for row, rate in cheapest.items():
            pooled += rate * max(res[row] + fin[row], 0.0)
        if self.price_tail is None:
            return max(boxed, pooled)
        priced = self.price_tail[position] - sum(price * res[row] for row, price in self.prices)
        return max(boxed, pooled, priced)

    def _record(self, objective):
        self.best = list(self.x)
        self.best_objective = objective
        if objective <= self.proven_bound + EPS:
            # the incumbent meets a proven bound, so no later leaf replaces it
            self.proven = True

    def _search(self, position, objective):
        self.nodes += 1
        if self.nodes > self.budget:
            raise SolverBudgetExhausted(
                'Branch and bound exceeded {} nodes on a {}-variable instance.'.format(
                    self.budget, self.structure.dim,
                )
            )
        if not self.priced and self.lp_bound_after is not None and self.nodes > self.lp_bound_after:
            self._price_rows()
            if self.proven:
                return
        if position == len(self.active):
            if self.best is None:
                if objective <= self.target + EPS:
                    self._record(objective)
            elif objective < self.best_objective - EPS:
                self._record(objective)
            return

        bound = objective + self._lower_bound(position)
        if self.best is None:
            if bound > self.target + EPS:
                return
        elif bound >= self.best_objective - EPS:
            return

        k = self.active[position]
        res, fin = self.res, self.fin
        for row, c in self.produces[k]:
            fin[row] -= c * self.ub[k]
        high = self.ub[k]
        for row, c in self.uses[k]:
            high = min(high, int(floor((res[row] + fin[row]) / c + EPS)))
        low = 0
        for row, c in self.produces[k]:
            shortfall = -(res[row] + fin[row])
            if shortfall > EPS:
                low = max(low, int(ceil(shortfall / c - EPS)))

        for value in range(low, high + 1):
            self._shift(k, value)
            self.x[k] = value
            self._search(position + 1, objective + self.w[k] * value)
            self._shift(k, -value)
            if self.proven:
                break
        self.x[k] = 0
        for row, c in self.produces[k]:
            fin[row] += c * self.ub[k]

    def run(self):
        self.target = min(0.0, self._dive())
        self._prove(self._lower_bound(0))
        self._search(0, 0.0)
        if self.best is None:
            # r = 0 and the dive are both feasible, so the search must record one
            raise RuntimeError('Branch and bound finished without an incumbent.')
        if self.nodes > self.budget * 0.8:
            logger.warning('Solver used %d of %d nodes.', self.nodes, self.budget)
        logger.debug(
            'Solved %d-variable instance (%d active) in %d nodes, objective %g.',
            self.structure.dim, len(self.active), self.nodes, self.best_objective,
        )
        return self.best


def solve(inst, budget=DEFAULT_NODE_BUDGET, lp_bound_after=DEFAULT_LP_BOUND_AFTER):
    """Exact optimum of ``inst``, lexicographically smallest among ties."""
    best = BranchAndBound(inst, budget, lp_bound_after).run()
    return Decision(r=np.array(best, dtype=np.int64))


def objective(inst, decision):
    return float(inst.w @ decision.r)


def is_feasible(inst, decision):
    r = np.asarray(decision.r)
    return bool(
        np.all(r >= 0)
        and np.all(-(inst.m_tilde @ r) <= inst.s + EPS)
        and np.all(-(inst.n_tilde @ r) <= inst.u + EPS)
    )
