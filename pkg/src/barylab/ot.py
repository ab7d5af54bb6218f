"""Exact and entropy-regularized optimal transport between histograms.

Exact OT is solved by a self-contained simplex method on the transportation
tableau (Bland's rule for anti-cycling, northwest-corner start), returning
the optimal plan together with feasible dual potentials. Entropic OT runs
Sinkhorn entirely in the log domain so that it survives regularization as
small as 1e-3 times the cost range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DomainError, InvalidInputError
from .measures import CostMatrix, Histogram, TransportPlan, as_weights

_OPT_TOL = 1e-10


@dataclass
class EntropicParams:
    """Regularization strength and Sinkhorn stopping parameters.

    ``sinkhorn_tol`` is the target l1 marginal error; an outer solver
    aiming at accuracy eps should pass eps / (8 * max(1, ||C||_inf)).
    """

    gamma: float
    sinkhorn_tol: float = 1e-9
    max_iters: int = 200_000

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidInputError("entropic gamma must be positive")
        if self.sinkhorn_tol <= 0:
            raise InvalidInputError("sinkhorn tolerance must be positive")


@dataclass
class DualPotentials:
    """Dual variables for the row/column marginal constraints.

    ``u`` is gauge-fixed to mean zero; the constant shift lives in ``v``
    so that <u,p> + <v,q> is invariant.
    """

    u: np.ndarray
    v: np.ndarray


@dataclass
class OTSolution:
    value: float
    plan: TransportPlan
    potentials: DualPotentials
    iterations: int = 0

    def to_jsonable(self):
        return {
            "value": self.value,
            "marginal_error": self.plan.marginal_error,
            "iterations": self.iterations,
        }


def _validate_pair(p, q, cost):
    p = as_weights(p, "p")
    q = as_weights(q, "q")
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    if cost.n != p.size or cost.n != q.size:
        raise InvalidInputError("cost matrix size does not match histogram supports")
    return p, q, cost


# ---------------------------------------------------------------------------
# exact OT: transportation simplex
# ---------------------------------------------------------------------------


def _northwest_corner(p, q):
    """Initial basic feasible plan with exactly 2n-1 basic cells."""
    n = p.size
    plan = np.zeros((n, n))
    basis = []
    rem_p = p.copy()
    rem_q = q.copy()
    i = j = 0
    while True:
        t = min(rem_p[i], rem_q[j])
        plan[i, j] = t
        basis.append((i, j))
        rem_p[i] -= t
        rem_q[j] -= t
        if i == n - 1 and j == n - 1:
            break
        # on ties advance only one index, keeping a zero-valued basic cell
        if rem_p[i] <= rem_q[j] and i < n - 1:
            i += 1
        else:
            j += 1
    return plan, basis


def _duals_from_basis(cost, basis, n):
    """Solve u_i + v_j = C_ij over the basis spanning tree (u_0 = 0)."""
    adj_row = [[] for _ in range(n)]
    adj_col = [[] for _ in range(n)]
    for (i, j) in basis:
        adj_row[i].append(j)
        adj_col[j].append(i)
    u = np.full(n, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in adj_row[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in adj_col[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis, enter, n):
    """Unique alternating cycle created by adding ``enter`` to the basis tree.

    Returns the cycle as a cell list starting at the entering cell and
    alternating row-moves and column-moves.
    """
    adj = {}
    for (i, j) in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    start = ("r", enter[0])
    goal = ("c", enter[1])
    parent = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = node
                stack.append(nxt)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()  # row(enter) -> ... -> col(enter)
    cells = [enter]
    for a, b in zip(path[:-1], path[1:]):
        if a[0] == "r":
            cells.append((a[1], b[1]))
        else:
            cells.append((b[1], a[1]))
    return cells


def exact_ot(p, q, cost):
    """Optimal transport by the transportation simplex.

    Returns the optimal value, an optimal plan, and feasible dual
    potentials with zero duality gap; ``u`` is gauge-fixed to mean zero.
    """
    p, q, cost = _validate_pair(p, q, cost)
    n = p.size
    c = cost.entries
    if n == 1:
        plan = TransportPlan(np.array([[1.0]]))
        pots = DualPotentials(u=np.zeros(1), v=np.array([c[0, 0]]))
        return OTSolution(value=float(c[0, 0]), plan=plan, potentials=pots)

    plan, basis = _northwest_corner(p, q)
    tol = _OPT_TOL * max(1.0, cost.inf_norm)
    pivots = 0
    max_pivots = 40 * n * n + 200
    while True:
        u, v = _duals_from_basis(c, basis, n)
        reduced = c - u[:, None] - v[None, :]
        for (i, j) in basis:
            reduced[i, j] = 0.0
        flat = np.flatnonzero(reduced.ravel() < -tol)
        if flat.size == 0:
            break
        enter = divmod(int(flat[0]), n)  # Bland: lowest-index entering cell
        cycle = _find_cycle(basis, enter, n)
        minus = cycle[1::2]
        theta = min(plan[ij] for ij in minus)
        leave = min(ij for ij in minus if plan[ij] <= theta + 0.0)
        for k, ij in enumerate(cycle):
            plan[ij] += theta if k % 2 == 0 else -theta
        plan[leave] = 0.0
        basis.remove(leave)
        basis.append(enter)
        pivots += 1
        if pivots > max_pivots:
            raise ConvergenceFailure(
                "transportation simplex exceeded pivot cap", last_iterate=plan, iterations=pivots
            )

    u, v = _duals_from_basis(c, basis, n)
    shift = u.mean()
    u = u - shift
    v = v + shift
    plan = np.maximum(plan, 0.0)
    value = float(np.sum(c * plan))
    marg_err = float(
        np.abs(plan.sum(axis=1) - p).sum() + np.abs(plan.sum(axis=0) - q).sum()
    )
    return OTSolution(
        value=value,
        plan=TransportPlan(plan / plan.sum(), marginal_error=marg_err),
        potentials=DualPotentials(u=u, v=v),
        iterations=pivots,
    )


# ---------------------------------------------------------------------------
# entropic OT: log-domain Sinkhorn
# ---------------------------------------------------------------------------


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


class SinkhornResult(DualPotentials):
    """Potentials plus convergence metadata from a Sinkhorn run."""

    def __init__(self, u, v, f, g, marginal_error, iterations):
        super().__init__(u=u, v=v)
        self.f = f
        self.g = g
        self.marginal_error = marginal_error
        self.iterations = iterations


def sinkhorn(p, q, cost, params, warm_start=None):
    """Log-domain Sinkhorn iterations until the l1 marginal error target.

    Returns potentials whose ``u`` block (gauge-fixed to mean zero) is the
    inexact gradient of the entropic OT value with respect to ``p``. Raises
    ``ConvergenceFailure`` carrying the last iterate if the cap is hit.
    """
    p, q, cost = _validate_pair(p, q, cost)
    if np.any(p <= 0) or np.any(q <= 0):
        raise DomainError("sinkhorn requires strictly positive marginals; smooth first")
    gamma = params.gamma
    c = cost.entries
    n = p.size
    log_p = np.log(p)
    log_q = np.log(q)
    if warm_start is not None:
        f, g = warm_start
        f = np.asarray(f, dtype=np.float64).copy()
        g = np.asarray(g, dtype=np.float64).copy()
    else:
        f = np.zeros(n)
        g = np.zeros(n)

    err = np.inf
    it = 0
    while it < params.max_iters:
        # f-update matches row marginals exactly in the limit; g-update then
        # zeroes the column error, so only the row error needs monitoring.
        f = gamma * (log_p - _logsumexp((g[None, :] - c) / gamma, axis=1))
        g = gamma * (log_q - _logsumexp((f[:, None] - c) / gamma, axis=0))
        it += 1
        log_plan = (f[:, None] + g[None, :] - c) / gamma
        row = np.exp(_logsumexp(log_plan, axis=1))
        err = float(np.abs(row - p).sum())
        if err <= params.sinkhorn_tol:
            break
    else:
        raise ConvergenceFailure(
            f"sinkhorn hit iteration cap {params.max_iters} at marginal error {err:.3e}",
            last_iterate=(f, g),
            iterations=it,
            error=err,
        )
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise ConvergenceFailure("sinkhorn produced non-finite potentials", last_iterate=(f, g))
    shift = f.mean()
    return SinkhornResult(
        u=f - shift, v=g + shift, f=f, g=g, marginal_error=err, iterations=it
    )


def entropic_ot_value(p, q, cost, params, warm_start=None):
    """Entropy-regularized OT value <C,pi> - gamma E(pi) and its plan."""
    p, q, cost = _validate_pair(p, q, cost)
    res = sinkhorn(p, q, cost, params, warm_start=warm_start)
    gamma = params.gamma
    c = cost.entries
    log_plan = (res.f[:, None] + res.g[None, :] - c) / gamma
    plan = np.exp(log_plan)
    mass = plan.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        ent_terms = np.where(plan > 0, plan * np.log(plan), 0.0)
    value = float(np.sum(c * plan) + gamma * np.sum(ent_terms))
    tplan = TransportPlan(plan / mass, marginal_error=res.marginal_error)
    return value, tplan, res


def entropic_dual_value(u, q, cost, gamma):
    """Fenchel conjugate of the entropic OT value as a function of p.

    gamma * ( -<q, log q> + sum_j q_j * logsumexp_i (u_i - C_ji)/gamma ),
    evaluated with a stable log-sum-exp.
    """
    u = np.asarray(u, dtype=np.float64)
    q = as_weights(q, "q")
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    if np.any(q <= 0):
        raise DomainError("entropic dual value requires strictly positive q")
    lse = _logsumexp((u[None, :] - cost.entries) / gamma, axis=1)
    return float(gamma * (-(q @ np.log(q)) + q @ lse))


def entropic_dual_gradient(u, q, cost, gamma):
    """Closed-form gradient of the entropic dual: a point of the simplex.

    Each column j contributes its softmax of (u - C_j.)/gamma with weight
    q_j; the result is a convex combination of simplex points.
    """
    u = np.asarray(u, dtype=np.float64)
    q = as_weights(q, "q")
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    z = (u[None, :] - cost.entries) / gamma  # row j: (u_l - C_jl)/gamma over l
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    soft = ez / ez.sum(axis=1, keepdims=True)
    return Histogram(soft.T @ q)


def entropic_dual_gradient_sample(u, q, cost, gamma, rng):
    """One-column stochastic version of the dual gradient, O(n) per call.

    Draws a column index with probabilities q and returns that column's
    softmax; its expectation is the full gradient.
    """
    u = np.asarray(u, dtype=np.float64)
    q = as_weights(q, "q")
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    xi = int(rng.choice(q.size, p=q))
    return Histogram(softmax_column(u, cost.entries, gamma, xi))


def softmax_column(u, c, gamma, xi):
    """softmax over l of (u_l - C[l, xi]) / gamma; used for primal recovery."""
    z = (u - c[:, xi]) / gamma
    z = z - z.max()
    ez = np.exp(z)
    return ez / ez.sum()
