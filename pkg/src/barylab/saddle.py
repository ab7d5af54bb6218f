"""Unregularized barycenters as a bilinear saddle-point problem.

The transport polytope constraint A x = (p; q) enters through the box-dual
variables y in [-1,1]^{2n}, scaled by 2||d||_inf. Mirror prox runs entropic
(multiplicative, log-space) updates on the simplex blocks and clipped
Euclidean steps on the box blocks; the duality gap of the averaged pair is
available in closed form because both inner problems are linear.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .measures import BregmanPenalty, CostMatrix, CostVector, Histogram, as_weights
from .trace import IterateTrace, checkpoints


def incidence_apply(x, n):
    """A x for the marginal incidence operator, matrix-free.

    ``x`` is a vectorized n-by-n plan (row-major); the result stacks row
    sums then column sums.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n * n,):
        raise InvalidInputError(f"expected vector of length {n*n}, got {x.shape}")
    plan = x.reshape(n, n)
    return np.concatenate([plan.sum(axis=1), plan.sum(axis=0)])


def incidence_apply_transpose(y, n):
    """A^T y, matrix-free: entry (i-1)n+j equals y_i + y_{n+j}."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (2 * n,):
        raise InvalidInputError(f"expected vector of length {2*n}, got {y.shape}")
    return np.add.outer(y[:n], y[n:]).ravel()


def _incidence_apply_rows(X, n):
    """Row-wise A x for stacked plans X of shape (m, n*n)."""
    plans = X.reshape(X.shape[0], n, n)
    return np.concatenate([plans.sum(axis=2), plans.sum(axis=1)], axis=1)


def _incidence_transpose_rows(Y, n):
    """Row-wise A^T y for stacked duals Y of shape (m, 2n)."""
    return (Y[:, :n, None] + Y[:, None, n:]).reshape(Y.shape[0], n * n)


@dataclass
class SaddleState:
    """Stacked primal plans, barycenter block, and box duals."""

    x: np.ndarray  # (m, n^2), rows on the simplex
    p: np.ndarray  # (n,)
    y: np.ndarray  # (m, 2n), entries in [-1, 1]

    @property
    def m(self):
        return self.x.shape[0]


def saddle_gradient_operator(state, measures, d, penalty=None):
    """Monotone operator (grad_x, grad_p, -grad_y) of the saddle objective.

    ``penalty`` is an optional (lambda, BregmanPenalty) pair adding
    lambda * (grad d(p) - grad d(p1)) to the p-block; lambda = 0 reproduces
    the unpenalized operator bitwise.
    """
    if not isinstance(d, CostVector):
        d = CostVector(d)
    n = d.n
    m = state.m
    dinf = d.inf_norm
    q = np.asarray(measures, dtype=np.float64).reshape(m, n)

    grad_x = (d.d[None, :] + 2.0 * dinf * _incidence_transpose_rows(state.y, n)) / m
    grad_p = -(2.0 * dinf / m) * state.y[:, :n].sum(axis=0)
    if penalty is not None:
        lam, breg = penalty
        if lam != 0.0:
            if not isinstance(breg, BregmanPenalty):
                breg = BregmanPenalty(breg)
            if np.any(state.p <= 0):
                raise DomainError("penalized operator needs a strictly positive p block")
            grad_p = grad_p + lam * breg.gradient(state.p)
    b = np.concatenate([np.tile(state.p, (m, 1)), q], axis=1)
    minus_grad_y = (2.0 * dinf / m) * (_incidence_apply_rows(state.x, n) - b)
    return grad_x, grad_p, minus_grad_y


def _mult_update_rows(log_X, exponent):
    """Multiplicative simplex update in log space, one normalization per row."""
    log_X = log_X + exponent
    log_X -= log_X.max(axis=1, keepdims=True)
    log_X -= np.log(np.exp(log_X).sum(axis=1, keepdims=True))
    return log_X


def _mult_update(log_p, exponent):
    log_p = log_p + exponent
    log_p -= log_p.max()
    log_p -= np.log(np.exp(log_p).sum())
    return log_p


def mirror_prox_step_constants(n, m, d_inf, eta):
    """Step constants of the extragradient scheme for a given learning rate."""
    log_n = np.log(n)
    return {
        "alpha": 2.0 * d_inf * eta * n,
        "beta": 6.0 * d_inf * eta * log_n / m,
        "gamma_step": 3.0 * eta * log_n,
    }


def mirror_prox_theory(n, d_inf, epsilon):
    """Learning rate and iteration count from the convergence theorem."""
    root = np.sqrt(6.0 * n * np.log(n))
    eta = 1.0 / (4.0 * d_inf * root)
    iters = int(np.ceil(8.0 * d_inf * root / epsilon))
    return eta, iters


def duality_gap(avg_x, avg_p, avg_y, measures, d, penalty=None, inner_iters=4000):
    """Exact duality gap of a candidate pair.

    The adversarial y is a sign vector; the best-response x blocks are
    vertex solutions of linear problems over the simplex. With a penalty
    the p-inner problem is solved numerically by entropic mirror descent.
    """
    if not isinstance(d, CostVector):
        d = CostVector(d)
    n = d.n
    q = np.asarray(measures, dtype=np.float64)
    m = q.shape[0]
    dinf = d.inf_norm

    b = np.concatenate([np.tile(avg_p, (m, 1)), q], axis=1)
    resid = _incidence_apply_rows(avg_x, n) - b
    lam_val = 0.0
    if penalty is not None and penalty[0] != 0.0:
        lam_val = penalty[0] * penalty[1].value(avg_p)
    primal_best_adversary = (
        float(np.sum(avg_x @ d.d) + 2.0 * dinf * np.abs(resid).sum()) / m + lam_val
    )

    lin_x = d.d[None, :] + 2.0 * dinf * _incidence_transpose_rows(avg_y, n)
    min_x_part = float(lin_x.min(axis=1).sum()) / m
    s = avg_y[:, :n].sum(axis=0)  # p enters as -(2 d_inf / m) <s, p>
    const_part = -(2.0 * dinf / m) * float(np.sum(avg_y[:, n:] * q))
    if penalty is None or penalty[0] == 0.0:
        min_p_part = -(2.0 * dinf / m) * float(s.max())
    else:
        lam, breg = penalty
        min_p_part = _minimize_penalized_p(-(2.0 * dinf / m) * s, lam, breg, n, inner_iters)
    dual_best_response = min_x_part + min_p_part + const_part
    return primal_best_adversary - dual_best_response


def _minimize_penalized_p(linear, lam, breg, n, iters):
    """min_p <linear, p> + lam B_d(p, p1) over the simplex, by mirror descent."""
    p = np.full(n, 1.0 / n)
    best = np.inf
    log_p = np.log(p)
    for t in range(1, iters + 1):
        val = float(linear @ p) + lam * breg.value(p)
        best = min(best, val)
        g = linear + lam * breg.gradient(np.maximum(p, 1e-300))
        step = 1.0 / (lam * np.sqrt(t) + np.abs(g).max() * np.sqrt(t))
        log_p = _mult_update(log_p, -step * g)
        p = np.exp(log_p)
    return best


def mirror_prox_wb(
    measures,
    cost,
    epsilon=1e-2,
    penalty=None,
    n_iters=None,
    gap_every=0,
    reference=None,
    w2_metric=None,
    record_wall_time=False,
):
    """Mirror prox on the saddle-point form of the barycenter problem.

    Runs the extragradient scheme with entropic prox on the simplex blocks
    and clipped Euclidean steps on the box duals. The iteration count comes
    from the convergence theorem for the target ``epsilon`` unless
    ``n_iters`` overrides it. Returns the averaged barycenter block and a
    trace whose gap column holds the closed-form duality gap of the
    averaged pair at checkpoints.
    """
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    d = cost.vectorized()
    n = cost.n
    q = np.stack([as_weights(qi) for qi in measures])
    m = q.shape[0]
    if np.any(q <= 0):
        raise DomainError("mirror prox requires strictly positive measures; smooth first")
    dinf = d.inf_norm
    if dinf <= 0:
        raise InvalidInputError("cost must have a positive entry")

    eta, theory_iters = mirror_prox_theory(n, dinf, epsilon)
    n_iters = theory_iters if n_iters is None else int(n_iters)
    consts = mirror_prox_step_constants(n, m, dinf, eta)
    alpha, beta, gamma_step = consts["alpha"], consts["beta"], consts["gamma_step"]
    lam, breg = (penalty if penalty is not None else (0.0, None))
    if lam != 0.0 and not isinstance(breg, BregmanPenalty):
        breg = BregmanPenalty(breg)

    log_X = np.full((m, n * n), -2.0 * np.log(n))
    log_p = np.full(n, -np.log(n))
    Y = np.zeros((m, 2 * n))

    sum_u = np.zeros((m, n * n))
    sum_s = np.zeros(n)
    sum_v = np.zeros((m, 2 * n))

    trace = IterateTrace(
        ("k", "duality_gap", "w2_to_reference", "wall_time_ms"),
        meta={"eta": eta, "alpha": alpha, "beta": beta, "gamma_step": gamma_step, "N": n_iters},
    )
    marks = set(checkpoints(n_iters)) if gap_every == 0 else {
        k for k in range(1, n_iters + 1) if k % gap_every == 0 or k == n_iters
    }
    t0 = time.perf_counter()

    d_row = d.d[None, :]
    for k in range(1, n_iters + 1):
        X = np.exp(log_X)
        p = np.exp(log_p)
        AX = _incidence_apply_rows(X, n)
        b = np.concatenate([np.tile(p, (m, 1)), q], axis=1)

        V = np.clip(Y + alpha * (AX - b), -1.0, 1.0)
        log_U = _mult_update_rows(log_X, -gamma_step * (d_row + 2.0 * dinf * _incidence_transpose_rows(Y, n)))
        s_exp = beta * Y[:, :n].sum(axis=0)
        if lam != 0.0:
            s_exp = s_exp - gamma_step * lam * breg.gradient(p)
        log_s = _mult_update(log_p, s_exp)
        s = np.exp(log_s)
        U = np.exp(log_U)

        AU = _incidence_apply_rows(U, n)
        b_half = np.concatenate([np.tile(s, (m, 1)), q], axis=1)
        Y = np.clip(Y + alpha * (AU - b_half), -1.0, 1.0)
        log_X = _mult_update_rows(log_X, -gamma_step * (d_row + 2.0 * dinf * _incidence_transpose_rows(V, n)))
        p_exp = beta * V[:, :n].sum(axis=0)
        if lam != 0.0:
            p_exp = p_exp - gamma_step * lam * breg.gradient(s)
        log_p = _mult_update(log_p, p_exp)

        sum_u += U
        sum_s += s
        sum_v += V

        if k in marks:
            avg_x = sum_u / k
            avg_p = sum_s / k
            avg_y = sum_v / k
            gap = duality_gap(avg_x, avg_p, avg_y, q, d, penalty=(lam, breg) if lam else None)
            w2 = float("nan")
            if reference is not None and w2_metric is not None:
                w2 = w2_metric(avg_p, reference)
            wall = (time.perf_counter() - t0) * 1e3 if record_wall_time else 0.0
            trace.append(k=k, duality_gap=gap, w2_to_reference=w2, wall_time_ms=wall)

    avg_p = sum_s / n_iters
    result = {
        "barycenter": Histogram(avg_p),
        "avg_plans": sum_u / n_iters,
        "avg_duals": sum_v / n_iters,
        "eta": eta,
        "n_iters": n_iters,
    }
    return Histogram(avg_p), trace, result
