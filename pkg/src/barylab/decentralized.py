"""Decentralized barycenter solvers on the gossip runtime.

One measure lives on each node; every contact with other nodes' state goes
through Laplacian multiplications performed by the message-passing runtime,
one synchronous round per multiplication. Spectral quantities of the
communication matrix are computed once at setup and treated as pre-shared
configuration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, DomainError, InvalidInputError
from .measures import CostMatrix, Histogram, as_weights
from .network import GossipNetwork, Laplacian, consensus_gap, spectral
from .ot import EntropicParams, entropic_ot_value, exact_ot, softmax_column
from .saddle import _incidence_apply_rows, _incidence_transpose_rows, _mult_update_rows
from .trace import IterateTrace, checkpoints
from .dual_accel import BatchSchedule, next_step_constants


@dataclass
class DecentralizedRunConfig:
    """Topology, accuracy target, and schedule knobs for a decentralized run."""

    topology: object
    epsilon: float = 1e-2
    gamma: float = 0.1
    n_iters: int = None  # None: derive from the convergence theorem
    seed: int = 0
    alpha_conf: float = 0.05
    sigma_psi_sq: float = 1.0  # per-node sampled-gradient variance bound
    sampled: bool = True  # False: exact O(n^2) dual gradients, batch size 1
    batch_cap: int = 1_000_000
    objective_tol: float = 1e-6
    eval_objective: bool = True
    record_wall_time: bool = False
    log_messages: int = 200_000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be positive")


_DECENTRALIZED_COLUMNS = (
    "k",
    "objective",
    "consensus_gap_W",
    "consensus_gap_sqrtW",
    "messages_cum",
    "oracle_calls_cum",
    "wall_time_ms",
)


def _setup(measures, cost, cfg):
    q = np.stack([as_weights(qi) for qi in measures])
    if not isinstance(cost, CostMatrix):
        cost = CostMatrix(cost)
    topo = cfg.topology
    if q.shape[0] != topo.m:
        raise InvalidInputError(
            f"{q.shape[0]} measures for {topo.m} nodes; assign exactly one per node"
        )
    if q.shape[1] != cost.n:
        raise InvalidInputError("measure support does not match cost matrix")
    runtime = GossipNetwork(topo, log_limit=cfg.log_messages)
    lap = runtime.laplacian
    if topo.m == 1:
        spec_info = None
        lam_max, lam_min_plus = 0.0, 0.0
    else:
        spec_info = spectral(lap)
        lam_max, lam_min_plus = spec_info.lambda_max, spec_info.lambda_min_plus
    return q, cost, runtime, lap, lam_max, lam_min_plus


def decentralized_dual_wb(measures, cost, cfg):
    """Accelerated dual stochastic gradient for the entropic barycenter.

    Every node keeps a dual triplet and recovers its barycenter estimate as
    the step-weighted average of single-column softmax recoveries; the only
    cross-node operation is one gossip multiplication per iteration on the
    stacked minibatch gradients.
    """
    if cfg.gamma <= 0:
        raise InvalidInputError("decentralized dual track requires gamma > 0")
    q, cost, runtime, lap, lam_max, lam_min_plus = _setup(measures, cost, cfg)
    m, n = q.shape
    gamma = cfg.gamma
    c = cost.entries

    if m == 1:
        lipschitz = 1.0 / gamma  # no consensus constraint; keep steps finite
        sigma_sq = cfg.sigma_psi_sq
    else:
        lipschitz = lam_max * m / gamma
        sigma_sq = lam_max * m * cfg.sigma_psi_sq

    if cfg.n_iters is None:
        chi = lam_max / lam_min_plus if lam_min_plus > 0 else 1.0
        n_iters = int(np.ceil(np.sqrt(n * cost.inf_norm**2 * chi / (gamma * cfg.epsilon))))
    else:
        n_iters = int(cfg.n_iters)
    schedule = BatchSchedule(
        sigma_sq=sigma_sq,
        epsilon=cfg.epsilon,
        N=max(n_iters, 2),
        alpha_conf=cfg.alpha_conf,
        cap=cfg.batch_cap,
    )

    lam_v = np.zeros((m, n))
    zeta = np.zeros((m, n))
    eta_v = np.zeros((m, n))
    a_k = 0.0
    acc = np.zeros((m, n))

    trace = IterateTrace(
        _DECENTRALIZED_COLUMNS,
        meta={"L": lipschitz, "sigma_sq": sigma_sq, "N": n_iters, "gamma": gamma},
    )
    marks = set(checkpoints(n_iters))
    oracle_calls = 0
    t0 = time.perf_counter()

    obj_params = EntropicParams(
        gamma=gamma, sinkhorn_tol=cfg.objective_tol, max_iters=500_000
    )

    for k in range(n_iters):
        alpha, a_next = next_step_constants(a_k, lipschitz)
        lam_v = (alpha * zeta + a_k * eta_v) / a_next

        if cfg.sampled:
            r = schedule.batch_size(alpha, iteration=k + 1)
            grads = np.empty((m, n))
            for i in range(m):
                rng_i = np.random.default_rng((cfg.seed, i, k))
                draws = rng_i.choice(n, size=r, p=q[i])
                z = (lam_v[i][:, None] - c[:, draws]) / gamma
                z -= z.max(axis=0, keepdims=True)
                ez = np.exp(z)
                grads[i] = (ez / ez.sum(axis=0, keepdims=True)).mean(axis=1)
        else:
            r = 1
            z = (lam_v[:, None, :] - c[None, :, :]) / gamma  # (m, j, l): (lam_l - C_jl)/gamma
            z -= z.max(axis=2, keepdims=True)
            ez = np.exp(z)
            soft = ez / ez.sum(axis=2, keepdims=True)
            grads = np.einsum("mjl,mj->ml", soft, q)
        oracle_calls += m * r

        acc += alpha * grads  # primal recovery shares the sampled softmaxes
        if m == 1:
            mixed = np.zeros_like(grads)
        else:
            mixed = runtime.multiply(grads)
        zeta = zeta - alpha * mixed
        eta_v = (alpha * zeta + a_k * eta_v) / a_next
        a_k = a_next

        if (k + 1) in marks:
            p_tilde = acc / a_k
            _record_decentralized(
                trace, k + 1, p_tilde, q, cost, lap, runtime, oracle_calls, t0, cfg,
                objective=_entropic_objective(p_tilde, q, cost, obj_params, k + 1) if cfg.eval_objective else float("nan"),
            )

    p_tilde = acc / a_k
    estimates = [Histogram(row) for row in p_tilde]
    info = {
        "mean_estimate": Histogram(p_tilde.mean(axis=0)),
        "messages": runtime.messages_sent,
        "oracle_calls": oracle_calls,
        "runtime": runtime,
        "A_N": a_k,
        "lambda_max": lam_max,
    }
    return estimates, trace, info


def _entropic_objective(p_tilde, q, cost, params, iteration):
    vals = []
    for i in range(q.shape[0]):
        try:
            val, _, _ = entropic_ot_value(p_tilde[i], q[i], cost, params)
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(
                f"objective evaluation failed at node {i}, iteration {iteration}: {exc}",
                last_iterate=exc.last_iterate,
                iterations=iteration,
            ) from exc
        vals.append(val)
    return float(np.mean(vals))


def _record_decentralized(trace, k, p_stack, q, cost, lap, runtime, oracle_calls, t0, cfg, objective):
    gap_w, gap_sqrt = consensus_gap(p_stack, lap) if q.shape[0] > 1 else (0.0, 0.0)
    wall = (time.perf_counter() - t0) * 1e3 if cfg.record_wall_time else 0.0
    trace.append(
        k=k,
        objective=objective,
        consensus_gap_W=gap_w,
        consensus_gap_sqrtW=gap_sqrt,
        messages_cum=runtime.messages_sent,
        oracle_calls_cum=oracle_calls,
        wall_time_ms=wall,
    )


def decentralized_mirror_prox_wb(measures, cost, cfg):
    """Decentralized mirror prox for unregularized barycenters.

    The consensus constraint enters through a Lagrangian block updated with
    Laplacian products only; each iteration costs four gossip rounds. The
    per-node barycenter estimate is the uniform average of the half-step
    p-blocks; all feasible sets (simplices, boxes) are preserved exactly.
    """
    q, cost, runtime, lap, lam_max, lam_min_plus = _setup(measures, cost, cfg)
    if np.any(q <= 0):
        raise DomainError("mirror prox requires strictly positive measures; smooth first")
    m, n = q.shape
    d = cost.entries.ravel()
    dinf = cost.inf_norm
    log_n = np.log(n)

    radius_sq = 0.0 if m == 1 else 4.0 * n * dinf**2 / lam_min_plus
    lipschitz = np.sqrt(8.0 * dinf**2 + lam_max**2) / m
    r_u = np.sqrt(3.0 * m * log_n)
    r_v = np.sqrt(m * n + radius_sq / 2.0)
    eta = 1.0 / (2.0 * lipschitz * r_u * r_v)
    n_iters = (
        int(np.ceil(4.0 * lipschitz * r_u * r_v / cfg.epsilon))
        if cfg.n_iters is None
        else int(cfg.n_iters)
    )

    alpha = 2.0 * dinf * eta * (m * n + radius_sq / 2.0) / m
    beta = 6.0 * dinf * eta * log_n
    gamma_step = 3.0 * eta * log_n
    theta = eta * (m * n + radius_sq / 2.0) / m

    log_X = np.full((m, n * n), -2.0 * log_n)
    log_P = np.full((m, n), -log_n)
    Y = np.zeros((m, 2 * n))
    Z = np.zeros((m, n))

    sum_S = np.zeros((m, n))
    sum_U = np.zeros((m, n * n))
    sum_V = np.zeros((m, 2 * n))
    sum_L = np.zeros((m, n))

    trace = IterateTrace(
        _DECENTRALIZED_COLUMNS,
        meta={
            "eta": eta, "alpha": alpha, "beta": beta, "gamma_step": gamma_step,
            "theta": theta, "N": n_iters, "R_sq": radius_sq, "L": lipschitz,
        },
    )
    marks = set(checkpoints(n_iters))
    oracle_calls = 0
    t0 = time.perf_counter()
    d_row = d[None, :]

    def lap_mix(stack):
        if m == 1:
            return np.zeros_like(stack)
        return runtime.multiply(stack)

    for k in range(1, n_iters + 1):
        X = np.exp(log_X)
        P = np.exp(log_P)

        wz = lap_mix(Z)
        wp = lap_mix(P)

        log_U = _mult_update_rows(
            log_X, -gamma_step * (d_row + 2.0 * dinf * _incidence_transpose_rows(Y, n))
        )
        log_S = _mult_update_rows(log_P, beta * Y[:, :n] - gamma_step * wz)
        b = np.concatenate([P, q], axis=1)
        V = np.clip(Y + alpha * (_incidence_apply_rows(X, n) - b), -1.0, 1.0)
        Lam = Z + theta * wp

        S = np.exp(log_S)
        U = np.exp(log_U)
        w_lam = lap_mix(Lam)

        log_X = _mult_update_rows(
            log_X, -gamma_step * (d_row + 2.0 * dinf * _incidence_transpose_rows(V, n))
        )
        log_P = _mult_update_rows(log_P, beta * V[:, :n] - gamma_step * w_lam)
        b_half = np.concatenate([S, q], axis=1)
        Y = np.clip(Y + alpha * (_incidence_apply_rows(U, n) - b_half), -1.0, 1.0)

        ws = lap_mix(S)
        Z = Z + theta * ws

        sum_S += S
        sum_U += U
        sum_V += V
        sum_L += Lam
        oracle_calls += 2 * m  # one operator evaluation per node per half-step

        if k in marks:
            p_stack = sum_S / k
            objective = (
                _exact_objective(p_stack, q, cost, k) if cfg.eval_objective else float("nan")
            )
            _record_decentralized(
                trace, k, p_stack, q, cost, lap, runtime, oracle_calls, t0, cfg, objective
            )

    p_stack = sum_S / n_iters
    estimates = [Histogram(row) for row in p_stack]
    info = {
        "mean_estimate": Histogram(p_stack.mean(axis=0)),
        "avg_plans": sum_U / n_iters,
        "avg_box_duals": sum_V / n_iters,
        "avg_lagrange": sum_L / n_iters,
        "messages": runtime.messages_sent,
        "oracle_calls": oracle_calls,
        "runtime": runtime,
        "eta": eta,
        "n_iters": n_iters,
        "constants": {"alpha": alpha, "beta": beta, "gamma_step": gamma_step, "theta": theta},
    }
    return estimates, trace, info


def _exact_objective(p_stack, q, cost, iteration):
    vals = []
    for i in range(q.shape[0]):
        try:
            vals.append(exact_ot(p_stack[i], q[i], cost).value)
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(
                f"objective LP failed at node {i}, iteration {iteration}: {exc}",
                iterations=iteration,
            ) from exc
    return float(np.mean(vals))
