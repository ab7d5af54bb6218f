"""Stochastic-approximation barycenter solvers over a stream of measures.

Two tracks:

* projected stochastic gradient descent on the entropic objective
  (strongly convex; inexact gradients from warm-started Sinkhorn),
* stochastic mirror descent on the unregularized objective
  (multiplicative updates; exact gradients from the transportation LP).

Both return the uniform average of the iterates and a convergence trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, InvalidInputError
from .measures import Histogram, as_weights, project_simplex
from .ot import EntropicParams, entropic_ot_value, exact_ot, sinkhorn
from .trace import IterateTrace, checkpoints


class MeasureStream:
    """Seeded stream of histograms with deterministic replay.

    ``draw`` maps a numpy Generator to a weight vector; iterating the
    stream always restarts from the stored seed, so identical seeds replay
    identical measure sequences.
    """

    def __init__(self, draw, seed, descriptor="stream"):
        self.draw = draw
        self.seed = seed
        self.descriptor = descriptor

    def __iter__(self):
        rng = np.random.default_rng(self.seed)
        while True:
            yield np.asarray(self.draw(rng), dtype=np.float64)

    def take(self, count):
        it = iter(self)
        return [next(it) for _ in range(count)]

    @classmethod
    def from_measures(cls, measures, seed=0, descriptor="resampled"):
        """I.i.d. resampling from a fixed family."""
        bank = [as_weights(m) for m in measures]

        def draw(rng):
            return bank[rng.integers(len(bank))]

        return cls(draw, seed, descriptor)

    @classmethod
    def cycling(cls, measures, descriptor="cycling"):
        """Deterministic cyclic pass over a fixed family."""
        bank = [as_weights(m) for m in measures]
        return _CyclingStream(bank, descriptor)


class _CyclingStream(MeasureStream):
    def __init__(self, bank, descriptor):
        super().__init__(draw=None, seed=None, descriptor=descriptor)
        self._bank = bank

    def __iter__(self):
        k = 0
        while True:
            yield self._bank[k % len(self._bank)]
            k += 1


@dataclass
class SAConfig:
    """Iteration budget and step/inexactness policy for the SA solvers."""

    N: int
    gamma: float = 0.1
    delta: float = 1e-6
    eta_policy: str = "default"
    rho: float = 1e-9  # interior smoothing before each inner Sinkhorn solve
    sinkhorn_max_iters: int = 200_000
    reference: np.ndarray = None
    objective_every: int = 0
    holdout: tuple = ()
    w2_metric: callable = None
    record_wall_time: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise InvalidInputError("iteration budget N must be >= 1")
        if self.delta < 0:
            raise InvalidInputError("gradient inexactness delta must be >= 0")


def _trace_for(cfg, step_rule):
    meta = {"eta_policy": step_rule, "N": cfg.N}
    return IterateTrace(("k", "objective_gap", "w2_to_reference", "wall_time_ms"), meta=meta)


def _record(trace, cfg, k, averaged, objective, t0):
    w2 = float("nan")
    if cfg.reference is not None and cfg.w2_metric is not None:
        w2 = cfg.w2_metric(averaged, cfg.reference)
    wall = (time.perf_counter() - t0) * 1e3 if cfg.record_wall_time else 0.0
    trace.append(k=k, objective_gap=objective, w2_to_reference=w2, wall_time_ms=wall)


def psgd_barycenter(stream, cost, cfg):
    """Projected online SGD on the entropic barycenter objective.

    Starts at the uniform histogram, steps with 1/(gamma k), uses the
    warm-started Sinkhorn potential as the inexact gradient, and projects
    onto the simplex after every step. Returns the running average and the
    trace.
    """
    if cfg.gamma <= 0:
        raise InvalidInputError("psgd requires gamma > 0")
    n = cost.n
    gamma = cfg.gamma
    tol = max(cfg.delta, 1e-12)
    params = EntropicParams(gamma=gamma, sinkhorn_tol=tol, max_iters=cfg.sinkhorn_max_iters)
    trace = _trace_for(cfg, "eta_k = 1/(gamma k)")
    marks = set(checkpoints(cfg.N))
    holdout = [as_weights(h) for h in cfg.holdout]

    rho = min(cfg.rho, 0.5 / n)
    p = np.full(n, 1.0 / n)
    avg = np.zeros(n)
    warm = None
    t0 = time.perf_counter()
    measures = iter(stream)
    for k in range(1, cfg.N + 1):
        q = next(measures)
        # projection may land on the boundary; evaluate the gradient at the
        # nearby interior point (extra inexactness absorbed into delta)
        p_eval = (p + rho) / (1.0 + n * rho)
        try:
            res = sinkhorn(p_eval, q, cost, params, warm_start=warm)
        except ConvergenceFailure as exc:
            exc.iterations = k
            raise
        warm = (res.f, res.g)
        eta = 1.0 / (gamma * k)
        p = project_simplex(p - eta * res.u).weights
        avg += (p - avg) / k
        if k in marks:
            obj = _empirical_entropic_objective(avg, holdout, cost, params) if holdout else float("nan")
            _record(trace, cfg, k, avg, obj, t0)
    return Histogram(avg), trace


def smd_barycenter(stream, cost, cfg):
    """Stochastic mirror descent with multiplicative simplex updates.

    Uses the exact LP dual potential (mean-zero gauge) as the gradient and
    the constant step sqrt(2 log n) / (||C||_inf sqrt(N)). Iterates stay
    strictly positive; the averaged iterate is returned.
    """
    n = cost.n
    eta = np.sqrt(2.0 * np.log(n)) / (cost.inf_norm * np.sqrt(cfg.N))
    trace = _trace_for(cfg, "eta = sqrt(2 log n)/(||C||_inf sqrt(N))")
    marks = set(checkpoints(cfg.N))
    holdout = [as_weights(h) for h in cfg.holdout]

    log_p = np.full(n, -np.log(n))
    p = np.exp(log_p)
    avg = np.zeros(n)
    t0 = time.perf_counter()
    measures = iter(stream)
    for k in range(1, cfg.N + 1):
        q = next(measures)
        grad = exact_ot(p, q, cost).potentials.u
        log_p = log_p - eta * grad
        log_p -= log_p.max()
        log_p -= np.log(np.exp(log_p).sum())
        p = np.exp(log_p)
        avg += (p - avg) / k
        if k in marks:
            obj = _empirical_exact_objective(avg, holdout, cost) if holdout else float("nan")
            _record(trace, cfg, k, avg, obj, t0)
    return Histogram(avg), trace


def _empirical_entropic_objective(p, holdout, cost, params):
    p = np.maximum(p, 1e-300)
    p = p / p.sum()
    vals = [entropic_ot_value(p, q, cost, params)[0] for q in holdout]
    return float(np.mean(vals))


def _empirical_exact_objective(p, holdout, cost):
    vals = [exact_ot(p, q, cost).value for q in holdout]
    return float(np.mean(vals))
