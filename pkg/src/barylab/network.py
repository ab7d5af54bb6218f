"""Graph topologies, Laplacian spectra, and a synchronous gossip runtime.

The runtime models one communication round per multiplication by the
Laplacian: every node sends its local vector to each neighbor, then applies
deg(i) * own - sum(received). Message counts and locality are enforced at
send time; algorithms built on top never touch non-neighbor state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectivityError, InvalidInputError


@dataclass(frozen=True)
class Topology:
    m: int
    edges: tuple
    kind: str = "custom"

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInputError("topology needs at least one node")
        seen = set()
        for (i, j) in self.edges:
            if i == j:
                raise InvalidInputError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise InvalidInputError(f"edge ({i},{j}) outside node range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidInputError(f"duplicate edge {key}")
            seen.add(key)
        if not _connected(self.m, self.edges):
            raise ConnectivityError("topology must be connected")

    @property
    def neighbor_lists(self):
        nbrs = [[] for _ in range(self.m)]
        for (i, j) in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(v) for v in nbrs]


def _connected(m, edges):
    if m == 1:
        return True
    nbrs = [[] for _ in range(m)]
    for (i, j) in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == m


def _norm_edges(pairs):
    return tuple(sorted((min(i, j), max(i, j)) for (i, j) in pairs))


def cycle_graph(m):
    if m < 3:
        raise InvalidInputError("cycle needs m >= 3")
    return Topology(m, _norm_edges((i, (i + 1) % m) for i in range(m)), kind="cycle")


def path_graph(m):
    if m < 2:
        raise InvalidInputError("path needs m >= 2")
    return Topology(m, _norm_edges((i, i + 1) for i in range(m - 1)), kind="path")


def star_graph(m):
    if m < 2:
        raise InvalidInputError("star needs m >= 2")
    return Topology(m, _norm_edges((0, i) for i in range(1, m)), kind="star")


def complete_graph(m):
    if m < 2:
        raise InvalidInputError("complete graph needs m >= 2")
    return Topology(m, _norm_edges((i, j) for i in range(m) for j in range(i + 1, m)), kind="complete")


def single_node():
    """Degenerate one-node network (W = [0])."""
    return Topology(1, (), kind="single")


def erdos_renyi_graph(m, p, seed):
    """G(m, p) rejection-sampled until connected; reproducible per seed."""
    if m < 2:
        raise InvalidInputError("erdos_renyi needs m >= 2")
    if not 0 < p <= 1:
        raise InvalidInputError("edge probability must be in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(10_000):
        mask = rng.random((m, m)) < p
        edges = [(i, j) for i in range(m) for j in range(i + 1, m) if mask[i, j]]
        if _connected(m, edges):
            return Topology(m, _norm_edges(edges), kind="erdos_renyi")
    raise ConnectivityError(f"no connected G({m},{p}) sample in 10000 draws")


def topology_from_spec(spec):
    """Build a topology from a JSON-style dict, e.g. {"kind":"cycle","m":10}."""
    kinds = {
        "cycle": lambda s: cycle_graph(s["m"]),
        "path": lambda s: path_graph(s["m"]),
        "star": lambda s: star_graph(s["m"]),
        "complete": lambda s: complete_graph(s["m"]),
        "single": lambda s: single_node(),
        "erdos_renyi": lambda s: erdos_renyi_graph(s["m"], s["p"], s.get("seed", 0)),
        "custom": lambda s: Topology(s["m"], _norm_edges(tuple(map(tuple, s["edges"])))),
    }
    kind = spec.get("kind")
    if kind not in kinds:
        raise InvalidInputError(f"unknown topology kind {kind!r}; valid: {sorted(kinds)}")
    return kinds[kind](spec)


class Laplacian:
    """Graph Laplacian: -1 on edges, degree on the diagonal."""

    __slots__ = ("matrix", "degrees", "topology")

    def __init__(self, topology):
        m = topology.m
        w = np.zeros((m, m))
        for (i, j) in topology.edges:
            w[i, j] = w[j, i] = -1.0
            w[i, i] += 1.0
            w[j, j] += 1.0
        self.matrix = w
        self.matrix.flags.writeable = False
        self.degrees = np.diag(w).copy()
        self.topology = topology

    @property
    def m(self):
        return self.topology.m

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def laplacian_of(topology):
    return Laplacian(topology)


@dataclass
class SpectralInfo:
    lambda_max: float
    lambda_min_plus: float
    chi: float
    eigenvalues: np.ndarray = field(repr=False, default=None)


def _jacobi_eigenvalues(a, tol=1e-13, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Kept self-contained so tests can compare against an independent dense
    eigensolver.
    """
    a = np.array(a, dtype=np.float64)
    m = a.shape[0]
    if m == 1:
        return np.array([a[0, 0]])
    scale = max(1.0, np.abs(a).max())
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[:, p].copy()
                rq = a[:, q].copy()
                a[:, p] = c * rp - s * rq
                a[:, q] = s * rp + c * rq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
    return np.sort(np.diag(a))


def spectral(w):
    """Largest and smallest-positive eigenvalues and their ratio chi."""
    if isinstance(w, Laplacian):
        mat = w.matrix
    else:
        mat = np.asarray(w, dtype=np.float64)
    eigs = _jacobi_eigenvalues(mat)
    lam_max = float(eigs[-1])
    if lam_max <= 0:
        # single node or empty graph: no communication needed
        return SpectralInfo(lambda_max=0.0, lambda_min_plus=0.0, chi=1.0, eigenvalues=eigs)
    positive = eigs[eigs > 1e-9 * lam_max]
    if positive.size == 0:
        raise ConnectivityError("no positive eigenvalue; graph is disconnected or trivial")
    lam_min_plus = float(positive[0])
    return SpectralInfo(
        lambda_max=lam_max,
        lambda_min_plus=lam_min_plus,
        chi=lam_max / lam_min_plus,
        eigenvalues=eigs,
    )


class GossipNetwork:
    """Synchronous message-passing runtime over a fixed topology.

    ``multiply(P)`` performs one round: every node sends its row of ``P``
    to each neighbor and returns the stacked Laplacian product, computed at
    node i purely from received messages. Locality is asserted on every
    send. The message log keeps (round, src, dst, bytes) tuples up to
    ``log_limit`` entries; the counter is always exact.
    """

    def __init__(self, topology, log_limit=200_000):
        self.topology = topology
        self.laplacian = Laplacian(topology)
        self.neighbors = topology.neighbor_lists
        self._edge_set = {(i, j) for (i, j) in topology.edges}
        self._edge_set |= {(j, i) for (i, j) in topology.edges}
        self.rounds = 0
        self.messages_sent = 0
        self.log_limit = log_limit
        self.message_log = []

    def _send(self, src, dst, nbytes):
        if (src, dst) not in self._edge_set:
            raise ConnectivityError(f"message {src}->{dst} does not traverse a graph edge")
        self.messages_sent += 1
        if len(self.message_log) < self.log_limit:
            self.message_log.append((self.rounds, src, dst, nbytes))

    def multiply(self, local_vectors):
        """One gossip round: node i ends holding sum_j W_ij p_j."""
        p = np.asarray(local_vectors, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != self.topology.m:
            raise InvalidInputError(
                f"expected ({self.topology.m}, n) stacked node vectors, got {p.shape}"
            )
        self.rounds += 1
        nbytes = p.shape[1] * p.itemsize
        inbox = [[] for _ in range(self.topology.m)]
        for src in range(self.topology.m):
            for dst in self.neighbors[src]:
                self._send(src, dst, nbytes)
                inbox[dst].append(p[src])
        out = np.empty_like(p)
        for i in range(self.topology.m):
            acc = self.laplacian.degrees[i] * p[i]
            for msg in inbox[i]:
                acc = acc - msg
            out[i] = acc
        return out

    def message_log_rows(self):
        """Rows for CSV export: round, src, dst, bytes."""
        return list(self.message_log)


def gossip_multiply(local_vectors, w, runtime=None):
    """Laplacian product through the message-passing runtime.

    Returns the stacked result and the runtime used (carrying its log).
    """
    if runtime is None:
        if not isinstance(w, Laplacian):
            raise InvalidInputError("gossip_multiply needs a Laplacian or an existing runtime")
        runtime = GossipNetwork(w.topology)
    return runtime.multiply(local_vectors), runtime


def consensus_gap(local_vectors, w):
    """Distance-from-consensus metrics: ||W p||_2 and sqrt(p' W p).

    Both vanish exactly when all node blocks coincide.
    """
    p = np.asarray(local_vectors, dtype=np.float64)
    mat = w.matrix if isinstance(w, Laplacian) else np.asarray(w, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != mat.shape[0]:
        raise InvalidInputError("stacked vectors do not match the Laplacian size")
    wp = mat @ p
    gap_w = float(np.linalg.norm(wp))
    quad = float(np.sum(p * wp))
    gap_sqrt = float(np.sqrt(max(quad, 0.0)))
    return gap_w, gap_sqrt
