"""Communication graphs, Metropolis-Hastings mixing matrices and spectral checks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

DENSE_EIG_MAX_N = 512
STOCHASTIC_TOL = 1e-12


class TopologyError(ValueError):
    """Raised when a graph or mixing matrix cannot be built as requested."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on agents ``0..n-1``.

    ``edges`` holds pairs ``(i, j)`` with ``i < j``. ``attempts`` records how
    many samples the random generator drew before it found a connected one.
    """

    n: int
    edges: frozenset
    attempts: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("graph needs at least one node")
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
            if not (0 <= i < j < self.n):
                raise TopologyError(f"edge ({i}, {j}) is not a normalized pair in range")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], attempts: int = 1) -> "Graph":
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
            norm.add((min(i, j), max(i, j)))
        return cls(n, frozenset(norm), attempts)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def is_connected(self) -> bool:
        nbrs = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def generate_erdos_renyi(n: int, p: float, seed: int, max_attempts: int = 1000) -> Graph:
    """Sample a connected G(n, p) graph.

    Every pair ``i < j`` is kept independently with probability ``p``.
    Disconnected samples are discarded and redrawn with sub-seed
    ``seed ^ attempt`` until one is connected or ``max_attempts`` is used up.
    """
    if n < 1:
        raise TopologyError("n must be >= 1")
    if not (0.0 <= p <= 1.0) or np.isnan(p):
        raise TopologyError(f"edge probability must lie in [0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed ^ attempt)
        keep = rng.random(iu.size) < p
        g = Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())), attempts=attempt + 1)
        if g.is_connected():
            return g
    raise TopologyError(
        f"no connected ER({n}, {p}) sample in {max_attempts} attempts; p is too small for n"
    )


@dataclass(frozen=True)
class MixingMatrix:
    w: np.ndarray
    rho: float
    graph: Graph | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights ``1 / (max(d_i, d_j) + 1)`` on edges.

    The diagonal takes the remaining mass of each row. Both triangles are
    written from the same float, so the result is bitwise symmetric.
    """
    if not g.is_connected():
        raise TopologyError("Metropolis weights require a connected graph")
    deg = g.degrees
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (max(deg[i], deg[j]) + 1)
    for i in range(g.n):
        w[i, i] = 1.0 - w[i].sum()
    w.setflags(write=False)
    return MixingMatrix(w=w, rho=spectral_gap(w), graph=g)


def _as_array(w) -> np.ndarray:
    return np.asarray(w.w if isinstance(w, MixingMatrix) else w, dtype=float)


def _power_gap(b: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    # Iterate on B^2 so that +/- eigenvalue pairs of B cannot make the iterate oscillate.
    n = b.shape[0]
    v = np.random.default_rng(0).standard_normal(n)
    v -= v.mean()
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    lam = 0.0
    for _ in range(max_iter):
        u = b @ (b @ v)
        u -= u.mean()
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= tol * new:
            return float(np.sqrt(new))
        lam = new
    raise ConvergenceError(f"power iteration did not reach relative tolerance {tol} in {max_iter} steps")


def spectral_gap(w, method: str = "auto") -> float:
    """``||W - J||_2`` for symmetric ``W``.

    Dense symmetric eigendecomposition for ``N <= 512``; above that (or with
    ``method="power"``) power iteration with the all-ones direction deflated.
    """
    w = _as_array(w)
    n = w.shape[0]
    b = w - np.full((n, n), 1.0 / n)
    if method == "auto":
        method = "dense" if n <= DENSE_EIG_MAX_N else "power"
    if method == "dense":
        return float(np.max(np.abs(np.linalg.eigvalsh(b))))
    if method == "power":
        return _power_gap(b)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    details: dict[str, str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def __str__(self) -> str:
        return "\n".join(
            f"{'PASS' if ok else 'FAIL'} {name}: {self.details.get(name, '')}"
            for name, ok in self.checks.items()
        )


def validate_mixing(w, graph: Graph | None = None) -> ValidationReport:
    """Check symmetry, double stochasticity, nonnegativity, sparsity pattern and rho < 1."""
    if graph is None and isinstance(w, MixingMatrix):
        graph = w.graph
    a = _as_array(w)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise TopologyError(f"mixing matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    checks: dict[str, bool] = {}
    details: dict[str, str] = {}

    checks["symmetric"] = bool(np.array_equal(a, a.T))
    details["symmetric"] = f"max |w_ij - w_ji| = {np.max(np.abs(a - a.T)):.3e}"

    row_err = float(np.max(np.abs(a.sum(axis=1) - 1.0)))
    col_err = float(np.max(np.abs(a.sum(axis=0) - 1.0)))
    checks["doubly_stochastic"] = row_err <= STOCHASTIC_TOL and col_err <= STOCHASTIC_TOL
    details["doubly_stochastic"] = f"row err {row_err:.3e}, col err {col_err:.3e}"

    checks["nonnegative"] = bool(np.all(a >= 0.0))
    neg_diag = [i for i in range(n) if a[i, i] < 0.0]
    details["nonnegative"] = f"min entry {a.min():.3e}" + (f"; negative diagonal at {neg_diag}" if neg_diag else "")

    if graph is not None:
        if graph.n != n:
            checks["sparsity_pattern"] = False
            details["sparsity_pattern"] = f"graph has {graph.n} nodes, matrix has {n}"
        else:
            expect = graph.adjacency()
            off = ~np.eye(n, dtype=bool)
            bad = np.argwhere(((a > 0) != expect) & off)
            checks["sparsity_pattern"] = bad.size == 0
            details["sparsity_pattern"] = "matches graph" if bad.size == 0 else f"{len(bad)} mismatched entries, first {bad[0].tolist()}"

    if checks["symmetric"]:
        rho = float(np.max(np.abs(np.linalg.eigvalsh(a - 1.0 / n))))
    else:
        rho = float(np.linalg.norm(a - 1.0 / n, 2))
    checks["rho_below_one"] = rho < 1.0 - 1e-12
    details["rho_below_one"] = f"rho = {rho:.6f}"
    return ValidationReport(checks, details)


def write_graph(g: Graph, out: TextIO) -> None:
    edges = sorted(g.edges)
    out.write(f"{g.n} {len(edges)}\n")
    for i, j in edges:
        out.write(f"{i} {j}\n")


def read_graph(src: TextIO) -> Graph:
    lines = [ln.split() for ln in src if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise TopologyError("graph file must start with 'n m'")
    n, m = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    if len(body) != m:
        raise TopologyError(f"header declares {m} edges, found {len(body)}")
    return Graph.from_edges(n, [(int(a), int(b)) for a, b in body])


def write_matrix(w, out: TextIO) -> None:
    for row in _as_array(w):
        out.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_matrix(src: TextIO) -> np.ndarray:
    rows = [[float(t) for t in ln.split()] for ln in src if ln.strip()]
    a = np.array(rows, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise TopologyError("matrix file must hold a square table")
    return a
