"""Local objectives: LIBSVM ingestion, sigmoid least squares, synthetic quadratics.

The optimizers only ever see ``local_loss``. The analytic gradients in this
module exist for metrics and tests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class LibSVMFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Dataset:
    """Binary-labelled samples with a trailing constant-1 bias column.

    ``features`` is a dense ``(n_samples, d)`` view; ``d`` is the raw
    feature count plus one.
    """

    features: np.ndarray
    labels: np.ndarray

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.labels.shape[0]

    def head(self, k: int) -> "Dataset":
        return Dataset(self.features[:k], self.labels[:k])


def _parse_label(tok: str, lineno: int) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise LibSVMFormatError(lineno, f"bad label {tok!r}") from None
    if v == 1.0:
        return 1
    if v in (-1.0, 0.0):
        return 0
    raise LibSVMFormatError(lineno, f"label {tok!r} is not one of -1, 0, +1")


def parse_libsvm(src: TextIO | Iterable[str], dim: int | None = None) -> Dataset:
    """Read ``label idx:val ...`` lines (1-based, ascending indices).

    Labels -1/+1 and 0/1 both map to 0/1. If ``dim`` is omitted the raw
    dimension is the largest index seen.
    """
    labels: list[int] = []
    rows: list[tuple[list[int], list[float]]] = []
    for lineno, line in enumerate(src, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], lineno))
        idx: list[int] = []
        val: list[float] = []
        prev = 0
        for tok in toks[1:]:
            k, sep, v = tok.partition(":")
            try:
                j = int(k)
                x = float(v)
            except ValueError:
                raise LibSVMFormatError(lineno, f"malformed token {tok!r}") from None
            if not sep:
                raise LibSVMFormatError(lineno, f"malformed token {tok!r}")
            if j <= prev:
                raise LibSVMFormatError(lineno, f"index {j} is not ascending (previous {prev})")
            if dim is not None and j > dim:
                raise LibSVMFormatError(lineno, f"index {j} exceeds declared dimension {dim}")
            prev = j
            idx.append(j - 1)
            val.append(x)
        rows.append((idx, val))

    raw_dim = dim if dim is not None else max((r[0][-1] + 1 for r in rows if r[0]), default=0)
    feats = np.zeros((len(rows), raw_dim + 1))
    for r, (idx, val) in enumerate(rows):
        feats[r, idx] = val
    feats[:, raw_dim] = 1.0
    feats.setflags(write=False)
    lab = np.asarray(labels, dtype=np.int8)
    lab.setflags(write=False)
    return Dataset(feats, lab)


def load_libsvm(path, dim: int | None = None, subsample: int | None = None) -> Dataset:
    with open(path) as f:
        ds = parse_libsvm(f, dim=dim)
    return ds.head(subsample) if subsample else ds


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class SigmoidLeastSquares:
    """``mean((sigmoid(a_j . x) - y_j)^2) + lam/2 ||x||^2`` over one shard."""

    def __init__(self, a: np.ndarray, y: np.ndarray, lam: float):
        if lam < 0:
            raise ValueError("regularization weight must be >= 0")
        self.a = np.ascontiguousarray(a, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.lam = float(lam)
        self.d = self.a.shape[1]

    def value(self, x: np.ndarray) -> float:
        r = sigmoid(self.a @ x) - self.y
        return float(r @ r / r.shape[0] + 0.5 * self.lam * (x @ x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        s = sigmoid(self.a @ x)
        coef = 2.0 * (s - self.y) * s * (1.0 - s) / s.shape[0]
        return self.a.T @ coef + self.lam * x


class Quadratic:
    """``1/2 (x - c)^T A (x - c)``."""

    def __init__(self, a: np.ndarray, c: np.ndarray):
        self.a = np.asarray(a, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.d = self.c.shape[0]

    def value(self, x: np.ndarray) -> float:
        r = x - self.c
        return float(0.5 * r @ (self.a @ r))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.a @ (x - self.c)

    def values(self, pts: np.ndarray) -> np.ndarray:
        r = pts - self.c
        return 0.5 * np.einsum("ij,ij->i", r @ self.a, r)


class CubicSum:
    """``sum_j x_j^3``; smooth with constant ``6 * radius`` on the box ``|x_j| <= radius``."""

    def __init__(self, d: int):
        self.d = d

    def value(self, x):
        return float(np.sum(x ** 3))

    def gradient(self, x):
        return 3.0 * x ** 2

    def values(self, pts):
        return np.sum(pts ** 3, axis=1)

    @staticmethod
    def smoothness(radius: float) -> float:
        return 6.0 * radius


@dataclass(frozen=True)
class Problem:
    locals: list
    d: int
    shards: tuple = ()
    lam: float = 0.0
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_agents(self) -> int:
        return len(self.locals)

    def fingerprint(self) -> str:
        """Stable hash of the local objectives' defining arrays."""
        h = hashlib.sha256()
        h.update(f"{self.kind}|{self.d}|{self.n_agents}|{self.lam!r}".encode())
        for f in self.locals:
            for name in ("a", "y", "c"):
                arr = getattr(f, name, None)
                if arr is not None:
                    h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def _check_dim(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.d,):
        raise ValueError(f"expected a vector of dimension {problem.d}, got shape {x.shape}")
    return x


def local_loss(problem: Problem, i: int, x) -> float:
    return problem.locals[i].value(_check_dim(problem, x))


def local_gradient_oracle(problem: Problem, i: int, x) -> np.ndarray:
    return problem.locals[i].gradient(_check_dim(problem, x))


def global_loss(problem: Problem, x) -> float:
    x = _check_dim(problem, x)
    return float(np.mean([f.value(x) for f in problem.locals]))


def local_gradients(problem: Problem, x) -> np.ndarray:
    """All local gradients at one point, shape ``(N, d)``."""
    x = _check_dim(problem, x)
    return np.stack([f.gradient(x) for f in problem.locals])


def global_gradient(problem: Problem, x) -> np.ndarray:
    return local_gradients(problem, x).mean(axis=0)


def _shard_bounds(total: int, n_agents: int) -> list[tuple[int, int]]:
    size = total // n_agents
    bounds = [(i * size, (i + 1) * size) for i in range(n_agents)]
    bounds[-1] = (bounds[-1][0], total)
    return bounds


def _problem_from_order(ds: Dataset, order: np.ndarray, n_agents: int, lam: float, kind: str) -> Problem:
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    if n_agents > len(ds):
        raise ValueError(f"cannot split {len(ds)} samples across {n_agents} agents")
    shards = tuple(order[lo:hi] for lo, hi in _shard_bounds(len(ds), n_agents))
    locals_ = [SigmoidLeastSquares(ds.features[s], ds.labels[s], lam) for s in shards]
    return Problem(locals_, ds.d, shards, lam, kind)


def partition_pathological(ds: Dataset, n_agents: int, lam: float = 0.001) -> Problem:
    """Stable sort by label, then cut into contiguous shards.

    Shards have ``len(ds) // n_agents`` samples; the last one also takes the
    remainder.
    """
    order = np.argsort(ds.labels, kind="stable")
    return _problem_from_order(ds, order, n_agents, lam, "pathological")


def partition_random(ds: Dataset, n_agents: int, seed: int, lam: float = 0.001) -> Problem:
    order = np.random.default_rng(seed).permutation(len(ds))
    return _problem_from_order(ds, order, n_agents, lam, "random")


def quadratic_problem(a: np.ndarray, offsets: np.ndarray, **meta) -> Problem:
    offsets = np.asarray(offsets, dtype=float)
    if offsets.ndim != 2:
        raise ValueError("offsets must be an (N, d) array")
    return Problem([Quadratic(a, c) for c in offsets], offsets.shape[1], kind="quadratic", meta=meta)


def _psd_with_norm(d: int, l_target: float, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = rng.uniform(0.0, l_target, size=d)
    eig[np.argmax(eig)] = l_target
    a = (q * eig) @ q.T
    return 0.5 * (a + a.T)


def synthetic_quadratic_problem(n_agents: int, d: int, heterogeneity: float, l_target: float, seed: int) -> Problem:
    """Shared PSD curvature ``A`` with ``||A||_2 = l_target`` and zero-mean offsets.

    Offsets are standard normal draws scaled by ``heterogeneity`` and
    centred, so ``heterogeneity = 0`` gives identical local objectives.
    """
    if n_agents < 1 or d < 1 or heterogeneity < 0 or l_target <= 0:
        raise ValueError("n_agents, d and l_target must be positive; heterogeneity >= 0")
    rng = np.random.default_rng(seed)
    a = _psd_with_norm(d, l_target, rng)
    c = heterogeneity * rng.standard_normal((n_agents, d))
    c -= c.mean(axis=0)
    return quadratic_problem(a, c, seed=seed, l_target=l_target, heterogeneity=heterogeneity)


def quadratic_zeta_sq(problem: Problem) -> float:
    """Closed-form heterogeneity of a shared-curvature quadratic problem."""
    c = np.stack([f.c for f in problem.locals])
    a = problem.locals[0].a
    dev = (c.mean(axis=0) - c) @ a.T
    return float(np.mean(np.sum(dev ** 2, axis=1)))


def write_quadratic_problem(problem: Problem, out: TextIO) -> None:
    m = problem.meta
    out.write(f"n_agents {problem.n_agents}\nd {problem.d}\n")
    out.write(f"l_target {m['l_target']!r}\nseed {m['seed']}\n")
    for f in problem.locals:
        out.write("offset " + " ".join(repr(float(v)) for v in f.c) + "\n")


def read_quadratic_problem(src: TextIO) -> Problem:
    """Rebuild a problem written by :func:`write_quadratic_problem`."""
    fields: dict[str, str] = {}
    offsets = []
    for line in src:
        key, _, rest = line.strip().partition(" ")
        if key == "offset":
            offsets.append([float(t) for t in rest.split()])
        elif key:
            fields[key] = rest
    d, seed, l_target = int(fields["d"]), int(fields["seed"]), float(fields["l_target"])
    a = _psd_with_norm(d, l_target, np.random.default_rng(seed))
    return quadratic_problem(a, np.array(offsets), seed=seed, l_target=l_target)


@dataclass(frozen=True)
class HeterogeneityEstimate:
    zeta_sq: float
    probe: np.ndarray


def heterogeneity_estimate(problem: Problem, probes: Iterable) -> HeterogeneityEstimate:
    """Largest gradient dispersion ``(1/N) sum ||grad f_i - grad F||^2`` over the probes."""
    best = None
    for x in probes:
        g = local_gradients(problem, x)
        disp = float(np.mean(np.sum((g - g.mean(axis=0)) ** 2, axis=1)))
        if best is None or disp > best.zeta_sq:
            best = HeterogeneityEstimate(disp, np.asarray(x, dtype=float))
    if best is None:
        raise ValueError("need at least one probe point")
    return best


def estimate_smoothness(problem: Problem, n_pairs: int = 2000, scale: float = 1.0,
                        seed: int = 0, margin: float = 0.1, power_steps: int = 4) -> float:
    """Empirical L: largest gradient-difference ratio over probe pairs, plus a margin.

    Probe points are ``x ~ N(0, scale^2 I)``. From each, the partner is
    ``x + r * v`` with ``r`` log-uniform in [1e-3, scale]; ``v`` starts random
    and is then steered by a few power-iteration steps (``v <- grad(x + r v) - grad(x)``)
    so the pairs line up with the stiffest direction instead of a typical one.
    Only used for advisory step-size checks.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_pairs):
        f = problem.locals[int(rng.integers(problem.n_agents))]
        x = scale * rng.standard_normal(problem.d)
        gx = f.gradient(x)
        v = rng.standard_normal(problem.d)
        for _ in range(power_steps + 1):
            r = 10.0 ** rng.uniform(-3.0, np.log10(max(scale, 1e-3)))
            v /= np.linalg.norm(v)
            diff = f.gradient(x + r * v) - gx
            best = max(best, float(np.linalg.norm(diff) / r))
            if not np.any(diff):
                break
            v = diff
    return best * (1.0 + margin)
