"""Config-driven experiments: single runs, baseline comparisons and beta sweeps.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
Keys not given take the defaults in :class:`ExperimentConfig`.
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
import os
import shutil
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import algorithms as alg
from .datasets import bundled_a9a_path
from .metrics import CSV_COLUMNS, MetricsRow, steady_state_floor, loglog_slope
from .problem import (
    Problem,
    estimate_smoothness,
    load_libsvm,
    partition_pathological,
    partition_random,
    synthetic_quadratic_problem,
)
from .topology import (
    MixingMatrix,
    TopologyError,
    generate_erdos_renyi,
    metropolis_weights,
    read_graph,
    validate_mixing,
    write_graph,
    write_matrix,
)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "ZOMGT_OUTPUT_ROOT"
BUNDLED_A9A = "a9a"
DEFAULT_BETAS = (0.0, 0.5, 0.8, 0.9, 0.98)


class ConfigError(ValueError):
    def __init__(self, msg: str, lineno: int | None = None, key: str | None = None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + msg)
        self.lineno = lineno
        self.key = key


@dataclass
class ExperimentConfig:
    problem: str = "libsvm"
    data_path: str = BUNDLED_A9A
    data_dim: int = 123
    subsample: int = 4000
    partition: str = "pathological"
    partition_seed: int = 0
    lam: float = 0.001
    synth_d: int = 20
    synth_heterogeneity: float = 1.0
    synth_l: float = 1.0
    synth_seed: int = 0
    n_agents: int = 20
    p: float = 0.3
    topology_seed: int = 225
    topology_file: str = ""
    eta: float = 0.05
    beta: float = 0.9
    mu: float = 0.01
    T: int = 1000
    algorithms: tuple = ("zomgt", "tang1", "tang2")
    caps: dict = field(default_factory=lambda: {"tang2": 40})
    seed: int = 0
    monitor: bool = True
    x0: str = "zeros"
    workers: int = 1
    metrics_stride: int = 1
    wall_clock: bool = True
    floor_window: int = 100
    betas: tuple = DEFAULT_BETAS
    output_dir: str = "runs"

    @property
    def hyperparams(self) -> alg.HyperParams:
        return alg.HyperParams(self.eta, self.beta, self.mu, self.T)

    def to_text(self) -> str:
        """Serialize every field; :func:`parse_config` reads it back to an equal config."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "caps":
                for a in sorted(v):
                    out.append(f"cap.{a} = {v[a]}")
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}


def _convert(key: str, raw: str, lineno: int | None):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _BOOL[raw.lower()]
        if key == "algorithms":
            return tuple(t.strip() for t in raw.split(",") if t.strip())
        if key == "betas":
            return tuple(float(t) for t in raw.split(",") if t.strip())
        return raw
    except (ValueError, KeyError):
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}", lineno, key) from None


def _validate(cfg: ExperimentConfig, check_paths: bool = True) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}", key=key)

    try:
        cfg.hyperparams
    except ValueError as exc:
        key = str(exc).split()[0]
        bad(key, str(exc))
    if cfg.problem not in ("libsvm", "quadratic"):
        bad("problem", f"expected libsvm or quadratic, got {cfg.problem!r}")
    if cfg.partition not in ("pathological", "random"):
        bad("partition", f"expected pathological or random, got {cfg.partition!r}")
    if not cfg.algorithms:
        bad("algorithms", "at least one algorithm is required")
    for a in cfg.algorithms:
        if a not in alg.ALGORITHMS:
            bad("algorithms", f"unknown algorithm {a!r}")
    for a, c in cfg.caps.items():
        if a not in alg.ALGORITHMS:
            bad(f"cap.{a}", "unknown algorithm")
        if c < 0:
            bad(f"cap.{a}", "must be >= 0")
    if cfg.n_agents < 1:
        bad("n_agents", "must be >= 1")
    if not 0.0 <= cfg.p <= 1.0:
        bad("p", "must lie in [0, 1]")
    if cfg.lam < 0:
        bad("lam", "must be >= 0")
    if cfg.subsample < 0:
        bad("subsample", "must be >= 0 (0 means the full file)")
    if cfg.x0 not in ("zeros", "gaussian"):
        bad("x0", "expected zeros or gaussian")
    for name in ("workers", "metrics_stride", "floor_window", "synth_d", "data_dim"):
        if getattr(cfg, name) < 1:
            bad(name, "must be >= 1")
    if cfg.synth_heterogeneity < 0 or cfg.synth_l <= 0:
        bad("synth_heterogeneity", "heterogeneity must be >= 0 and synth_l > 0")
    for b in cfg.betas:
        if not 0.0 <= b < 1.0:
            bad("betas", f"beta {b} outside [0, 1)")
    if check_paths:
        if cfg.problem == "libsvm" and cfg.data_path != BUNDLED_A9A and not Path(cfg.data_path).is_file():
            bad("data_path", f"file not found: {cfg.data_path}")
        if cfg.topology_file and not Path(cfg.topology_file).is_file():
            bad("topology_file", f"file not found: {cfg.topology_file}")


def parse_config(text: str, check_paths: bool = True) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if key.startswith("cap."):
            try:
                cfg.caps[key[4:]] = int(raw)
            except ValueError:
                raise ConfigError(f"cannot parse {key} = {raw!r} as int", lineno, key) from None
            continue
        if key == "caps" or key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno, key)
        setattr(cfg, key, _convert(key, raw, lineno))
    _validate(cfg, check_paths)
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.problem == "quadratic":
        return synthetic_quadratic_problem(cfg.n_agents, cfg.synth_d, cfg.synth_heterogeneity,
                                           cfg.synth_l, cfg.synth_seed)
    path = bundled_a9a_path() if cfg.data_path == BUNDLED_A9A else Path(cfg.data_path)
    ds = load_libsvm(path, dim=cfg.data_dim, subsample=cfg.subsample or None)
    if cfg.partition == "pathological":
        return partition_pathological(ds, cfg.n_agents, cfg.lam)
    return partition_random(ds, cfg.n_agents, cfg.partition_seed, cfg.lam)


def build_topology(cfg: ExperimentConfig) -> MixingMatrix:
    if cfg.topology_file:
        with open(cfg.topology_file) as f:
            g = read_graph(f)
        if g.n != cfg.n_agents:
            raise ConfigError(f"topology_file has {g.n} nodes but n_agents = {cfg.n_agents}", key="topology_file")
    else:
        g = generate_erdos_renyi(cfg.n_agents, cfg.p, cfg.topology_seed)
    w = metropolis_weights(g)
    report = validate_mixing(w)
    if not report.ok:
        raise TopologyError(f"mixing matrix failed validation:\n{report}")
    return w


def _sha(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def _resolve_out(cfg: ExperimentConfig, out_dir) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    p = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return p if p.is_absolute() or not root else Path(root) / p


@dataclass
class SummaryRow:
    algorithm: str
    floor_consensus: float
    floor_gradnorm: float
    queries_total: int
    wall_ms: float
    iterations: int


SUMMARY_COLUMNS = tuple(f.name for f in fields(SummaryRow))


@dataclass
class RunArtifact:
    out_dir: Path
    config: ExperimentConfig
    trajectories: dict
    csv_paths: dict
    summary: list
    rho: float


def summarize_trajectory(traj: alg.Trajectory, window: int = 100) -> SummaryRow:
    win = min(window, len(traj.rows))
    last = traj.rows[-1]
    gn = [v for v in traj.column("grad_norm_sq") if not math.isnan(v)]
    return SummaryRow(
        algorithm=traj.algorithm,
        floor_consensus=steady_state_floor(traj.column("consensus_err"), win).value,
        floor_gradnorm=steady_state_floor(gn, min(win, len(gn))).value,
        queries_total=last.queries_cum,
        wall_ms=last.wall_ms,
        iterations=last.k,
    )


def write_trajectory_csv(path: Path, traj: alg.Trajectory, header: dict) -> None:
    with open(path, "w") as f:
        for k, v in header.items():
            f.write(f"# {k}={v}\n")
        f.write(",".join(CSV_COLUMNS) + "\n")
        for row in traj.rows:
            f.write(row.csv_line() + "\n")


def read_trajectory_csv(path) -> tuple[dict, list[MetricsRow]]:
    header, rows = {}, []
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k] = v
            elif line.startswith("k,"):
                if line.strip() != ",".join(CSV_COLUMNS):
                    raise ValueError(f"{path}: unexpected column order {line.strip()!r}")
            elif line.strip():
                rows.append(MetricsRow.from_csv_line(line))
    return header, rows


def _run_one(name: str, cfg: ExperimentConfig, problem: Problem, w: MixingMatrix,
             hp: alg.HyperParams, lipschitz: float | None) -> alg.Trajectory:
    return alg.run(name, problem, w, hp, cfg.seed, monitor=cfg.monitor, x0=cfg.x0,
                   cap=cfg.caps.get(name), workers=cfg.workers, metrics_stride=cfg.metrics_stride,
                   wall_clock=cfg.wall_clock, lipschitz=lipschitz)


def run_experiment(cfg: ExperimentConfig, out_dir=None, problem: Problem | None = None,
                   w: MixingMatrix | None = None) -> RunArtifact:
    """Run every listed algorithm on the same problem, topology, x0 and seed.

    Writes ``<algorithm>.csv``, ``config.resolved``, ``topology.txt``,
    ``mixing.txt`` and ``summary.csv`` under the output directory. Files
    written by a failed run are removed before the error propagates.
    """
    out = _resolve_out(cfg, out_dir)
    existed = out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        problem = problem if problem is not None else build_problem(cfg)
        w = w if w is not None else build_topology(cfg)
        hp = cfg.hyperparams
        x0 = alg.initial_points(problem, cfg.seed, cfg.x0)
        header = {
            "topology_sha": _sha(w.w),
            "problem_sha": problem.fingerprint(),
            "x0_sha": _sha(x0),
            "seed": cfg.seed,
        }
        lipschitz = estimate_smoothness(problem, n_pairs=200, seed=cfg.seed) if problem.kind != "quadratic" else cfg.synth_l

        for name, writer in (("config.resolved", lambda f: f.write(cfg.to_text())),
                             ("topology.txt", lambda f: write_graph(w.graph, f)),
                             ("mixing.txt", lambda f: write_matrix(w, f))):
            p = out / name
            written.append(p)
            with open(p, "w") as f:
                writer(f)

        trajs, paths, summary = {}, {}, []
        for name in cfg.algorithms:
            traj = _run_one(name, cfg, problem, w, hp, lipschitz)
            p = out / f"{name}.csv"
            written.append(p)
            write_trajectory_csv(p, traj, {"algorithm": name, **header})
            trajs[name], paths[name] = traj, p
            summary.append(summarize_trajectory(traj, cfg.floor_window))
            log.info("%s: %d iterations, %d queries", name, traj.rows[-1].k, traj.rows[-1].queries_cum)

        p = out / "summary.csv"
        written.append(p)
        csv_text, _ = emit_summary(summary)
        p.write_text(csv_text)
        return RunArtifact(out, cfg, trajs, paths, summary, w.rho)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if not existed:
            shutil.rmtree(out, ignore_errors=True)
        raise


def emit_summary(rows) -> tuple[str, str]:
    """CSV text and an aligned plain-text table for summary rows or run artifacts."""
    flat: list[SummaryRow] = []
    for r in rows:
        flat.extend(r.summary if isinstance(r, RunArtifact) else [r])
    if not flat:
        raise ValueError("nothing to summarize")
    buf = io.StringIO()
    buf.write(",".join(SUMMARY_COLUMNS) + "\n")
    for r in flat:
        buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in asdict(r).values()) + "\n")

    cells = [list(SUMMARY_COLUMNS)] + [
        [r.algorithm, f"{r.floor_consensus:.3e}", f"{r.floor_gradnorm:.3e}",
         str(r.queries_total), f"{r.wall_ms:.1f}", str(r.iterations)]
        for r in flat
    ]
    widths = [max(len(row[c]) for row in cells) for c in range(len(SUMMARY_COLUMNS))]
    table = "\n".join("  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells)
    return buf.getvalue(), table + "\n"


def summarize_dir(path) -> tuple[str, str]:
    """Rebuild the summary from the trajectory CSVs found in a run directory."""
    path = Path(path)
    found = {p.stem: p for p in path.glob("*.csv") if p.name not in ("summary.csv", "sweep.csv")}
    order = sorted(found)
    resolved = path / "config.resolved"
    if resolved.is_file():
        listed = parse_config(resolved.read_text(), check_paths=False).algorithms
        order = [a for a in listed if a in found] + [a for a in order if a not in listed]
    rows = []
    for name in order:
        p = found[name]
        header, mrows = read_trajectory_csv(p)
        traj = alg.Trajectory(header.get("algorithm", p.stem), mrows)
        rows.append(summarize_trajectory(traj))
    if not rows:
        raise FileNotFoundError(f"no trajectory CSVs under {path}")
    return emit_summary(rows)


@dataclass
class SweepArtifact:
    betas: tuple
    floors: dict
    slope: float | None
    slope_all: float | None
    out_dir: Path | None = None

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return [(1.0 - b, self.floors[b]) for b in self.betas]

    @property
    def monotone(self) -> bool:
        fl = [self.floors[b] for b in sorted(self.betas)]
        return all(a > b for a, b in zip(fl, fl[1:]))


def _fit(pairs) -> float | None:
    if len(pairs) < 2 or any(y <= 0 for _, y in pairs):
        return None
    return loglog_slope(pairs)


def sweep_beta(cfg: ExperimentConfig, betas=None, out_dir=None, problem: Problem | None = None,
               w: MixingMatrix | None = None) -> SweepArtifact:
    """ZO-MGT consensus floors across momentum factors, with log-log slope fits.

    ``slope`` fits only ``beta >= 0.5``; ``slope_all`` fits every beta.
    """
    betas = tuple(sorted(cfg.betas if betas is None else betas))
    for b in betas:
        if not 0.0 <= b < 1.0:
            raise ConfigError(f"betas: beta {b} outside [0, 1)", key="betas")
    problem = problem if problem is not None else build_problem(cfg)
    w = w if w is not None else build_topology(cfg)
    floors = {}
    for b in betas:
        hp = alg.HyperParams(cfg.eta, b, cfg.mu, cfg.T)
        traj = alg.run("zomgt", problem, w, hp, cfg.seed, monitor=cfg.monitor, x0=cfg.x0,
                       workers=cfg.workers, metrics_stride=cfg.metrics_stride, wall_clock=cfg.wall_clock)
        win = min(cfg.floor_window, len(traj.rows))
        floors[b] = steady_state_floor(traj.column("consensus_err"), win).value
        log.info("beta=%s floor=%.3e", b, floors[b])
    art = SweepArtifact(betas, floors,
                        _fit([(1.0 - b, floors[b]) for b in betas if b >= 0.5]),
                        _fit([(1.0 - b, floors[b]) for b in betas]))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w") as f:
            f.write("beta,one_minus_beta,floor_consensus\n")
            for b in betas:
                f.write(f"{b!r},{1.0 - b!r},{floors[b]!r}\n")
            f.write(f"# slope_beta_ge_0.5={art.slope if art.slope is not None else 'absent'}\n")
            f.write(f"# slope_all={art.slope_all if art.slope_all is not None else 'absent'}\n")
        art.out_dir = out
    return art
