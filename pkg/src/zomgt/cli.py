"""Command line entry point.

Exit codes: 0 success, 1 config error, 2 runtime divergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from . import harness
from .algorithms import DivergenceError
from .problem import LibSVMFormatError
from .topology import (
    TopologyError,
    generate_erdos_renyi,
    metropolis_weights,
    read_graph,
    validate_mixing,
    write_graph,
    write_matrix,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.topology_in:
        cfg.topology_file = args.topology_in
    art = harness.run_experiment(cfg, out_dir=args.out)
    if args.topology_out:
        shutil.copyfile(art.out_dir / "topology.txt", args.topology_out)
    _, table = harness.emit_summary([art])
    print(f"rho = {art.rho:.6f}; artifacts in {art.out_dir}")
    print(table, end="")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    betas = None
    if args.betas:
        try:
            betas = [float(t) for t in args.betas.split(",")]
        except ValueError:
            raise harness.ConfigError(f"--betas: cannot parse {args.betas!r}", key="betas") from None
    out = args.out or harness._resolve_out(cfg, None) / "sweep"
    art = harness.sweep_beta(cfg, betas, out_dir=out)
    print("beta  1-beta  floor_consensus")
    for b in art.betas:
        print(f"{b:<5} {1 - b:<7.3g} {art.floors[b]:.4e}")
    fmt = lambda s: "absent" if s is None else f"{s:.3f}"
    print(f"slope (beta >= 0.5): {fmt(art.slope)}   slope (all): {fmt(art.slope_all)}")
    return EXIT_OK


def _cmd_topo(args) -> int:
    if args.action == "gen":
        g = generate_erdos_renyi(args.n, args.p, args.seed)
        w = metropolis_weights(g)
        if args.out:
            with open(args.out, "w") as f:
                write_graph(g, f)
        else:
            write_graph(g, sys.stdout)
        if args.matrix_out:
            with open(args.matrix_out, "w") as f:
                write_matrix(w, f)
        print(f"# attempts={g.attempts} rho={w.rho:.6f}", file=sys.stderr)
        return EXIT_OK
    if not args.file:
        raise harness.ConfigError("topo inspect needs a graph file")
    with open(args.file) as f:
        g = read_graph(f)
    w = metropolis_weights(g)
    deg = g.degrees
    print(f"n = {g.n}, edges = {len(g.edges)}, degree min/mean/max = {deg.min()}/{deg.mean():.2f}/{deg.max()}")
    print(f"rho = {w.rho:.6f}")
    print(validate_mixing(w))
    return EXIT_OK


def _cmd_summarize(args) -> int:
    csv_text, table = harness.summarize_dir(args.dir)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zomgt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every configured algorithm once")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config output_dir)")
    r.add_argument("--topology-in", help="read the graph from this file instead of sampling")
    r.add_argument("--topology-out", help="copy the graph used to this file")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep-beta", help="ZO-MGT consensus floors across momentum factors")
    s.add_argument("config")
    s.add_argument("--betas", help="comma-separated list, e.g. 0,0.5,0.8,0.9,0.98")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("topo", help="generate or inspect a communication graph")
    t.add_argument("action", choices=("gen", "inspect"))
    t.add_argument("file", nargs="?", help="graph file for inspect")
    t.add_argument("--n", type=int, default=20)
    t.add_argument("--p", type=float, default=0.3)
    t.add_argument("--seed", type=int, default=225)
    t.add_argument("--out")
    t.add_argument("--matrix-out")
    t.set_defaults(func=_cmd_topo)

    m = sub.add_parser("summarize", help="summary table from a run directory")
    m.add_argument("dir")
    m.add_argument("--csv", help="also write the summary CSV here")
    m.set_defaults(func=_cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, TopologyError, LibSVMFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
