"""Command-line front end.

Exit status: 0 success, 1 configuration or usage error, 2 interconnect
saturation, 3 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

from . import __version__
from .advisor import compare_report, recommend_for
from .analytic import SaturationError
from .costs import CostTable
from .dnn import BUNDLED, DnnConfigError, load_dnn
from .evaluate import evaluate
from .mapper import ImcConfig
from .sim import DeadlockError, RouterModel
from .sweep import sweep

EXIT_CONFIG, EXIT_SATURATED, EXIT_IO = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _design_flags(p, multi=False):
    nargs = "+" if multi else None
    p.add_argument("--bus-width", type=int, nargs=nargs, default=[32] if multi else 32)
    p.add_argument("--vcs", type=int, nargs=nargs, default=[1] if multi else 1)
    p.add_argument("--buffer", type=int, default=8, help="flit buffer depth per VC")
    p.add_argument("--pipeline", type=int, default=3, help="router pipeline stages")
    p.add_argument("--fps", type=float, default=ImcConfig.fps_target)
    p.add_argument("--freq", type=float, default=1e9)
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--crossbar", type=int, default=256, help="crossbar rows = columns")
    p.add_argument("--cost-table", metavar="PATH")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    p = _Parser(prog="imcsim", description="Interconnect evaluation for tiled IMC DNN accelerators.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    topo = ["p2p", "tree", "mesh", "cmesh"]

    for name, helptext in (("simulate", "cycle-level simulation"), ("analyze", "analytical model")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--dnn", required=True, help="config path or bundled name")
        s.add_argument("--topology", choices=topo, default="mesh")
        _design_flags(s)
        if name == "simulate":
            s.add_argument("--mode", choices=["sim", "analytic"], default="sim")
            s.add_argument("--trace", metavar="PATH", help="per-cycle event trace (CSV)")
        s.add_argument("--out", metavar="PATH", help="JSON report; CSV tables go next to it")
        if name == "analyze":
            s.add_argument("--compare-sim", action="store_true",
                           help="also time the simulator and report the speed-up")

    a = sub.add_parser("advise", help="topology recommendation from connection density")
    a.add_argument("--dnn", required=True)
    a.add_argument("--lower", type=float, default=1e3)
    a.add_argument("--upper", type=float, default=2e3)
    a.add_argument("--out", metavar="PATH")

    c = sub.add_parser("compare", help="tree vs mesh side by side")
    c.add_argument("--dnn", required=True)
    c.add_argument("--mode", choices=["sim", "analytic"], default="analytic")
    _design_flags(c)
    c.add_argument("--out", metavar="PATH")

    w = sub.add_parser("sweep", help="grid over DNNs, topologies, VCs and bus widths")
    w.add_argument("--dnn", nargs="*", default=None, help="configs (default: all bundled)")
    w.add_argument("--topology", nargs="+", choices=topo, default=["tree", "mesh"])
    w.add_argument("--mode", choices=["sim", "analytic"], default="analytic")
    _design_flags(w, multi=True)
    w.add_argument("--out", metavar="PATH", required=True, help="CSV output")
    w.add_argument("--points", metavar="DIR", help="write one JSON report per grid point")
    return p


def _configs(args, bus_width=None, vcs=None):
    cfg = ImcConfig(pe_x=args.crossbar, pe_y=args.crossbar, n_bits=args.precision,
                    bus_width=bus_width if bus_width is not None else args.bus_width,
                    freq=args.freq, fps_target=args.fps)
    router = RouterModel(vcs=vcs if vcs is not None else args.vcs,
                         buffer_depth=args.buffer, pipeline_stages=args.pipeline)
    table = CostTable.from_json(args.cost_table) if args.cost_table else CostTable()
    return cfg, router, table


def _write_report(rep, path):
    rep.to_json(path)
    stem = path[:-5] if path.endswith(".json") else path
    if rep.layers:
        keys = sorted({k for row in rep.layers for k in row}, key=_layer_key_order)
        with open(stem + ".layers.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rep.layers)


_ORDER = ["index", "name", "kind", "tiles", "crossbars", "compute_s", "flits", "bottleneck_flits",
          "avg_latency_cycles", "comm_s", "serial_transfer_s"]


def _layer_key_order(k):
    return (_ORDER.index(k), k) if k in _ORDER else (len(_ORDER), k)


def cmd_evaluate(args, mode):
    g = load_dnn(args.dnn)
    cfg, router, table = _configs(args)
    kw = {}
    trace_fh = None
    if getattr(args, "trace", None):
        trace_fh = open(args.trace, "w", newline="")
        kw["trace"] = trace_fh
    try:
        rep = evaluate(g, args.topology, cfg, router, table, mode=mode, seed=args.seed, **kw)
    finally:
        if trace_fh:
            trace_fh.close()
    try:
        rep.recommendation = recommend_for(g).to_dict()
    except ValueError:
        pass
    if router.vcs != 1:
        rep.notes.append(f"router model uses {router.vcs} virtual channels")
    if mode == "analytic" and getattr(args, "compare_sim", False):
        t0 = time.perf_counter()
        sim = evaluate(g, args.topology, cfg, router, table, mode="sim", seed=args.seed)
        rep.notes.append(f"simulation wall time {time.perf_counter() - t0:.4g} s, "
                         f"speed-up {sim.wall_time_s / max(rep.wall_time_s, 1e-12):.1f}x")
    if args.out:
        _write_report(rep, args.out)
    print(rep.summary())
    for n in rep.notes:
        print(f"note: {n}")
    return EXIT_SATURATED if rep.saturated else 0


def cmd_advise(args):
    g = load_dnn(args.dnn)
    rec = recommend_for(g, args.lower, args.upper)
    d = rec.to_dict()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(d, fh, indent=2)
    width = max(len(k) for k in d)
    print("\n".join(f"{k:<{width}}  {v}" for k, v in d.items()))
    return 0


def cmd_compare(args):
    g = load_dnn(args.dnn)
    cfg, router, table = _configs(args)
    cmp = compare_report(g, cfg, router, table, mode=args.mode, seed=args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(cmp.to_dict(), fh, indent=2, default=str)
    print(cmp.summary())
    return EXIT_SATURATED if cmp.tree.saturated or cmp.mesh.saturated else 0


def cmd_sweep(args):
    names = list(BUNDLED) if args.dnn is None else args.dnn
    dnns = [load_dnn(n) for n in names]
    cfg, router, table = _configs(args, bus_width=32, vcs=1)
    rows = sweep(dnns, args.topology, args.vcs, args.bus_width, cfg, router, table,
                 mode=args.mode, seed=args.seed, out_csv=args.out, point_dir=args.points)
    print(f"{len(rows)} grid points written to {args.out}")
    return EXIT_SATURATED if any(r["saturated"] for r in rows) else 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_evaluate(args, args.mode)
        if args.command == "analyze":
            return cmd_evaluate(args, "analytic")
        if args.command == "advise":
            return cmd_advise(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_sweep(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"imcsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SaturationError as exc:
        print(f"imcsim: saturated: {exc}", file=sys.stderr)
        return EXIT_SATURATED
    except DeadlockError as exc:
        print(f"imcsim: deadlock: {exc}", file=sys.stderr)
        return EXIT_SATURATED
    except (DnnConfigError, ValueError, KeyError) as exc:
        print(f"imcsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"imcsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
