"""Grid sweeps over DNNs, topologies, virtual channels and bus widths."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .costs import CostTable
from .dnn import DnnGraph
from .evaluate import evaluate
from .mapper import ImcConfig
from .sim import RouterModel

COLUMNS = ["dnn", "topology", "vcs", "bus_width", "mode", "latency_s", "comm_latency_s",
           "compute_latency_s", "fps", "energy_J", "area_mm2", "edap", "saturated"]


def max_workers(n_points):
    env = os.environ.get("IMCSIM_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_points))


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _point(args):
    g, kind, vcs, width, cfg, router, table, mode, seed, point_dir = args
    rep = evaluate(g, kind, replace(cfg, bus_width=width), replace(router, vcs=vcs), table,
                   mode=mode, seed=seed)
    row = {"dnn": g.name, "topology": rep.topology, "vcs": vcs, "bus_width": width, "mode": mode,
           "latency_s": rep.latency_s, "comm_latency_s": rep.comm_latency_s,
           "compute_latency_s": rep.compute_latency_s, "fps": rep.fps, "energy_J": rep.energy_J,
           "area_mm2": rep.area_mm2, "edap": rep.edap, "saturated": rep.saturated}
    if point_dir:
        name = f"{g.name}_{rep.topology}_vc{vcs}_w{width}.json"
        atomic_write(os.path.join(point_dir, name), json.dumps(rep.to_dict(), default=str, indent=2))
    return row


def sweep(dnns: list[DnnGraph], topologies=("tree", "mesh"), vcs=(1,), bus_widths=(32,),
          cfg: ImcConfig = ImcConfig(), router: RouterModel = RouterModel(),
          table: CostTable = CostTable(), mode="analytic", seed=0, out_csv=None, point_dir=None):
    """Evaluate every grid point; returns rows (dicts) in grid order and
    optionally writes them as CSV."""
    grid = [(g, k, v, w, cfg, router, table, mode, seed, point_dir)
            for g, k, v, w in itertools.product(dnns, topologies, vcs, bus_widths)]
    if point_dir:
        os.makedirs(point_dir, exist_ok=True)
    workers = max_workers(len(grid))
    if workers == 1 or len(grid) <= 1:
        rows = [_point(p) for p in grid]
    else:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_point, grid))
    if out_csv:
        write_rows(rows, out_csv)
    return rows


def write_rows(rows, path):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS)
    w.writeheader()
    w.writerows(rows)
    atomic_write(path, buf.getvalue())
