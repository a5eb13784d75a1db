"""End-to-end evaluation of one DNN on one interconnect."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict

from .analytic import analyze_dnn
from .costs import (CostTable, EvalReport, compute_area, compute_energy, compute_latency, edap,
                    interconnect_cost, throughput_fps)
from .dnn import DnnGraph, connection_density, total_neurons
from .mapper import ImcConfig, map_dnn
from .sim import RouterModel, merge_congestion, received_activations, simulate_dnn
from .topology import build_topology, canonical_kind
from .traffic import SaturationWarning, bottleneck_flits, dnn_traffic


def evaluate(g: DnnGraph, kind="mesh", cfg: ImcConfig = ImcConfig(),
             router: RouterModel = RouterModel(), table: CostTable = CostTable(),
             mode="sim", seed=0, **sim_kw) -> EvalReport:
    """Map, build the interconnect, obtain per-layer flit latency from the
    simulator or the analytical model, and fold in compute and cost models."""
    if mode not in ("sim", "analytic"):
        raise ValueError(f"mode must be 'sim' or 'analytic', got {mode!r}")
    kind = canonical_kind(kind)
    mapping = map_dnn(g, cfg, kind)
    topo = build_topology(kind, mapping.total_tiles, cfg)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SaturationWarning)
        traffic = dnn_traffic(g, mapping, cfg)
        t0 = time.perf_counter()
        if mode == "sim":
            res = simulate_dnn(g, mapping, topo, cfg, router, seed=seed, **sim_kw)
            cycles = {i: s.avg_latency for i, s in res.layers.items()}
            cong = asdict(merge_congestion(res.layers.values())) if res.layers else {}
            cong["avg_queue_len"] = {f"{r}:{p}": q for (r, p), q in cong.get("avg_queue_len", {}).items()}
            saturated = res.saturated
        else:
            res = analyze_dnn(g, mapping, topo, cfg, router)
            cycles = {i: la.latency for i, la in res.layers.items()}
            cong = {}
            saturated = False
        wall = time.perf_counter() - t0
    if any(issubclass(w.category, SaturationWarning) for w in caught):
        saturated = True
        notes.append("offered load exceeds one flit per cycle on some port")

    comp = compute_latency(g, cfg, table)
    burst = {i: bottleneck_flits(mats, topo, cfg) for i, mats in traffic.items()}
    comm_cycles = {i: burst[i] + cycles.get(i, 0.0) for i in burst}
    comm_s = sum(comm_cycles.values()) / cfg.freq
    comp_s = sum(comp.values())
    latency = comm_s + comp_s
    all_mats = [m for mats in traffic.values() for m in mats]
    noc_area, noc_energy = interconnect_cost(topo, all_mats, None, table, cfg, vcs=router.vcs)
    area = noc_area + compute_area(mapping, table)
    energy = noc_energy + compute_energy(g, table)

    layers = []
    for i, layer in enumerate(g.layers):
        row = {"index": i, "name": layer.name, "kind": layer.kind,
               "tiles": mapping.tiles_per_layer[i],
               "crossbars": mapping.crossbars_per_layer[i],
               "compute_s": comp.get(i, 0.0)}
        if i in cycles:
            flits = math.ceil(received_activations(g, i) * cfg.n_bits / cfg.bus_width)
            row.update(avg_latency_cycles=cycles[i], flits=flits,
                       bottleneck_flits=burst[i], comm_s=comm_cycles[i] / cfg.freq,
                       serial_transfer_s=flits * cycles[i] / cfg.freq)
        layers.append(row)
    notes.append("workload counts use standard convolution arithmetic")

    return EvalReport(
        dnn=g.name, topology=kind, mode=mode, latency_s=latency, comm_latency_s=comm_s,
        compute_latency_s=comp_s, fps=throughput_fps(latency) if latency > 0 else math.inf,
        energy_J=energy, area_mm2=area, edap=edap(energy, latency, area),
        weighted_latency=res.weighted_latency, serial_transfer_s=res.transfer_s, noc_energy_J=noc_energy, noc_area_mm2=noc_area,
        tiles=mapping.total_tiles, routers=topo.n_routers, layers=layers, congestion=cong,
        config={"imc": asdict(cfg), "router": asdict(router), "cost_table": table.to_dict(),
                "seed": seed, "connection_density": _density(g), "neurons": total_neurons(g)},
        saturated=saturated, wall_time_s=wall, notes=notes)


def _density(g):
    try:
        return connection_density(g)
    except ValueError:
        return None
