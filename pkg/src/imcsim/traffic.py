"""Injection-rate synthesis at tile and router-port granularity."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dnn import DnnGraph, activations, edge_activations
from .mapper import ImcConfig, TileMapping
from .topology import Topology, route_hops


class SaturationWarning(RuntimeWarning):
    pass


@dataclass
class TrafficMatrix:
    """Uniform flit rates between every tile of ``src_layer`` and every tile
    of ``dst_layer``."""

    src_layer: int
    dst_layer: int
    rates: dict = field(default_factory=dict)
    bits_per_frame: float = 0.0

    @property
    def layer_pair(self):
        return (self.src_layer, self.dst_layer)

    @property
    def total_rate(self) -> float:
        return sum(self.rates.values())

    def scaled(self, c):
        return TrafficMatrix(self.src_layer, self.dst_layer,
                             {k: v * c for k, v in self.rates.items()}, self.bits_per_frame)


def injection_rate(acts, cfg: ImcConfig, t_src, t_dst) -> float:
    """Flits/cycle from one source tile to one destination tile."""
    return acts * cfg.n_bits * cfg.fps_target / (t_dst * t_src * cfg.bus_width * cfg.freq)


def tile_injection_matrix(g: DnnGraph, mapping: TileMapping, cfg: ImcConfig, i: int,
                          src=None, acts=None) -> TrafficMatrix:
    """Traffic from layer ``src`` (default ``i-1``) to layer ``i``.

    ``acts`` defaults to the input activation volume of layer ``i``; skip
    edges pass the producer's own contribution instead.
    """
    src = i - 1 if src is None else src
    if src < 0:
        raise ValueError("layer 0 has no producer")
    acts = activations(g, i) if acts is None else acts
    t_src, t_dst = mapping.tiles_per_layer[src], mapping.tiles_per_layer[i]
    tm = TrafficMatrix(src, i, bits_per_frame=acts * cfg.n_bits)
    if t_src == 0 or t_dst == 0 or acts == 0:
        return tm
    lam = injection_rate(acts, cfg, t_src, t_dst)
    for j in mapping.layer_tiles(src):
        for k in mapping.layer_tiles(i):
            tm.rates[(j, k)] = lam
    return tm


def layer_traffic(g: DnnGraph, mapping: TileMapping, cfg: ImcConfig, i: int):
    """All traffic consumed by weighted layer ``i``: one matrix per producing
    weighted layer (consecutive backbone producer plus skip/dense producers)."""
    if not g.layers[i].weighted:
        return []
    return [tile_injection_matrix(g, mapping, cfg, i, src=a, acts=edge_activations(g, a, i))
            for a in g.weighted_producers(i)]


def dnn_traffic(g: DnnGraph, mapping: TileMapping, cfg: ImcConfig):
    """``{layer: [TrafficMatrix, ...]}`` for every layer that receives on-chip traffic."""
    out = {}
    for i in g.weighted_indices():
        mats = [m for m in layer_traffic(g, mapping, cfg, i) if m.rates]
        if mats:
            out[i] = mats
    return out


def merge_rates(matrices):
    flows = {}
    for m in matrices:
        for k, v in m.rates.items():
            flows[k] = flows.get(k, 0.0) + v
    return flows


@dataclass
class RouterPortRates:
    """Port-to-port flow rates through one router.

    ``port_flows[i, j]`` is the rate entering on port ``i`` and leaving on
    port ``j``; the arrival matrix is diagonal with the per-input totals.
    """

    router: int
    port_names: list
    port_flows: np.ndarray
    saturated: bool = False
    offered_load: float = 0.0

    @property
    def arrival_rates(self) -> np.ndarray:
        return self.port_flows.sum(axis=1)

    @property
    def arrival_matrix(self) -> np.ndarray:
        return np.diag(self.arrival_rates)

    @property
    def active(self) -> bool:
        return bool(self.port_flows.any())


def router_port_rates(traffic, topology: Topology):
    """Route every flow along its deterministic path and accumulate its rate
    into ``port_flows[in_port][out_port]`` of each router crossed.

    ``traffic`` is a ``{(src, dst): rate}`` dict or an iterable of
    TrafficMatrix. Returns one RouterPortRates per router.
    """
    flows = traffic if isinstance(traffic, dict) else merge_rates(traffic)
    mats = [np.zeros((len(p), len(p))) for p in topology.port_names]
    for (s, d), lam in flows.items():
        if lam == 0:
            continue
        for r, pi, po in route_hops(topology, s, d):
            mats[r][pi, po] += lam
    out = []
    for r, m in enumerate(mats):
        load = float(max(m.sum(axis=1).max(), m.sum(axis=0).max()))
        rp = RouterPortRates(r, list(topology.port_names[r]), m, offered_load=load)
        if load > 1.0:
            warnings.warn(f"router {r} offered {load:.3f} flits/cycle on one port; "
                          "capping at 1.0", SaturationWarning, stacklevel=2)
            rows = m.sum(axis=1, keepdims=True)
            scale = np.where(rows > 1.0, 1.0 / np.where(rows > 0, rows, 1.0), 1.0)
            rp.port_flows = m * scale
            rp.saturated = True
        out.append(rp)
    return out


def channel_flits(traffic, topology: Topology, cfg: ImcConfig):
    """Flits per frame through every channel.

    Channels are router output ports (``("out", router, port)``, covering
    links and ejection) and tile injection ports (``("inj", tile)``).
    """
    flows = traffic if isinstance(traffic, dict) else merge_rates(traffic)
    per_frame = cfg.freq / cfg.fps_target
    load = {}
    for (s, d), lam in flows.items():
        if lam <= 0:
            continue
        f = lam * per_frame
        load[("inj", s)] = load.get(("inj", s), 0.0) + f
        for r, _, po in route_hops(topology, s, d):
            key = ("out", r, po)
            load[key] = load.get(key, 0.0) + f
    return load


def bottleneck_flits(traffic, topology: Topology, cfg: ImcConfig) -> float:
    """Serialisation cycles of a burst transfer: the busiest channel moves
    one flit per cycle."""
    return max(channel_flits(traffic, topology, cfg).values(), default=0.0)


def write_traffic_csv(matrices, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "rate"])
        for m in matrices:
            for (s, d), lam in sorted(m.rates.items()):
                w.writerow([s, d, repr(lam)])
