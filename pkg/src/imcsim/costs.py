"""Area/energy cost tables and the figures of merit built on them.

Default numbers are order-of-magnitude placeholders meant to be replaced by
circuit-level estimates; only ratios and orderings derived from them are
meaningful. Router cost scales with radix as ``(ports/5) ** radix_exponent``,
linearly with virtual channels and bus width.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .dnn import DnnGraph
from .mapper import ImcConfig, TileMapping, workload_counts
from .topology import Topology, route_hops

# Published reference points for a VGG-19 class accelerator; carried through
# reports for orientation only, the default table does not reproduce them.
REFERENCE_POINTS = {
    "sram": {"edap_j_ms_mm2": 0.46, "fps": 1458},
    "reram": {"edap_j_ms_mm2": 0.28, "fps": 670},
}


@dataclass(frozen=True)
class CostTable:
    router_area: float = 0.02          # mm^2, 5-port, 1 VC, 32-bit router
    router_energy: float = 1.0e-12     # J per flit traversal of that router
    radix_exponent: float = 6.0       # calibrated, see README
    link_area: float = 0.01            # mm^2 per mm of 32-bit link
    link_energy: float = 0.1e-12       # J per bit per mm
    tile_area: float = 0.16            # mm^2 per tile
    tile_pitch: float = 0.4            # mm between neighbouring tile centres
    mac_energy: float = 1.0e-14        # J per multiply-accumulate
    read_latency: float = 1.0e-9       # s per crossbar read of one input bit-plane
    layer_overhead: float = 1.0e-7     # s per layer: buffer fill, accumulation, activation
    ref_vcs: int = 1
    ref_bus_width: int = 32

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"cost table entry {f.name} must be > 0")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown cost table entries: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def scaled(self, c):
        """Every area and energy entry multiplied by ``c``; geometry and
        timing entries are left alone."""
        keep = {"radix_exponent", "ref_vcs", "ref_bus_width", "tile_pitch",
                "read_latency", "layer_overhead"}
        return replace(self, **{f.name: getattr(self, f.name) * c
                                for f in fields(self) if f.name not in keep})

    def radix_factor(self, ports):
        return (ports / 5.0) ** self.radix_exponent

    def router_area_for(self, ports, vcs, bus_width):
        return (self.router_area * self.radix_factor(ports) * (vcs / self.ref_vcs)
                * (bus_width / self.ref_bus_width))

    def router_energy_for(self, ports, bus_width):
        return self.router_energy * self.radix_factor(ports) * (bus_width / self.ref_bus_width)

    def link_area_for(self, bus_width):
        return self.link_area * bus_width / self.ref_bus_width


def path_cost(topology: Topology, src, dst):
    """(routers crossed, wire length in tile pitches) along the route."""
    hops = route_hops(topology, src, dst)
    wire = topology.lengths.get(topology.tile_port[src], 0.0)
    wire += topology.lengths.get(topology.tile_port[dst], 0.0)
    for r, _, po in hops[:-1]:
        wire += topology.lengths.get((r, po), 1.0)
    return hops, wire


def interconnect_area(topology: Topology, vcs=1, bus_width=32, table: CostTable = CostTable()):
    routers = sum(table.router_area_for(len(p), vcs, bus_width) for p in topology.port_names)
    links = topology.total_link_length() * table.tile_pitch * table.link_area_for(bus_width)
    return routers + links


def interconnect_cost(topology: Topology, traffic, stats=None, table: CostTable = CostTable(),
                      cfg: ImcConfig = ImcConfig(), vcs=None):
    """(area mm^2, energy J per frame) of the interconnect.

    ``traffic`` is ``{(src, dst): flits per frame}`` or an iterable of
    TrafficMatrix (whose rates are converted to flits per frame). ``stats``
    may carry the router model used, for its VC count.
    """
    if vcs is None:
        vcs = getattr(getattr(stats, "router", None), "vcs", 1)
    area = interconnect_area(topology, vcs, cfg.bus_width, table)
    energy = 0.0
    for (s, d), flits in _flits_per_frame(traffic, cfg).items():
        if flits <= 0:
            continue
        hops, wire = path_cost(topology, s, d)
        e_routers = sum(table.router_energy_for(len(topology.port_names[r]), cfg.bus_width)
                        for r, _, _ in hops)
        e_wire = wire * table.tile_pitch * table.link_energy * cfg.bus_width
        energy += flits * (e_routers + e_wire)
    return area, energy


def _flits_per_frame(traffic, cfg):
    if isinstance(traffic, dict):
        return traffic
    out = {}
    per_frame = cfg.freq / cfg.fps_target
    for m in traffic:
        for k, lam in m.rates.items():
            out[k] = out.get(k, 0.0) + lam * per_frame
    return out


def compute_latency(g: DnnGraph, cfg: ImcConfig, table: CostTable = CostTable()):
    """Per-layer compute time: output positions are processed one after the
    other, each needing ``n_bits`` bit-serial crossbar reads; the tiles of
    one layer work in parallel."""
    return {i: table.layer_overhead + layer.out_x * layer.out_y * cfg.n_bits * table.read_latency
            for i, layer in enumerate(g.layers) if layer.weighted}


def compute_energy(g: DnnGraph, table: CostTable = CostTable()):
    return sum(workload_counts(g.layers[i])[0] * table.mac_energy for i in g.weighted_indices())


def compute_area(mapping: TileMapping, table: CostTable = CostTable()):
    return mapping.total_tiles * table.tile_area


def edap(energy, latency_s, area):
    """Energy-delay-area product in J*ms*mm^2."""
    if energy < 0 or latency_s < 0 or area < 0:
        raise ValueError("EDAP inputs must be non-negative")
    return energy * latency_s * 1e3 * area


def throughput_fps(latency_s):
    if latency_s <= 0:
        raise ZeroDivisionError("latency must be positive")
    return 1.0 / latency_s


@dataclass
class EvalReport:
    dnn: str
    topology: str
    mode: str
    latency_s: float
    comm_latency_s: float
    compute_latency_s: float
    fps: float
    energy_J: float
    area_mm2: float
    edap: float
    weighted_latency: float = 0.0
    serial_transfer_s: float = 0.0
    noc_energy_J: float = 0.0
    noc_area_mm2: float = 0.0
    tiles: int = 0
    routers: int = 0
    layers: list = field(default_factory=list)
    congestion: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    recommendation: dict = field(default_factory=dict)
    saturated: bool = False
    wall_time_s: float = 0.0
    notes: list = field(default_factory=list)
    reference: dict = field(default_factory=lambda: dict(REFERENCE_POINTS))

    @property
    def routing_fraction(self):
        return self.comm_latency_s / self.latency_s if self.latency_s else 0.0

    def to_dict(self):
        d = asdict(self)
        d["routing_fraction"] = self.routing_fraction
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_jsonable)

    def summary(self) -> str:
        rows = [
            ("DNN", self.dnn),
            ("topology", self.topology),
            ("mode", self.mode),
            ("tiles / routers", f"{self.tiles} / {self.routers}"),
            ("latency (s)", f"{self.latency_s:.6g}"),
            ("  communication (s)", f"{self.comm_latency_s:.6g}"),
            ("  compute (s)", f"{self.compute_latency_s:.6g}"),
            ("comm. latency, per-layer rule", f"{self.weighted_latency:.6g}"),
            ("throughput (FPS)", f"{self.fps:.6g}"),
            ("energy (J)", f"{self.energy_J:.6g}"),
            ("area (mm^2)", f"{self.area_mm2:.6g}"),
            ("EDAP (J*ms*mm^2)", f"{self.edap:.6g}"),
            ("wall time (s)", f"{self.wall_time_s:.4g}"),
        ]
        if self.congestion:
            mapd = self.congestion.get("mapd")
            rows.append(("MAPD (%)", "n/a" if mapd is None else f"{mapd:.3g}"))
            rows.append(("empty-queue arrivals (%)",
                         f"{self.congestion.get('pct_zero_occupancy', 100.0):.4g}"))
        if self.recommendation:
            rows.append(("recommended topology", self.recommendation.get("topology", "")))
        if self.saturated:
            rows.append(("WARNING", "interconnect saturated"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return str(x)
