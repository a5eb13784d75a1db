"""Crossbar/tile mapping of DNN layers and tile placement on the chip."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dnn import DnnGraph, LayerSpec

PE_SIZES = (64, 128, 256, 512)


@dataclass(frozen=True)
class ImcConfig:
    """Accelerator design point. Defaults follow the 256x256 / 8-bit / 1 GHz /
    32-bit bus design with 4 CEs of 4 PEs per tile."""

    pe_x: int = 256
    pe_y: int = 256
    n_bits: int = 8
    ces_per_tile: int = 4
    pes_per_ce: int = 4
    bus_width: int = 32
    freq: float = 1e9
    fps_target: float = 4000.0
    cell_bits: int = 1

    def __post_init__(self):
        if self.pe_x not in PE_SIZES or self.pe_y not in PE_SIZES:
            raise ValueError(f"crossbar size must be one of {PE_SIZES}, got {self.pe_x}x{self.pe_y}")
        for name in ("n_bits", "ces_per_tile", "pes_per_ce", "bus_width", "cell_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.freq <= 0 or self.fps_target <= 0:
            raise ValueError("freq and fps_target must be positive")

    @property
    def crossbars_per_tile(self) -> int:
        return self.ces_per_tile * self.pes_per_ce


@dataclass
class TileMapping:
    tiles_per_layer: list
    crossbars_per_layer: list
    placement: dict = field(default_factory=dict)
    topology_kind: str = "mesh"

    @property
    def total_tiles(self) -> int:
        return sum(self.tiles_per_layer)

    def layer_tiles(self, i):
        """Tile ids owned by layer ``i`` (contiguous, in layer order)."""
        start = sum(self.tiles_per_layer[:i])
        return range(start, start + self.tiles_per_layer[i])

    def layer_of_tile(self, tile):
        acc = 0
        for i, t in enumerate(self.tiles_per_layer):
            acc += t
            if tile < acc:
                return i
        raise IndexError(tile)


def crossbars_for_layer(layer: LayerSpec, cfg: ImcConfig) -> int:
    if not layer.weighted:
        return 0
    cols = layer.out_channels * math.ceil(cfg.n_bits / cfg.cell_bits)
    return math.ceil(layer.fan_in / cfg.pe_x) * math.ceil(cols / cfg.pe_y)


def tiles_for_layer(crossbars: int, cfg: ImcConfig) -> int:
    if crossbars < 0:
        raise ValueError("negative crossbar count")
    # a weighted layer always owns at least one tile; tiles are never shared
    return math.ceil(crossbars / cfg.crossbars_per_tile)


def serpentine(k, n):
    """(row, col) of the k-th cell of an n-wide boustrophedon walk."""
    row, col = divmod(k, n)
    return (row, col if row % 2 == 0 else n - 1 - col)


def place_tiles(tiles_per_layer, topology_kind="mesh") -> TileMapping:
    """Number tiles contiguously by layer and assign grid coordinates.

    Mesh-like topologies use a ceil(sqrt(T)) wide serpentine so consecutive
    tile ids are grid neighbours; tree leaves and chain nodes use index order
    on a single row.
    """
    tiles_per_layer = list(tiles_per_layer)
    total = sum(tiles_per_layer)
    if total < 1:
        raise ValueError("at least one tile is required")
    if topology_kind in ("mesh", "cmesh"):
        n = math.isqrt(total - 1) + 1
        placement = {k: serpentine(k, n) for k in range(total)}
    else:
        placement = {k: (0, k) for k in range(total)}
    return TileMapping(tiles_per_layer, [0] * len(tiles_per_layer), placement, topology_kind)


def map_dnn(g: DnnGraph, cfg: ImcConfig, topology_kind="mesh") -> TileMapping:
    xbars = [crossbars_for_layer(layer, cfg) for layer in g.layers]
    tiles = [tiles_for_layer(x, cfg) for x in xbars]
    mapping = place_tiles(tiles, topology_kind)
    mapping.crossbars_per_layer = xbars
    return mapping


def workload_counts(layer: LayerSpec):
    """(multiplications, additions) for one inference of ``layer``.

    Standard convolution arithmetic: every output element is a dot product of
    length Kx*Ky*C_in.
    """
    if not layer.weighted:
        raise ValueError(f"layer {layer.name!r} has no weights")
    outputs = layer.out_x * layer.out_y * layer.out_channels
    mult = outputs * layer.fan_in
    return mult, mult - outputs
