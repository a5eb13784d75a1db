"""Interconnect topologies (P2P chain, binary tree, mesh, concentrated mesh)
with their deterministic routing functions.

Routers are numbered ``0..n_routers-1``. Each router has a fixed list of
ports; a port is either a router-router link or the attachment point of one
tile (injection and ejection happen on the same port index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mapper import serpentine

KINDS = ("p2p", "tree", "mesh", "cmesh")
ALIASES = {"p2p_chain": "p2p", "chain": "p2p", "c-mesh": "cmesh"}

MESH_PORTS = ("N", "S", "E", "W", "Self")
CMESH_PORTS = ("N", "S", "E", "W", "L0", "L1", "L2", "L3")
TREE_PORTS = ("Up", "Left", "Right")
CHAIN_PORTS = ("Prev", "Next", "Self")

CONCENTRATION = 4


def canonical_kind(kind: str) -> str:
    kind = ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown topology {kind!r}; expected one of {KINDS}")
    return kind


@dataclass
class Topology:
    kind: str
    n_tiles: int
    port_names: list
    # (router, out_port) -> (neighbour router, neighbour in_port)
    links: dict
    # tile -> (router, port)
    tile_port: dict
    # (router, port) -> physical length in tile pitches, for links and tile attachments
    lengths: dict = field(default_factory=dict)
    coords: dict = field(default_factory=dict)
    next_port: list = field(default_factory=list)

    @property
    def n_routers(self) -> int:
        return len(self.port_names)

    @property
    def n_links(self) -> int:
        """Bidirectional router-router links."""
        return len(self.links) // 2

    def router_of(self, tile):
        return self.tile_port[tile][0]

    def router_at(self, xy):
        for r, c in self.coords.items():
            if c == tuple(xy):
                return r
        raise KeyError(xy)

    def router_xy(self, r):
        return self.coords[r]

    def total_link_length(self) -> float:
        """Sum of physical wire lengths in tile pitches (each bidirectional link once)."""
        inter = sum(self.lengths.get(k, 1.0) for k in self.links) / 2
        local = sum(self.lengths.get(v, 0.0) for v in self.tile_port.values())
        return inter + local


def build_topology(kind: str, n_tiles: int, cfg=None) -> Topology:
    """Build the router/link graph for ``n_tiles`` tiles.

    ``cfg`` is accepted for interface symmetry; the structure only depends on
    the tile count.
    """
    if n_tiles < 1:
        raise ValueError("topology needs at least one tile")
    kind = canonical_kind(kind)
    topo = {"p2p": _chain, "tree": _tree, "mesh": _mesh, "cmesh": _cmesh}[kind](n_tiles)
    topo.next_port = _routing_table(topo)
    del topo._route
    return topo


def _chain(n):
    ports = [list(CHAIN_PORTS) for _ in range(n)]
    links, lengths = {}, {}
    for r in range(n - 1):
        links[(r, 1)] = (r + 1, 0)
        links[(r + 1, 0)] = (r, 1)
        lengths[(r, 1)] = lengths[(r + 1, 0)] = 1.0
    tile_port = {k: (k, 2) for k in range(n)}
    coords = {r: (r, 0) for r in range(n)}
    topo = Topology("p2p", n, ports, links, tile_port, lengths, coords)
    topo._route = lambda r, t: 2 if t == r else (1 if t > r else 0)
    return topo


def _mesh(n_tiles):
    n = math.isqrt(n_tiles - 1) + 1
    ports = [list(MESH_PORTS) for _ in range(n * n)]
    links, lengths, coords = {}, {}, {}
    for y in range(n):
        for x in range(n):
            r = y * n + x
            coords[r] = (x, y)
            if x + 1 < n:
                links[(r, 2)] = (r + 1, 3)
                links[(r + 1, 3)] = (r, 2)
            if y + 1 < n:
                links[(r, 1)] = (r + n, 0)
                links[(r + n, 0)] = (r, 1)
    for k in links:
        lengths[k] = 1.0
    tile_port = {}
    for k in range(n_tiles):
        row, col = serpentine(k, n)
        tile_port[k] = (row * n + col, 4)
    topo = Topology("mesh", n_tiles, ports, links, tile_port, lengths, coords)
    topo._route = _xy_route(topo, {k: topo.coords[v[0]] for k, v in tile_port.items()},
                            lambda t: 4)
    return topo


def _cmesh(n_tiles):
    n_t = math.isqrt(n_tiles - 1) + 1
    m = (n_t + 1) // 2
    ports = [list(CMESH_PORTS) for _ in range(m * m)]
    links, lengths, coords = {}, {}, {}
    for y in range(m):
        for x in range(m):
            r = y * m + x
            coords[r] = (x, y)
            if x + 1 < m:
                links[(r, 2)] = (r + 1, 3)
                links[(r + 1, 3)] = (r, 2)
            if y + 1 < m:
                links[(r, 1)] = (r + m, 0)
                links[(r + m, 0)] = (r, 1)
    for k in links:
        lengths[k] = 2.0
    tile_port = {}
    for k in range(n_tiles):
        row, col = serpentine(k, n_t)
        r = (row // 2) * m + col // 2
        tile_port[k] = (r, 4 + 2 * (row % 2) + col % 2)
        lengths[tile_port[k]] = math.sqrt(0.5)
    topo = Topology("cmesh", n_tiles, ports, links, tile_port, lengths, coords)
    topo._route = _xy_route(topo, {k: topo.coords[v[0]] for k, v in tile_port.items()},
                            lambda t: tile_port[t][1])
    return topo


def _xy_route(topo, tile_xy, local_port):
    def route(r, t):
        x, y = topo.coords[r]
        dx, dy = tile_xy[t]
        if dx > x:
            return 2
        if dx < x:
            return 3
        if dy > y:
            return 1
        if dy < y:
            return 0
        return local_port(t)
    return route


def _tree(n_tiles):
    ports, links, lengths, tile_port, coords = [], {}, {}, {}, {}
    span = []  # router -> (lo, mid, hi) leaf range

    def build(lo, hi, depth):
        r = len(ports)
        ports.append(list(TREE_PORTS))
        mid = lo + (hi - lo + 1) // 2
        span.append((lo, mid, hi))
        coords[r] = (depth, lo)
        for port, (a, b) in ((1, (lo, mid)), (2, (mid, hi))):
            if b - a == 1:
                tile_port[a] = (r, port)
                lengths[(r, port)] = 0.5
            else:
                child = build(a, b, depth + 1)
                links[(r, port)] = (child, 0)
                links[(child, 0)] = (r, port)
                lengths[(r, port)] = lengths[(child, 0)] = 0.5 * math.sqrt(b - a)
        return r

    if n_tiles == 1:
        ports.append(list(TREE_PORTS))
        span.append((0, 1, 1))
        coords[0] = (0, 0)
        tile_port[0] = (0, 1)
        lengths[(0, 1)] = 0.5
    else:
        build(0, n_tiles, 0)
    topo = Topology("tree", n_tiles, ports, links, tile_port, lengths, coords)

    def route(r, t):
        lo, mid, hi = span[r]
        if lo <= t < mid:
            return 1
        if mid <= t < hi:
            return 2
        return 0
    topo._route = route
    return topo


def _routing_table(topo):
    return [[topo._route(r, t) for t in range(topo.n_tiles)] for r in range(topo.n_routers)]


def route_hops(topo: Topology, src: int, dst: int):
    """Hops of the deterministic path from tile ``src`` to tile ``dst`` as
    ``(router, in_port, out_port)`` triples."""
    if src == dst:
        raise ValueError("source and destination tile coincide")
    r, p_in = topo.tile_port[src]
    dst_attach = topo.tile_port[dst]
    hops = []
    for _ in range(topo.n_routers + 1):
        p_out = topo.next_port[r][dst]
        hops.append((r, p_in, p_out))
        if (r, p_out) == dst_attach:
            return hops
        try:
            r, p_in = topo.links[(r, p_out)]
        except KeyError:
            raise ValueError(f"no route from tile {src} to tile {dst}") from None
    raise RuntimeError(f"routing loop between tiles {src} and {dst}")


def route(topo: Topology, src: int, dst: int):
    """Routers visited from tile ``src`` to tile ``dst``."""
    return [h[0] for h in route_hops(topo, src, dst)]


def route_routers(topo: Topology, r_src: int, r_dst: int):
    """Router-level path between two routers of a mesh/cmesh (X first, then Y)."""
    if topo.kind not in ("mesh", "cmesh"):
        raise ValueError("router-level routing is defined for mesh topologies")
    x, y = topo.coords[r_src]
    dx, dy = topo.coords[r_dst]
    path = [(x, y)]
    while x != dx:
        x += 1 if dx > x else -1
        path.append((x, y))
    while y != dy:
        y += 1 if dy > y else -1
        path.append((x, y))
    return [topo.router_at(c) for c in path]
