import pytest
from hypothesis import given, settings, strategies as st

from imcsim.topology import build_topology, canonical_kind, route, route_hops, route_routers

from oracles import chain_hops, xy_path


def test_mesh_sixteen():
    t = build_topology("mesh", 16)
    assert t.n_routers == 16
    assert t.n_links == 2 * 4 * 3


def test_tree_eight_leaves():
    t = build_topology("tree", 8)
    assert t.n_routers == 7


def test_chain_two():
    t = build_topology("p2p", 2)
    assert t.n_links == 1


def test_cmesh_sixteen():
    t = build_topology("cmesh", 16)
    assert t.n_routers == 4
    assert all(len(p) == 8 for p in t.port_names)


def test_zero_tiles_rejected():
    with pytest.raises(ValueError):
        build_topology("mesh", 0)
    with pytest.raises(ValueError):
        canonical_kind("torus")


def test_aliases():
    assert canonical_kind("p2p_chain") == "p2p"
    assert canonical_kind("c-mesh") == "cmesh"


def test_mesh_xy_route_example():
    t = build_topology("mesh", 9)
    r = route_routers(t, t.router_at((0, 0)), t.router_at((2, 1)))
    assert [t.router_xy(x) for x in r] == [(0, 0), (1, 0), (2, 0), (2, 1)]


def test_tree_siblings_meet_at_parent():
    t = build_topology("tree", 8)
    path = route(t, 0, 1)
    assert len(path) == 1
    assert path[0] == t.router_of(0) == t.router_of(1)


def test_chain_monotone_walk():
    t = build_topology("p2p", 6)
    assert route(t, 0, 3) == chain_hops(0, 3)
    assert route(t, 5, 2) == chain_hops(5, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.data())
def test_mesh_routes_are_xy_minimal(n_tiles, data):
    t = build_topology("mesh", n_tiles)
    s = data.draw(st.integers(0, n_tiles - 1))
    d = data.draw(st.integers(0, n_tiles - 1).filter(lambda v: v != s))
    got = [t.router_xy(r) for r in route(t, s, d)]
    assert got == xy_path(t.router_xy(t.router_of(s)), t.router_xy(t.router_of(d)))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["p2p", "tree", "mesh", "cmesh"]), st.integers(2, 40), st.data())
def test_routes_are_loop_free_and_end_at_destination(kind, n_tiles, data):
    t = build_topology(kind, n_tiles)
    s = data.draw(st.integers(0, n_tiles - 1))
    d = data.draw(st.integers(0, n_tiles - 1).filter(lambda v: v != s))
    hops = route_hops(t, s, d)
    routers = [h[0] for h in hops]
    assert len(routers) == len(set(routers))
    assert (hops[-1][0], hops[-1][2]) == t.tile_port[d]
    assert (hops[0][0], hops[0][1]) == t.tile_port[s]
    for (r, _, po), (r2, pi2, _) in zip(hops, hops[1:]):
        assert t.links[(r, po)] == (r2, pi2)


@given(st.integers(1, 70))
def test_every_tile_attached_once(n):
    for kind in ("p2p", "tree", "mesh", "cmesh"):
        t = build_topology(kind, n)
        attach = list(t.tile_port.values())
        assert len(attach) == n == len(set(attach))
