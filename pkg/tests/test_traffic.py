import csv
import itertools
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imcsim.dnn import LayerSpec, build_graph, load_bundled
from imcsim.mapper import ImcConfig, TileMapping, map_dnn, place_tiles
from imcsim.topology import MESH_PORTS, build_topology
from imcsim.traffic import (SaturationWarning, bottleneck_flits, channel_flits, dnn_traffic,
                            injection_rate, merge_rates, router_port_rates, tile_injection_matrix,
                            write_traffic_csv)

from oracles import boustrophedon, mesh_port_flows

P = {name: i for i, name in enumerate(MESH_PORTS)}


def two_layer(acts_side=10, c=10, tiles=(2, 2)):
    layers = [LayerSpec("a", "conv", acts_side, acts_side, 1, 1, 1, c),
              LayerSpec("b", "conv", acts_side, acts_side, c, 1, 1, 4)]
    g = build_graph("t", layers)
    return g, place_tiles(list(tiles), "mesh")


def test_injection_rate_hand_value():
    g, m = two_layer()
    cfg = ImcConfig(fps_target=1000)
    tm = tile_injection_matrix(g, m, cfg, 1)
    assert len(tm.rates) == 4
    for v in tm.rates.values():
        assert v == pytest.approx(6.25e-5, rel=1e-12)
    assert tm.layer_pair == (0, 1)
    assert tm.bits_per_frame == 1000 * 8


def test_zero_activation_matrix_is_empty():
    g, m = two_layer()
    tm = tile_injection_matrix(g, m, ImcConfig(), 1, acts=0)
    assert tm.total_rate == 0


def test_saturation_corner_rate_is_one():
    cfg = ImcConfig(n_bits=1, fps_target=1e9, freq=1e9)
    assert injection_rate(cfg.bus_width, cfg, 1, 1) == 1.0


def test_single_flow_west_to_east():
    t = build_topology("mesh", 9)
    # tiles 0,1,2 form the top row left to right
    rp = router_port_rates({(0, 2): 0.1}, t)
    mid = rp[t.router_of(1)]
    expected = np.zeros((5, 5))
    expected[P["W"], P["E"]] = 0.1
    assert np.array_equal(mid.port_flows, expected)
    assert mid.arrival_matrix[P["W"], P["W"]] == 0.1
    assert np.count_nonzero(mid.arrival_matrix) == 1


def test_two_flows_accumulate():
    # X-Y routing never turns from Y into X, so the two flows that share the
    # east output enter on W and on the local port
    t = build_topology("mesh", 9)
    center = t.router_at((1, 1))

    def tile_at(xy):
        return next(k for k, (r, _) in t.tile_port.items() if t.router_xy(r) == xy)

    west, mid, east = tile_at((0, 1)), tile_at((1, 1)), tile_at((2, 1))
    rp = router_port_rates({(west, east): 0.05, (mid, east): 0.05}, t)[center]
    assert rp.port_flows[P["W"], P["E"]] == 0.05
    assert rp.port_flows[P["Self"], P["E"]] == 0.05
    assert rp.port_flows.sum() == pytest.approx(0.1)


@pytest.mark.parametrize("n_tiles", [4, 9])
def test_all_pairs_against_path_enumeration(n_tiles):
    t = build_topology("mesh", n_tiles)
    n = int(round(n_tiles ** 0.5))
    tile_xy = {k: boustrophedon(k, n)[::-1] for k in range(n_tiles)}  # (x, y)
    flows = {(s, d): 0.01 for s, d in itertools.permutations(range(n_tiles), 2)}
    oracle = mesh_port_flows(flows, tile_xy)
    rates = router_port_rates(flows, t)
    for rp in rates:
        xy = t.router_xy(rp.router)
        expect = np.zeros((5, 5))
        for (pi, po), v in oracle.get(xy, {}).items():
            expect[P[pi], P[po]] += v
        assert np.array_equal(np.round(rp.port_flows, 15), np.round(expect, 15))


def test_saturation_is_capped_with_warning():
    t = build_topology("mesh", 4)
    with pytest.warns(SaturationWarning):
        rp = router_port_rates({(0, 1): 0.8, (3, 1): 0.8}, t)
    assert all(rp_.port_flows.sum(axis=1).max() <= 1.0 + 1e-12 for rp_ in rp)
    assert any(r.saturated for r in rp)


def test_bundled_skip_traffic():
    g = load_bundled("densenet-toy")
    m = map_dnn(g, ImcConfig())
    traffic = dnn_traffic(g, m, ImcConfig())
    last_dense = max(i for i in traffic if g.layers[i].name.startswith("dense"))
    assert len(traffic[last_dense]) == len(g.weighted_producers(last_dense)) > 1


def test_channel_flits_and_bottleneck():
    t = build_topology("p2p", 4)
    cfg = ImcConfig(fps_target=1e6)
    flows = {(0, 3): 0.01, (1, 3): 0.01}
    ch = channel_flits(flows, t, cfg)
    per = 0.01 * cfg.freq / cfg.fps_target
    assert ch[("inj", 0)] == pytest.approx(per)
    assert ch[("out", 2, 1)] == pytest.approx(2 * per)
    assert bottleneck_flits(flows, t, cfg) == pytest.approx(2 * per)
    assert bottleneck_flits({}, t, cfg) == 0.0


def test_traffic_csv(tmp_path):
    g, m = two_layer()
    tm = tile_injection_matrix(g, m, ImcConfig(), 1)
    p = tmp_path / "t.csv"
    write_traffic_csv([tm], p)
    rows = list(csv.reader(open(p)))
    assert rows[0][:3] == ["src", "dst", "rate"]
    assert len(rows) == 1 + len(tm.rates)


def _random_flows(seed, n_tiles, k):
    rng = random.Random(seed)
    pairs = [(s, d) for s in range(n_tiles) for d in range(n_tiles) if s != d]
    return {p: rng.uniform(0.0, 0.02) for p in rng.sample(pairs, min(k, len(pairs)))}


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["p2p", "tree", "mesh", "cmesh"]), st.integers(2, 20),
       st.integers(0, 10_000), st.integers(1, 30))
def test_flow_conservation(kind, n_tiles, seed, k):
    t = build_topology(kind, n_tiles)
    flows = _random_flows(seed, n_tiles, k)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SaturationWarning)
        rates = router_port_rates(flows, t)
    inj = ej = 0.0
    for rp in rates:
        for tile, (r, port) in t.tile_port.items():
            if r == rp.router:
                inj += rp.port_flows[port].sum()
                ej += rp.port_flows[:, port].sum()
        assert (rp.port_flows >= 0).all()
        assert np.allclose(np.diag(rp.arrival_matrix), rp.port_flows.sum(axis=1))
    total = sum(flows.values())
    assert inj == pytest.approx(total, rel=1e-12)
    assert ej == pytest.approx(total, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["mlp", "lenet5", "vgg19", "resnet50-toy"]), st.floats(0.1, 10.0))
def test_fps_scales_rates_linearly(name, c):
    g = load_bundled(name)
    cfg = ImcConfig()
    m = map_dnn(g, cfg)
    base = merge_rates(x for mats in dnn_traffic(g, m, cfg).values() for x in mats)
    scaled = merge_rates(x for mats in dnn_traffic(g, m, ImcConfig(fps_target=cfg.fps_target * c))
                         .values() for x in mats)
    assert base.keys() == scaled.keys()
    for key in base:
        assert scaled[key] == pytest.approx(base[key] * c, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.randoms())
def test_rates_uniform_under_relabeling(t_src, t_dst, rnd):
    g, _ = two_layer()
    m = place_tiles([t_src, t_dst], "mesh")
    tm = tile_injection_matrix(g, m, ImcConfig(), 1)
    values = list(tm.rates.values())
    assert len(values) == t_src * t_dst
    assert len(set(values)) == 1
    perm = list(range(t_src + t_dst))
    rnd.shuffle(perm)
    relabeled = TileMapping(m.tiles_per_layer, m.crossbars_per_layer,
                            {perm[k]: v for k, v in m.placement.items()}, "mesh")
    tm2 = tile_injection_matrix(g, relabeled, ImcConfig(), 1)
    assert set(tm2.rates.values()) == set(values)
