"""Cycle-level interconnect simulator.

Single-flit packets move through input-queued routers with virtual channels,
credit-based backpressure, a fixed router pipeline and round-robin switch
allocation. The clock is advanced only to cycles where something can happen
(a flit becomes ready, arrives, or is generated); the outcome is identical to
stepping every cycle.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
import random
import time
import warnings
from collections import deque
from dataclasses import dataclass, field

from .dnn import DnnGraph, edge_activations
from .mapper import ImcConfig, TileMapping
from .topology import Topology, route_hops
from .traffic import (SaturationWarning, TrafficMatrix, dnn_traffic, merge_rates,
                      router_port_rates)

_ARRIVE, _GEN, _INJ, _WAKE = 0, 1, 2, 3


class DeadlockError(RuntimeError):
    """No flit advanced for longer than the watchdog interval."""


@dataclass(frozen=True)
class RouterModel:
    vcs: int = 1
    buffer_depth: int = 8
    pipeline_stages: int = 3
    link_latency: int = 1

    def __post_init__(self):
        if self.vcs < 1 or self.buffer_depth < 1 or self.pipeline_stages < 1:
            raise ValueError("vcs, buffer_depth and pipeline_stages must be >= 1")
        if self.link_latency < 0:
            raise ValueError("link_latency must be >= 0")


@dataclass
class PairStats:
    count: int = 0
    total: int = 0
    worst: int = 0

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0


@dataclass
class SimStats:
    avg_latency: float = 0.0
    pairs: dict = field(default_factory=dict)
    avg_queue_len: dict = field(default_factory=dict)
    pct_zero_occupancy: float = 100.0
    flits_injected: int = 0
    flits_ejected: int = 0
    measured_flits: int = 0
    zero_load_latency: float = 0.0
    warmup: int = 0
    window: int = 0
    cycles: int = 0
    saturated: bool = False

    @property
    def worst_latency(self) -> dict:
        return {k: p.worst for k, p in self.pairs.items()}

    def to_dict(self):
        return {
            "avg_latency_cycles": self.avg_latency,
            "zero_load_latency_cycles": self.zero_load_latency,
            "pct_zero_occupancy": self.pct_zero_occupancy,
            "flits_injected": self.flits_injected,
            "flits_ejected": self.flits_ejected,
            "measured_flits": self.measured_flits,
            "warmup": self.warmup,
            "window": self.window,
            "cycles": self.cycles,
            "saturated": self.saturated,
            "pairs": {f"{s}-{d}": {"count": p.count, "avg": p.mean, "max": p.worst}
                      for (s, d), p in sorted(self.pairs.items())},
            "avg_queue_len": {f"{r}:{port}": q for (r, port), q in sorted(self.avg_queue_len.items())},
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "flits", "avg_latency", "max_latency"])
            for (s, d), p in sorted(self.pairs.items()):
                w.writerow([s, d, p.count, p.mean, p.worst])


def zero_load_latency(topology: Topology, src, dst, router: RouterModel) -> int:
    """Uncontended latency: every router costs the pipeline depth, every
    router-router link its traversal time."""
    n = len(route_hops(topology, src, dst))
    return n * router.pipeline_stages + (n - 1) * router.link_latency


def _flows_of(traffic):
    if isinstance(traffic, dict):
        flows = traffic
    elif isinstance(traffic, TrafficMatrix):
        flows = dict(traffic.rates)
    else:
        flows = merge_rates(traffic)
    return {k: v for k, v in sorted(flows.items()) if v > 0}


def simulate_layer_transfer(topology: Topology, traffic, router: RouterModel = RouterModel(),
                            seed=0, warmup=10_000, min_window=100_000, min_flits=100,
                            arrival="deterministic", trace=None, watchdog=20_000) -> SimStats:
    """Drive every (src, dst) flow at its injection rate and measure flit latency.

    Flits generated during ``[warmup, warmup + window)`` are measured; the
    window is long enough for each flow to deliver ``min_flits`` flits. The
    network is drained before returning so injected == ejected.

    ``arrival="deterministic"`` spaces flits of a flow exactly ``1/rate``
    cycles apart (fractional part accumulated, random phase per flow);
    ``"bernoulli"`` draws geometric inter-arrival times.
    """
    flows = _flows_of(traffic)
    if not flows:
        return SimStats(warmup=warmup)
    if arrival not in ("deterministic", "bernoulli"):
        raise ValueError(f"unknown arrival process {arrival!r}")
    rng = random.Random(seed)

    P, V, D, L = router.pipeline_stages, router.vcs, router.buffer_depth, router.link_latency
    R = topology.n_routers
    nports = [len(p) for p in topology.port_names]
    base = [0] * (R + 1)
    for r in range(R):
        base[r + 1] = base[r] + nports[r] * V
    nb = base[R]
    bufs = [deque() for _ in range(nb)]
    occ = [0] * nb
    out_link = [[topology.links.get((r, p)) for p in range(nports[r])] for r in range(R)]
    next_port = topology.next_port
    attach = topology.tile_port
    in_ptr = [[0] * nports[r] for r in range(R)]
    out_ptr = [[0] * nports[r] for r in range(R)]

    window = max(min_window, math.ceil(min_flits / min(flows.values())))
    w0, w1 = warmup, warmup + window

    # time-averaged occupancy over the measurement window
    occ_int = [0.0] * nb
    last_t = [0] * nb
    arrivals = [0] * nb
    empty_arrivals = [0] * nb

    def touch(b, t):
        a = min(max(last_t[b], w0), w1)
        z = min(max(t, w0), w1)
        if z > a:
            occ_int[b] += len(bufs[b]) * (z - a)
        last_t[b] = t

    tw = None
    if trace is not None:
        tw = csv.writer(trace)
        tw.writerow(["cycle", "router", "port", "event"])

    pair_index = {k: i for i, k in enumerate(flows)}
    pair_stats = [PairStats() for _ in flows]
    zero_load = [zero_load_latency(topology, s, d, router) for (s, d) in flows]

    events = []
    seq = 0
    pending_wake = set()

    def push(t, kind, payload):
        nonlocal seq
        seq += 1
        heapq.heappush(events, (t, kind, seq, payload))

    def wake(r, t):
        if (t, r) not in pending_wake:
            pending_wake.add((t, r))
            push(t, _WAKE, r)

    flow_list = list(flows.items())
    flow_state = []
    for i, ((s, d), lam) in enumerate(flow_list):
        if arrival == "deterministic":
            phase = rng.random() / lam
            flow_state.append([phase, 0])
            first = math.floor(phase)
        else:
            first = _geometric(rng, lam) - 1
            flow_state.append([0.0, 0])
        if first < w1:
            push(first, _GEN, i)

    srcq = {}
    injected = ejected = measured = 0
    in_network = 0
    lat_total = 0
    zl_total = 0
    last_progress = 0
    backlog_at_end = None

    while events:
        t = events[0][0]
        if in_network and t - last_progress > watchdog:
            raise DeadlockError(f"no flit advanced between cycles {last_progress} and {t}")
        if backlog_at_end is None and t >= w1:
            backlog_at_end = sum(len(q) for q in srcq.values())
        inj_try = set()
        woken = []
        while events and events[0][0] == t:
            _, kind, _, payload = heapq.heappop(events)
            if kind == _ARRIVE:
                b, r, flit = payload
                touch(b, t)
                if w0 <= t < w1:
                    arrivals[b] += 1
                    if not bufs[b]:
                        empty_arrivals[b] += 1
                bufs[b].append(flit)
                flit[3] = t + P
                wake(r, t + P)
                if tw:
                    tw.writerow([t, r, topology.port_names[r][(b - base[r]) // V], "arrive"])
            elif kind == _GEN:
                i = payload
                (s, d), lam = flow_list[i]
                st = flow_state[i]
                flit = [t, s, d, 0, w0 <= t < w1, pair_index[(s, d)]]
                injected += 1
                in_network += 1
                srcq.setdefault(s, deque()).append(flit)
                inj_try.add(s)
                st[1] += 1
                if arrival == "deterministic":
                    nxt = math.floor(st[0] + st[1] / lam)
                else:
                    nxt = t + _geometric(rng, lam)
                if nxt < w1:
                    push(nxt, _GEN, i)
            elif kind == _INJ:
                inj_try.add(payload)
            else:
                pending_wake.discard((t, payload))
                woken.append(payload)

        for s in sorted(inj_try):
            q = srcq.get(s)
            if not q:
                continue
            r, p = attach[s]
            b0 = base[r] + p * V
            for v in range(V):
                b = b0 + v
                if occ[b] < D:
                    flit = q.popleft()
                    occ[b] += 1
                    touch(b, t)
                    if w0 <= t < w1:
                        arrivals[b] += 1
                        if not bufs[b]:
                            empty_arrivals[b] += 1
                    bufs[b].append(flit)
                    flit[3] = t + P
                    wake(r, t + P)
                    last_progress = t
                    if tw:
                        tw.writerow([t, r, topology.port_names[r][p], "inject"])
                    break
            if q:
                push(t + 1, _INJ, s)

        freed = []
        for r in sorted(set(woken)):
            np_r = nports[r]
            requests = {}
            for p in range(np_r):
                b0 = base[r] + p * V
                start = in_ptr[r][p]
                for k in range(V):
                    v = (start + k) % V
                    q = bufs[b0 + v]
                    if not q or q[0][3] > t:
                        continue
                    po = next_port[r][q[0][2]]
                    tgt = out_link[r][po]
                    if tgt is not None:
                        tb = base[tgt[0]] + tgt[1] * V
                        if not any(occ[tb + u] < D for u in range(V)):
                            continue
                    requests.setdefault(po, []).append((p, v))
                    break
            for po in sorted(requests):
                reqs = requests[po]
                ptr = out_ptr[r][po]
                p, v = min(reqs, key=lambda pv: (pv[0] - ptr) % np_r)
                out_ptr[r][po] = (p + 1) % np_r
                in_ptr[r][p] = (v + 1) % V
                b = base[r] + p * V + v
                touch(b, t)
                flit = bufs[b].popleft()
                freed.append(b)
                last_progress = t
                tgt = out_link[r][po]
                if tgt is None:
                    ejected += 1
                    in_network -= 1
                    if flit[4]:
                        lat = t - flit[0]
                        ps = pair_stats[flit[5]]
                        ps.count += 1
                        ps.total += lat
                        if lat > ps.worst:
                            ps.worst = lat
                        measured += 1
                        lat_total += lat
                        zl_total += zero_load[flit[5]]
                    if tw:
                        tw.writerow([t, r, topology.port_names[r][po], "eject"])
                else:
                    r2, p2 = tgt
                    tb = base[r2] + p2 * V
                    u = next(u for u in range(V) if occ[tb + u] < D)
                    occ[tb + u] += 1
                    push(t + L, _ARRIVE, (tb + u, r2, flit))
                    if tw:
                        tw.writerow([t, r, topology.port_names[r][po], "depart"])
            # next cycle this router has work
            nxt = None
            for b in range(base[r], base[r + 1]):
                q = bufs[b]
                if q:
                    ready = q[0][3]
                    cand = t + 1 if ready <= t else ready
                    if nxt is None or cand < nxt:
                        nxt = cand
            if nxt is not None:
                wake(r, nxt)
        for b in freed:
            occ[b] -= 1

    if in_network:
        raise RuntimeError("simulation ended with flits still in flight")

    stats = SimStats(warmup=warmup, window=window, cycles=t + 1)
    stats.flits_injected = injected
    stats.flits_ejected = ejected
    stats.measured_flits = measured
    stats.avg_latency = lat_total / measured if measured else 0.0
    stats.zero_load_latency = zl_total / measured if measured else 0.0
    stats.pairs = {k: pair_stats[i] for k, i in pair_index.items() if pair_stats[i].count}
    total_arr = sum(arrivals)
    stats.pct_zero_occupancy = 100.0 * sum(empty_arrivals) / total_arr if total_arr else 100.0
    for r in range(R):
        for p in range(nports[r]):
            b0 = base[r] + p * V
            if any(arrivals[b0 + v] for v in range(V)):
                stats.avg_queue_len[(r, topology.port_names[r][p])] = \
                    sum(occ_int[b0 + v] for v in range(V)) / window
    expected = sum(flows.values()) * window
    stats.saturated = bool(backlog_at_end and backlog_at_end > max(50, 0.01 * expected))
    return stats


def _geometric(rng, p):
    """Trials until first success, p in (0, 1]."""
    if p >= 1.0:
        return 1
    u = 1.0 - rng.random()
    return max(1, math.ceil(math.log(u) / math.log1p(-p)))


def received_activations(g: DnnGraph, i: int) -> int:
    """Activations layer ``i`` receives over the interconnect, summed over producers."""
    return sum(edge_activations(g, a, i) for a in g.weighted_producers(i))


def end_to_end_latency(per_layer, g: DnnGraph, cfg: ImcConfig) -> float:
    """Sum over layers of (avg cycles) * A_i * N_bits * FPS / freq.

    ``per_layer`` maps layer index to SimStats or to an average latency in
    cycles. A_i is the activation volume the layer receives.
    """
    total = 0.0
    for i, s in per_layer.items():
        cyc = s.avg_latency if isinstance(s, SimStats) else float(s)
        total += cyc * received_activations(g, i) * cfg.n_bits * cfg.fps_target / cfg.freq
    return total


def transfer_time(per_layer, g: DnnGraph, cfg: ImcConfig) -> float:
    """Seconds to move every layer's flits when each flit costs the average
    latency: total flits * avg cycles / freq."""
    total = 0.0
    for i, s in per_layer.items():
        cyc = s.avg_latency if isinstance(s, SimStats) else float(s)
        flits = math.ceil(received_activations(g, i) * cfg.n_bits / cfg.bus_width)
        total += flits * cyc / cfg.freq
    return total


@dataclass
class CongestionStats:
    mapd: float | None
    pct_zero_occupancy: float
    avg_queue_len: dict
    max_gap: int
    mean_nonzero_queue_len: float


def congestion_stats(stats: SimStats) -> CongestionStats:
    """Mean absolute percentage deviation of worst-case from average latency
    over pairs with nonzero average latency, plus queue occupancy figures."""
    devs = [(p.worst - p.mean) / p.mean for p in stats.pairs.values() if p.count and p.mean > 0]
    mapd = 100.0 * sum(devs) / len(devs) if devs else None
    gap = max((p.worst - p.mean for p in stats.pairs.values() if p.count), default=0)
    nz = [q for q in stats.avg_queue_len.values() if q > 0]
    return CongestionStats(mapd, stats.pct_zero_occupancy, dict(stats.avg_queue_len),
                           gap, sum(nz) / len(nz) if nz else 0.0)


def merge_congestion(stats_list) -> CongestionStats:
    """Congestion figures pooled over several layer simulations."""
    pairs_devs, gaps, nz = [], [], []
    arr_zero = arr_total = 0.0
    queues = {}
    for s in stats_list:
        for p in s.pairs.values():
            if p.count and p.mean > 0:
                pairs_devs.append((p.worst - p.mean) / p.mean)
                gaps.append(p.worst - p.mean)
        arr = s.measured_flits
        arr_zero += s.pct_zero_occupancy * arr / 100.0
        arr_total += arr
        for k, q in s.avg_queue_len.items():
            queues[k] = max(queues.get(k, 0.0), q)
            if q > 0:
                nz.append(q)
    mapd = 100.0 * sum(pairs_devs) / len(pairs_devs) if pairs_devs else None
    return CongestionStats(mapd, 100.0 * arr_zero / arr_total if arr_total else 100.0,
                           queues, max(gaps, default=0), sum(nz) / len(nz) if nz else 0.0)


@dataclass
class DnnSimResult:
    layers: dict
    weighted_latency: float
    transfer_s: float
    wall_time: float

    @property
    def saturated(self):
        return any(s.saturated for s in self.layers.values())


def simulate_dnn(g: DnnGraph, mapping: TileMapping, topology: Topology, cfg: ImcConfig,
                 router: RouterModel = RouterModel(), seed=0, **kw) -> DnnSimResult:
    """Simulate every layer's incoming traffic independently (layer-by-layer
    execution) and accumulate the end-to-end interconnect latency."""
    t0 = time.perf_counter()
    per_layer = {}
    for i, mats in dnn_traffic(g, mapping, cfg).items():
        per_layer[i] = simulate_layer_transfer(topology, mats, router, seed=seed + i, **kw)
    return DnnSimResult(per_layer, end_to_end_latency(per_layer, g, cfg),
                        transfer_time(per_layer, g, cfg), time.perf_counter() - t0)


def offered_port_load(topology: Topology, traffic) -> float:
    """Largest offered load on any router output (link or ejection port)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        rates = router_port_rates(traffic, topology)
    return max((rp.offered_load for rp in rates), default=0.0)
