"""Closed-form router queueing model and end-to-end communication latency.

Per router: forwarding probabilities from the port-to-port flows, a
contention matrix, mean queue lengths from the linear system
``N = (I - t*Lam*C)^-1 Lam R`` and per-port waiting times ``W = N / lam``.
A layer's latency adds the routers' port-averaged waiting times to the
uncontended traversal latency of its flows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dnn import DnnGraph
from .mapper import ImcConfig, TileMapping
from .sim import RouterModel, end_to_end_latency, transfer_time, zero_load_latency
from .topology import Topology
from .traffic import RouterPortRates, dnn_traffic, merge_rates, router_port_rates


class SaturationError(ArithmeticError):
    def __init__(self, router, radius):
        super().__init__(f"router {router} is unstable: spectral radius {radius:.4f} >= 1")
        self.router = router
        self.radius = radius


def forwarding_matrix(port_flows) -> np.ndarray:
    """Probability that a flit entering port i leaves on port j."""
    flows = np.asarray(port_flows, dtype=float)
    totals = flows.sum(axis=1, keepdims=True)
    return np.divide(flows, totals, out=np.zeros_like(flows), where=totals > 0)


def contention_matrix(F) -> np.ndarray:
    """c_ij = sum_k f_ik f_jk: probability that flits from ports i and j want
    the same output."""
    F = np.asarray(F, dtype=float)
    return F @ F.T


def residual_times(lam, F=None, t=1.0, mode="port") -> np.ndarray:
    """Mean residual service time seen by an arriving flit at each port.

    ``"port"``: R_p = lam_p * t / 2, the residual of a unit deterministic
    server fed by that port alone. ``"output"``: R_p = sum_j f_pj rho_j t / 2
    with rho_j the utilisation of output j, i.e. the residual of the server
    the flit will actually queue for.
    """
    lam = np.asarray(lam, dtype=float)
    if mode == "port":
        return lam * t / 2.0
    if mode == "output":
        if F is None:
            raise ValueError("output residual needs the forwarding matrix")
        rho = t * (lam @ F)
        return (F @ rho) * t / 2.0
    raise ValueError(f"unknown residual mode {mode!r}")


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if np.size(M) else 0.0


def queue_lengths(Lam, C, R, t=1.0, router=None) -> np.ndarray:
    """Mean queue length per port, N = (I - t Lam C)^-1 Lam R."""
    Lam = np.asarray(Lam, dtype=float)
    if Lam.ndim == 1:
        Lam = np.diag(Lam)
    M = t * Lam @ np.asarray(C, dtype=float)
    radius = spectral_radius(M)
    if radius >= 1.0:
        raise SaturationError(router, radius)
    return np.linalg.solve(np.eye(len(M)) - M, Lam @ np.asarray(R, dtype=float))


def waiting_times(N, lam):
    """Per-port waiting time N_p / lam_p (idle ports contribute 0) and the
    plain average over all ports of the router."""
    N = np.asarray(N, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 2:
        lam = np.diag(lam)
    w = np.divide(N, lam, out=np.zeros_like(N), where=lam > 0)
    return w, float(w.mean()) if w.size else 0.0


def total_latency(per_layer_wavg) -> float:
    """Sum the routers' average waiting times per layer, then over layers.

    ``per_layer_wavg`` maps a layer to an iterable of per-router W_avg values
    (or is an iterable of such iterables).
    """
    layers = per_layer_wavg.values() if isinstance(per_layer_wavg, dict) else per_layer_wavg
    return float(sum(sum(ws) for ws in layers))


@dataclass
class RouterAnalytic:
    router: int
    lam: np.ndarray
    F: np.ndarray
    C: np.ndarray
    R: np.ndarray
    N: np.ndarray
    W: np.ndarray
    w_avg: float
    radius: float
    service_time: float = 1.0

    @property
    def Lam(self):
        return np.diag(self.lam)

    @property
    def stability_margin(self):
        return 1.0 - self.radius


def analyze_router(rp: RouterPortRates, t=1.0, residual="port") -> RouterAnalytic:
    lam = rp.arrival_rates
    F = forwarding_matrix(rp.port_flows)
    C = contention_matrix(F)
    R = residual_times(lam, F, t, residual)
    radius = spectral_radius(t * np.diag(lam) @ C)
    N = queue_lengths(lam, C, R, t, router=rp.router)
    W, w_avg = waiting_times(N, lam)
    return RouterAnalytic(rp.router, lam, F, C, R, N, W, w_avg, radius, t)


@dataclass
class LayerAnalytic:
    layer: int
    routers: list
    zero_load: float
    waiting: float

    @property
    def latency(self) -> float:
        return self.zero_load + self.waiting


def analyze_layer(topology: Topology, traffic, router: RouterModel = RouterModel(),
                  layer=None, residual="port") -> LayerAnalytic:
    """Analytical average flit latency (cycles) of one layer transfer."""
    flows = traffic if isinstance(traffic, dict) else merge_rates(traffic)
    flows = {k: v for k, v in flows.items() if v > 0}
    if not flows:
        return LayerAnalytic(layer, [], 0.0, 0.0)
    total = sum(flows.values())
    zl = sum(lam * zero_load_latency(topology, s, d, router) for (s, d), lam in flows.items())
    routers = [analyze_router(rp, 1.0, residual)
               for rp in router_port_rates(flows, topology) if rp.active]
    return LayerAnalytic(layer, routers, zl / total, total_latency([[r.w_avg for r in routers]]))


@dataclass
class DnnAnalyticResult:
    layers: dict = field(default_factory=dict)
    weighted_latency: float = 0.0
    transfer_s: float = 0.0
    wall_time: float = 0.0

    @property
    def total_cycles(self):
        return sum(la.latency for la in self.layers.values())

    def diagnostics(self):
        """Rows of (layer, router, lambda diagonal, W_avg, stability margin)."""
        return [(i, ra.router, ra.lam.tolist(), ra.w_avg, ra.stability_margin)
                for i, la in self.layers.items() for ra in la.routers]


def analyze_dnn(g: DnnGraph, mapping: TileMapping, topology: Topology, cfg: ImcConfig,
                router: RouterModel = RouterModel(), residual="port") -> DnnAnalyticResult:
    """Layer-by-layer analytical evaluation; latencies are converted to
    seconds with the same rules as the simulator so the two are comparable."""
    t0 = time.perf_counter()
    layers = {i: analyze_layer(topology, mats, router, i, residual)
              for i, mats in dnn_traffic(g, mapping, cfg).items()}
    cyc = {i: la.latency for i, la in layers.items()}
    return DnnAnalyticResult(layers, end_to_end_latency(cyc, g, cfg),
                             transfer_time(cyc, g, cfg), time.perf_counter() - t0)


def write_diagnostics_csv(result: DnnAnalyticResult, path):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "router", "lambda_diag", "w_avg", "stability_margin"])
        for row in result.diagnostics():
            w.writerow([row[0], row[1], " ".join(f"{x:.6g}" for x in row[2]), row[3], row[4]])
