"""Topology guidance from connection density, and tree-vs-mesh comparison."""

from __future__ import annotations

from dataclasses import dataclass

from .costs import CostTable, EvalReport
from .dnn import DnnGraph, connection_density, total_neurons
from .evaluate import evaluate
from .mapper import ImcConfig
from .sim import RouterModel

LOWER = 1.0e3
UPPER = 2.0e3


@dataclass(frozen=True)
class Recommendation:
    topology: str
    rho: float
    mu: float
    rationale: str
    lower: float = LOWER
    upper: float = UPPER

    @property
    def proxy_rate(self) -> float:
        """Injection-rate proxy rho/mu; the rate scales with it."""
        return self.rho / self.mu

    def to_dict(self):
        return {"topology": self.topology, "rho": self.rho, "mu": self.mu,
                "proxy_rate": self.proxy_rate, "lower": self.lower, "upper": self.upper,
                "rationale": self.rationale}


def recommend_topology(rho, mu, lower=LOWER, upper=UPPER) -> Recommendation:
    if rho <= 0 or mu <= 0:
        raise ValueError(f"connection density and neuron count must be positive (rho={rho}, mu={mu})")
    if lower > upper:
        raise ValueError("lower threshold exceeds upper threshold")
    if rho > upper:
        topo, why = "mesh", f"connection density {rho:g} above {upper:g}: traffic needs path diversity"
    elif rho < lower:
        topo, why = "tree", f"connection density {rho:g} below {lower:g}: a tree carries it at lower cost"
    else:
        topo, why = "either", f"connection density {rho:g} within [{lower:g}, {upper:g}]: compare EDAP"
    return Recommendation(topo, float(rho), float(mu), why, lower, upper)


def recommend_for(g: DnnGraph, lower=LOWER, upper=UPPER) -> Recommendation:
    return recommend_topology(connection_density(g), total_neurons(g), lower, upper)


@dataclass
class Comparison:
    tree: EvalReport
    mesh: EvalReport

    @property
    def winner(self) -> str:
        if self.tree.edap == self.mesh.edap:
            return "tie"
        return "tree" if self.tree.edap < self.mesh.edap else "mesh"

    @property
    def edap_ratio(self) -> float:
        """EDAP(tree) / EDAP(mesh)."""
        return self.tree.edap / self.mesh.edap if self.mesh.edap else float("inf")

    def to_dict(self):
        return {"winner": self.winner, "edap_ratio_tree_over_mesh": self.edap_ratio,
                "tree": self.tree.to_dict(), "mesh": self.mesh.to_dict()}

    def summary(self) -> str:
        rows = [("", "tree", "mesh"),
                ("latency (s)", f"{self.tree.latency_s:.6g}", f"{self.mesh.latency_s:.6g}"),
                ("throughput (FPS)", f"{self.tree.fps:.6g}", f"{self.mesh.fps:.6g}"),
                ("energy (J)", f"{self.tree.energy_J:.6g}", f"{self.mesh.energy_J:.6g}"),
                ("area (mm^2)", f"{self.tree.area_mm2:.6g}", f"{self.mesh.area_mm2:.6g}"),
                ("EDAP (J*ms*mm^2)", f"{self.tree.edap:.6g}", f"{self.mesh.edap:.6g}")]
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        lines = [f"{a:<{w0}}  {b:>{w1}}  {c}" for a, b, c in rows]
        lines.append(f"winner by EDAP: {self.winner}")
        return "\n".join(lines)


def compare_report(g: DnnGraph, cfg: ImcConfig = ImcConfig(), router: RouterModel = RouterModel(),
                   table: CostTable = CostTable(), mode="analytic", seed=0, **kw) -> Comparison:
    """Evaluate tree and mesh with identical settings; lower EDAP wins."""
    reports = {k: evaluate(g, k, cfg, router, table, mode=mode, seed=seed, **kw)
               for k in ("tree", "mesh")}
    try:
        rec = recommend_for(g).to_dict()
    except ValueError:
        rec = {}
    for r in reports.values():
        r.recommendation = rec
    return Comparison(reports["tree"], reports["mesh"])
