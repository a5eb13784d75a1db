"""How close is the queueing model to the cycle-level simulator, and how much
faster is it?

For every layer we print the average flit latency both ways. At the loads
these accelerators run at, queues are almost always empty, so both land near
the zero-load latency and the model's contention term is a small correction.

    python3 demos/analytic_vs_sim.py [dnn] [topology]
"""

import sys

from imcsim.dnn import load_bundled
from imcsim.evaluate import evaluate

name = sys.argv[1] if len(sys.argv) > 1 else "resnet50-toy"
kind = sys.argv[2] if len(sys.argv) > 2 else "mesh"
g = load_bundled(name)

sim = evaluate(g, kind, mode="sim")
ana = evaluate(g, kind, mode="analytic")

print(f"{name} on {kind}: {sim.tiles} tiles, {sim.routers} routers\n")
print(f"{'layer':12s} {'sim cycles':>11s} {'model cycles':>13s} {'error %':>8s}")
for rs, ra in zip(sim.layers, ana.layers):
    if "avg_latency_cycles" not in rs:
        continue
    a, b = rs["avg_latency_cycles"], ra["avg_latency_cycles"]
    print(f"{rs['name']:12s} {a:11.3f} {b:13.3f} {100 * abs(b - a) / a:8.3f}")

err = abs(ana.weighted_latency - sim.weighted_latency) / sim.weighted_latency
print(f"\nper-layer latency sum: sim {sim.weighted_latency:.4f}, model {ana.weighted_latency:.4f} "
      f"({100 * err:.3f}% apart)")
print(f"congestion in the simulation: MAPD {sim.congestion['mapd']:.3f}%, "
      f"{sim.congestion['pct_zero_occupancy']:.1f}% of arrivals found an empty queue")
print(f"wall time: sim {sim.wall_time_s:.2f} s, model {ana.wall_time_s * 1e3:.2f} ms "
      f"(speed-up {sim.wall_time_s / ana.wall_time_s:.0f}x)")
