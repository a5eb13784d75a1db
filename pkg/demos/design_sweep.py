"""Sweep virtual channels and bus width for tree and mesh.

Extra virtual channels only help when flits actually wait behind each other,
which at these loads they rarely do: throughput barely moves while router
area grows with every channel. Halving the bus width, on the other hand,
doubles the flits each layer has to push through its busiest link, so
communication time roughly doubles.

    python3 demos/design_sweep.py [out.csv]
"""

import sys

from imcsim.dnn import load_bundled
from imcsim.sweep import sweep

out = sys.argv[1] if len(sys.argv) > 1 else None
dnns = [load_bundled(n) for n in ("lenet5", "vgg19", "densenet-toy")]
rows = sweep(dnns, ("tree", "mesh"), vcs=(1, 2, 4), bus_widths=(16, 32, 64), out_csv=out)

print(f"{'dnn':13s} {'topo':5s} {'vcs':>3s} {'W':>3s} {'comm us':>9s} {'FPS':>9s} {'EDAP':>10s}")
for r in rows:
    print(f"{r['dnn']:13s} {r['topology']:5s} {r['vcs']:3d} {r['bus_width']:3d} "
          f"{r['comm_latency_s'] * 1e6:9.3f} {r['fps']:9.0f} {r['edap']:10.3e}")

print("\ncommunication time relative to W=32, one VC:")
base = {(r["dnn"], r["topology"]): r["comm_latency_s"] for r in rows
        if r["bus_width"] == 32 and r["vcs"] == 1}
for r in rows:
    if r["vcs"] == 1 and r["bus_width"] != 32:
        print(f"  {r['dnn']:13s} {r['topology']:5s} W={r['bus_width']:<3d} "
              f"x{r['comm_latency_s'] / base[r['dnn'], r['topology']]:.2f}")
if out:
    print(f"\nfull grid written to {out}")
