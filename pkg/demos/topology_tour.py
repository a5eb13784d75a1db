"""Walk one sparse and one densely connected DNN across the four interconnects.

The sparse MLP sends every activation to exactly one successor, so a cheap
tree carries it comfortably. The dense toy network fans each block output
out to every later layer; the tree's root becomes the bottleneck and the mesh
pays for its extra routers many times over.

    python3 demos/topology_tour.py
"""

from imcsim.advisor import recommend_for
from imcsim.dnn import connection_density, load_bundled
from imcsim.evaluate import evaluate

KINDS = ("p2p", "tree", "mesh", "cmesh")


def tour(name):
    g = load_bundled(name)
    rec = recommend_for(g)
    print(f"\n== {name}: {len(g.layers)} layers, connection density {connection_density(g):.3f}")
    print(f"   density-based advice: {rec.topology} ({rec.rationale})")
    print(f"   {'topology':8s} {'latency us':>11s} {'routing %':>10s} {'FPS':>10s} {'EDAP':>11s}")
    reps = {k: evaluate(g, k, mode="analytic") for k in KINDS}
    for k, r in reps.items():
        print(f"   {k:8s} {r.latency_s * 1e6:11.2f} {100 * r.routing_fraction:10.1f} "
              f"{r.fps:10.0f} {r.edap:11.3e}")
    best = min(reps, key=lambda k: reps[k].edap)
    print(f"   lowest EDAP: {best}")


if __name__ == "__main__":
    print("Each layer waits for its inputs, so communication time adds straight onto compute.")
    tour("mlp")
    tour("densenet-toy")
    print("\nConcentrated meshes share a high-radix router among several tiles; router cost grows"
          "\nsteeply with port count, which is why cmesh never wins on EDAP here.")
