"""Structural DNN description: layers, data-dependency edges and the
per-layer counts (neurons, activations, connection density) that drive the
traffic models.

Only shapes matter here. Weight values, activation functions and accuracy
are never represented.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from importlib import resources
from pathlib import Path

KINDS = ("conv", "fc", "pool", "input")
WEIGHTED_KINDS = ("conv", "fc")

BUNDLED = ("mlp", "lenet5", "nin", "vgg19", "resnet50-toy", "densenet-toy")


class DnnConfigError(ValueError):
    """Malformed DNN configuration. Carries the offending layer and line."""

    def __init__(self, message, layer=None, line=None):
        where = []
        if layer is not None:
            where.append(f"layer {layer!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.layer = layer
        self.line = line


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_x: int
    in_y: int
    in_channels: int
    kernel_x: int = 1
    kernel_y: int = 1
    out_channels: int = 0
    stride: int = 1
    padding: str = "same"

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS

    @property
    def fan_in(self) -> int:
        """Rows of the unrolled weight matrix (Kx*Ky*C_in, or all inputs for fc)."""
        if self.kind == "fc":
            return self.in_x * self.in_y * self.in_channels
        return self.kernel_x * self.kernel_y * self.in_channels

    @property
    def out_x(self) -> int:
        return _out_dim(self.in_x, self.kernel_x, self.stride, self.padding, self.kind)

    @property
    def out_y(self) -> int:
        return _out_dim(self.in_y, self.kernel_y, self.stride, self.padding, self.kind)


def _out_dim(n, k, stride, padding, kind):
    if kind == "fc":
        return 1
    if kind == "input":
        return n
    if kind == "pool" or padding == "valid":
        return max(1, (n - k) // stride + 1)
    return math.ceil(n / stride)


@dataclass(frozen=True)
class DnnGraph:
    name: str
    layers: tuple
    edges: tuple = field(default=())

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def predecessors(self, i):
        return [a for a, b in self.edges if b == i]

    def successors(self, i):
        return [b for a, b in self.edges if a == i]

    def weighted_indices(self):
        return [i for i, layer in enumerate(self.layers) if layer.weighted]

    def weighted_producers(self, i):
        """Weighted layers feeding layer ``i``, looking through pool/input layers.

        Unweighted layers (pooling) are executed inside the producing tile, so
        the data a weighted layer consumes physically comes from the nearest
        weighted ancestors.
        """
        found = []
        stack = list(self.predecessors(i))
        seen = set()
        while stack:
            a = stack.pop()
            if a in seen:
                continue
            seen.add(a)
            if self.layers[a].weighted:
                found.append(a)
            else:
                stack.extend(self.predecessors(a))
        return sorted(found)


def _line_of(text, needle):
    if text is None:
        return None
    m = re.search(r'"name"\s*:\s*' + re.escape(json.dumps(needle)), text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def _line_of_key(text, key):
    if text is None:
        return None
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _layer_from_dict(d, index, text):
    name = d.get("name", f"layer{index}")
    line = _line_of(text, name)
    kind = d.get("kind")
    if kind not in KINDS:
        raise DnnConfigError(f"unknown kind {kind!r}; expected one of {KINDS}", name, line)

    def get_int(key, default=None):
        value = d.get(key, default)
        if value is None:
            raise DnnConfigError(f"missing field {key!r}", name, line)
        if isinstance(value, bool) or not isinstance(value, int):
            raise DnnConfigError(f"field {key!r} must be an integer, got {value!r}", name, line)
        if value < 1:
            raise DnnConfigError(f"field {key!r} must be >= 1, got {value}", name, line)
        return value

    in_x = get_int("in_x", 1 if kind == "fc" else None)
    in_y = get_int("in_y", 1 if kind == "fc" else None)
    in_c = get_int("in_channels")
    if kind == "conv":
        kx, ky = get_int("kernel_x"), get_int("kernel_y")
        out_c = get_int("out_channels")
        stride = get_int("stride", 1)
    elif kind == "fc":
        kx = ky = 1
        out_c = get_int("out_channels")
        stride = 1
    elif kind == "pool":
        kx, ky = get_int("kernel_x", 2), get_int("kernel_y", 2)
        out_c = get_int("out_channels", in_c)
        stride = get_int("stride", kx)
        if out_c != in_c:
            raise DnnConfigError("pool layers cannot change the channel count", name, line)
    else:
        kx = ky = 1
        out_c = in_c
        stride = 1
    padding = d.get("padding", "same")
    if padding not in ("same", "valid"):
        raise DnnConfigError(f"padding must be 'same' or 'valid', got {padding!r}", name, line)
    return LayerSpec(name, kind, in_x, in_y, in_c, kx, ky, out_c, stride, padding)


def build_graph(name, layers, edges=()):
    """Validate layers/edges and return a DnnGraph with backbone edges added."""
    layers = tuple(layers)
    n = len(layers)
    if n == 0:
        raise DnnConfigError("DNN has no layers")
    names = [layer.name for layer in layers]
    if len(set(names)) != n:
        dup = next(x for x in names if names.count(x) > 1)
        raise DnnConfigError("duplicate layer name", dup)
    edge_set = {(i, i + 1) for i in range(n - 1)}
    for e in edges:
        a, b = (int(v) for v in e)
        edge_set.add((a, b))
    return _validated(name, layers, edge_set)


def _validated(name, layers, edge_set, text=None):
    n = len(layers)
    line = _line_of_key(text, "edges")
    for a, b in sorted(edge_set):
        if not (0 <= a < n and 0 <= b < n):
            raise DnnConfigError(f"edge ({a}, {b}) references a layer index outside 0..{n - 1}",
                                 line=line)
        if a == b:
            raise DnnConfigError(f"self-loop edge ({a}, {b})", layers[a].name, line)
    sorter = TopologicalSorter({i: set() for i in range(n)})
    for a, b in edge_set:
        sorter.add(b, a)
    try:
        tuple(sorter.static_order())
    except CycleError as exc:
        cyc = exc.args[1]
        raise DnnConfigError(
            "edges form a cycle through layers " + " -> ".join(layers[i].name for i in cyc),
            layers[cyc[0]].name, line) from None
    for b in range(1, n):
        if layers[b].kind != "input" and not any(e[1] == b for e in edge_set):
            raise DnnConfigError("layer has no incoming edge", layers[b].name)
    return DnnGraph(name, layers, tuple(sorted(edge_set)))


def parse_dnn_config(config_text: str) -> DnnGraph:
    """Parse the JSON DNN description.

    Layer indices are 0-based in declaration order. Edges ``(i, i+1)`` are
    implied and may be omitted.
    """
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise DnnConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict) or not isinstance(data.get("layers"), list):
        raise DnnConfigError("top level must be an object with a 'layers' list", line=1)
    layers = [_layer_from_dict(d, i, config_text) for i, d in enumerate(data["layers"])]
    if not layers:
        raise DnnConfigError("DNN has no layers", line=_line_of_key(config_text, "layers"))
    names = [layer.name for layer in layers]
    for x in names:
        if names.count(x) > 1:
            raise DnnConfigError("duplicate layer name", x, _line_of(config_text, x))
    edge_set = {(i, i + 1) for i in range(len(layers) - 1)}
    for e in data.get("edges", []):
        if not (isinstance(e, (list, tuple)) and len(e) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            raise DnnConfigError(f"edge {e!r} must be a pair of layer indices",
                                 line=_line_of_key(config_text, "edges"))
        edge_set.add((e[0], e[1]))
    return _validated(data.get("name", "dnn"), layers, edge_set, config_text)


def load_dnn(path) -> DnnGraph:
    """Load a DNN config from a file path or a bundled config name."""
    p = Path(path)
    if not p.exists() and str(path).removesuffix(".json") in BUNDLED:
        return load_bundled(str(path).removesuffix(".json"))
    return parse_dnn_config(p.read_text())


def load_bundled(name: str) -> DnnGraph:
    text = resources.files("imcsim.configs").joinpath(f"{name}.json").read_text()
    return parse_dnn_config(text)


def neurons_per_layer(g: DnnGraph, i: int) -> int:
    """Output feature maps of a conv layer, output units of an fc layer."""
    layer = g.layers[i]
    return layer.out_channels if layer.weighted else 0


def total_neurons(g: DnnGraph) -> int:
    return sum(neurons_per_layer(g, i) for i in range(g.n_layers))


def connections_into(g: DnnGraph, i: int) -> int:
    # The first layer is fed by the network input, which counts as one connection.
    return max(1, len(g.predecessors(i)))


def connection_density(g: DnnGraph) -> float:
    """Average number of incoming connections per neuron.

    Every incoming edge of a layer gives one connection to each of its
    neurons, so a purely linear chain has density exactly 1.
    """
    mu = total_neurons(g)
    if mu == 0:
        raise ValueError(f"DNN {g.name!r} has no neurons")
    conns = sum(neurons_per_layer(g, i) * connections_into(g, i) for i in range(g.n_layers))
    return conns / mu


def activations(g: DnnGraph, i: int) -> int:
    """Input activation volume x*y*C of layer ``i``."""
    layer = g.layers[i]
    return layer.in_x * layer.in_y * layer.in_channels


def edge_activations(g: DnnGraph, src: int, dst: int) -> int:
    """Activations layer ``src`` contributes to the input of layer ``dst``."""
    s, d = g.layers[src], g.layers[dst]
    return d.in_x * d.in_y * s.out_channels
