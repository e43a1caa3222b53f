"""Uniform message-passing network representation and exact forward evaluation.

Every supported network is a chain of two layer kinds:

* ``GnnLayer`` -- node-indexed: out_v = act(sum_u w[u->v] @ z[u->v] + b_v)
  where z[u->v] = A[u,v] * x_u and A is a binary adjacency matrix whose
  diagonal entry A[v,v] gates node v's own contribution (node existence).
* ``DenseLayer`` -- flat affine map on the node-major stacked feature vector.

``forward`` is the ground-truth oracle the MIP encoding is checked against,
so reductions are written with a fixed accumulation order (elementwise
multiply + np.sum) that the interval propagation in ``bounds`` mirrors
exactly; do not replace them with BLAS matvecs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError


class Activation(enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self is Activation.RELU:
            return np.maximum(0.0, values)
        return values


class GraphMode(enum.Enum):
    FIXED = "fixed"
    NON_FIXED = "non_fixed"


@dataclass(frozen=True)
class GnnLayer:
    """One node-indexed layer in uniform per-pair weight form.

    weights[u, v] is the (out x in) block applied to node u's features when
    they feed node v; biases[v] is node v's (out,) bias.
    """

    n_nodes: int
    in_features: int
    out_features: int
    weights: np.ndarray  # (N, N, out, in)
    biases: np.ndarray  # (N, out)
    activation: Activation = Activation.IDENTITY
    graph_mode: GraphMode = GraphMode.NON_FIXED
    adjacency: np.ndarray | None = None  # (N, N) binary, required iff FIXED

    def __post_init__(self):
        if self.n_nodes < 1 or self.in_features < 1 or self.out_features < 1:
            raise ValueError("layer sizes must be positive")
        expect = (self.n_nodes, self.n_nodes, self.out_features, self.in_features)
        if self.weights.shape != expect:
            raise ValueError(
                f"weight grid shape {self.weights.shape} != expected {expect}"
            )
        if self.biases.shape != (self.n_nodes, self.out_features):
            raise ValueError(
                f"bias shape {self.biases.shape} != expected "
                f"{(self.n_nodes, self.out_features)}"
            )
        if self.graph_mode is GraphMode.FIXED:
            if self.adjacency is None:
                raise ValueError("fixed-graph layer requires an adjacency matrix")
            check_adjacency(self.adjacency, self.n_nodes)
        elif self.adjacency is not None:
            raise ValueError("non-fixed-graph layer must not carry an adjacency")

    @property
    def input_size(self) -> int:
        return self.n_nodes * self.in_features

    @property
    def output_size(self) -> int:
        return self.n_nodes * self.out_features


@dataclass(frozen=True)
class DenseLayer:
    """Flat affine layer: out = act(weight @ x + bias)."""

    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ValueError("dense weight must be a matrix")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"bias length {self.bias.shape} != output size {self.weight.shape[0]}"
            )

    @property
    def input_size(self) -> int:
        return self.weight.shape[1]

    @property
    def output_size(self) -> int:
        return self.weight.shape[0]


Layer = GnnLayer | DenseLayer


@dataclass(frozen=True)
class GnnNetwork:
    """Ordered layer chain; immutable after construction."""

    layers: tuple[Layer, ...]
    n_nodes: int
    input_features: int

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        size = self.n_nodes * self.input_features
        seen_flat = False
        for i, layer in enumerate(self.layers):
            if isinstance(layer, GnnLayer):
                if seen_flat:
                    raise ValueError(
                        f"layer {i}: node-indexed layer after the pooling boundary"
                    )
                if layer.n_nodes != self.n_nodes:
                    raise ValueError(f"layer {i}: node count {layer.n_nodes} != {self.n_nodes}")
            else:
                seen_flat = True
            if layer.input_size != size:
                raise ValueError(
                    f"layer {i}: input size {layer.input_size} does not chain "
                    f"with previous output size {size}"
                )
            size = layer.output_size

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_size


@dataclass(frozen=True)
class NodeFeatureAssignment:
    """Input point: per-node features X (N x d0) and adjacency A (N x N)."""

    X: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2:
            raise ValueError("X must be N x d0")
        check_adjacency(self.A, self.X.shape[0])


def check_adjacency(A: np.ndarray, n_nodes: int) -> None:
    if A.shape != (n_nodes, n_nodes):
        raise ValueError(f"adjacency shape {A.shape} != ({n_nodes}, {n_nodes})")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if not np.isin(A, (0, 1)).all():
        raise ValueError("adjacency entries must be 0/1")


def _gnn_layer_forward(layer: GnnLayer, x: np.ndarray, A: np.ndarray) -> np.ndarray:
    n, d_in, d_out = layer.n_nodes, layer.in_features, layer.out_features
    # Gated contributions z[u->v] = A[u,v] * x_u, stacked node-major per v.
    out = np.empty((n, d_out))
    for v in range(n):
        z = (A[:, v, None] * x).reshape(n * d_in)
        w = layer.weights[:, v].transpose(1, 0, 2).reshape(d_out, n * d_in)
        out[v] = np.sum(w * z[None, :], axis=1) + layer.biases[v]
    return layer.activation.apply(out)


def _dense_layer_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    pre = np.sum(layer.weight * x[None, :], axis=1) + layer.bias
    return layer.activation.apply(pre)


def forward(net: GnnNetwork, assign: NodeFeatureAssignment) -> np.ndarray:
    """Evaluate the network exactly, layer by layer.

    Returns the flat output vector. Raises ValueError on dimension mismatch
    or when a fixed-graph layer disagrees with the assignment's adjacency.
    """
    if assign.X.shape != (net.n_nodes, net.input_features):
        raise ValueError(
            f"input shape {assign.X.shape} != "
            f"({net.n_nodes}, {net.input_features})"
        )
    x = np.asarray(assign.X, dtype=float)
    flat: np.ndarray | None = None
    for i, layer in enumerate(net.layers):
        if isinstance(layer, GnnLayer):
            if layer.graph_mode is GraphMode.FIXED and not np.array_equal(
                assign.A, layer.adjacency
            ):
                raise ValueError(
                    f"layer {i}: assignment adjacency conflicts with the "
                    "layer's fixed graph"
                )
            x = _gnn_layer_forward(layer, x, np.asarray(assign.A, dtype=float))
        else:
            if flat is None:
                flat = x.reshape(-1)
            flat = _dense_layer_forward(layer, flat)
    return x.reshape(-1) if flat is None else flat


# -- weight-file document ----------------------------------------------------

_ACT_NAMES = {a.value: a for a in Activation}
_MODE_NAMES = {m.value: m for m in GraphMode}


def _layer_to_doc(layer: Layer) -> dict:
    if isinstance(layer, GnnLayer):
        doc = {
            "kind": "gnn",
            "activation": layer.activation.value,
            "in_features": layer.in_features,
            "out_features": layer.out_features,
            "weights": layer.weights.tolist(),
            "biases": layer.biases.tolist(),
            "graph_mode": layer.graph_mode.value,
        }
        if layer.adjacency is not None:
            doc["adjacency"] = layer.adjacency.astype(int).tolist()
        return doc
    return {
        "kind": "dense",
        "activation": layer.activation.value,
        "in_features": layer.input_size,
        "out_features": layer.output_size,
        "weights": layer.weight.tolist(),
        "biases": layer.bias.tolist(),
    }


def save_network(net: GnnNetwork, path) -> None:
    doc = {
        "n_nodes": net.n_nodes,
        "input_features": net.input_features,
        "layers": [_layer_to_doc(layer) for layer in net.layers],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _layer_from_doc(doc: dict, index: int, n_nodes: int) -> Layer:
    def fail(msg: str):
        raise SchemaError(f"layer {index}: {msg}")

    kind = doc.get("kind")
    act = _ACT_NAMES.get(doc.get("activation", "identity"))
    if act is None:
        fail(f"unknown activation {doc.get('activation')!r}")
    try:
        weights = np.asarray(doc["weights"], dtype=float)
        biases = np.asarray(doc["biases"], dtype=float)
    except (KeyError, ValueError) as exc:
        fail(f"bad weights/biases: {exc}")
    if kind == "gnn":
        mode = _MODE_NAMES.get(doc.get("graph_mode", "non_fixed"))
        if mode is None:
            fail(f"unknown graph_mode {doc.get('graph_mode')!r}")
        adjacency = None
        if "adjacency" in doc:
            adjacency = np.asarray(doc["adjacency"], dtype=float)
        try:
            return GnnLayer(
                n_nodes=n_nodes,
                in_features=int(doc["in_features"]),
                out_features=int(doc["out_features"]),
                weights=weights,
                biases=biases,
                activation=act,
                graph_mode=mode,
                adjacency=adjacency,
            )
        except (ValueError, KeyError) as exc:
            fail(str(exc))
    elif kind == "dense":
        try:
            return DenseLayer(weight=weights, bias=biases, activation=act)
        except ValueError as exc:
            fail(str(exc))
    else:
        fail(f"unknown kind {kind!r}")


def load_network(path) -> GnnNetwork:
    """Load and validate a network from a weight-file document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    for key in ("n_nodes", "input_features", "layers"):
        if key not in doc:
            raise SchemaError(f"{path}: missing top-level field {key!r}")
    layers = [
        _layer_from_doc(layer_doc, i, int(doc["n_nodes"]))
        for i, layer_doc in enumerate(doc["layers"])
    ]
    try:
        return GnnNetwork(
            layers=tuple(layers),
            n_nodes=int(doc["n_nodes"]),
            input_features=int(doc["input_features"]),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
