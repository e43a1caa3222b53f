"""Convert named graph-learning operations into the uniform layer forms.

Support matrix (operation x graph mode):

    linear               fixed: yes   non-fixed: yes
    gcn_conv             fixed: yes   non-fixed: no (degree terms go nonlinear)
    sage_conv_sum        fixed: yes   non-fixed: yes
    mean_aggregation     fixed: yes   non-fixed: no (divides by a variable count)
    sum_aggregation      fixed: yes   non-fixed: yes
    global_mean_pool     fixed: yes   non-fixed: yes
    global_add_pool      fixed: yes   non-fixed: yes

Unsupported pairs raise UnsupportedOperationError; nothing is silently
mis-encoded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError
from .gnn import Activation, DenseLayer, GnnLayer, GraphMode, check_adjacency


class OpKind(enum.Enum):
    LINEAR = "linear"
    GCN_CONV = "gcn_conv"
    SAGE_CONV_SUM = "sage_conv_sum"
    MEAN_AGGREGATION = "mean_aggregation"
    SUM_AGGREGATION = "sum_aggregation"
    GLOBAL_MEAN_POOL = "global_mean_pool"
    GLOBAL_ADD_POOL = "global_add_pool"


@dataclass(frozen=True)
class OpSpec:
    """One named operation plus its parameters.

    Weight conventions: matrices are (out_features, in_features) applied as
    w @ x. ``weight``/``bias`` serve linear and gcn_conv; ``weight_self`` /
    ``weight_neighbor`` serve the sage/aggregation forms.
    """

    kind: OpKind
    graph_mode: GraphMode = GraphMode.NON_FIXED
    adjacency: np.ndarray | None = None  # required iff graph_mode=FIXED
    weight: np.ndarray | None = None
    weight_self: np.ndarray | None = None
    weight_neighbor: np.ndarray | None = None
    bias: np.ndarray | None = None
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.graph_mode is GraphMode.FIXED:
            if self.adjacency is None:
                raise ValueError("fixed graph mode requires an adjacency matrix")
            check_adjacency(self.adjacency, self.adjacency.shape[0])
        elif self.adjacency is not None:
            raise ValueError("adjacency only makes sense with fixed graph mode")


def _unsupported(spec: OpSpec, why: str) -> UnsupportedOperationError:
    return UnsupportedOperationError(
        f"{spec.kind.value} with {spec.graph_mode.value} graph is not "
        f"supported: {why}"
    )


def _bias_or_zero(bias: np.ndarray | None, out_features: int) -> np.ndarray:
    if bias is None:
        return np.zeros(out_features)
    bias = np.asarray(bias, dtype=float)
    if bias.shape != (out_features,):
        raise ValueError(f"bias shape {bias.shape} != ({out_features},)")
    return bias


def transform_linear(spec: OpSpec, n_nodes: int) -> DenseLayer:
    """Per-node affine map -> block-diagonal dense layer (N copies of w)."""
    if spec.kind is not OpKind.LINEAR:
        raise ValueError(f"expected linear, got {spec.kind.value}")
    w = np.asarray(spec.weight, dtype=float)
    if w.ndim != 2:
        raise ValueError("linear weight must be a matrix")
    d_out, d_in = w.shape
    b = _bias_or_zero(spec.bias, d_out)
    big_w = np.zeros((n_nodes * d_out, n_nodes * d_in))
    for v in range(n_nodes):
        big_w[v * d_out : (v + 1) * d_out, v * d_in : (v + 1) * d_in] = w
    return DenseLayer(weight=big_w, bias=np.tile(b, n_nodes), activation=spec.activation)


def transform_gcn_fixed(spec: OpSpec) -> GnnLayer:
    """Degree-normalized convolution on a fixed graph.

    Pair weights are (A[u,v] / sqrt(dhat_u dhat_v)) * w with
    dhat_v = 1 + (number of neighbors of v); the self pair always carries
    w / dhat_v, i.e. the self-loop is part of the operation regardless of the
    stored diagonal, so the stored adjacency gets its diagonal forced to 1.
    """
    if spec.kind is not OpKind.GCN_CONV:
        raise ValueError(f"expected gcn_conv, got {spec.kind.value}")
    if spec.graph_mode is not GraphMode.FIXED:
        raise _unsupported(
            spec,
            "the 1/sqrt(dhat_u dhat_v) normalization depends on the adjacency "
            "variables, which makes the encoding nonlinear",
        )
    A = np.asarray(spec.adjacency, dtype=float)
    n = A.shape[0]
    w = np.asarray(spec.weight, dtype=float)
    d_out, d_in = w.shape
    b = _bias_or_zero(spec.bias, d_out)
    off_diag = A.copy()
    np.fill_diagonal(off_diag, 0.0)
    dhat = 1.0 + off_diag.sum(axis=0)
    weights = np.zeros((n, n, d_out, d_in))
    for u in range(n):
        for v in range(n):
            if u == v:
                weights[v, v] = w / dhat[v]
            elif A[u, v] == 1:
                weights[u, v] = w / np.sqrt(dhat[u] * dhat[v])
    stored = A.copy()
    np.fill_diagonal(stored, 1.0)
    return GnnLayer(
        n_nodes=n,
        in_features=d_in,
        out_features=d_out,
        weights=weights,
        biases=np.tile(b, (n, 1)),
        activation=spec.activation,
        graph_mode=GraphMode.FIXED,
        adjacency=stored,
    )


def transform_sage(spec: OpSpec, n_nodes: int, in_features: int | None = None) -> GnnLayer:
    """Self/neighbor weighted layers: sage_conv_sum, sum/mean aggregation.

    sage_conv_sum   out_v = w1 x_v + w2 * sum_{u in N(v)} x_u + b
    The weightless aggregation kinds delegate to transform_aggregation and
    need ``in_features``; mean aggregation is rejected on non-fixed graphs.
    """
    if spec.kind in (OpKind.SUM_AGGREGATION, OpKind.MEAN_AGGREGATION):
        if in_features is None:
            raise ValueError("aggregation kinds need in_features")
        return transform_aggregation(spec, n_nodes, in_features)
    if spec.kind is not OpKind.SAGE_CONV_SUM:
        raise ValueError(f"expected a sage/aggregation kind, got {spec.kind.value}")
    w1 = np.asarray(spec.weight_self, dtype=float)
    w2 = np.asarray(spec.weight_neighbor, dtype=float)
    if w1.shape != w2.shape:
        raise ValueError(f"self/neighbor weight shapes differ: {w1.shape} vs {w2.shape}")
    d_out, d_in = w1.shape
    b = _bias_or_zero(spec.bias, d_out)

    n = n_nodes
    weights = np.empty((n, n, d_out, d_in))
    weights[:] = w2
    for v in range(n):
        weights[v, v] = w1
    if spec.graph_mode is GraphMode.FIXED:
        return GnnLayer(
            n_nodes=n,
            in_features=d_in,
            out_features=d_out,
            weights=weights,
            biases=np.tile(b, (n, 1)),
            activation=spec.activation,
            graph_mode=GraphMode.FIXED,
            adjacency=np.asarray(spec.adjacency, dtype=float),
        )
    return GnnLayer(
        n_nodes=n,
        in_features=d_in,
        out_features=d_out,
        weights=weights,
        biases=np.tile(b, (n, 1)),
        activation=spec.activation,
        graph_mode=GraphMode.NON_FIXED,
    )


def transform_aggregation(spec: OpSpec, n_nodes: int, in_features: int) -> GnnLayer:
    """Neighbor-only sum or mean: out_v = agg_{u in N(v), u != v} x_u."""
    if spec.kind not in (OpKind.SUM_AGGREGATION, OpKind.MEAN_AGGREGATION):
        raise ValueError(f"expected an aggregation kind, got {spec.kind.value}")
    if spec.kind is OpKind.MEAN_AGGREGATION and spec.graph_mode is not GraphMode.FIXED:
        raise _unsupported(
            spec, "the neighbor count is a decision variable, so the mean is nonlinear"
        )
    n, d = n_nodes, in_features
    eye = np.eye(d)
    weights = np.zeros((n, n, d, d))
    if spec.kind is OpKind.SUM_AGGREGATION:
        for u in range(n):
            for v in range(n):
                if u != v:
                    weights[u, v] = eye
    else:
        A = np.asarray(spec.adjacency, dtype=float)
        off_diag = A.copy()
        np.fill_diagonal(off_diag, 0.0)
        counts = off_diag.sum(axis=0)
        for v in range(n):
            if counts[v] == 0:
                continue  # no neighbors: empty mean defined as zero
            for u in range(n):
                if u != v and A[u, v] == 1:
                    weights[u, v] = eye / counts[v]
    if spec.graph_mode is GraphMode.FIXED:
        kwargs = {"graph_mode": GraphMode.FIXED, "adjacency": np.asarray(spec.adjacency, dtype=float)}
    else:
        kwargs = {"graph_mode": GraphMode.NON_FIXED}
    return GnnLayer(
        n_nodes=n,
        in_features=d,
        out_features=d,
        weights=weights,
        biases=np.zeros((n, d)),
        activation=spec.activation,
        **kwargs,
    )


def transform_pool(spec: OpSpec, n_nodes: int, features: int) -> DenseLayer:
    """Global mean/add readout as an F x (N*F) striped dense layer."""
    if spec.kind not in (OpKind.GLOBAL_MEAN_POOL, OpKind.GLOBAL_ADD_POOL):
        raise ValueError(f"expected a pooling kind, got {spec.kind.value}")
    coef = 1.0 / n_nodes if spec.kind is OpKind.GLOBAL_MEAN_POOL else 1.0
    w = np.zeros((features, n_nodes * features))
    for v in range(n_nodes):
        for f in range(features):
            w[f, v * features + f] = coef
    return DenseLayer(weight=w, bias=np.zeros(features), activation=spec.activation)
