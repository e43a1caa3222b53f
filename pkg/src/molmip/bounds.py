"""Interval propagation producing the box bounds the big-M encoding needs.

The per-pair contribution z[u->v] = A[u,v] * x_u gets a three-case box
depending on how the adjacency entry is fixed:

    fixed 0 -> [0, 0]
    fixed 1 -> [L_u, U_u]
    free    -> [min(0, L_u), max(0, U_u)]

Reductions deliberately mirror gnn.forward operation by operation
(elementwise multiply + np.sum over the same stacked arrays), so a forward
value can never escape its box through float rounding: every float op
involved is weakly monotone and both sides accumulate in the same order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .gnn import DenseLayer, GnnLayer, GnnNetwork, GraphMode


class Fixing(enum.IntEnum):
    """Status of one adjacency entry in the design."""

    FIXED0 = 0
    FIXED1 = 1
    FREE = 2


@dataclass(frozen=True)
class IntervalBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise ValueError("bounds must be finite")
        if (self.lower > self.upper).any():
            raise ValueError("lower bound exceeds upper bound")

    def contains(self, values: np.ndarray) -> bool:
        return bool((values >= self.lower).all() and (values <= self.upper).all())


@dataclass(frozen=True)
class LayerBounds:
    """Boxes for one layer: one entry per node, or a single entry once flat.

    ``pre`` holds pre-activation boxes (what ReLU big-M rows need); ``post``
    holds the layer outputs. For the input pseudo-layer only ``post`` is set.
    """

    post: tuple[IntervalBox, ...]
    pre: tuple[IntervalBox, ...] | None = None


def fixing_matrix(n_nodes: int, free: bool = True) -> np.ndarray:
    """Convenience N x N fixing matrix, all FREE or all FIXED1."""
    value = Fixing.FREE if free else Fixing.FIXED1
    return np.full((n_nodes, n_nodes), value, dtype=np.int8)


def adjacency_to_fixing(A: np.ndarray) -> np.ndarray:
    """Fix every entry to the given 0/1 adjacency."""
    return np.where(np.asarray(A) == 1, Fixing.FIXED1, Fixing.FIXED0).astype(np.int8)


def fix_diagonal(fixing: np.ndarray) -> np.ndarray:
    """Exactly-N mode: all nodes exist, diagonal pinned to 1."""
    out = fixing.copy()
    np.fill_diagonal(out, Fixing.FIXED1)
    return out


def contribution_box(x_box: IntervalBox, status: Fixing) -> IntervalBox:
    """Three-case rule for z[u->v] given node u's box."""
    if status == Fixing.FIXED0:
        zero = np.zeros_like(x_box.lower)
        return IntervalBox(zero, zero)
    if status == Fixing.FIXED1:
        return x_box
    return IntervalBox(
        np.minimum(0.0, x_box.lower), np.maximum(0.0, x_box.upper)
    )


def _interval_reduce(w: np.ndarray, lo: np.ndarray, hi: np.ndarray, bias: np.ndarray):
    """Bounds of np.sum(w * z, axis=1) + bias for z in [lo, hi].

    Matches gnn.forward's reduction (same shapes, same np.sum call) so
    containment is exact in floats.
    """
    pick_lo = np.where(w >= 0.0, lo[None, :], hi[None, :])
    pick_hi = np.where(w >= 0.0, hi[None, :], lo[None, :])
    return (
        np.sum(w * pick_lo, axis=1) + bias,
        np.sum(w * pick_hi, axis=1) + bias,
    )


def _gnn_layer_bounds(
    layer: GnnLayer, node_boxes: list[IntervalBox], fixing: np.ndarray
) -> LayerBounds:
    n, d_in, d_out = layer.n_nodes, layer.in_features, layer.out_features
    pre = []
    post = []
    for v in range(n):
        z_lo = np.empty(n * d_in)
        z_hi = np.empty(n * d_in)
        for u in range(n):
            box = contribution_box(node_boxes[u], Fixing(int(fixing[u, v])))
            z_lo[u * d_in : (u + 1) * d_in] = box.lower
            z_hi[u * d_in : (u + 1) * d_in] = box.upper
        w = layer.weights[:, v].transpose(1, 0, 2).reshape(d_out, n * d_in)
        lo, hi = _interval_reduce(w, z_lo, z_hi, layer.biases[v])
        pre.append(IntervalBox(lo, hi))
        post.append(
            IntervalBox(
                layer.activation.apply(lo.copy()), layer.activation.apply(hi.copy())
            )
        )
    return LayerBounds(post=tuple(post), pre=tuple(pre))


def _dense_layer_bounds(layer: DenseLayer, flat_box: IntervalBox) -> LayerBounds:
    lo, hi = _interval_reduce(layer.weight, flat_box.lower, flat_box.upper, layer.bias)
    pre = IntervalBox(lo, hi)
    post = IntervalBox(
        layer.activation.apply(lo.copy()), layer.activation.apply(hi.copy())
    )
    return LayerBounds(post=(post,), pre=(pre,))


def _flatten_boxes(boxes: tuple[IntervalBox, ...]) -> IntervalBox:
    return IntervalBox(
        np.concatenate([b.lower for b in boxes]),
        np.concatenate([b.upper for b in boxes]),
    )


def propagate(
    net: GnnNetwork,
    input_bounds: list[IntervalBox] | tuple[IntervalBox, ...],
    adjacency_fixing: np.ndarray,
) -> list[LayerBounds]:
    """Propagate input boxes through every layer.

    Returns one LayerBounds per layer, preceded by the input pseudo-layer at
    index 0. ``adjacency_fixing`` applies to non-fixed-graph layers; a
    fixed-graph layer uses its stored adjacency (every entry fixed) instead.
    """
    if len(input_bounds) != net.n_nodes:
        raise ValueError(f"need {net.n_nodes} input boxes, got {len(input_bounds)}")
    for box in input_bounds:
        if box.lower.shape != (net.input_features,):
            raise ValueError("input box has the wrong number of features")
    fixing = np.asarray(adjacency_fixing)
    if fixing.shape != (net.n_nodes, net.n_nodes):
        raise ValueError("fixing matrix shape mismatch")
    if not np.array_equal(fixing, fixing.T):
        raise ValueError("fixing matrix must be symmetric")

    out: list[LayerBounds] = [LayerBounds(post=tuple(input_bounds))]
    node_boxes = list(input_bounds)
    flat_box: IntervalBox | None = None
    for layer in net.layers:
        if isinstance(layer, GnnLayer):
            layer_fixing = (
                adjacency_to_fixing(layer.adjacency)
                if layer.graph_mode is GraphMode.FIXED
                else fixing
            )
            lb = _gnn_layer_bounds(layer, node_boxes, layer_fixing)
            node_boxes = list(lb.post)
        else:
            if flat_box is None:
                flat_box = _flatten_boxes(tuple(node_boxes))
            lb = _dense_layer_bounds(layer, flat_box)
            flat_box = lb.post[0]
        out.append(lb)
    return out


def input_boxes_binary(n_nodes: int, n_features: int) -> list[IntervalBox]:
    """[0,1] boxes for binary node features."""
    return [
        IntervalBox(np.zeros(n_features), np.ones(n_features)) for _ in range(n_nodes)
    ]
