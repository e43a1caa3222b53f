"""Solver-neutral MIP container and the big-M encoding of networks.

Variable names follow a fixed scheme so solutions decode by name alone:

    X[v,f]        input features (layer 0)
    A[u,v]        shared adjacency binaries, canonical key u <= v
    DB[u,v] TB[u,v]  bond binaries added by the camd module, u < v
    x[l,v,f]      layer outputs (flat layers use v = 0)
    out[i]        outputs of the final layer
    pre[l,v,f]    pre-activation value feeding a ReLU
    s[l,v,f]      ReLU indicator binary
    z[l,u,v,f]    gated contribution of node u to node v in layer l

Constraint rows carry names too (zxl/zxu/zal/zau for the four big-M rows,
aff for affine equalities, rlb/rub/rcap for ReLU rows); the camd module
names its rows after the constraint family they implement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    Fixing,
    IntervalBox,
    LayerBounds,
    adjacency_to_fixing,
    input_boxes_binary,
    propagate,
)
from .gnn import Activation, DenseLayer, GnnLayer, GnnNetwork, GraphMode


class VarType(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass
class Variable:
    name: str
    lower: float
    upper: float
    kind: VarType = VarType.CONTINUOUS


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]  # variable index -> coefficient
    sense: Sense
    rhs: float


@dataclass
class Objective:
    sense: str = "min"  # "min" | "max"
    coeffs: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0


class MipModel:
    """Variables, linear constraints and one objective; single writer."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = Objective()
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    # -- building ------------------------------------------------------

    def add_variable(
        self,
        name: str,
        lower: float,
        upper: float,
        kind: VarType = VarType.CONTINUOUS,
    ) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise ValueError(f"{name}: lower bound {lower} > upper bound {upper}")
        if kind is VarType.BINARY and (lower < 0 or upper > 1):
            raise ValueError(f"{name}: binary bounds must stay within [0, 1]")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper), kind))
        self._var_index[name] = idx
        return idx

    def add_constraint(
        self, name: str, coeffs: dict[int, float], sense: Sense, rhs: float
    ) -> int:
        if name in self._row_index:
            raise ValueError(f"duplicate constraint name {name!r}")
        for var in coeffs:
            if not 0 <= var < len(self.variables):
                raise ValueError(f"{name}: unknown variable index {var}")
        clean = {v: float(c) for v, c in coeffs.items() if c != 0.0}
        idx = len(self.constraints)
        self.constraints.append(Constraint(name, clean, sense, float(rhs)))
        self._row_index[name] = idx
        return idx

    def set_objective(self, sense: str, coeffs: dict[int, float], constant: float = 0.0):
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be min or max, got {sense!r}")
        self.objective = Objective(sense, dict(coeffs), float(constant))

    # -- lookups ---------------------------------------------------------

    def var_index(self, name: str) -> int:
        return self._var_index[name]

    def has_variable(self, name: str) -> bool:
        return name in self._var_index

    @property
    def n_binary(self) -> int:
        return sum(1 for v in self.variables if v.kind is VarType.BINARY)

    @property
    def n_continuous(self) -> int:
        return len(self.variables) - self.n_binary

    # -- evaluation ------------------------------------------------------

    def objective_value(self, values: np.ndarray) -> float:
        total = self.objective.constant
        for var, coef in self.objective.coeffs.items():
            total += coef * values[var]
        return total

    def violations(self, values: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of rows and bounds the point violates beyond tol."""
        bad = []
        for i, var in enumerate(self.variables):
            if values[i] < var.lower - tol or values[i] > var.upper + tol:
                bad.append(f"bound:{var.name}")
        for con in self.constraints:
            lhs = sum(coef * values[var] for var, coef in con.coeffs.items())
            if con.sense is Sense.LE and lhs > con.rhs + tol:
                bad.append(con.name)
            elif con.sense is Sense.GE and lhs < con.rhs - tol:
                bad.append(con.name)
            elif con.sense is Sense.EQ and abs(lhs - con.rhs) > tol:
                bad.append(con.name)
        return bad


@dataclass
class VariableMap:
    """Where every symbol of the encoding lives in the MipModel.

    Adjacency keys are canonical (min(u,v), max(u,v)): both orders map to
    the same variable. ``fixing`` records the design-level adjacency status
    so constraint generators can substitute fixed entries as constants.
    """

    n_nodes: int
    n_features: int
    fixing: np.ndarray
    x_vars: dict[tuple[int, int, int], int] = field(default_factory=dict)
    z_vars: dict[tuple[int, int, int, int], int] = field(default_factory=dict)
    a_vars: dict[tuple[int, int], int] = field(default_factory=dict)
    pre_vars: dict[tuple[int, int, int], int] = field(default_factory=dict)
    sigma_vars: dict[tuple[int, int, int], int] = field(default_factory=dict)
    db_vars: dict[tuple[int, int], int] = field(default_factory=dict)
    tb_vars: dict[tuple[int, int], int] = field(default_factory=dict)

    def adjacency_status(self, u: int, v: int) -> Fixing:
        return Fixing(int(self.fixing[u, v]))

    def a_var(self, u: int, v: int) -> int:
        return self.a_vars[(min(u, v), max(u, v))]

    def a_term(self, u: int, v: int) -> tuple[int | None, float]:
        """(variable index, constant): one of the two, for entry (u, v)."""
        status = self.adjacency_status(u, v)
        if status == Fixing.FREE:
            return self.a_var(u, v), 0.0
        return None, float(status == Fixing.FIXED1)


class _LayerEncoder:
    """Shared machinery for encoding one network layer by layer."""

    def __init__(self, model: MipModel, vmap: VariableMap, all_bounds: list[LayerBounds]):
        self.model = model
        self.vmap = vmap
        self.all_bounds = all_bounds

    def output_var(self, l: int, v: int, f: int, lo: float, hi: float, name: str | None):
        var_name = name if name is not None else f"x[{l},{v},{f}]"
        idx = self.model.add_variable(var_name, lo, hi, VarType.CONTINUOUS)
        self.vmap.x_vars[(l, v, f)] = idx
        return idx

    def encode_activation(
        self, l: int, v: int, f: int, activation: Activation,
        pre_box: IntervalBox, post_box: IntervalBox, out_name: str | None,
        affine: dict[int, float], rhs: float,
    ):
        """Attach the affine row and, for ReLU, the indicator rows."""
        model = self.model
        if activation is Activation.IDENTITY:
            out = self.output_var(l, v, f, post_box.lower[f], post_box.upper[f], out_name)
            affine[out] = affine.get(out, 0.0) + 1.0
            model.add_constraint(f"aff[{l},{v},{f}]", affine, Sense.EQ, rhs)
            return
        lo, hi = float(pre_box.lower[f]), float(pre_box.upper[f])
        pre = model.add_variable(f"pre[{l},{v},{f}]", lo, hi)
        self.vmap.pre_vars[(l, v, f)] = pre
        affine[pre] = affine.get(pre, 0.0) + 1.0
        model.add_constraint(f"aff[{l},{v},{f}]", affine, Sense.EQ, rhs)
        out = self.output_var(l, v, f, post_box.lower[f], post_box.upper[f], out_name)
        tag = f"r[{l},{v},{f}]"
        if hi <= 0.0:
            return  # stably inactive: post bounds are already [0, 0]
        if lo >= 0.0:
            model.add_constraint(f"{tag}fix", {out: 1.0, pre: -1.0}, Sense.EQ, 0.0)
            return
        sigma = model.add_variable(f"s[{l},{v},{f}]", 0.0, 1.0, VarType.BINARY)
        self.vmap.sigma_vars[(l, v, f)] = sigma
        encode_relu_rows(model, pre, out, sigma, lo, hi, tag)


def encode_relu_rows(
    model: MipModel, pre: int, post: int, sigma: int, lo: float, hi: float, tag: str
):
    """Big-M rows tying post = max(0, pre) through the indicator sigma.

    post >= 0 is carried by the post variable's lower bound.
    """
    model.add_constraint(f"{tag}lb", {post: 1.0, pre: -1.0}, Sense.GE, 0.0)
    model.add_constraint(
        f"{tag}ub", {post: 1.0, pre: -1.0, sigma: -lo}, Sense.LE, -lo
    )
    model.add_constraint(f"{tag}cap", {post: 1.0, sigma: -hi}, Sense.LE, 0.0)


def encode_relu(
    model: MipModel, pre: int, post: int, pre_lo: float, pre_hi: float, tag: str
) -> int | None:
    """Standalone ReLU encoding between two existing variables.

    Returns the indicator index, or None when the unit is bound-stable.
    """
    if pre_hi <= 0.0:
        model.add_constraint(f"{tag}fix", {post: 1.0}, Sense.EQ, 0.0)
        return None
    if pre_lo >= 0.0:
        model.add_constraint(f"{tag}fix", {post: 1.0, pre: -1.0}, Sense.EQ, 0.0)
        return None
    sigma = model.add_variable(f"{tag}ind", 0.0, 1.0, VarType.BINARY)
    encode_relu_rows(model, pre, post, sigma, pre_lo, pre_hi, tag)
    return sigma


def _encode_gnn_layer(
    enc: _LayerEncoder, l: int, layer: GnnLayer, out_names: list[str] | None
):
    model, vmap = enc.model, enc.vmap
    n, d_in, d_out = layer.n_nodes, layer.in_features, layer.out_features
    prev_post = enc.all_bounds[l - 1].post
    here = enc.all_bounds[l]
    if layer.graph_mode is GraphMode.FIXED:
        fixing = adjacency_to_fixing(layer.adjacency)
    else:
        fixing = vmap.fixing

    # first pass: z variables and their big-M rows per (u, v, input feature)
    z_of: dict[tuple[int, int, int], tuple[int | None, float]] = {}
    for v in range(n):
        for u in range(n):
            status = Fixing(int(fixing[u, v]))
            for f in range(d_in):
                x_prev = vmap.x_vars[(l - 1, u, f)]
                if status == Fixing.FIXED0:
                    z_of[(u, v, f)] = (None, 0.0)
                    continue
                if status == Fixing.FIXED1:
                    z_of[(u, v, f)] = (x_prev, 1.0)
                    continue
                lo_u, hi_u = prev_post[u].lower[f], prev_post[u].upper[f]
                z = model.add_variable(
                    f"z[{l},{u},{v},{f}]", min(0.0, lo_u), max(0.0, hi_u)
                )
                vmap.z_vars[(l, u, v, f)] = z
                z_of[(u, v, f)] = (z, 1.0)
                a = vmap.a_var(u, v)
                tag = f"[{l},{u},{v},{f}]"
                model.add_constraint(
                    f"zxl{tag}", {x_prev: 1.0, z: -1.0, a: hi_u}, Sense.LE, hi_u
                )
                model.add_constraint(
                    f"zxu{tag}", {z: 1.0, x_prev: -1.0, a: -lo_u}, Sense.LE, -lo_u
                )
                model.add_constraint(f"zal{tag}", {z: 1.0, a: -lo_u}, Sense.GE, 0.0)
                model.add_constraint(f"zau{tag}", {z: 1.0, a: -hi_u}, Sense.LE, 0.0)

    # second pass: affine rows per (node, output feature) plus activation
    for v in range(n):
        for o in range(d_out):
            affine: dict[int, float] = {}
            for u in range(n):
                for f in range(d_in):
                    w = layer.weights[u, v, o, f]
                    if w == 0.0:
                        continue
                    var, scale = z_of[(u, v, f)]
                    if var is None:
                        continue
                    affine[var] = affine.get(var, 0.0) - w * scale
            name = out_names[v * d_out + o] if out_names else None
            enc.encode_activation(
                l, v, o, layer.activation, here.pre[v], here.post[v], name,
                affine, float(layer.biases[v, o]),
            )


def _encode_dense_layer(
    enc: _LayerEncoder, l: int, layer: DenseLayer,
    prev_flat: list[int], out_names: list[str] | None,
):
    here = enc.all_bounds[l]
    for o in range(layer.output_size):
        affine: dict[int, float] = {}
        for j, var in enumerate(prev_flat):
            w = layer.weight[o, j]
            if w != 0.0:
                affine[var] = affine.get(var, 0.0) - w
        name = out_names[o] if out_names else None
        enc.encode_activation(
            l, 0, o, layer.activation, here.pre[0], here.post[0], name,
            affine, float(layer.bias[o]),
        )


def encode_network(
    net: GnnNetwork,
    fixing: np.ndarray,
    input_integrality: VarType = VarType.BINARY,
    input_bounds: list[IntervalBox] | None = None,
    name: str = "gnn",
) -> tuple[MipModel, VariableMap]:
    """Encode the whole network over the given adjacency fixing.

    Creates shared adjacency binaries for free entries, input variables
    X[v,f], all layer encodings, and names the final layer's outputs out[i].
    Only identity/ReLU activations are supported.
    """
    for i, layer in enumerate(net.layers):
        if layer.activation not in (Activation.IDENTITY, Activation.RELU):
            raise ValueError(
                f"layer {i}: activation {layer.activation} has no exact linear"
                " encoding; only identity and relu are supported"
            )
    fixing = np.asarray(fixing)
    if input_bounds is None:
        input_bounds = input_boxes_binary(net.n_nodes, net.input_features)
    all_bounds = propagate(net, input_bounds, fixing)

    model = MipModel(name)
    vmap = VariableMap(net.n_nodes, net.input_features, fixing)

    for u in range(net.n_nodes):
        for v in range(u, net.n_nodes):
            if Fixing(int(fixing[u, v])) == Fixing.FREE:
                vmap.a_vars[(u, v)] = model.add_variable(
                    f"A[{u},{v}]", 0.0, 1.0, VarType.BINARY
                )
    for v in range(net.n_nodes):
        box = input_bounds[v]
        for f in range(net.input_features):
            vmap.x_vars[(0, v, f)] = model.add_variable(
                f"X[{v},{f}]", box.lower[f], box.upper[f], input_integrality
            )

    enc = _LayerEncoder(model, vmap, all_bounds)
    n_layers = len(net.layers)
    flat_inputs: list[int] | None = None
    for i, layer in enumerate(net.layers):
        l = i + 1
        out_names = None
        if i == n_layers - 1:
            out_names = [f"out[{k}]" for k in range(layer.output_size)]
        if isinstance(layer, GnnLayer):
            _encode_gnn_layer(enc, l, layer, out_names)
        else:
            if flat_inputs is None:
                prev = net.layers[i - 1] if i else None
                if prev is None or isinstance(prev, GnnLayer):
                    d_prev = (
                        net.input_features if prev is None else prev.out_features
                    )
                    flat_inputs = [
                        vmap.x_vars[(l - 1, v, f)]
                        for v in range(net.n_nodes)
                        for f in range(d_prev)
                    ]
            _encode_dense_layer(enc, l, layer, flat_inputs, out_names)
            flat_inputs = [
                vmap.x_vars[(l, 0, f)] for f in range(layer.output_size)
            ]
    return model, vmap


def set_objective_logit_margin(model: MipModel, vmap: VariableMap) -> None:
    """Maximize out[1] - out[0]; requires a two-logit network."""
    if not model.has_variable("out[1]") or model.has_variable("out[2]"):
        raise ValueError("logit-margin objective needs exactly two outputs")
    model.set_objective(
        "max", {model.var_index("out[1]"): 1.0, model.var_index("out[0]"): -1.0}
    )


def fix_variables(model: MipModel, values: dict[str, float], tol: float = 1e-9) -> None:
    """Pin the named variables by collapsing their bounds in place."""
    for name, value in values.items():
        var = model.variables[model.var_index(name)]
        if value < var.lower - tol or value > var.upper + tol:
            raise ValueError(f"{name}: value {value} outside bounds [{var.lower}, {var.upper}]")
        var.lower = var.upper = float(value)
