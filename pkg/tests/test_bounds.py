import numpy as np
import pytest

from molmip.bounds import (
    Fixing,
    IntervalBox,
    adjacency_to_fixing,
    fix_diagonal,
    fixing_matrix,
    input_boxes_binary,
    propagate,
)
from molmip.gnn import (
    Activation,
    GnnNetwork,
    NodeFeatureAssignment,
    forward,
)
from tests.conftest import make_sage_pool_dense_network
from tests.test_gnn import sage_layer


def random_consistent_assignment(rng, n, d, fixing):
    """Random binary (X, A) respecting the fixing matrix."""
    A = np.zeros((n, n))
    for u in range(n):
        for v in range(u, n):
            status = Fixing(int(fixing[u, v]))
            if status == Fixing.FIXED1:
                bit = 1
            elif status == Fixing.FIXED0:
                bit = 0
            else:
                bit = int(rng.integers(0, 2))
            A[u, v] = A[v, u] = bit
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    return NodeFeatureAssignment(X=X, A=A)


def layer_values(net, assign):
    """Forward values per layer, mirroring propagate's layout."""
    from molmip.gnn import DenseLayer, GnnLayer, _dense_layer_forward, _gnn_layer_forward

    values = [np.asarray(assign.X, dtype=float)]
    x = values[0]
    flat = None
    for layer in net.layers:
        if isinstance(layer, GnnLayer):
            x = _gnn_layer_forward(layer, x, np.asarray(assign.A, dtype=float))
            values.append(x)
        else:
            if flat is None:
                flat = x.reshape(-1)
            flat = _dense_layer_forward(layer, flat)
            values.append(flat)
    return values


def test_zero_weight_layer_gives_bias_box():
    n, d = 3, 2
    b = np.array([0.25, -0.75])
    layer = sage_layer(n, d, d, np.zeros((d, d)), np.zeros((d, d)), b)
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    out = propagate(net, input_boxes_binary(n, d), fixing_matrix(n))
    for box in out[1].post:
        assert np.array_equal(box.lower, b)
        assert np.array_equal(box.upper, b)


def test_identity_layer_keeps_unit_box():
    n, d = 2, 3
    layer = sage_layer(n, d, d, np.eye(d), np.zeros((d, d)), np.zeros(d))
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    fixing = fix_diagonal(fixing_matrix(n))
    out = propagate(net, input_boxes_binary(n, d), fixing)
    for box in out[1].post:
        assert np.array_equal(box.lower, np.zeros(d))
        assert np.array_equal(box.upper, np.ones(d))


def test_two_node_free_adjacency_enumeration():
    # w1 = w2 = 1 on one feature, all adjacency free, inputs in [0, 1]:
    # enumerating the 4 symmetric binary A patterns x corner inputs gives
    # pre-activation range [0, 2].
    n, d = 2, 1
    layer = sage_layer(n, d, d, np.array([[1.0]]), np.array([[1.0]]), np.zeros(1))
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    out = propagate(net, input_boxes_binary(n, d), fixing_matrix(n))
    lo = min(box.lower[0] for box in out[1].pre)
    hi = max(box.upper[0] for box in out[1].pre)

    best_lo, best_hi = np.inf, -np.inf
    for a00 in (0, 1):
        for a11 in (0, 1):
            for a01 in (0, 1):
                A = np.array([[a00, a01], [a01, a11]], dtype=float)
                for x0 in (0.0, 1.0):
                    for x1 in (0.0, 1.0):
                        X = np.array([[x0], [x1]])
                        value = forward(net, NodeFeatureAssignment(X=X, A=A))
                        best_lo = min(best_lo, value.min())
                        best_hi = max(best_hi, value.max())
    assert lo == best_lo == 0.0
    assert hi == best_hi == 2.0


def test_soundness_exact_containment():
    rng = np.random.default_rng(123)
    net = make_sage_pool_dense_network(4, 14, hidden=8, seed=9)
    fixing = fix_diagonal(fixing_matrix(4))
    boxes = propagate(net, input_boxes_binary(4, 14), fixing)
    for _ in range(1000):
        assign = random_consistent_assignment(rng, 4, 14, fixing)
        values = layer_values(net, assign)
        for l, vals in enumerate(values):
            layer_boxes = boxes[l].post
            if vals.ndim == 2:
                for v in range(vals.shape[0]):
                    assert layer_boxes[v].contains(vals[v])
            else:
                assert layer_boxes[0].contains(vals)


def test_monotone_in_input_width():
    net = make_sage_pool_dense_network(3, 4, hidden=4, seed=2)
    fixing = fix_diagonal(fixing_matrix(3))
    tight = propagate(net, input_boxes_binary(3, 4), fixing)
    wide_inputs = [
        IntervalBox(np.full(4, -0.5), np.full(4, 1.5)) for _ in range(3)
    ]
    wide = propagate(net, wide_inputs, fixing)
    for lt, lw in zip(tight, wide):
        for bt, bw in zip(lt.post, lw.post):
            assert (bw.lower <= bt.lower + 1e-12).all()
            assert (bw.upper >= bt.upper - 1e-12).all()


def test_fixing_more_entries_never_widens():
    net = make_sage_pool_dense_network(3, 4, hidden=4, seed=4)
    free = fixing_matrix(3)
    fixed = free.copy()
    fixed[0, 1] = fixed[1, 0] = Fixing.FIXED1
    fixed[0, 2] = fixed[2, 0] = Fixing.FIXED0
    loose = propagate(net, input_boxes_binary(3, 4), free)
    tight = propagate(net, input_boxes_binary(3, 4), fixed)
    for ll, lt in zip(loose, tight):
        for bl, bt in zip(ll.post, lt.post):
            assert (bt.lower >= bl.lower - 1e-12).all()
            assert (bt.upper <= bl.upper + 1e-12).all()


def test_relu_clamps_lower_bound():
    n, d = 2, 1
    layer = sage_layer(
        n, d, d, np.array([[-1.0]]), np.zeros((1, 1)), np.zeros(1), Activation.RELU
    )
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    out = propagate(net, input_boxes_binary(n, d), fix_diagonal(fixing_matrix(n)))
    assert out[1].pre[0].lower[0] == -1.0
    assert out[1].post[0].lower[0] == 0.0


def test_infinite_input_bounds_rejected():
    with pytest.raises(ValueError, match="finite"):
        IntervalBox(np.array([0.0]), np.array([np.inf]))


def test_adjacency_to_fixing_matches_matrix():
    A = np.array([[1, 0], [0, 1]])
    fx = adjacency_to_fixing(A)
    assert fx[0, 0] == Fixing.FIXED1
    assert fx[0, 1] == Fixing.FIXED0
