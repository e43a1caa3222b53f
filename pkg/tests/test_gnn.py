import numpy as np
import pytest

from molmip.errors import SchemaError
from molmip.gnn import (
    Activation,
    DenseLayer,
    GnnLayer,
    GnnNetwork,
    GraphMode,
    NodeFeatureAssignment,
    forward,
    load_network,
    save_network,
)


def sage_layer(n, d_in, d_out, w1, w2, b, activation=Activation.IDENTITY):
    weights = np.empty((n, n, d_out, d_in))
    weights[:] = w2
    for v in range(n):
        weights[v, v] = w1
    return GnnLayer(
        n_nodes=n,
        in_features=d_in,
        out_features=d_out,
        weights=weights,
        biases=np.tile(b, (n, 1)),
        activation=activation,
    )


def nested_loop_forward(net, X, A):
    """Independent oracle: plain Python loops over the layer definition."""
    x = [list(map(float, row)) for row in X]
    flat = None
    for layer in net.layers:
        if isinstance(layer, GnnLayer):
            new = []
            for v in range(layer.n_nodes):
                acc = [float(layer.biases[v][o]) for o in range(layer.out_features)]
                for u in range(layer.n_nodes):
                    if A[u][v] != 1:
                        continue
                    for o in range(layer.out_features):
                        for j in range(layer.in_features):
                            acc[o] += float(layer.weights[u, v, o, j]) * x[u][j]
                if layer.activation is Activation.RELU:
                    acc = [max(0.0, a) for a in acc]
                new.append(acc)
            x = new
        else:
            if flat is None:
                flat = [value for row in x for value in row]
            acc = [float(b) for b in layer.bias]
            for o in range(layer.output_size):
                for j, value in enumerate(flat):
                    acc[o] += float(layer.weight[o, j]) * value
            if layer.activation is Activation.RELU:
                acc = [max(0.0, a) for a in acc]
            flat = acc
    return np.array(flat if flat is not None else [v for row in x for v in row])


def test_zero_weights_return_bias():
    n, d = 3, 2
    b = np.array([0.5, -1.0])
    layer = sage_layer(n, d, d, np.zeros((d, d)), np.zeros((d, d)), b)
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    X = np.ones((n, d))
    A = np.eye(n)
    out = forward(net, NodeFeatureAssignment(X=X, A=A))
    assert np.array_equal(out, np.tile(b, n))


def test_identity_sage_layer_passes_input_through():
    n, d = 4, 3
    layer = sage_layer(n, d, d, np.eye(d), np.zeros((d, d)), np.zeros(d))
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    out = forward(net, NodeFeatureAssignment(X=X, A=np.eye(n)))
    assert np.array_equal(out, X.reshape(-1))


def test_two_layer_network_matches_nested_loop_oracle():
    rng = np.random.default_rng(42)
    n, d0, d1, d2 = 4, 3, 5, 2
    layers = (
        sage_layer(n, d0, d1, rng.normal(size=(d1, d0)), rng.normal(size=(d1, d0)),
                   rng.normal(size=d1), Activation.RELU),
        sage_layer(n, d1, d2, rng.normal(size=(d2, d1)), rng.normal(size=(d2, d1)),
                   rng.normal(size=d2)),
    )
    net = GnnNetwork(layers=layers, n_nodes=n, input_features=d0)
    # path graph 0-1-2-3 with all nodes present
    A = np.eye(n)
    for v in range(n - 1):
        A[v, v + 1] = A[v + 1, v] = 1
    for _ in range(20):
        X = rng.integers(0, 2, size=(n, d0)).astype(float)
        got = forward(net, NodeFeatureAssignment(X=X, A=A))
        want = nested_loop_forward(net, X, A)
        assert np.allclose(got, want, atol=1e-9)


def test_diagonal_gates_own_contribution():
    rng = np.random.default_rng(7)
    n, d = 3, 2
    layer = sage_layer(n, d, d, rng.normal(size=(d, d)), rng.normal(size=(d, d)),
                       rng.normal(size=d))
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    A = np.eye(n)
    A[2, 2] = 0  # node 2 absent, no edges
    X1 = rng.normal(size=(n, d))
    X2 = X1.copy()
    X2[2] = rng.normal(size=d)  # only the gated-out row differs
    out1 = forward(net, NodeFeatureAssignment(X=X1, A=A))
    out2 = forward(net, NodeFeatureAssignment(X=X2, A=A))
    assert np.array_equal(out1[: 2 * d], out2[: 2 * d])


def test_permutation_invariance_with_shared_weights_and_mean_pool():
    rng = np.random.default_rng(3)
    n, d = 4, 3
    layer = sage_layer(n, d, d, rng.normal(size=(d, d)), rng.normal(size=(d, d)),
                       rng.normal(size=d), Activation.RELU)
    pool_w = np.zeros((d, n * d))
    for v in range(n):
        pool_w[:, v * d : (v + 1) * d] = np.eye(d) / n
    pool = DenseLayer(weight=pool_w, bias=np.zeros(d))
    net = GnnNetwork(layers=(layer, pool), n_nodes=n, input_features=d)
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    A = np.eye(n)
    A[0, 1] = A[1, 0] = A[1, 2] = A[2, 1] = 1
    base = forward(net, NodeFeatureAssignment(X=X, A=A))
    for _ in range(5):
        perm = rng.permutation(n)
        Xp = X[perm]
        Ap = A[np.ix_(perm, perm)]
        assert np.allclose(
            forward(net, NodeFeatureAssignment(X=Xp, A=Ap)), base, atol=1e-12
        )


def test_fixed_graph_layer_rejects_other_adjacency():
    n, d = 2, 1
    A = np.eye(n)
    layer = GnnLayer(
        n_nodes=n, in_features=d, out_features=d,
        weights=np.ones((n, n, d, d)), biases=np.zeros((n, d)),
        graph_mode=GraphMode.FIXED, adjacency=A,
    )
    net = GnnNetwork(layers=(layer,), n_nodes=n, input_features=d)
    other = np.ones((n, n))
    with pytest.raises(ValueError, match="fixed graph"):
        forward(net, NodeFeatureAssignment(X=np.zeros((n, d)), A=other))


def test_dimension_mismatch_is_rejected():
    layer = sage_layer(2, 2, 2, np.eye(2), np.zeros((2, 2)), np.zeros(2))
    net = GnnNetwork(layers=(layer,), n_nodes=2, input_features=2)
    with pytest.raises(ValueError, match="input shape"):
        forward(net, NodeFeatureAssignment(X=np.zeros((2, 3)), A=np.eye(2)))


def test_layer_size_chaining_enforced():
    l1 = sage_layer(2, 2, 3, np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3))
    l2 = sage_layer(2, 2, 2, np.eye(2), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError, match="chain"):
        GnnNetwork(layers=(l1, l2), n_nodes=2, input_features=2)


def test_no_gnn_layer_after_pooling():
    l1 = sage_layer(2, 2, 2, np.eye(2), np.zeros((2, 2)), np.zeros(2))
    pool = DenseLayer(weight=np.ones((1, 4)), bias=np.zeros(1))
    l3 = sage_layer(2, 2, 2, np.eye(2), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError, match="pooling boundary"):
        GnnNetwork(layers=(l1, pool, l3), n_nodes=2, input_features=2)


class TestWeightFile:
    def test_single_layer_roundtrip(self, tmp_path):
        layer = GnnLayer(
            n_nodes=2, in_features=2, out_features=2,
            weights=np.arange(16, dtype=float).reshape(2, 2, 2, 2),
            biases=np.array([[0.5, 1.0], [1.5, 2.0]]),
        )
        net = GnnNetwork(layers=(layer,), n_nodes=2, input_features=2)
        path = tmp_path / "net.json"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.n_nodes == 2
        assert loaded.input_features == 2
        assert len(loaded.layers) == 1
        assert np.array_equal(loaded.layers[0].weights, layer.weights)

    def test_bad_bias_length_names_layer(self, tmp_path):
        layer = sage_layer(2, 2, 2, np.eye(2), np.zeros((2, 2)), np.zeros(2))
        net = GnnNetwork(layers=(layer,), n_nodes=2, input_features=2)
        path = tmp_path / "net.json"
        save_network(net, path)
        import json

        doc = json.loads(path.read_text())
        doc["layers"][0]["biases"] = [[0.0, 0.0], [0.0, 0.0], [0.0]]
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="layer 0"):
            load_network(path)

    def test_reference_architecture_loads_and_runs(self, tmp_path, reference_network):
        path = tmp_path / "ref.json"
        save_network(reference_network, path)
        net = load_network(path)
        rng = np.random.default_rng(1)
        X = rng.integers(0, 2, size=(net.n_nodes, net.input_features)).astype(float)
        A = np.eye(net.n_nodes)
        A[0, 1] = A[1, 0] = 1
        A[1, 2] = A[2, 1] = 1
        A[2, 3] = A[3, 2] = 1
        out = forward(net, NodeFeatureAssignment(X=X, A=A))
        assert out.shape == (2,)
