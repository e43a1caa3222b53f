import numpy as np
import pytest

from molmip.gnn import Activation, GnnNetwork, GraphMode
from molmip.transforms import OpKind, OpSpec, transform_pool, transform_sage


def make_sage_pool_dense_network(
    n_nodes: int,
    in_features: int,
    hidden: int = 16,
    seed: int = 0,
    scale: float = 0.5,
) -> GnnNetwork:
    """Two sum-aggregation sage layers + mean pool + two-logit dense head."""
    rng = np.random.default_rng(seed)

    def sage(d_in, d_out):
        return transform_sage(
            OpSpec(
                kind=OpKind.SAGE_CONV_SUM,
                graph_mode=GraphMode.NON_FIXED,
                weight_self=scale * rng.normal(size=(d_out, d_in)),
                weight_neighbor=scale * rng.normal(size=(d_out, d_in)),
                bias=scale * rng.normal(size=d_out),
                activation=Activation.RELU,
            ),
            n_nodes,
        )

    from molmip.gnn import DenseLayer

    layers = (
        sage(in_features, hidden),
        sage(hidden, hidden),
        transform_pool(
            OpSpec(kind=OpKind.GLOBAL_MEAN_POOL, graph_mode=GraphMode.NON_FIXED),
            n_nodes,
            hidden,
        ),
        DenseLayer(
            weight=scale * rng.normal(size=(2, hidden)),
            bias=scale * rng.normal(size=2),
        ),
    )
    return GnnNetwork(layers=layers, n_nodes=n_nodes, input_features=in_features)


@pytest.fixture
def reference_network():
    """Architecture used throughout: 2 sage layers, 16 hidden, pool, head."""
    return make_sage_pool_dense_network(4, 14, hidden=16, seed=0)


@pytest.fixture
def small_network():
    """Same shape scaled down to 4 hidden features for solver-speed tests."""
    return make_sage_pool_dense_network(4, 14, hidden=4, seed=0)
