import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsgslm.fusion import WEIGHT_FLOOR, fuse, fuse_views, normalized_operators, view_weight


def _row_stochastic(rng, n, density=0.5):
    S = rng.random((n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(S, 0)
    S[np.arange(n), (np.arange(n) + 1) % n] += 0.05
    return S / S.sum(axis=1, keepdims=True)


def test_single_node_weight_is_floored():
    assert view_weight(np.array([[1.0, 2.0]]), np.zeros((1, 1))) == WEIGHT_FLOOR == 1e-6


def test_two_node_hand_computation():
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    X = np.eye(2)
    _, L, _ = normalized_operators(S)
    assert np.allclose(L, [[1, -1], [-1, 1]], atol=0)
    assert np.isclose(np.trace(X.T @ L @ X), 2.0)
    assert np.isclose(view_weight(X, S), np.sqrt(2.0), atol=1e-15)


def test_weight_is_permutation_invariant():
    rng = np.random.default_rng(0)
    S = _row_stochastic(rng, 9)
    X = rng.standard_normal((9, 4))
    perm = rng.permutation(9)
    assert np.isclose(view_weight(X, S), view_weight(X[perm], S[np.ix_(perm, perm)]), rtol=1e-12)


def test_identical_graphs_fuse_to_themselves():
    S = _row_stochastic(np.random.default_rng(1), 6)
    fused = fuse([S, S, S], [0.3, 5.0, 1.0])
    assert np.allclose(fused.S, S, atol=1e-15)


def test_weighted_average_entrywise():
    n = 4
    S1 = np.full((n, n), 1 / (n - 1))
    np.fill_diagonal(S1, 0)
    S2 = np.roll(np.eye(n), 1, axis=1)
    fused = fuse([S1, S2], [1.0, 3.0])
    assert np.allclose(fused.S, 0.25 * S1 + 0.75 * S2, atol=1e-15)


def test_fuse_rejects_mismatch_and_bad_weights():
    with pytest.raises(ValueError):
        fuse([np.eye(3), np.eye(4)], [1, 1])
    with pytest.raises(ValueError):
        fuse([np.eye(3)], [1, 1])
    with pytest.raises(ValueError):
        fuse([np.eye(3)], [0.0])


def test_unit_degree_operators():
    A_hat, L, D = normalized_operators(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(A_hat, [[0, 1], [1, 0]])
    assert np.allclose(L, [[1, -1], [-1, 1]])
    assert np.allclose(D, np.eye(2))


def test_sqrt_degree_vector_is_in_the_null_space():
    rng = np.random.default_rng(2)
    M = rng.random((8, 8))
    S = (M + M.T) / 2
    np.fill_diagonal(S, 0)
    # symmetric with equal row sums via Sinkhorn balancing
    for _ in range(500):
        S /= S.sum(axis=1, keepdims=True)
        S = (S + S.T) / 2
    _, L, D = normalized_operators(S)
    assert np.linalg.norm(L @ np.sqrt(np.diag(D))) < 1e-10


def test_block_diagonal_graph_stays_block_diagonal():
    rng = np.random.default_rng(3)
    S = np.zeros((7, 7))
    S[:3, :3] = _row_stochastic(rng, 3)
    S[3:, 3:] = _row_stochastic(rng, 4)
    A_hat, _, _ = normalized_operators(S)
    assert np.all(A_hat[:3, 3:] == 0) and np.all(A_hat[3:, :3] == 0)


def test_isolated_node_has_zero_row():
    S = np.zeros((3, 3))
    S[0, 1] = S[1, 0] = 1.0
    A_hat, L, D = normalized_operators(S)
    assert np.all(A_hat[2] == 0) and np.all(L[2] == 0) and D[2, 2] == 0
    assert np.all(np.isfinite(L))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_fused_operator_invariants(n, V, seed):
    rng = np.random.default_rng(seed)
    graphs = [_row_stochastic(rng, n) for _ in range(V)]
    fused = fuse(graphs, rng.uniform(0.1, 3.0, V))
    assert np.allclose(fused.S.sum(axis=1), 1.0, atol=1e-8)
    assert np.allclose(fused.A_hat, fused.A_hat.T, atol=1e-12)
    assert np.linalg.eigvalsh(fused.L_norm).min() >= -1e-8
    eig = np.linalg.eigvalsh(fused.A_hat)
    assert eig.min() >= -1 - 1e-8 and eig.max() <= 1 + 1e-8


def test_smoother_view_gets_the_smaller_weight():
    rng = np.random.default_rng(4)
    labels = np.repeat([0, 1, 2], 10)
    # same graph for both views: a kNN-style within-class graph
    S = (labels[:, None] == labels[None, :]).astype(float)
    np.fill_diagonal(S, 0)
    S /= S.sum(axis=1, keepdims=True)
    centers = rng.standard_normal((3, 5)) * 3
    tight = centers[labels] + 0.05 * rng.standard_normal((30, 5))
    loose = centers[labels] + 1.0 * rng.standard_normal((30, 5))
    tight /= np.linalg.norm(tight, axis=0)
    loose /= np.linalg.norm(loose, axis=0)
    assert view_weight(tight, S) <= view_weight(loose, S)


def test_fuse_views_uses_smoothness_weights():
    rng = np.random.default_rng(5)
    graphs = [_row_stochastic(rng, 6) for _ in range(2)]
    views = [rng.standard_normal((6, 3)) for _ in range(2)]
    fused = fuse_views(views, graphs)
    expected = [view_weight(X, S) for X, S in zip(views, graphs)]
    assert np.allclose(fused.alphas, expected)
    assert np.allclose(fused.S, (expected[0] * graphs[0] + expected[1] * graphs[1]) / sum(expected))
