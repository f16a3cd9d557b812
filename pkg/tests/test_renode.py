import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rsgslm.errors import ConfigError
from rsgslm.fusion import normalized_operators
from rsgslm.renode import (
    ReNodeConfig,
    compute_node_weights,
    cosine_weights,
    pagerank_neumann,
    personalized_pagerank,
    totoro_scores,
)


def _random_A_hat(rng, n):
    S = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
    np.fill_diagonal(S, 0)
    S[np.arange(n), (np.arange(n) + 1) % n] += 0.1
    S /= S.sum(axis=1, keepdims=True)
    return normalized_operators(S)[0]


def _labeled(rng, n, c, per_class=2):
    labels = np.arange(n) % c
    rng.shuffle(labels)
    train = np.zeros(n, dtype=bool)
    for j in range(c):
        train[np.flatnonzero(labels == j)[:per_class]] = True
    return labels, train


def test_single_node_pagerank_is_one():
    assert np.allclose(personalized_pagerank(np.ones((1, 1)), 0.15), [[1.0]])


def test_two_node_closed_form():
    P = personalized_pagerank(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.15)
    assert np.allclose(P, oracles.pagerank_2x2(0.15), atol=1e-14)
    assert np.allclose(np.round(P, 4), [[0.5405, 0.4595], [0.4595, 0.5405]])


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 30), st.sampled_from([0.15, 0.3, 0.9, 1.0]), st.integers(0, 2**31 - 1))
def test_dense_solve_matches_neumann_series(n, xi, seed):
    A_hat = _random_A_hat(np.random.default_rng(seed), n)
    P = personalized_pagerank(A_hat, xi)
    assert np.allclose(P, pagerank_neumann(A_hat, xi, terms=200), atol=1e-8)


def test_pagerank_row_sums_bounded():
    rng = np.random.default_rng(0)
    # a sub-stochastic symmetric operator (row sums <= 1)
    M = rng.random((10, 10))
    A = (M + M.T) / 2
    A /= A.sum(axis=1).max()
    P = personalized_pagerank(A, 0.15)
    rows = P.sum(axis=1)
    assert np.all(rows > 0) and np.all(rows <= 1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 30), st.integers(2, 4), st.integers(0, 2**31 - 1))
def test_totoro_matches_triple_sum(n, c, seed):
    rng = np.random.default_rng(seed)
    if n < 2 * c:
        return
    A_hat = _random_A_hat(rng, n)
    labels, train = _labeled(rng, n, c)
    P = personalized_pagerank(A_hat, 0.15)
    assert np.allclose(totoro_scores(P, labels, train, c), oracles.totoro_triple_sum(P, labels, train, c),
                       atol=1e-10)


def test_single_class_totoro_is_zero():
    rng = np.random.default_rng(1)
    P = personalized_pagerank(_random_A_hat(rng, 6), 0.15)
    train = np.array([True, True, False, False, True, False])
    assert np.all(totoro_scores(P, np.zeros(6, dtype=int), train, 1) == 0)


def test_disconnected_cliques_have_no_conflict():
    S = np.zeros((6, 6))
    S[:3, :3] = 0.5
    S[3:, 3:] = 0.5
    np.fill_diagonal(S, 0)
    P = personalized_pagerank(normalized_operators(S)[0], 0.15)
    labels = np.array([0, 0, 0, 1, 1, 1])
    train = np.array([True, False, False, True, False, False])
    assert np.allclose(totoro_scores(P, labels, train, 2), 0.0, atol=1e-15)


def test_empty_train_class_rejected():
    P = np.eye(4)
    with pytest.raises(ValueError, match="class 1"):
        totoro_scores(P, np.array([0, 1, 0, 1]), np.array([True, False, True, False]), 2)


def test_two_labeled_nodes_weights():
    rank, w = cosine_weights(np.array([0.1, 0.4]), 0.5, 0.9)
    assert rank.tolist() == [0, 1]
    assert np.allclose(w, [0.9, 0.7], atol=1e-15)


def test_equal_bounds_disable_reweighting():
    _, w = cosine_weights(np.random.default_rng(2).random(7), 0.5, 0.5)
    assert np.all(w == 0.5)


def test_ties_follow_node_order():
    rank, w = cosine_weights(np.full(4, 0.3), 0.5, 1.0)
    assert rank.tolist() == [0, 1, 2, 3]
    assert np.all(np.diff(w) < 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=40), st.floats(0.01, 2.0), st.floats(0.0, 5.0))
def test_weight_mapping_properties(totoro, w_min, delta):
    w_max = w_min + delta
    rank, w = cosine_weights(np.array(totoro), w_min, w_max)
    m = len(totoro)
    assert sorted(rank.tolist()) == list(range(m))
    assert np.all(w >= w_min - 1e-12) and np.all(w <= w_max + 1e-12)
    by_rank = w[np.argsort(rank)]
    assert np.all(np.diff(by_rank) <= 1e-12)
    lower = w_min + 0.5 * delta * (1 + np.cos((m - 1) * np.pi / m))
    assert w.min() >= lower - 1e-12 and np.isclose(w.max(), w_max)
    # smaller conflict never gets a smaller weight
    t = np.array(totoro)
    for i in range(m):
        for j in range(m):
            if t[i] < t[j]:
                assert w[i] >= w[j]


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    n, c = 16, 3
    A_hat = _random_A_hat(rng, n)
    labels, train = _labeled(rng, n, c)
    base = compute_node_weights(A_hat, labels, train, c)
    perm = rng.permutation(n)
    moved = compute_node_weights(A_hat[np.ix_(perm, perm)], labels[perm], train[perm], c)
    # map each table back to original node ids
    t_base = dict(zip(base.node_index.tolist(), base.totoro))
    t_moved = dict(zip(perm[moved.node_index].tolist(), moved.totoro))
    w_base = dict(zip(base.node_index.tolist(), base.weight))
    w_moved = dict(zip(perm[moved.node_index].tolist(), moved.weight))
    for i in t_base:
        assert np.isclose(t_base[i], t_moved[i], atol=1e-12)
        assert np.isclose(w_base[i], w_moved[i], atol=1e-12)


def test_dense_weights_fill_unlabeled_nodes():
    rng = np.random.default_rng(4)
    A_hat = _random_A_hat(rng, 10)
    labels, train = _labeled(rng, 10, 2)
    table = compute_node_weights(A_hat, labels, train, 2, ReNodeConfig(w_min=0.5, w_max=0.9))
    dense = table.dense(10)
    assert np.all(dense[~train] == 1.0)
    assert np.allclose(dense[table.node_index], table.weight)
    assert len(list(table.rows())) == train.sum()


@pytest.mark.parametrize("kwargs", [dict(xi=0.0), dict(xi=1.5), dict(w_min=0.0), dict(w_min=0.8, w_max=0.5)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ReNodeConfig(**kwargs)
