"""Smoothness-weighted fusion of per-view graphs and the derived normalized operators."""

from dataclasses import dataclass

import numpy as np

from rsgslm.view_graph import symmetrize

WEIGHT_FLOOR = 1e-6


@dataclass
class FusedGraph:
    S: np.ndarray
    alphas: np.ndarray
    A_sym: np.ndarray
    A_hat: np.ndarray
    L_norm: np.ndarray
    degrees: np.ndarray

    @property
    def n(self):
        return self.S.shape[0]


def normalized_operators(S):
    """Return (A_hat, L_norm, D) for the symmetrized graph (S + S^T)/2.

    Zero-degree nodes get a zero row/column in both A_hat and L_norm, i.e.
    L_norm = D^{-1/2} (D - A) D^{-1/2} with 0^{-1/2} taken as 0.
    """
    A = symmetrize(np.asarray(S, dtype=np.float64))
    deg = A.sum(axis=1)
    pos = deg > 0
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    A_hat = inv_sqrt[:, None] * A * inv_sqrt[None, :]
    L_norm = np.diag(pos.astype(np.float64)) - A_hat
    return A_hat, L_norm, np.diag(deg)


def view_weight(X, S):
    """sqrt(Tr(X^T L X)) with L the normalized Laplacian of the view graph, floored at 1e-6."""
    _, L, _ = normalized_operators(S)
    trace = float(np.sum(X * (L @ X)))
    if trace < -1e-8:
        raise ValueError(f"negative smoothness trace {trace}: Laplacian is not PSD")
    if trace <= 1e-12:
        return WEIGHT_FLOOR
    return float(np.sqrt(trace))


def fuse(view_graphs, weights):
    """Convex combination sum_v a_v S_v / sum_v a_v plus its normalized operators."""
    graphs = [np.asarray(S, dtype=np.float64) for S in view_graphs]
    weights = np.asarray(weights, dtype=np.float64)
    if not graphs:
        raise ValueError("fuse needs at least one graph")
    if len(graphs) != weights.size:
        raise ValueError(f"{len(graphs)} graphs but {weights.size} weights")
    shape = graphs[0].shape
    if any(S.shape != shape for S in graphs) or shape[0] != shape[1]:
        raise ValueError("view graphs must be square and share n")
    if np.any(weights <= 0):
        raise ValueError("view weights must be positive")
    S = sum(a * G for a, G in zip(weights, graphs)) / weights.sum()
    return from_graph(S, weights)


def from_graph(S, alphas=None):
    A_hat, L_norm, D = normalized_operators(S)
    if alphas is None:
        alphas = np.ones(1)
    return FusedGraph(S=S, alphas=np.asarray(alphas, dtype=np.float64), A_sym=symmetrize(S),
                      A_hat=A_hat, L_norm=L_norm, degrees=np.diag(D).copy())


def fuse_views(views, view_graphs):
    """Weight each view by its smoothness and fuse the learned graphs."""
    alphas = np.array([view_weight(X, S) for X, S in zip(views, view_graphs)])
    return fuse(view_graphs, alphas)
