"""Topology-aware re-weighting of labeled nodes.

Labeled nodes whose PageRank influence overlaps heavily with other classes'
labeled nodes (a large conflict, or "Totoro", score) sit near class
boundaries and are down-weighted with a cosine ramp over their rank.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError

from rsgslm.errors import ConfigError, NumericalError


@dataclass(frozen=True)
class ReNodeConfig:
    xi: float = 0.15
    w_min: float = 0.5
    w_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.xi <= 1:
            raise ConfigError(f"renode.xi must lie in (0, 1], got {self.xi}")
        if not self.w_min > 0:
            raise ConfigError("renode.w_min must be > 0")
        if self.w_max < self.w_min:
            raise ConfigError("renode.w_max must be >= renode.w_min")


@dataclass
class NodeWeightTable:
    node_index: np.ndarray
    totoro: np.ndarray
    rank: np.ndarray
    weight: np.ndarray

    def dense(self, n, fill=1.0):
        """Weights scattered into a length-n vector; unlabeled nodes get ``fill``."""
        out = np.full(n, fill, dtype=np.float64)
        out[self.node_index] = self.weight
        return out

    def rows(self):
        return zip(self.node_index.tolist(), self.totoro.tolist(), self.rank.tolist(), self.weight.tolist())


def personalized_pagerank(A_hat, xi):
    """P = xi (I - (1 - xi) A_hat)^{-1} by a dense solve."""
    A_hat = np.asarray(A_hat, dtype=np.float64)
    n = A_hat.shape[0]
    M = np.eye(n) - (1.0 - xi) * A_hat
    try:
        P = xi * np.linalg.solve(M, np.eye(n))
    except LinAlgError as exc:
        raise NumericalError(f"PageRank system is singular: {exc}") from exc
    if not np.all(np.isfinite(P)):
        raise NumericalError("PageRank matrix is not finite")
    return P


def pagerank_neumann(A_hat, xi, terms=200):
    """Truncated series xi * sum_k (1 - xi)^k A_hat^k; slow but solve-free."""
    A_hat = np.asarray(A_hat, dtype=np.float64)
    term = np.eye(A_hat.shape[0])
    total = term.copy()
    for _ in range(terms):
        term = (1.0 - xi) * (A_hat @ term)
        total += term
    return xi * total


def totoro_scores(P, labels, train_mask, num_classes):
    """Conflict score T_i = sum_{j != y_i} <P_i, mean of P_k over train nodes k of class j>."""
    train_idx = np.flatnonzero(train_mask)
    y = labels[train_idx]
    means = np.zeros((num_classes, P.shape[1]))
    for j in range(num_classes):
        members = train_idx[y == j]
        if members.size == 0:
            raise ValueError(f"class {j} has no labeled node")
        means[j] = P[members].mean(axis=0)
    overlap = P[train_idx] @ means.T  # |L| x c
    return overlap.sum(axis=1) - overlap[np.arange(train_idx.size), y]


def cosine_weights(totoro, w_min, w_max):
    """Map ascending Totoro rank (0-based, stable) to w_min + (w_max-w_min)/2 (1 + cos(pi r / |L|)).

    Returns (rank, weight).
    """
    totoro = np.asarray(totoro, dtype=np.float64)
    m = totoro.size
    order = np.argsort(totoro, kind="stable")
    rank = np.empty(m, dtype=np.int64)
    rank[order] = np.arange(m)
    weight = w_min + 0.5 * (w_max - w_min) * (1.0 + np.cos(rank * np.pi / m))
    return rank, weight


def compute_node_weights(A_hat, labels, train_mask, num_classes, config=None):
    config = config or ReNodeConfig()
    P = personalized_pagerank(A_hat, config.xi)
    totoro = totoro_scores(P, labels, train_mask, num_classes)
    rank, weight = cosine_weights(totoro, config.w_min, config.w_max)
    return NodeWeightTable(node_index=np.flatnonzero(train_mask), totoro=totoro, rank=rank, weight=weight)
