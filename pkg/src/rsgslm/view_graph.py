"""Per-view joint learning of a sample graph and projected soft labels.

For one view X (n x d, columns unit-normalized) we minimize, by block
coordinate descent,

    J(S, F, Q, b) = sum_ij S_ij (1/2 |x_i - x_j|^2 + eta/2 |f_i - f_j|^2)
                    + Tr((F - Y)^T U (F - Y)) + gamma |S|^2
                    + mu (|Q|^2 + alpha |X Q + 1 b^T - F|^2)

subject to every row of S lying on the probability simplex with S_ii = 0.
The pairwise sums equal Tr(X^T L X) + eta Tr(F^T L F) with L the
combinatorial Laplacian of (S + S^T)/2, so every block update below is an
exact minimizer and J never increases.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from rsgslm.errors import ConfigError, NumericalError


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 5.0
    gamma: float = 0.003
    mu: float = 100.0
    alpha: float = 0.003
    u_label: float = 1.0
    outer_iters: int = 20
    rel_tol: float = 1e-5
    # Listed among the graph parameters in the reference setup but never
    # used by the objective; kept so configs round-trip.
    p: float = 2.0

    def __post_init__(self):
        for name in ("eta", "gamma", "mu", "alpha", "u_label"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name} must be > 0, got {getattr(self, name)}")
        if self.outer_iters < 1:
            raise ConfigError("solver.outer_iters must be >= 1")
        if self.rel_tol < 0:
            raise ConfigError("solver.rel_tol must be >= 0")


@dataclass
class ViewGraphResult:
    S: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    b: np.ndarray
    surrogate_objective_trace: list = field(default_factory=list)
    seconds: float = 0.0


def simplex_project(v):
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("simplex_project expects a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("simplex_project input must be finite")
    return project_rows(v[None, :])[0]


def project_rows(V):
    """Row-wise simplex projection of a 2-D array (sort-based, O(m log m) per row)."""
    m = V.shape[1]
    u = -np.sort(-V, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, m + 1)
    cond = u - css / ks > 0
    # cond is true on a prefix; its length is the support size
    rho = cond.sum(axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    out = np.maximum(V - theta[:, None], 0.0)
    # renormalize away the last ulp of drift
    return out / out.sum(axis=1, keepdims=True)


def pairwise_sq_dists(A):
    return cdist(A, A, "sqeuclidean")


def graph_costs(x_dists, F, eta):
    """p_ij = 1/2 |x_i - x_j|^2 + eta/2 |f_i - f_j|^2."""
    return 0.5 * x_dists + 0.5 * eta * pairwise_sq_dists(F)


def step_graph(X, F, config, x_dists=None):
    """Exact S-update: each row is the simplex projection of -p_i / (2 gamma) off the diagonal."""
    if x_dists is None:
        x_dists = pairwise_sq_dists(X)
    n = x_dists.shape[0]
    S = np.zeros((n, n))
    if n == 1:
        return S
    P = graph_costs(x_dists, F, config.eta)
    off = ~np.eye(n, dtype=bool)
    V = (-P[off] / (2.0 * config.gamma)).reshape(n, n - 1)
    S[off] = project_rows(V).ravel()
    return S


def step_projection(X, F, config):
    """Ridge regression of F on X with intercept: the exact (Q, b) minimizer."""
    x_mean = X.mean(axis=0)
    f_mean = F.mean(axis=0)
    Xc = X - x_mean
    Fc = F - f_mean
    n, d = X.shape
    ridge = 1.0 / config.alpha
    if d <= n:
        G = Xc.T @ Xc
        G[np.diag_indices_from(G)] += ridge
        Q = np.linalg.solve(G, Xc.T @ Fc)
    else:
        K = Xc @ Xc.T
        K[np.diag_indices_from(K)] += ridge
        Q = Xc.T @ np.linalg.solve(K, Fc)
    b = f_mean - Q.T @ x_mean
    return Q, b


def symmetrize(S):
    return 0.5 * (S + S.T)


def combinatorial_laplacian(S):
    A = symmetrize(S)
    return np.diag(A.sum(axis=1)) - A


def normalized_laplacian(S):
    A = symmetrize(S)
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    return np.diag(pos.astype(float)) - inv_sqrt[:, None] * A * inv_sqrt[None, :]


def step_labels(X, S, Q, b, Y, U, config, laplacian="combinatorial"):
    """Solve (eta L + U + mu alpha I) F = U Y + mu alpha (X Q + 1 b^T).

    ``U`` is the diagonal of the label-fitting matrix. ``laplacian`` selects
    the combinatorial Laplacian of the symmetrized S (the exact block
    minimizer, used by :func:`solve_view_graph`) or the normalized one.
    """
    if laplacian == "combinatorial":
        L = combinatorial_laplacian(S)
    elif laplacian == "normalized":
        L = normalized_laplacian(S)
    else:
        raise ValueError(f"unknown laplacian kind {laplacian!r}")
    ma = config.mu * config.alpha
    M = config.eta * L
    M[np.diag_indices_from(M)] += U + ma
    rhs = U[:, None] * Y + ma * (X @ Q + b[None, :])
    try:
        factor = cho_factor(M, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"label system is not positive definite: {exc}") from exc
    return cho_solve(factor, rhs)


def surrogate_objective(x_dists, S, F, Q, b, X, Y, U, config):
    P = graph_costs(x_dists, F, config.eta)
    fit = F - Y
    resid = X @ Q + b[None, :] - F
    return float(
        np.sum(S * P)
        + np.sum(U[:, None] * fit * fit)
        + config.gamma * np.sum(S * S)
        + config.mu * (np.sum(Q * Q) + config.alpha * np.sum(resid * resid))
    )


def label_targets(labels, train_mask, num_classes, u_label):
    n = labels.shape[0]
    Y = np.zeros((n, num_classes))
    Y[train_mask, labels[train_mask]] = 1.0
    U = np.where(train_mask, u_label, 0.0)
    return Y, U


def solve_view_graph(X, labels, train_mask, config=None, num_classes=None):
    """Alternate S, (Q, b) and F updates until the surrogate objective stalls."""
    config = config or SolverConfig()
    start = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    train_mask = np.asarray(train_mask, dtype=bool)
    if not train_mask.any():
        raise ValueError("solve_view_graph needs at least one labeled node")
    c = num_classes if num_classes is not None else int(labels.max()) + 1
    Y, U = label_targets(labels, train_mask, c, config.u_label)

    x_dists = pairwise_sq_dists(X)
    F = Y.copy()
    Q = np.zeros((X.shape[1], c))
    b = np.zeros(c)
    trace = []
    for _ in range(config.outer_iters):
        S = step_graph(X, F, config, x_dists=x_dists)
        Q, b = step_projection(X, F, config)
        F = step_labels(X, S, Q, b, Y, U, config)
        if not np.all(np.isfinite(F)):
            raise NumericalError("soft labels became non-finite")
        trace.append(surrogate_objective(x_dists, S, F, Q, b, X, Y, U, config))
        if len(trace) > 1:
            prev = trace[-2]
            if prev - trace[-1] <= config.rel_tol * abs(prev):
                break
    return ViewGraphResult(S=S, F=F, Q=Q, b=b, surrogate_objective_trace=trace,
                           seconds=time.perf_counter() - start)
