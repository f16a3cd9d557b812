"""Two-layer graph convolution: Z = softmax(A relu(A F W0) W1), with a hand-written backward pass."""

from dataclasses import dataclass

import numpy as np

from rsgslm.errors import NumericalError
from rsgslm.fusion import normalized_operators


@dataclass
class GcnParams:
    W0: np.ndarray
    W1: np.ndarray

    def copy(self):
        return GcnParams(self.W0.copy(), self.W1.copy())

    @property
    def dims(self):
        return self.W0.shape[0], self.W0.shape[1], self.W1.shape[1]


@dataclass
class GcnForwardTrace:
    F_star: np.ndarray
    AF: np.ndarray
    H1_pre: np.ndarray
    H1: np.ndarray
    Z_pre: np.ndarray
    Z: np.ndarray


def concat_features(view_graphs):
    """Stack per-view soft labels side by side: [F^1 | F^2 | ... | F^V]."""
    Fs = [getattr(r, "F", r) for r in view_graphs]
    if not Fs:
        raise ValueError("no view results to concatenate")
    n, c = Fs[0].shape
    for v, F in enumerate(Fs):
        if F.shape != (n, c):
            raise ValueError(f"view {v} soft labels have shape {F.shape}, expected {(n, c)}")
    return np.hstack(Fs)


def propagation_operator(fused, add_self_loops=True):
    """Normalized adjacency used by the GCN layers; optionally rebuilt from A_sym + I."""
    if not add_self_loops:
        return fused.A_hat
    A = fused.A_sym + np.eye(fused.A_sym.shape[0])
    A_hat, _, _ = normalized_operators(A)
    return A_hat


def init_params(seed, in_dim, hidden_dim, out_dim):
    """Glorot-uniform weights; each layer draws from its own child stream."""
    w0_seq, w1_seq = np.random.SeedSequence(seed).spawn(2)
    return GcnParams(
        W0=_glorot(np.random.default_rng(w0_seq), in_dim, hidden_dim),
        W1=_glorot(np.random.default_rng(w1_seq), hidden_dim, out_dim),
    )


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, operator, F_star, AF=None):
    """Run both layers. ``AF`` may carry a cached ``operator @ F_star``."""
    if AF is None:
        AF = operator @ F_star
    H1_pre = AF @ params.W0
    H1 = np.maximum(H1_pre, 0.0)
    Z_pre = operator @ (H1 @ params.W1)
    if not np.all(np.isfinite(Z_pre)):
        raise NumericalError("GCN logits became non-finite")
    return GcnForwardTrace(F_star=F_star, AF=AF, H1_pre=H1_pre, H1=H1, Z_pre=Z_pre, Z=softmax(Z_pre))


def softmax_backward(Z, dZ):
    """Map dLoss/dZ to dLoss/dZ_pre through the row softmax."""
    return Z * (dZ - np.sum(dZ * Z, axis=1, keepdims=True))


def backward(params, operator, trace, dZ_pre):
    """Gradients of the loss w.r.t. (W0, W1) given dLoss/dZ_pre. The operator must be symmetric."""
    G = operator @ dZ_pre  # operator^T == operator
    dW1 = trace.H1.T @ G
    dH1_pre = (G @ params.W1.T) * (trace.H1_pre > 0)
    dW0 = trace.AF.T @ dH1_pre
    return GcnParams(dW0, dW1)
