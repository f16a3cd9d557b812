"""Loss terms of the GCN stage and their gradients with respect to the softmax output Z."""

import math
from dataclasses import dataclass

import numpy as np

from rsgslm.errors import ConfigError

EPS = 1e-12
SCHEDULES = ("linear", "exponential", "sqrt", "square")
PSEUDO_POOLS = ("unlabeled", "test")


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    schedule: str = "linear"
    max_epochs: int = 2000
    use_renode_weights: bool = True
    use_pseudo: bool = True
    use_smooth: bool = True
    oracle_pseudo: bool = False
    pseudo_pool: str = "unlabeled"
    normalize_pseudo: bool = False

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("loss.lambda1 and loss.lambda2 must be >= 0")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"loss.schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.max_epochs < 1:
            raise ConfigError("loss.max_epochs must be >= 1")
        if self.pseudo_pool not in PSEUDO_POOLS:
            raise ConfigError(f"loss.pseudo_pool must be one of {PSEUDO_POOLS}")


@dataclass
class LossBreakdown:
    ce_renode: float
    pseudo: float
    smooth: float
    total: float
    w_p: float


def cross_entropy(Z, Y, mask):
    """Summed cross-entropy over the masked rows."""
    return float(-np.sum(Y[mask] * np.log(Z[mask] + EPS)))


def reweighted_ce(Z, Y, train_mask, weights):
    """Per-node weighted cross-entropy averaged over the labeled set.

    ``weights`` is either a length-n vector or one value per train node.
    """
    idx = np.flatnonzero(train_mask)
    w = _train_weights(weights, train_mask)
    per_node = -np.sum(Y[idx] * np.log(Z[idx] + EPS), axis=1)
    return float(np.dot(w, per_node) / idx.size)


def _train_weights(weights, train_mask):
    weights = np.asarray(weights, dtype=np.float64)
    m = int(train_mask.sum())
    if weights.shape == train_mask.shape:
        w = weights[train_mask]
    elif weights.shape == (m,):
        w = weights
    else:
        raise ValueError(f"need one weight per labeled node ({m}), got shape {weights.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("missing weight for a labeled node")
    return w


def schedule_wp(epoch, max_epochs, kind="linear"):
    """Pseudo-label weight at a 1-based epoch; every schedule is 0 at epoch 1."""
    if not 1 <= epoch <= max_epochs:
        raise ValueError(f"epoch {epoch} outside [1, {max_epochs}]")
    t = (epoch - 1) / max_epochs
    if kind == "linear":
        return t
    if kind == "exponential":
        return math.expm1(t)
    if kind == "sqrt":
        return math.sqrt(t)
    if kind == "square":
        return t * t
    raise ValueError(f"unknown schedule {kind!r}")


def pseudo_label_ce(Z, Y_prev, pseudo_mask, w_p, normalize=False):
    """-w_p * sum over pseudo rows of Y_prev * ln Z; Y_prev is a constant target."""
    rows = Y_prev[pseudo_mask]
    if rows.size and not np.allclose(rows.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("pseudo targets must be probability vectors")
    if w_p == 0 or rows.size == 0:
        return 0.0
    value = -w_p * float(np.sum(rows * np.log(Z[pseudo_mask] + EPS)))
    if normalize:
        value /= rows.shape[0]
    return value


def smoothness(Z, L_norm):
    return float(np.sum(Z * (L_norm @ Z)))


def pseudo_mask_for(masks, pool):
    train, val, test = masks
    if pool == "test":
        return test.copy()
    return ~train


def total_loss(Z, Y, Y_prev, masks, weights, epoch, config, L_norm, with_grad=False, w_p=None):
    """Combined objective; disabled terms are replaced by their ablated form.

    ``masks`` is (train, val, test). Returns the LossBreakdown and, when
    ``with_grad`` is set, dLoss/dZ (Y_prev is treated as constant).
    ``w_p`` overrides the scheduled pseudo-label weight.
    """
    train = masks[0]
    n_lab = int(train.sum())
    if config.use_renode_weights:
        w = _train_weights(weights, train)
    else:
        w = np.ones(n_lab)
    ce = reweighted_ce(Z, Y, train, w)

    if w_p is None:
        w_p = schedule_wp(epoch, config.max_epochs, config.schedule)
    pmask = pseudo_mask_for(masks, config.pseudo_pool)
    pseudo = 0.0
    if config.use_pseudo:
        pseudo = pseudo_label_ce(Z, Y_prev, pmask, w_p, normalize=config.normalize_pseudo)

    LZ = None
    smooth = 0.0
    if config.use_smooth:
        LZ = L_norm @ Z
        smooth = float(np.sum(Z * LZ))

    total = ce + config.lambda1 * pseudo + config.lambda2 * smooth
    breakdown = LossBreakdown(ce_renode=ce, pseudo=pseudo, smooth=smooth, total=total, w_p=w_p)
    if not with_grad:
        return breakdown

    dZ = np.zeros_like(Z)
    idx = np.flatnonzero(train)
    dZ[idx] -= (w / n_lab)[:, None] * Y[idx] / (Z[idx] + EPS)
    if config.use_pseudo and w_p != 0 and pmask.any():
        scale = config.lambda1 * w_p
        if config.normalize_pseudo:
            scale /= pmask.sum()
        dZ[pmask] -= scale * Y_prev[pmask] / (Z[pmask] + EPS)
    if config.use_smooth:
        # L_norm is symmetric
        dZ += config.lambda2 * 2.0 * LZ
    return breakdown, dZ
