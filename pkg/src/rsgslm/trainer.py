"""Full-batch transductive training, baselines, ablations, repeated splits and gradient checks."""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from rsgslm.dataset import SplitSpec, make_split, normalize_columns
from rsgslm.errors import ConfigError, NumericalError
from rsgslm.fusion import FusedGraph, from_graph, fuse, fuse_views
from rsgslm.gcn import GcnParams, backward, concat_features, forward, init_params, propagation_operator, softmax_backward
from rsgslm.objective import LossConfig, total_loss
from rsgslm.renode import NodeWeightTable, ReNodeConfig, compute_node_weights
from rsgslm.view_graph import SolverConfig, solve_view_graph

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "gd")
# learned graphs keep a handful of neighbours per row; below this fill ratio
# propagation runs on CSR matrices
SPARSE_DENSITY = 0.1
LAMBDA_GRID = (1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)
WEIGHT_RANGES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0)

# (smooth, pseudo, renode) in the row order of the three-term ablation table
ABLATION_ROWS = (
    (False, False, False),
    (False, False, True),
    (False, True, False),
    (True, False, False),
    (False, True, True),
    (True, False, True),
    (True, True, False),
    (True, True, True),
)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs: int = 2000
    patience: int = 100
    optimizer: str = "adam"
    seed: int = 0
    hidden_dim: int = 28
    weight_decay: float = 0.0
    add_self_loops: bool = True
    loss: LossConfig = field(default_factory=LossConfig)
    renode: ReNodeConfig = field(default_factory=ReNodeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("train.learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ConfigError("train.max_epochs must be >= 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise ConfigError("train.patience must lie in [0, max_epochs]")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"train.optimizer must be one of {OPTIMIZERS}")
        if self.hidden_dim < 1:
            raise ConfigError("train.hidden_dim must be >= 1")
        if self.weight_decay < 0:
            raise ConfigError("train.weight_decay must be >= 0")
        if self.loss.max_epochs < self.max_epochs:
            raise ConfigError("loss.max_epochs (schedule horizon) must be >= train.max_epochs")

    def with_loss(self, **changes):
        return replace(self, loss=replace(self.loss, **changes))


@dataclass
class EpochRecord:
    epoch: int
    ce_renode: float
    pseudo: float
    smooth: float
    total: float
    w_p: float
    train_acc: float
    val_acc: float
    test_acc: float


@dataclass
class RunResult:
    best_params: object
    best_epoch: int
    best_val_accuracy: float
    test_accuracy: float
    epochs_ran: int
    epoch_records: list
    Z: np.ndarray
    seconds: dict = field(default_factory=dict)
    method: str = "rsgslm"

    def metrics(self):
        return {
            "method": self.method,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_accuracy,
            "test_acc": self.test_accuracy,
            "epochs_ran": self.epochs_ran,
            "seconds": dict(self.seconds),
        }


@dataclass
class GraphArtifacts:
    """Everything the GCN stage needs from the graph stage, for one split."""

    dataset: object  # column-normalized, split attached
    view_results: list
    fused: FusedGraph
    node_weights: NodeWeightTable
    seconds: dict


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class GradientDescent:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def make_optimizer(config):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return GradientDescent(config.learning_rate)


def as_operator(M, max_density=SPARSE_DENSITY):
    """CSR copy of a mostly-zero n x n matrix, otherwise the dense array unchanged."""
    if sparse.issparse(M):
        return M.tocsr()
    if np.count_nonzero(M) <= max_density * M.size:
        return sparse.csr_matrix(M)
    return M


def _masked_mean(hits, mask):
    return float(hits[mask].mean()) if mask.any() else float("nan")


def accuracy(Z, labels, mask):
    if not mask.any():
        return float("nan")
    return float(np.mean(Z[mask].argmax(axis=1) == labels[mask]))


def loss_and_grads(params, operator, features, Y, Y_prev, masks, weights, epoch, loss_cfg, L_norm,
                   AF=None, w_p=None):
    trace = forward(params, operator, features, AF=AF)
    breakdown, dZ = total_loss(trace.Z, Y, Y_prev, masks, weights, epoch, loss_cfg, L_norm,
                               with_grad=True, w_p=w_p)
    grads = backward(params, operator, trace, softmax_backward(trace.Z, dZ))
    return trace, breakdown, grads


def fit_gcn(operator, features, L_norm, labels, masks, weights, config, *, num_classes=None,
            pseudo_targets=None, w_p=None):
    """Train one GCN; the returned Z and test accuracy come from the best-validation epoch.

    ``pseudo_targets`` pins Y_prev to a fixed matrix and ``w_p`` pins the
    schedule value, which together make the objective stationary.
    """
    loss_cfg = config.loss
    c = num_classes or int(labels.max()) + 1
    n = labels.shape[0]
    train, val, test = masks
    Y = np.zeros((n, c))
    Y[np.arange(n), labels] = 1.0
    # only the train rows of Y are read by the supervised term
    Y_train = np.where(train[:, None], Y, 0.0)

    if loss_cfg.oracle_pseudo:
        Y_prev = Y
    elif pseudo_targets is not None:
        Y_prev = np.asarray(pseudo_targets, dtype=np.float64)
    else:
        Y_prev = np.full((n, c), 1.0 / c)

    params = init_params(config.seed, features.shape[1], config.hidden_dim, c)
    optimizer = make_optimizer(config)
    operator = as_operator(operator)
    L_norm = as_operator(L_norm)
    AF = np.asarray(operator @ features)
    records = []
    best = None
    start = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        trace, bd, grads = loss_and_grads(params, operator, features, Y_train, Y_prev, masks, weights, epoch,
                                          loss_cfg, L_norm, AF=AF, w_p=w_p)
        if not np.isfinite(bd.total):
            raise NumericalError(
                f"non-finite loss at epoch {epoch} (ce={bd.ce_renode}, pseudo={bd.pseudo}, smooth={bd.smooth}); "
                f"last good epoch {best[0] if best else None}"
            )
        Z = trace.Z
        hits = Z.argmax(axis=1) == labels
        rec = EpochRecord(epoch, bd.ce_renode, bd.pseudo, bd.smooth, bd.total, bd.w_p,
                          *(_masked_mean(hits, m) for m in masks))
        records.append(rec)
        monitor = rec.val_acc if val.any() else -bd.total
        if best is None or monitor > best[1]:
            best = (epoch, monitor, params.copy(), rec.test_acc, Z.copy(), rec.val_acc)
        if config.weight_decay:
            grads.W0 += config.weight_decay * params.W0
            grads.W1 += config.weight_decay * params.W1
        optimizer.step([params.W0, params.W1], [grads.W0, grads.W1])
        if not loss_cfg.oracle_pseudo and pseudo_targets is None:
            Y_prev = Z
        if epoch - best[0] >= config.patience:
            break

    epoch_b, _, params_b, test_b, Z_b, val_b = best
    return RunResult(best_params=params_b, best_epoch=epoch_b, best_val_accuracy=val_b, test_accuracy=test_b,
                     epochs_ran=len(records), epoch_records=records, Z=Z_b,
                     seconds={"training": time.perf_counter() - start})


def _masks(ds):
    return ds.train_mask, ds.val_mask, ds.test_mask


def prepare_graphs(dataset, config):
    """Normalize, learn one graph per view, fuse, and re-weight labeled nodes."""
    if not dataset.has_split:
        raise ValueError("dataset needs a train/val/test split before graph learning")
    ds = normalize_columns(dataset)
    t0 = time.perf_counter()
    results = []
    for v, X in enumerate(ds.views):
        try:
            results.append(solve_view_graph(X, ds.labels, ds.train_mask, config.solver, ds.num_classes))
        except NumericalError as exc:
            raise NumericalError(f"view {v}: {exc}") from exc
    t1 = time.perf_counter()
    fused = fuse_views(ds.views, [r.S for r in results])
    t2 = time.perf_counter()
    weights = compute_node_weights(fused.A_hat, ds.labels, ds.train_mask, ds.num_classes, config.renode)
    t3 = time.perf_counter()
    seconds = {"graphs": t1 - t0, "fusion": t2 - t1, "pagerank": t3 - t2}
    for v, r in enumerate(results):
        log.debug("view %d: %d solver iterations, %.3fs", v, len(r.surrogate_objective_trace), r.seconds)
    return GraphArtifacts(dataset=ds, view_results=results, fused=fused, node_weights=weights, seconds=seconds)


def train_rsgslm(dataset, fused, view_graphs, weights, config):
    """GCN on concatenated soft labels over the fused graph with the three-term loss."""
    features = concat_features(view_graphs)
    operator = propagation_operator(fused, config.add_self_loops)
    w = weights.dense(dataset.n) if isinstance(weights, NodeWeightTable) else weights
    result = fit_gcn(operator, features, fused.L_norm, dataset.labels, _masks(dataset), w, config,
                     num_classes=dataset.num_classes)
    result.method = "rsgslm"
    return result


def run_rsgslm(dataset, config, graphs=None):
    graphs = graphs or prepare_graphs(dataset, config)
    result = train_rsgslm(graphs.dataset, graphs.fused, graphs.view_results, graphs.node_weights, config)
    result.seconds = {**graphs.seconds, **result.seconds}
    return result


def plain_config(config):
    """Same optimizer and architecture, but plain averaged cross-entropy only."""
    return config.with_loss(use_renode_weights=False, use_pseudo=False, use_smooth=False, oracle_pseudo=False)


def train_baseline_xstar(dataset, config):
    """One graph learned on the concatenated views; standard GCN on the raw concatenation."""
    ds = normalize_columns(dataset)
    X = ds.concatenated()
    t0 = time.perf_counter()
    res = solve_view_graph(X, ds.labels, ds.train_mask, config.solver, ds.num_classes)
    graph = from_graph(res.S)
    t1 = time.perf_counter()
    operator = propagation_operator(graph, config.add_self_loops)
    result = fit_gcn(operator, X, graph.L_norm, ds.labels, _masks(ds), np.ones(ds.n), plain_config(config),
                     num_classes=ds.num_classes)
    result.method = "gcn-xstar"
    result.seconds["graphs"] = t1 - t0
    return result


def train_baseline_multi(dataset, config, graphs=None):
    """One standard GCN per view on (X^v, S^v); predictions are averaged."""
    graphs = graphs or prepare_graphs(dataset, config)
    ds = graphs.dataset
    cfg = plain_config(config)
    Zs, seconds = [], 0.0
    per_view = []
    for X, res in zip(ds.views, graphs.view_results):
        graph = from_graph(res.S)
        operator = propagation_operator(graph, config.add_self_loops)
        r = fit_gcn(operator, X, graph.L_norm, ds.labels, _masks(ds), np.ones(ds.n), cfg,
                    num_classes=ds.num_classes)
        Zs.append(r.Z)
        per_view.append(r)
        seconds += r.seconds["training"]
    Z = np.mean(Zs, axis=0)
    return RunResult(
        best_params=[r.best_params for r in per_view],
        best_epoch=max(r.best_epoch for r in per_view),
        best_val_accuracy=accuracy(Z, ds.labels, ds.val_mask),
        test_accuracy=accuracy(Z, ds.labels, ds.test_mask),
        epochs_ran=sum(r.epochs_ran for r in per_view),
        epoch_records=[rec for r in per_view for rec in r.epoch_records],
        Z=Z,
        seconds={"graphs": graphs.seconds["graphs"], "training": seconds},
        method="gcn-multi",
    )


def ablation_configs(config):
    """The eight on/off combinations plus the ground-truth pseudo-label mode, in report order."""
    rows = []
    for i, (smooth, pseudo, renode) in enumerate(ABLATION_ROWS, start=1):
        cfg = config.with_loss(use_smooth=smooth, use_pseudo=pseudo, use_renode_weights=renode, oracle_pseudo=False)
        rows.append((str(i), smooth, pseudo, renode, False, cfg))
    oracle = config.with_loss(use_smooth=True, use_pseudo=True, use_renode_weights=True, oracle_pseudo=True)
    rows.append(("oracle", True, True, True, True, oracle))
    return rows


def run_ablation_suite(dataset, config, graphs=None):
    graphs = graphs or prepare_graphs(dataset, config)
    table = []
    for row, smooth, pseudo, renode, oracle, cfg in ablation_configs(config):
        result = train_rsgslm(graphs.dataset, graphs.fused, graphs.view_results, graphs.node_weights, cfg)
        table.append({
            "row": row, "smooth": smooth, "pseudo": pseudo, "renode": renode, "oracle_pseudo": oracle,
            "seed": config.seed, "val_acc": result.best_val_accuracy, "test_acc": result.test_accuracy,
        })
    return table


def summarize(values):
    values = np.asarray(values, dtype=np.float64)
    mean, std = float(values.mean()), float(values.std())
    return {"mean": mean, "std": std, "runs": int(values.size), "summary": f"{100 * mean:.2f}±{100 * std:.1f}"}


METHODS = ("rsgslm", "gcn-xstar", "gcn-multi", "ablation")


def split_sequence(dataset, spec, runs):
    return [make_split(dataset, SplitSpec(spec.train_per_class, spec.val_per_class, spec.seed + r))
            for r in range(runs)]


def run_repeated(dataset, spec, config, runs=10, methods=("rsgslm", "gcn-xstar", "gcn-multi")):
    """Evaluate methods on the same ``runs`` stratified splits (seeds spec.seed + r).

    Returns ``{"splits": [...], "accuracies": {name: [...]}, "summary": {name: {...}}}``;
    the "ablation" method contributes one entry per ablation row.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown method(s) {sorted(unknown)}")
    accs = {}
    splits = []
    for r, ds in enumerate(split_sequence(dataset, spec, runs)):
        splits.append(ds)
        graphs = None
        if {"rsgslm", "gcn-multi", "ablation"} & set(methods):
            graphs = prepare_graphs(ds, config)
        for method in methods:
            if method == "rsgslm":
                accs.setdefault("rsgslm", []).append(run_rsgslm(ds, config, graphs).test_accuracy)
            elif method == "gcn-xstar":
                accs.setdefault("gcn-xstar", []).append(train_baseline_xstar(ds, config).test_accuracy)
            elif method == "gcn-multi":
                accs.setdefault("gcn-multi", []).append(train_baseline_multi(ds, config, graphs).test_accuracy)
            else:
                for row in run_ablation_suite(ds, config, graphs):
                    accs.setdefault(f"ablation-{row['row']}", []).append(row["test_acc"])
        log.info("split %d/%d done", r + 1, runs)
    return {"splits": splits, "accuracies": accs, "summary": {k: summarize(v) for k, v in accs.items()}}


def sweep_lambdas(graphs, config, values=LAMBDA_GRID):
    rows = []
    for l1 in values:
        for l2 in values:
            cfg = config.with_loss(lambda1=l1, lambda2=l2)
            r = train_rsgslm(graphs.dataset, graphs.fused, graphs.view_results, graphs.node_weights, cfg)
            rows.append({"lambda1": l1, "lambda2": l2, "seed": config.seed,
                         "val_acc": r.best_val_accuracy, "test_acc": r.test_accuracy})
    return rows


def sweep_weight_range(graphs, config, values=WEIGHT_RANGES):
    rows = []
    for delta in values:
        renode = replace(config.renode, w_max=config.renode.w_min + delta)
        cfg = replace(config, renode=renode)
        ds = graphs.dataset
        weights = compute_node_weights(graphs.fused.A_hat, ds.labels, ds.train_mask, ds.num_classes, renode)
        r = train_rsgslm(ds, graphs.fused, graphs.view_results, weights, cfg)
        rows.append({"w_range": delta, "w_min": renode.w_min, "w_max": renode.w_max, "seed": config.seed,
                     "val_acc": r.best_val_accuracy, "test_acc": r.test_accuracy})
    return rows


# ---------------------------------------------------------------- gradient check

@dataclass
class GradCheckInstance:
    operator: np.ndarray
    features: np.ndarray
    L_norm: np.ndarray
    Y: np.ndarray
    Y_prev: np.ndarray
    masks: tuple
    weights: np.ndarray
    params: GcnParams
    epoch: int


def random_instance(n=20, num_views=2, c=3, hidden=5, seed=0, add_self_loops=True, epoch=700):
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(num_views):
        S = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
        np.fill_diagonal(S, 0.0)
        S[np.arange(n), (np.arange(n) + 1) % n] += 0.1
        graphs.append(S / S.sum(axis=1, keepdims=True))
    fused = fuse(graphs, rng.uniform(0.5, 2.0, num_views))
    operator = propagation_operator(fused, add_self_loops)
    features = rng.standard_normal((n, c * num_views))
    labels = np.arange(n) % c
    rng.shuffle(labels)
    train = np.zeros(n, dtype=bool)
    for j in range(c):
        train[np.flatnonzero(labels == j)[:2]] = True
    rest = np.flatnonzero(~train)
    val = np.zeros(n, dtype=bool)
    val[rest[: len(rest) // 3]] = True
    test = ~(train | val)
    Y = np.zeros((n, c))
    Y[train, labels[train]] = 1.0
    Y_prev = rng.dirichlet(np.ones(c), size=n)
    weights = np.where(train, rng.uniform(0.5, 1.0, n), 1.0)
    params = init_params(seed, c * num_views, hidden, c)
    return GradCheckInstance(operator, features, fused.L_norm, Y, Y_prev, (train, val, test), weights, params, epoch)


def instance_loss(inst, params, loss_cfg):
    trace = forward(params, inst.operator, inst.features)
    return total_loss(trace.Z, inst.Y, inst.Y_prev, inst.masks, inst.weights, inst.epoch, loss_cfg, inst.L_norm).total


def finite_difference_grads(inst, loss_cfg, step):
    out = []
    base = inst.params
    for name in ("W0", "W1"):
        W = getattr(base, name)
        G = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            plus, minus = base.copy(), base.copy()
            getattr(plus, name)[idx] += step
            getattr(minus, name)[idx] -= step
            G[idx] = (instance_loss(inst, plus, loss_cfg) - instance_loss(inst, minus, loss_cfg)) / (2 * step)
        out.append(G)
    return GcnParams(*out)


def analytic_grads(inst, loss_cfg):
    _, _, grads = loss_and_grads(inst.params, inst.operator, inst.features, inst.Y, inst.Y_prev, inst.masks,
                                 inst.weights, inst.epoch, loss_cfg, inst.L_norm)
    return grads


def max_relative_error(a, b, floor=1e-8):
    num = np.abs(a - b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(num / den))


def gradient_check(config=None, n=20, num_views=2, c=3, seed=0, step=1e-5):
    """Compare analytic and central-difference gradients for all eight term combinations.

    Returns a dict with one entry per ablation row and the overall maximum.
    """
    base = (config or TrainConfig()).loss
    inst = random_instance(n=n, num_views=num_views, c=c, seed=seed,
                           epoch=min(700, base.max_epochs))
    rows = []
    for i, (smooth, pseudo, renode) in enumerate(ABLATION_ROWS, start=1):
        cfg = replace(base, use_smooth=smooth, use_pseudo=pseudo, use_renode_weights=renode)
        ga = analytic_grads(inst, cfg)
        gf = finite_difference_grads(inst, cfg, step)
        err = max(max_relative_error(ga.W0, gf.W0), max_relative_error(ga.W1, gf.W1))
        rows.append({"row": i, "smooth": smooth, "pseudo": pseudo, "renode": renode, "max_rel_error": err})
    return {"rows": rows, "max_rel_error": max(r["max_rel_error"] for r in rows), "n": n, "step": step}
