"""Multi-view datasets: loading, validation, normalization, splits and synthesis.

On-disk layout::

    <root>/views/view_0.csv ... view_{V-1}.csv   rows = samples, comma separated
    <root>/labels.csv                             one integer per line
    <root>/splits/<name>.csv                      optional, header node_index,role
"""

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rsgslm.errors import DatasetError
from rsgslm.io import read_matrix, read_vector, write_matrix

ROLES = ("train", "val", "test")
_VIEW_RE = re.compile(r"^view_(\d+)\.csv$")


@dataclass(frozen=True)
class MultiViewDataset:
    views: list
    labels: np.ndarray
    num_classes: int
    train_mask: np.ndarray = None
    val_mask: np.ndarray = None
    test_mask: np.ndarray = None
    name: str = "dataset"

    def __post_init__(self):
        validate(self)

    @property
    def n(self):
        return int(self.labels.shape[0])

    @property
    def num_views(self):
        return len(self.views)

    @property
    def dims(self):
        return tuple(int(v.shape[1]) for v in self.views)

    @property
    def has_split(self):
        return self.train_mask is not None

    def one_hot(self):
        Y = np.zeros((self.n, self.num_classes))
        Y[np.arange(self.n), self.labels] = 1.0
        return Y

    def concatenated(self):
        return np.hstack(self.views)

    def with_masks(self, train, val, test):
        return replace(self, train_mask=train, val_mask=val, test_mask=test)


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int
    val_per_class: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < 1:
            raise DatasetError("train_per_class must be >= 1")
        if self.val_per_class < 0:
            raise DatasetError("val_per_class must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    """Class-centroid generator; each view is a random linear rendering plus noise."""

    n: int
    c: int
    num_views: int
    dims: tuple
    spread: tuple = None
    noise: tuple = None
    seed: int = 0
    latent_dim: int = None

    def __post_init__(self):
        if self.c < 1 or self.num_views < 1:
            raise DatasetError("c and num_views must be positive")
        if self.n < self.c:
            raise DatasetError(f"n={self.n} < c={self.c}: some class would be empty")
        if len(self.dims) != self.num_views:
            raise DatasetError("dims must list one width per view")
        for name in ("spread", "noise"):
            value = getattr(self, name)
            if value is not None and len(value) != self.num_views:
                raise DatasetError(f"{name} must list one value per view")


def validate(ds):
    if len(ds.views) < 1:
        raise DatasetError("no views found")
    labels = np.asarray(ds.labels)
    if labels.ndim != 1:
        raise DatasetError("labels must be a vector")
    n = labels.shape[0]
    for v, X in enumerate(ds.views):
        if X.ndim != 2:
            raise DatasetError(f"view {v} is not a matrix")
        if X.shape[0] != n:
            raise DatasetError(f"view {v} has {X.shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(X)):
            raise DatasetError(f"view {v} contains non-finite values")
    if ds.num_classes < 2:
        raise DatasetError("need at least 2 classes")
    if n and (labels.min() < 0 or labels.max() >= ds.num_classes):
        raise DatasetError("labels outside [0, num_classes)")
    masks = (ds.train_mask, ds.val_mask, ds.test_mask)
    if all(m is None for m in masks):
        return
    if any(m is None for m in masks):
        raise DatasetError("train/val/test masks must be given together")
    for m in masks:
        if m.shape != (n,) or m.dtype != bool:
            raise DatasetError("masks must be boolean vectors of length n")
    if np.any(ds.train_mask & ds.val_mask) or np.any(ds.train_mask & ds.test_mask) or np.any(ds.val_mask & ds.test_mask):
        raise DatasetError("masks overlap")
    missing = set(range(ds.num_classes)) - set(labels[ds.train_mask].tolist())
    if missing:
        raise DatasetError(f"train mask has no node of class(es) {sorted(missing)}")


def load_dataset(root_dir, split=None):
    """Read a dataset directory; labels are remapped to 0..c-1.

    ``split`` names a file under ``splits/`` to attach masks from.
    """
    root = Path(root_dir)
    view_dir = root / "views"
    found = {}
    if view_dir.is_dir():
        for path in view_dir.iterdir():
            m = _VIEW_RE.match(path.name)
            if m:
                found[int(m.group(1))] = path
    if not found:
        raise DatasetError(f"no views found in {view_dir}")
    if sorted(found) != list(range(len(found))):
        raise DatasetError(f"view files must be numbered contiguously from 0, got {sorted(found)}")
    views = [read_matrix(found[v]) for v in range(len(found))]
    n_rows = {X.shape[0] for X in views}
    if len(n_rows) != 1:
        raise DatasetError(f"mismatched row counts across views: {[X.shape[0] for X in views]}")
    raw = read_vector(root / "labels.csv", dtype=np.float64)
    if not np.all(raw == np.round(raw)):
        raise DatasetError("labels.csv must hold integers")
    if raw.shape[0] != views[0].shape[0]:
        raise DatasetError(f"labels.csv has {raw.shape[0]} entries but views have {views[0].shape[0]} rows")
    classes, labels = np.unique(raw.astype(np.int64), return_inverse=True)
    ds = MultiViewDataset(views=views, labels=labels.astype(np.int64), num_classes=len(classes), name=root.name)
    if split is not None:
        ds = attach_split(ds, read_split(root / "splits" / f"{split}.csv", ds.n))
    return ds


def save_dataset(ds, root_dir, split_name=None):
    root = Path(root_dir)
    (root / "views").mkdir(parents=True, exist_ok=True)
    for v, X in enumerate(ds.views):
        write_matrix(root / "views" / f"view_{v}.csv", X)
    np.savetxt(root / "labels.csv", ds.labels, fmt="%d")
    if split_name is not None and ds.has_split:
        write_split(root / "splits" / f"{split_name}.csv", ds)
    return root


def write_split(path, ds):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    roles = split_roles(ds)
    with open(path, "w") as fh:
        fh.write("node_index,role\n")
        for i, role in enumerate(roles):
            fh.write(f"{i},{role}\n")


def split_roles(ds):
    roles = np.full(ds.n, "", dtype=object)
    roles[ds.train_mask] = "train"
    roles[ds.val_mask] = "val"
    roles[ds.test_mask] = "test"
    return roles


def read_split(path, n):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing split file: {path}")
    masks = {role: np.zeros(n, dtype=bool) for role in ROLES}
    lines = path.read_text().strip().splitlines()
    if not lines or lines[0].strip() != "node_index,role":
        raise DatasetError(f"{path}: expected header 'node_index,role'")
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            idx, role = line.strip().split(",")
            idx = int(idx)
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: malformed row {line!r}") from exc
        if role not in masks or not 0 <= idx < n:
            raise DatasetError(f"{path}:{lineno}: bad row {line!r}")
        masks[role][idx] = True
    return masks["train"], masks["val"], masks["test"]


def attach_split(ds, masks):
    return ds.with_masks(*masks)


def normalize_columns(ds):
    """Scale every column of every view to unit Euclidean norm; zero columns stay zero."""
    return replace(ds, views=[_unit_columns(X) for X in ds.views])


def _unit_columns(X):
    norms = np.linalg.norm(X, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return X / safe


def make_split(ds, spec):
    """Stratified random split: exact per-class train/val counts, remainder test."""
    rng = np.random.default_rng(spec.seed)
    train = np.zeros(ds.n, dtype=bool)
    val = np.zeros(ds.n, dtype=bool)
    for j in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == j)
        need = spec.train_per_class + spec.val_per_class
        if need > members.size:
            raise DatasetError(
                f"class {j} has {members.size} nodes, cannot draw {spec.train_per_class} train + {spec.val_per_class} val"
            )
        picked = rng.choice(members, size=need, replace=False)
        train[picked[: spec.train_per_class]] = True
        val[picked[spec.train_per_class:]] = True
    test = ~(train | val)
    return ds.with_masks(train, val, test)


def generate_synthetic(spec):
    rng = np.random.default_rng(spec.seed)
    latent_dim = spec.latent_dim or spec.c
    spread = spec.spread or (1.0,) * spec.num_views
    noise = spec.noise or (0.1,) * spec.num_views
    labels = np.arange(spec.n) % spec.c
    rng.shuffle(labels)
    centroids = rng.standard_normal((spec.c, latent_dim))
    views = []
    for v in range(spec.num_views):
        mixing = rng.standard_normal((latent_dim, spec.dims[v])) / np.sqrt(latent_dim)
        clean = spread[v] * centroids[labels] @ mixing
        views.append(clean + noise[v] * rng.standard_normal(clean.shape))
    return MultiViewDataset(views=views, labels=labels.astype(np.int64), num_classes=spec.c, name="synthetic")


def benchmark_spec():
    """The pinned 3-view benchmark: wide views keep feature distances on the same
    scale as the label-smoothness term at the default solver settings."""
    return SynthSpec(n=300, c=3, num_views=3, dims=(400, 300, 200), noise=(4.0, 4.0, 4.0), seed=0)


BENCHMARK_SPLIT = SplitSpec(train_per_class=5, val_per_class=5, seed=0)
