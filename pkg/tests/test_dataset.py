import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import cdist

from rsgslm.dataset import (
    MultiViewDataset,
    SplitSpec,
    SynthSpec,
    benchmark_spec,
    generate_synthetic,
    load_dataset,
    make_split,
    normalize_columns,
    read_split,
    save_dataset,
    write_split,
)
from rsgslm.errors import DatasetError


def _tiny(n=6, c=2):
    rng = np.random.default_rng(0)
    return MultiViewDataset(views=[rng.standard_normal((n, 3)), rng.standard_normal((n, 2))],
                            labels=np.arange(n) % c, num_classes=c)


def test_handwritten_layout_loads(tmp_path):
    dims = (240, 76, 216, 47, 64, 6)
    rng = np.random.default_rng(1)
    labels = np.repeat(np.arange(10), 200)
    ds = MultiViewDataset(views=[rng.random((2000, d)) for d in dims], labels=labels, num_classes=10)
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.num_views == 6
    assert back.dims == dims
    assert back.n == 2000 and back.num_classes == 10


def test_empty_view_dir_reports_no_views(tmp_path):
    (tmp_path / "views").mkdir()
    (tmp_path / "labels.csv").write_text("0\n1\n")
    with pytest.raises(DatasetError, match="no views found"):
        load_dataset(tmp_path)


def test_round_trip_is_bit_exact(tmp_path):
    ds = make_split(_tiny(), SplitSpec(1, 1, seed=3))
    save_dataset(ds, tmp_path, split_name="s0")
    back = load_dataset(tmp_path, split="s0")
    for a, b in zip(ds.views, back.views):
        assert np.array_equal(a, b)
    assert np.array_equal(ds.labels, back.labels)
    for a, b in zip((ds.train_mask, ds.val_mask, ds.test_mask), (back.train_mask, back.val_mask, back.test_mask)):
        assert np.array_equal(a, b)


def test_labels_are_remapped_to_contiguous_range(tmp_path):
    (tmp_path / "views").mkdir()
    np.savetxt(tmp_path / "views" / "view_0.csv", np.eye(4), delimiter=",")
    (tmp_path / "labels.csv").write_text("7\n3\n7\n10\n")
    ds = load_dataset(tmp_path)
    assert ds.labels.tolist() == [1, 0, 1, 2]
    assert ds.num_classes == 3


def test_mismatched_rows_rejected(tmp_path):
    (tmp_path / "views").mkdir()
    np.savetxt(tmp_path / "views" / "view_0.csv", np.ones((4, 2)), delimiter=",")
    np.savetxt(tmp_path / "views" / "view_1.csv", np.ones((3, 2)), delimiter=",")
    (tmp_path / "labels.csv").write_text("0\n1\n0\n1\n")
    with pytest.raises(DatasetError, match="row counts"):
        load_dataset(tmp_path)


def test_non_numeric_cell_rejected(tmp_path):
    (tmp_path / "views").mkdir()
    (tmp_path / "views" / "view_0.csv").write_text("1,2\n3,abc\n")
    (tmp_path / "labels.csv").write_text("0\n1\n")
    with pytest.raises(DatasetError, match="non-numeric"):
        load_dataset(tmp_path)


def test_label_length_mismatch_rejected(tmp_path):
    (tmp_path / "views").mkdir()
    np.savetxt(tmp_path / "views" / "view_0.csv", np.ones((3, 2)), delimiter=",")
    (tmp_path / "labels.csv").write_text("0\n1\n")
    with pytest.raises(DatasetError, match="labels.csv has 2"):
        load_dataset(tmp_path)


def test_constant_column_normalizes_to_inverse_sqrt_n():
    n = 9
    ds = MultiViewDataset(views=[np.full((n, 1), 3.7)], labels=np.arange(n) % 2, num_classes=2)
    out = normalize_columns(ds).views[0]
    assert np.allclose(out, 1 / np.sqrt(n), atol=1e-15)


def test_zero_column_stays_zero():
    X = np.column_stack([np.zeros(5), np.arange(5.0)])
    out = normalize_columns(MultiViewDataset(views=[X], labels=np.arange(5) % 2, num_classes=2)).views[0]
    assert np.all(out[:, 0] == 0) and not np.any(np.isnan(out))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (7, 4), elements=st.floats(-1e3, 1e3)))
def test_normalized_columns_have_unit_norm_and_idempotent(X):
    ds = MultiViewDataset(views=[X], labels=np.arange(7) % 2, num_classes=2)
    once = normalize_columns(ds)
    norms = np.linalg.norm(once.views[0], axis=0)
    nonzero = np.linalg.norm(X, axis=0) > 0
    assert np.allclose(norms[nonzero], 1.0, atol=1e-12)
    twice = normalize_columns(once)
    assert np.allclose(twice.views[0], once.views[0], atol=1e-12)


def test_orl_sized_split_counts():
    labels = np.repeat(np.arange(40), 10)
    ds = MultiViewDataset(views=[np.zeros((400, 1))], labels=labels, num_classes=40)
    s = make_split(ds, SplitSpec(3, 2, seed=0))
    assert (s.train_mask.sum(), s.val_mask.sum(), s.test_mask.sum()) == (120, 80, 200)


def test_infeasible_split_rejected():
    with pytest.raises(DatasetError):
        make_split(_tiny(n=6, c=2), SplitSpec(4, 0))


def test_same_seed_same_masks():
    a = make_split(_tiny(), SplitSpec(1, 1, seed=5))
    b = make_split(_tiny(), SplitSpec(1, 1, seed=5))
    assert np.array_equal(a.train_mask, b.train_mask) and np.array_equal(a.val_mask, b.val_mask)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 3), st.integers(0, 10_000))
def test_split_is_stratified_partition(c, tr, va, seed):
    labels = np.repeat(np.arange(c), 8)
    ds = MultiViewDataset(views=[np.zeros((labels.size, 1))], labels=labels, num_classes=c)
    s = make_split(ds, SplitSpec(tr, va, seed))
    total = s.train_mask.astype(int) + s.val_mask + s.test_mask
    assert np.all(total == 1)
    for j in range(c):
        assert s.train_mask[labels == j].sum() == tr
        assert s.val_mask[labels == j].sum() == va


def test_split_file_round_trip(tmp_path):
    s = make_split(_tiny(), SplitSpec(1, 1, seed=2))
    write_split(tmp_path / "s.csv", s)
    assert (tmp_path / "s.csv").read_text().startswith("node_index,role\n")
    masks = read_split(tmp_path / "s.csv", s.n)
    assert all(np.array_equal(a, b) for a, b in zip(masks, (s.train_mask, s.val_mask, s.test_mask)))


def test_masks_must_be_disjoint():
    ds = _tiny()
    m = np.zeros(ds.n, dtype=bool)
    m[:2] = True
    with pytest.raises(DatasetError, match="overlap"):
        ds.with_masks(m, m.copy(), ~m)


def test_train_mask_must_cover_every_class():
    ds = _tiny()
    train = np.zeros(ds.n, dtype=bool)
    train[0] = True  # class 0 only
    with pytest.raises(DatasetError, match="class"):
        ds.with_masks(train, np.zeros(ds.n, dtype=bool), ~train)


def test_synthetic_is_separable_by_nearest_neighbour():
    ds = generate_synthetic(SynthSpec(n=300, c=3, num_views=3, dims=(20, 15, 10), noise=(0.1,) * 3, seed=0))
    assert ds.num_views == 3 and all(X.shape[0] == 300 for X in ds.views)
    X = ds.concatenated()
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    acc = np.mean(ds.labels[D.argmin(axis=1)] == ds.labels)
    assert acc > 0.90


def test_zero_noise_gives_identical_rows_within_class():
    ds = generate_synthetic(SynthSpec(n=30, c=3, num_views=2, dims=(4, 5), noise=(0.0, 0.0), seed=1))
    for X in ds.views:
        for j in range(3):
            rows = X[ds.labels == j]
            assert np.allclose(rows, rows[0], atol=0)


def test_seeds_change_values_not_shapes():
    a = generate_synthetic(SynthSpec(n=20, c=2, num_views=2, dims=(3, 4), seed=0))
    b = generate_synthetic(SynthSpec(n=20, c=2, num_views=2, dims=(3, 4), seed=1))
    assert a.dims == b.dims
    assert not np.allclose(a.views[0], b.views[0])


def test_synth_spec_rejects_n_below_c():
    with pytest.raises(DatasetError):
        SynthSpec(n=2, c=3, num_views=1, dims=(2,))


def test_every_class_nonempty_when_n_equals_c():
    ds = generate_synthetic(SynthSpec(n=4, c=4, num_views=1, dims=(2,), seed=3))
    assert sorted(ds.labels.tolist()) == [0, 1, 2, 3]


def test_benchmark_spec_shape():
    spec = benchmark_spec()
    assert (spec.n, spec.c, spec.num_views) == (300, 3, 3)
    assert sum(spec.dims) >= 40 * spec.c * spec.num_views
