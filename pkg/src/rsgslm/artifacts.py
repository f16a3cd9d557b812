"""On-disk layout of graph-stage outputs for one split.

    <dir>/graphs/view_<v>.csv     learned S^v (dense, row-stochastic)
    <dir>/features/F_<v>.csv      soft labels F^v
    <dir>/fused/S.csv             fused graph
    <dir>/fused/alphas.csv        one smoothness weight per view
    <dir>/renode/weights.csv      node_index,totoro,rank,weight for labeled nodes
    <dir>/split.csv               node_index,role
    <dir>/manifest.json
"""

from pathlib import Path

import numpy as np

from rsgslm.dataset import read_split, write_split
from rsgslm.errors import DatasetError
from rsgslm.fusion import from_graph
from rsgslm.io import FLOAT_FMT, read_json, read_matrix, read_vector, write_matrix, write_vector
from rsgslm.renode import NodeWeightTable
from rsgslm.trainer import GraphArtifacts
from rsgslm.view_graph import ViewGraphResult

MANIFEST = "manifest.json"


def save_graphs(graphs, out_dir):
    """Write every matrix of a GraphArtifacts bundle; returns the list of written paths."""
    out = Path(out_dir)
    paths = []
    for v, res in enumerate(graphs.view_results):
        paths.append(out / "graphs" / f"view_{v}.csv")
        write_matrix(paths[-1], res.S)
        paths.append(out / "features" / f"F_{v}.csv")
        write_matrix(paths[-1], res.F)
    paths.append(out / "fused" / "S.csv")
    write_matrix(paths[-1], graphs.fused.S)
    paths.append(out / "fused" / "alphas.csv")
    write_vector(paths[-1], graphs.fused.alphas)
    paths.append(out / "renode" / "weights.csv")
    write_weights(paths[-1], graphs.node_weights)
    paths.append(out / "split.csv")
    write_split(paths[-1], graphs.dataset)
    return paths


def write_weights(path, table):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([table.node_index, table.totoro, table.rank, table.weight])
    np.savetxt(path, data, fmt=["%d", FLOAT_FMT, "%d", FLOAT_FMT], delimiter=",",
               header="node_index,totoro,rank,weight", comments="")


def read_weights(path):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return NodeWeightTable(node_index=data[:, 0].astype(np.int64), totoro=data[:, 1],
                           rank=data[:, 2].astype(np.int64), weight=data[:, 3])


def load_graphs(normalized_dataset, in_dir):
    """Rebuild GraphArtifacts for a column-normalized dataset from ``in_dir``.

    The split stored next to the graphs is attached to the dataset, so the
    caller need not regenerate it.
    """
    src = Path(in_dir)
    if not (src / MANIFEST).is_file():
        raise DatasetError(f"no graph artifacts in {src}")
    manifest = read_json(src / MANIFEST)
    ds = normalized_dataset.with_masks(*read_split(src / "split.csv", normalized_dataset.n))
    results = []
    for v in range(ds.num_views):
        results.append(ViewGraphResult(S=read_matrix(src / "graphs" / f"view_{v}.csv"),
                                       F=read_matrix(src / "features" / f"F_{v}.csv"),
                                       Q=None, b=None,
                                       surrogate_objective_trace=manifest.get("objective_traces", [[]] * ds.num_views)[v]))
    fused = from_graph(read_matrix(src / "fused" / "S.csv"), read_vector(src / "fused" / "alphas.csv"))
    weights = read_weights(src / "renode" / "weights.csv")
    return GraphArtifacts(dataset=ds, view_results=results, fused=fused, node_weights=weights,
                          seconds=manifest.get("seconds", {}))
