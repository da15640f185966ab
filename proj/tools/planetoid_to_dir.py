#!/usr/bin/env python3
"""Export a Planetoid dump (ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index})
into the dataset directory layout read by `ccassg`, with the public split.

    python3 tools/planetoid_to_dir.py --raw planetoid/data --name cora --out data/cora

Node order follows the usual reconstruction: allx rows, then the test rows
placed at their test.index positions. Citeseer's test index has gaps; those
nodes get all-zero features and label 0 and sit in no split.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def build(raw: Path, name: str):
    tx, allx = (dense(load(raw, name, p)) for p in ("tx", "allx"))
    y, ty, ally = (np.asarray(load(raw, name, p)) for p in ("y", "ty", "ally"))
    graph = load(raw, name, "graph")
    test_index = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_index)

    num_nodes = max(allx.shape[0] + (test_sorted.max() - test_sorted.min() + 1), max(graph) + 1)
    features = np.zeros((num_nodes, allx.shape[1]))
    labels = np.zeros((num_nodes, ally.shape[1]))
    features[: allx.shape[0]] = allx
    labels[: ally.shape[0]] = ally
    features[test_index] = tx
    labels[test_index] = ty

    edges = set()
    for u, neighbours in graph.items():
        for v in neighbours:
            if u != v and u < num_nodes and v < num_nodes:
                edges.add((min(u, v), max(u, v)))

    split = {
        "train": range(y.shape[0]),
        "val": range(y.shape[0], y.shape[0] + 500),
        "test": test_sorted.tolist(),
    }
    return features, labels.argmax(axis=1), sorted(edges), split


def write(out: Path, name: str, features, labels, edges, split) -> None:
    (out / "splits").mkdir(parents=True, exist_ok=True)
    num_classes = int(labels.max()) + 1
    (out / "meta.tsv").write_text(
        f"name\t{name}\nnum_nodes\t{features.shape[0]}\nnum_features\t{features.shape[1]}\nnum_classes\t{num_classes}\n"
    )
    (out / "edges.tsv").write_text("".join(f"{u}\t{v}\n" for u, v in edges))
    with open(out / "features.tsv", "w") as f:
        for row in features:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")
    (out / "labels.tsv").write_text("".join(f"{int(c)}\n" for c in labels))
    with open(out / "splits" / "public.tsv", "w") as f:
        for role, ids in split.items():
            for i in ids:
                f.write(f"{role}\t{i}\n")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--raw", type=Path, required=True, help="directory holding the ind.<name>.* files")
    ap.add_argument("--name", required=True, help="dataset name, e.g. cora")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    features, labels, edges, split = build(args.raw, args.name)
    write(args.out, args.name, features, labels, edges, split)
    print(f"nodes={features.shape[0]} edges(directed)={2 * len(edges)} classes={labels.max() + 1} "
          f"features={features.shape[1]} train={len(split['train'])} val={len(split['val'])} test={len(split['test'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
