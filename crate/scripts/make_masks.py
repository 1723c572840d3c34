#!/usr/bin/env python3
"""Write a seeded few-label split to <dataset>/masks.csv.

Within the largest connected component: `per_class` training nodes per class
and `n_val` validation nodes; every other node (including nodes outside the
component) is tagged test.

usage: make_masks.py DATASET_DIR [--per-class 20] [--val 500] [--seed 0]
"""
import argparse
import os

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dataset")
    ap.add_argument("--per-class", type=int, default=20)
    ap.add_argument("--val", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    labels = np.loadtxt(os.path.join(args.dataset, "labels.csv"), dtype=int, comments="#")
    n = len(labels)
    edges = np.loadtxt(os.path.join(args.dataset, "edges.tsv"), dtype=int, comments="#")
    adj = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    sizes = np.bincount(comp)
    lcc = np.flatnonzero(comp == np.argmax(sizes))

    rng = np.random.default_rng(args.seed)
    tags = np.array(["test"] * n, dtype=object)
    chosen = []
    for c in np.unique(labels[lcc]):
        idx = lcc[labels[lcc] == c]
        chosen.extend(rng.permutation(idx)[: args.per_class])
    tags[chosen] = "train"
    rest = rng.permutation(np.setdiff1d(lcc, chosen))
    tags[rest[: args.val]] = "val"
    with open(os.path.join(args.dataset, "masks.csv"), "w") as f:
        f.write(f"# seed {args.seed}: {args.per_class} train per class, {args.val} val, rest test\n")
        for t in tags:
            f.write(t + "\n")


if __name__ == "__main__":
    main()
