#!/usr/bin/env python3
"""Convert a LINQS-style citation dataset (<name>.content / <name>.cites) into
the plain-text dataset directory layout read by `lrg`.

Usage: convert_linqs.py <content-file> <cites-file> <out-dir>

Paper ids are mapped to dense node ids in .content row order; class names are
mapped to integers in sorted order. Citations referencing papers absent from
.content are dropped (and counted on stderr).
"""
import os
import sys


def main() -> None:
    content, cites, out = sys.argv[1:4]
    os.makedirs(out, exist_ok=True)
    ids, feats, names = [], [], []
    with open(content) as f:
        for line in f:
            tok = line.split()
            if not tok:
                continue
            ids.append(tok[0])
            feats.append(tok[1:-1])
            names.append(tok[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = {c: k for k, c in enumerate(sorted(set(names)))}

    dropped = 0
    with open(cites) as f, open(os.path.join(out, "edges.tsv"), "w") as e:
        e.write("# undirected citation links; node ids index features.csv rows\n")
        for line in f:
            tok = line.split()
            if len(tok) != 2:
                continue
            if tok[0] not in index or tok[1] not in index:
                dropped += 1
                continue
            e.write(f"{index[tok[1]]}\t{index[tok[0]]}\n")
    with open(os.path.join(out, "features.csv"), "w") as f:
        for row in feats:
            f.write(",".join(row) + "\n")
    with open(os.path.join(out, "labels.csv"), "w") as f:
        f.write("# classes: " + " ".join(f"{k}={c}" for c, k in classes.items()) + "\n")
        for name in names:
            f.write(f"{classes[name]}\n")
    print(f"{len(ids)} nodes, {len(classes)} classes, dropped {dropped} links", file=sys.stderr)


if __name__ == "__main__":
    main()
