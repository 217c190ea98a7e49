#!/usr/bin/env python3
"""Regenerates cluster_corpus.json.

Each case holds four vectors, a distance threshold, and the flat clusters
scipy's average-linkage cosine clustering produces for them. The corpus is
frozen into the repo; the C++ clustering is required to reproduce every
partition exactly. Cases whose pairwise or merge distances fall within
1e-6 of the threshold are discarded so float noise cannot flip a case.
"""
import json
import random

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

OUT = "cluster_corpus.json"
N_CASES = 100
DIM = 8
MARGIN = 1e-6


def canonical(labels):
    remap, out = {}, []
    for l in labels:
        if l not in remap:
            remap[l] = len(remap)
        out.append(remap[l])
    return out


def main():
    rng = random.Random(20240817)
    cases = []
    while len(cases) < N_CASES:
        base = [[rng.uniform(0.05, 1.0) for _ in range(DIM)] for _ in range(4)]
        if rng.random() < 0.5:
            # sparsify some vectors so large cosine distances also occur
            for v in base:
                keep = rng.sample(range(DIM), rng.randint(1, DIM // 2))
                for i in range(DIM):
                    if i not in keep:
                        v[i] = 0.0
        vecs = np.array(base)
        theta = rng.uniform(0.002, 0.35)
        d = pdist(vecs, metric="cosine")
        z = linkage(vecs, method="average", metric="cosine")
        heights = z[:, 2]
        if min(abs(x - theta) for x in list(d) + list(heights)) < MARGIN:
            continue
        labels = canonical(fcluster(z, t=theta, criterion="distance"))
        cases.append(
            {"vectors": vecs.tolist(), "theta": theta, "labels": labels}
        )
    with open(OUT, "w") as f:
        json.dump(cases, f)
    ks = [max(c["labels"]) + 1 for c in cases]
    print(f"{len(cases)} cases, cluster-count histogram:",
          {k: ks.count(k) for k in sorted(set(ks))})


if __name__ == "__main__":
    main()
