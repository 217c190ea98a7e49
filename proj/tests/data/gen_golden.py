#!/usr/bin/env python3
"""Computes the frozen constants asserted in the C++ tests.

Implements the trigram scorer and the bilinear resampler independently of
the C++ code so the numbers below act as cross-implementation oracles.
Run it and paste the printed values into the tests when they change.
"""
import math
import re

import numpy as np


def word_trigrams(text):
    grams = {}
    for word in re.findall(r"[a-z0-9]+", text.lower()):
        padded = "^" + word + "$"
        for i in range(len(padded) - 2):
            g = padded[i : i + 3]
            grams[g] = grams.get(g, 0) + 1
    return grams


def trigram_cosine(a, b):
    ta, tb = word_trigrams(a), word_trigrams(b)
    if not ta or not tb:
        return 0.0
    dot = sum(ta[g] * tb.get(g, 0) for g in ta)
    na = math.sqrt(sum(v * v for v in ta.values()))
    nb = math.sqrt(sum(v * v for v in tb.values()))
    return dot / (na * nb)


def bilinear(img, ow, oh):
    ih, iw = img.shape[:2]
    out = np.zeros((oh, ow, img.shape[2]), dtype=np.uint8)
    for oy in range(oh):
        sy = min(max((oy + 0.5) * ih / oh - 0.5, 0.0), ih - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, ih - 1)
        fy = sy - y0
        for ox in range(ow):
            sx = min(max((ox + 0.5) * iw / ow - 0.5, 0.0), iw - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, iw - 1)
            fx = sx - x0
            for c in range(img.shape[2]):
                v = (
                    img[y0, x0, c] * (1 - fx) * (1 - fy)
                    + img[y0, x1, c] * fx * (1 - fy)
                    + img[y1, x0, c] * (1 - fx) * fy
                    + img[y1, x1, c] * fx * fy
                )
                out[oy, ox, c] = int(math.floor(v + 0.5))
    return out


def main():
    q = "what color is the car"
    print(f"trigram score({q!r}, 'car')   = {trigram_cosine(q, 'car'):.15f}")
    print(f"trigram score({q!r}, 'zebra') = {trigram_cosine(q, 'zebra'):.15f}")

    checker = np.zeros((2, 2, 3), dtype=np.uint8)
    checker[0, 1] = checker[1, 0] = 255
    up = bilinear(checker, 64, 64)
    feat = bilinear(up, 32, 32).astype(np.float64) / 255.0
    print(f"checkerboard 64->32 feature mean = {feat.mean():.15f}")

    # IoU of (0,0,10,10) and (5,0,10,10) by pixel counting
    grid = np.zeros((20, 20, 2), dtype=bool)
    grid[0:10, 0:10, 0] = True
    grid[0:10, 5:15, 1] = True
    inter = np.logical_and(grid[..., 0], grid[..., 1]).sum()
    union = np.logical_or(grid[..., 0], grid[..., 1]).sum()
    print(f"iou pixels: inter={inter} union={union} iou={inter/union:.15f}")


if __name__ == "__main__":
    main()
