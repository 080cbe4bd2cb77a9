#!/usr/bin/env python3
"""Brute-force Hopf-Lax values u(x,T) = min_y cos(2 pi y) + (x - y)^2 / (2T).

Writes the oracle in the initial-data CSV layout `component,ix,value`.
"""
import argparse

import numpy as np


def hopf_lax(n_x, t, candidates, radius):
    x = np.arange(n_x) / n_x
    d = -radius + 2.0 * radius * (np.arange(candidates) + 0.5) / candidates
    out = np.empty(n_x)
    for p, xp in enumerate(x):
        y = xp - d
        out[p] = np.min(np.cos(2.0 * np.pi * y) + d * d / (2.0 * t))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-x", type=int, default=256)
    ap.add_argument("--t", type=float, default=0.25)
    ap.add_argument("--candidates", type=int, default=100000)
    ap.add_argument("--radius", type=float, default=1.0)
    ap.add_argument("--out", default="configs/hopf_lax_oracle.csv")
    args = ap.parse_args()
    values = hopf_lax(args.n_x, args.t, args.candidates, args.radius)
    with open(args.out, "w") as f:
        f.write("component,ix,value\n")
        for p, v in enumerate(values):
            f.write(f"1,{p},{v:.17g}\n")


if __name__ == "__main__":
    main()
