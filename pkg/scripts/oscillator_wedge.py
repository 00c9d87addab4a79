"""Wedge of the pasted Veronese map: full map versus the covering color block alone."""
import argparse

import numpy as np

from carnot import load_algebra
from carnot.oscillator import pasted_oscillator_on_ball, sample_ball


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--group", default="h3")
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--radius", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    alg = load_algebra(args.group, "floating")
    pts = sample_ball(alg, args.samples, args.radius, np.random.default_rng(args.seed))
    osc, coloring = pasted_oscillator_on_ball(alg, pts, args.radius, seed=args.seed)
    full = osc.wedge_lower_bound(pts)
    block = osc.covering_block_wedge(pts)
    print(f"{len(coloring.net)} centers, {osc.n_colors} colors, {osc.dim} coordinates")
    for name, w in (("full map", full), ("covering block", block)):
        q = np.quantile(w, [0.0, 0.1, 0.5])
        print(f"{name:15s} min {q[0]:.4g}  p10 {q[1]:.4g}  median {q[2]:.4g}")


if __name__ == "__main__":
    main()
