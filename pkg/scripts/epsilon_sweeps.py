"""Distortion and Hoelder-constant sweeps over epsilon on the h3 lattice ball.

Runs the Assouad baseline (with and without coordinate reuse across scales)
and the circle Weierstrass family (orthogonal blocks and shared coordinates),
then prints the fitted log-log slopes and writes one CSV per family.
"""
import argparse
import csv
import math
from pathlib import Path

import numpy as np

from carnot import load_algebra
from carnot.embedding import LacunaryFamily, assemble_weierstrass, assouad_baseline
from carnot.harness import fit_loglog_slope, generate_heisenberg_ball, sweep_epsilon


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, default=8.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[2.0**-j for j in range(2, 7)])
    ap.add_argument("--out", default="results/sweeps")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud = generate_heisenberg_ball(args.R)
    idx = np.arange(len(cloud))
    alg = load_algebra("h3", "floating")

    def weierstrass(block):
        def build(e):
            fam = LacunaryFamily(alg, 2.0, 0, int(math.ceil(40.0 / e)), block_orthogonal=block)
            return assemble_weierstrass(fam, e)(cloud.points)
        return build

    families = {
        "assouad-period2": (lambda e: assouad_baseline(cloud, e, period=2)(idx), "distortion"),
        "assouad-per-scale": (lambda e: assouad_baseline(cloud, e, period=10**6)(idx), "distortion"),
        "weierstrass-block": (weierstrass(True), "holder"),
        "weierstrass-shared": (weierstrass(False), "holder"),
    }
    print(f"cloud: {len(cloud)} lattice points, R={args.R:g}")
    for name, (builder, key) in families.items():
        rows = sweep_epsilon(cloud, builder, args.eps)
        fit = fit_loglog_slope(rows, key=key)
        with (out / f"{name}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "distortion", "holder", "ok", "note"])
            for r in rows:
                w.writerow([r.eps, r.distortion, r.holder, r.ok, r.error])
        print(f"{name:20s} log({key}) vs log(1/eps): slope {fit.slope:.3f} +/- {fit.stderr:.3f} "
              f"({fit.used} rows)")


if __name__ == "__main__":
    main()
