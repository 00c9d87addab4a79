"""Calibrate the quasimetric against upper bounds for the sub-Riemannian distance."""
import argparse

import numpy as np

from carnot import load_algebra
from carnot.geodesic import cc_upper_bound
from carnot.nets import calibrate_equivalence, quasimetric
from carnot.oscillator import sample_ball


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--group", default="h3")
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--iterations", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    alg = load_algebra(args.group, "floating")
    pts = sample_ball(alg, 1000, 1.0, np.random.default_rng(args.seed))
    cal = calibrate_equivalence(alg, pts, samples=args.pairs, iterations=args.iterations, seed=args.seed)
    print(f"{args.group}: {cal.pairs} feasible pairs, {cal.infeasible} infeasible")
    print(f"c_low * quasi <= cc <= c_high * quasi with c_low={cal.c_low:.4f}, c_high={cal.c_high:.4f}")
    top = np.zeros(alg.n)
    top[-1] = 1.0
    res = cc_upper_bound(alg, np.zeros(alg.n), top)
    print(f"unit top-stratum element: cc <= {res.length:.4f}, quasinorm {quasimetric(alg, np.zeros(alg.n), top):.1f}")


if __name__ == "__main__":
    main()
