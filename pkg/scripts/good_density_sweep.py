#!/usr/bin/env python3
"""Coarse good-site density as the reach-count budget M is tightened.

Under the shared coupling a smaller M can only turn good sites bad, so
the density column must be non-increasing top to bottom.  Useful for
picking an M that puts the good density where a renormalization argument
wants it.

Usage:
    python scripts/good_density_sweep.py --p 0.3 --eps 0.25 --M 110,83,60
"""

import argparse

from sdperc.edgefield import SeedKey
from sdperc.events import CoarseParams, coarse_good_field


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--p-c-input", type=float, default=0.5)
    ap.add_argument("--ell", type=int, default=1)
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--M", default="110,83,60",
                    help="comma-separated budgets, largest first")
    ap.add_argument("--grid-radius", type=int, default=2)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    budgets = [int(v) for v in args.M.split(",")]
    key = SeedKey(args.seed, 0)
    print(f"# p={args.p} q={args.p_c_input + args.eps} ell={args.ell} "
          f"L={args.L} grid_radius={args.grid_radius} seed={args.seed}")
    print("M  good_density")
    prev = None
    for M in sorted(budgets, reverse=True):
        params = CoarseParams(dimension=2, p=args.p, eps=args.eps,
                              p_c_input=args.p_c_input, ell=args.ell,
                              L=args.L, M=M)
        field = coarse_good_field(key, params, args.grid_radius)
        flag = ""
        if prev is not None and field.density > prev:
            flag = "  <- monotonicity violated, investigate"
        print(f"{M}  {field.density:.3f}{flag}")
        prev = field.density


if __name__ == "__main__":
    main()
