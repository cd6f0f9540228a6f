"""Measured eps-power of oscillating integrals int g(x, x/eps) u v dx.

The bound I <= C eps^2 is an upper bound; with smooth fixed u, v the decay is
much faster.  The slope sequence over finer eps shows it steepening.
"""

import argparse

from lochom.asymptotics import mvt_check
from lochom.coefficients import Box


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", action="append", default=None)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--eps0", type=float, default=1 / 8)
    args = ap.parse_args()

    box = Box((-1.0,), (1.0,))
    eps = [args.eps0 * 2.0**-j for j in range(args.levels)]
    for g in args.g or ["sin(2*pi*y1)", "(1 + x1^2)*cos(2*pi*y1)"]:
        rep = mvt_check(g, box, eps)
        print(f"g = {g}: slope {rep.rate.slope:.2f} +/- {rep.rate.half_width:.2f}")
        for e, I, r in zip(rep.eps, rep.integrals, rep.bound_ratio):
            print(f"  eps={e:.5f}  I={I:.3e}  I/eps^2={r:.3e}")


if __name__ == "__main__":
    main()
