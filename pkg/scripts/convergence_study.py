"""Grid and box refinement of the 1D harmonic oscillator against its exact spectrum."""

import argparse

from lochom.effective import EffectiveOperator
from lochom.oscillator import TruncatedDomain, analytic_ho_oracle, convergence_study
from lochom.regions import EffectiveForm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--hessian", type=float, default=2.0)
    ap.add_argument("--k", type=int, default=3)
    args = ap.parse_args()

    op = EffectiveOperator.constant(EffectiveForm.SECOND, 1, b_eff=args.b, hessian=args.hessian)
    exact = [analytic_ho_oracle(args.b, args.hessian, k) for k in range(1, args.k + 1)]
    doms = [TruncatedDomain(L, n) for L in (3.0, 6.0, 12.0) for n in (128, 256, 512, 1024)]
    rep = convergence_study(op, doms, args.k, reference=exact)
    print(f"exact: {exact}")
    for row in rep["rows"]:
        print(f"L={row['L']:5.1f} N={row['N']:5d} h={row['h']:.4f} error_1={row['error'][0]:.3e}")
    for r in rep["refinements"]:
        if "order" in r:
            print(f"L={r['L']:5.1f} h {r['h_coarse']:.4f} -> {r['h_fine']:.4f}: order {r['order']:.3f}")
    print("flags:", rep["flags"])


if __name__ == "__main__":
    main()
