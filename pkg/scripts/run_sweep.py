"""Run the eps-sweep for a config and print a table of the key quantities."""

import argparse
from pathlib import Path

from lochom.asymptotics import run_sweep
from lochom.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "r2_reference.toml"))
    ap.add_argument("--levels", type=int)
    ap.add_argument("--k", type=int)
    args = ap.parse_args()

    cfg = load_config(args.config)
    levels = args.levels or cfg.sweep.levels
    eps = [cfg.sweep.eps0 * 2.0**-j for j in range(levels)]
    res = run_sweep(cfg.problem.spec(), cfg.problem.point(), eps, args.k or cfg.solver.k,
                    cfg.solver.sweep_settings())
    print(f"region {res.scaling.region.value}, effective eta = {res.eta_eff.round(6).tolist()}")
    print(f"{'eps':>10} {'lambda_1':>14} {'eta_1^eps':>10} {'e_1':>9} {'R':>7} {'angle_1':>8}")
    for e, lam, et, err, loc, ang in zip(res.eps, res.eigenvalues, res.eta_eps, res.errors,
                                         res.localization, res.angles):
        print(f"{e:10.6f} {lam[0]:14.6f} {et[0]:10.5f} {err[0]:9.5f} {loc.radius:7.3f} {ang[0]:8.4f}")
    for k, r in enumerate(res.rates, 1):
        print(f"e_{k}: slope {r.slope:.3f} +/- {r.half_width:.3f}")


if __name__ == "__main__":
    main()
