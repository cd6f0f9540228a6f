"""Fast self-verification suites run by ``lochom check``."""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.linalg as sla

from .cells import TorusGrid, solve_cell_fourth, solve_cell_mixed, solve_cell_second
from .coefficients import find_min_hessian, make_spec, verify_hypotheses
from .direct import DirectProblem, assemble_direct, solve_direct
from .effective import EffectiveOperator, assemble_a_eff, assemble_b_eff
from .oscillator import TruncatedDomain, analytic_ho_oracle, solve_oscillator
from .regions import EffectiveForm, ParameterPoint, Region, scaling

HARMONIC = "1/(2 + sin(2*pi*y1))"


def _record(name, passed, **detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _harmonic_means():
    spec = make_spec(1, [(-1, 1)], a=HARMONIC, b=HARMONIC, c="1 + x1^2")
    grid = TorusGrid(1, 32)
    a = assemble_a_eff(solve_cell_fourth(spec, [0.0], grid), spec).value[0, 0]
    b5 = assemble_b_eff(Region.R5, solve_cell_second(spec, [0.0], grid), spec, [0.0]).value[0, 0]
    b3 = assemble_b_eff(Region.R3, None, spec, [0.0], grid).value[0, 0]
    ok = abs(a - 0.5) <= 1e-8 and abs(b5 - 0.5) <= 1e-8 and abs(b3 - 1 / math.sqrt(3)) <= 1e-8
    return _record("harmonic_mean_identities", ok, a_eff=a, b_eff_R5=b5, b_eff_R3=b3)


def _energy_forms(cfg=None):
    if cfg is not None:
        spec = cfg.problem.spec()
        x = find_min_hessian(spec).x_star
    else:
        spec = make_spec(2, [(-1, 1), (-1, 1)],
                         a="1 + 0.3*sin(2*pi*y1)*cos(2*pi*y2)",
                         b="2 + cos(2*pi*y1) + 0.5*sin(2*pi*(y1 + y2))", c="1 + x1^2 + x2^2")
        x = np.zeros(2)
    grid = TorusGrid(spec.dim, 32 if spec.dim == 1 else 24)
    a = assemble_a_eff(solve_cell_fourth(spec, x, grid), spec)
    b4 = assemble_b_eff(Region.R4, solve_cell_mixed(spec, x, grid), spec, x)
    b5 = assemble_b_eff(Region.R5, solve_cell_second(spec, x, grid), spec, x)
    gaps = {"a_eff": a.energy_gap, "b_eff_R4": b4.energy_gap, "b_eff_R5": b5.energy_gap}
    return _record("energy_form_equivalence", max(gaps.values()) <= 1e-10, **gaps)


def _oscillator():
    op = EffectiveOperator.constant(EffectiveForm.SECOND, 1, b_eff=1.0, hessian=2.0)
    res = solve_oscillator(op, TruncatedDomain(12, 1024), 4)
    exact = [analytic_ho_oracle(1.0, 2.0, k) for k in range(1, 5)]
    err = float(np.max(np.abs(res.values - exact)))
    return _record("harmonic_oscillator_oracle", err <= 1e-5, max_error=err, eigenvalues=res.values)


def _dense():
    spec = make_spec(1, [(-1, 1)], a="1", b="1", c="1 + x1^2")
    prob = DirectProblem(spec, ParameterPoint.of("1/3", 1), 1 / 8, 256)
    res = solve_direct(prob, 5)
    A = assemble_direct(prob).toarray()
    ref = np.sort(1.0 / sla.eigvalsh(sla.cho_solve(sla.cho_factor(A), np.eye(len(A)))))[:5]
    rel = float(np.max(np.abs(res.values - ref) / ref))
    return _record("dense_oracle", rel <= 1e-9, max_relative_difference=rel)


def _hypotheses(cfg):
    rep = verify_hypotheses(cfg.problem.spec())
    return _record("hypotheses", rep.ok, **rep.to_dict())


def run_checks(cfg=None) -> list[dict]:
    checks = [_harmonic_means, _oscillator, _dense, lambda: _energy_forms(None)]
    if cfg is not None:
        checks = [lambda: _hypotheses(cfg), lambda: _energy_forms(cfg),
                  lambda: _record("region_supported", scaling(cfg.problem.point(), cfg.problem.dim) is not None)] + checks
    out = []
    for check in checks:
        t0 = time.perf_counter()
        try:
            rec = check()
        except Exception as exc:  # a crashing check is a failed check
            rec = _record(getattr(check, "__name__", "check"), False, error=f"{type(exc).__name__}: {exc}")
        rec["seconds"] = round(time.perf_counter() - t0, 3)
        out.append(rec)
    return out
