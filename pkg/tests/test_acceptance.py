"""Acceptance criteria, one check per criterion.

Run with pytest (a summary line per criterion is printed at the end of the
session) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import itertools
import sys
import time

import numpy as np
import pytest

from lattice_semiconj.examples import BumpSpec, conjugated_action, sanov_twist, standard_action
from lattice_semiconj.semiconj import solve_full
from lattice_semiconj.spectral import IntMatrix, weak_hyperbolicity_certificate
from lattice_semiconj.torusmap import grid_points
from lattice_semiconj.verify import (
    cocycle_identity_residual,
    functional_equation_residual,
    induced_h1,
    orbit_growth,
    tau_analysis,
    tau_sample_points,
)

RES = 256
AMP = 0.05

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> tuple[bool, str]:
    RESULTS[n] = (bool(ok), detail)
    return bool(ok), detail


@functools.lru_cache
def oracle(res: int = RES):
    t0 = time.perf_counter()
    orc = conjugated_action(standard_action(2, "sl2_sanov"), BumpSpec.default(2, AMP), res)
    result = solve_full(orc.spec, res=res)
    return orc, result, time.perf_counter() - t0


@functools.lru_cache
def twist():
    t0 = time.perf_counter()
    result = solve_full(sanov_twist(BumpSpec.default(2, AMP), RES), res=RES)
    return result, time.perf_counter() - t0


def oracle_error(res: int) -> float:
    """Sup distance between computed psi and the true conjugacy on grid and random points."""
    orc, result, _ = oracle(res)
    eta = orc.eta
    pts = np.vstack([grid_points((res, res)), tau_sample_points((res, res))])
    return float(np.abs(result.psi_lift(pts) - (pts + eta(pts))).max())


def criterion_1():
    lines, ok = [], True
    for n, preset, res in ((2, "sl2_sanov", 256), (3, "sln_elementary", 64)):
        t0 = time.perf_counter()
        r = solve_full(standard_action(n, preset), res=res)
        dt = time.perf_counter() - t0
        sup = r.phi2.sup_norm()
        ok &= r.ok and sup <= 1e-12 and dt < 5.0
        lines.append(f"{preset} |phi2|={sup:.1e} in {dt:.2f}s")
    return record(1, ok, "; ".join(lines) + " (need <=1e-12, <5s)")


def criterion_2():
    _, result, dt = oracle()
    err = oracle_error(RES)
    tail = max(result.certified_tail_bounds)
    return record(2, err <= 1e-3 and dt < 60 and tail <= 1e-8,
                  f"sup|psi-h|={err:.2e} (<=1e-3), tail={tail:.1e}, {dt:.1f}s (<60s)")


def criterion_3():
    orc, result, _ = oracle()
    worst = result.residuals.max_residual
    solve = ",".join(orc.spec.format_word(w) for w in result.solve_words)
    detail = ", ".join(f"{r.generator}={r.sup_residual:.2e}" for r in result.residuals.rows)
    return record(3, worst <= 1e-3, f"{detail} (<=1e-3; solved with {solve} only)")


def criterion_4():
    probes = tau_sample_points((RES, RES))
    solves = [oracle()[1], solve_full(standard_action(2), res=64)]
    mats = [induced_h1(r.psi_lift, probes) for r in solves if r.ok]
    ok = len(mats) == len(solves) and all(np.array_equal(m, np.eye(2, dtype=int)) for m in mats)
    return record(4, ok, f"{len(mats)} OK solves, all induce the identity: {ok}")


def criterion_5():
    orc, _, _ = oracle()
    spec = orc.spec
    r1 = solve_full(spec, [spec.word("ab"), spec.word("BA")], res=RES)
    r2 = solve_full(spec, [spec.word("ba"), spec.word("AB")], res=RES)
    diff = float(np.abs(r1.phi2.values() - r2.phi2.values()).max())
    ok = r1.ok and r2.ok and diff <= 2e-3
    return record(5, ok, f"|phi2(ab,BA) - phi2(ba,AB)|={diff:.2e} (<=2e-3)")


def criterion_6():
    result, dt = twist()
    ref = oracle()[1].residuals.max_residual
    worst = result.residuals.max_residual
    ok = result.verdict == "NO_SEMICONJUGACY" and worst >= 100 * ref and dt < 60
    return record(6, ok, f"verdict {result.verdict}, residual {worst:.2e} = {worst / ref:.0f}x oracle "
                         f"(>=100x), {dt:.1f}s")


def criterion_7():
    cases = [
        ("sl2_sanov", standard_action(2).matrices, 2, "Verified"),
        ("sln_elementary", standard_action(3, "sln_elementary").matrices, 3, "Verified"),
        ("rotation", [IntMatrix.parse("0,-1;1,0")], 6, "NotVerifiedUpTo(6)"),
    ]
    ok, parts = True, []
    for name, mats, L, want in cases:
        t0 = time.perf_counter()
        cert = weak_hyperbolicity_certificate(mats, L)
        dt = time.perf_counter() - t0
        ok &= cert.verdict == want and dt < 10
        parts.append(f"{name} L={L}: {cert.verdict} {dt:.3f}s")
    return record(7, ok, "; ".join(parts))


def criterion_8():
    orc, _, _ = oracle()
    spec = orc.spec
    letters = [spec.word(t) for t in ("a", "b", "A", "B")]
    defect = cocycle_identity_residual(spec, list(itertools.product(letters, letters)), RES)
    worst = max(defect.values())
    return record(8, worst <= 1e-3, f"max defect over {len(defect)} pairs {worst:.2e} (<=1e-3)")


def criterion_9():
    orc, result, _ = oracle()
    ratios = []
    for w, b in zip(result.solve_words, result.word_budgets):
        ratios.append(functional_equation_residual(orc.spec, result.phi2, w).max() / b.total)
    worst = max(ratios)
    return record(9, worst <= 2.0, f"max residual/budget {worst:.3f} over grid (<=2)")


def criterion_10():
    orc, result, _ = oracle()
    spec = orc.spec
    words = [spec.word(t) for t in ("a", "b", "A", "B", "ab", "ba")]
    t = tau_analysis(spec, result.psi_lift, words, tau_sample_points((RES, RES)))
    growth = orbit_growth((1, 0), spec.matrices, 8)
    ok = t.all_zero and t.constancy_defect <= 1e-3 and t.cocycle_defect <= 1e-3 and growth.growing
    return record(10, ok, f"tau all zero: {t.all_zero}, defects {t.constancy_defect:.1e}/"
                          f"{t.cocycle_defect:.1e} (<=1e-3), e1 orbit {growth.classification}")


def criterion_11():
    coarse, fine = oracle_error(128), oracle_error(RES)
    return record(11, coarse / fine >= 3, f"error 128: {coarse:.2e}, 256: {fine:.2e}, "
                                          f"ratio {coarse / fine:.2f} (>=3)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_criterion(check):
    ok, detail = check()
    assert ok, detail


def format_results() -> list[str]:
    return [f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {d}" for n, (ok, d) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for check in CRITERIA:
        check()
    print("\n".join(format_results()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
