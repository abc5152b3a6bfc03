"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""
from __future__ import annotations

import time

import numpy as np
import pytest

from pinlat.condition_b import Verdict, b_pair_sums, b_terms, compute_B, prop52_ordering_check, reduced_map_iterate
from pinlat.dynamics import Direction, epsilon_regime_probe, estimate_a_plus, measure_speed, sweep_theta
from pinlat.profile import damped_flow, defect, solve_standing_wave
from pinlat.spectral import assemble, decay_rate, kernel_vector, lambda0

B_FROZEN = 0.11287280382452045


def test_01_newton_matches_damped_flow(f, upper_fold, lower_fold, report):
    t0 = time.perf_counter()
    lo, hi = lower_fold.a_fold, upper_fold.a_fold
    mid, half = 0.5 * (lo + hi), 0.45 * (hi - lo)
    a_vals = np.random.default_rng(2024).uniform(mid - half, mid + half, 10)
    worst = 0.0
    for a in a_vals:
        p = solve_standing_wave(f, a, N=200)
        q = damped_flow(f, a, "step", N=200)
        worst = max(worst, float(np.max(np.abs(p.values - q.values))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 60
    report(1, ok, f"max sup-distance {worst:.2e} (< 1e-8) over 10 a-values, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_02_monotone_with_small_defect(f, upper_fold, lower_fold, report):
    profiles = [solve_standing_wave(f, a) for a in np.linspace(lower_fold.a_fold, upper_fold.a_fold, 9)[1:-1]]
    profiles += [solve_standing_wave(f, 0.0, "onsite"), upper_fold.profile_at_fold, lower_fold.profile_at_fold]
    mono = all(p.is_strictly_monotone() for p in profiles)
    worst = max(float(np.max(np.abs(defect(p.values, f, p.a)))) for p in profiles)
    ok = mono and worst < 1e-12
    report(2, ok, f"{len(profiles)} profiles strictly monotone={mono}, max defect {worst:.2e} (< 1e-12)")
    assert ok


def test_03_fold_symmetry(upper_fold, lower_fold, report):
    ap, am = upper_fold.a_fold, lower_fold.a_fold
    ok = abs(ap + am) < 1e-8 and -1 < am < 0 < ap < 1
    report(3, ok, f"a+ = {ap:.13f}, a- = {am:.13f}, |a+ + a-| = {abs(ap + am):.1e} (< 1e-8)")
    assert ok


def test_04_spectral_gate(f, upper_fold, upper_fold_400, report):
    lam200 = lambda0(assemble(upper_fold.profile_at_fold, f))
    lam400 = lambda0(assemble(upper_fold_400.profile_at_fold, f))
    lam_int = lambda0(assemble(solve_standing_wave(f, 0.0), f))
    ok = abs(lam200) < 1e-6 and abs(lam200 - lam400) < 1e-8 and lam_int < -1e-3
    report(4, ok, f"lambda0(fold) = {lam200:.2e}, |N=200 - N=400| = {abs(lam200 - lam400):.1e}, "
                  f"lambda0(a=0) = {lam_int:.4f}")
    assert ok


def test_05_eigenvector_structure(f, upper_fold, fold_kernel, report):
    v = fold_kernel.values
    mu = decay_rate(f, upper_fold.a_fold, 0.0, 1)
    ratio = fold_kernel.decay_ratio_estimate
    rel = abs(ratio / mu - 1)
    norm_err = abs(float(v @ v) - 1)
    ok = v.min() > 0 and norm_err < 1e-12 and rel < 0.05
    report(5, ok, f"min v = {v.min():.1e} > 0, |sum v^2 - 1| = {norm_err:.1e}, "
                  f"tail ratio {ratio:.6f} vs mu {mu:.6f} ({100 * rel:.4f}% < 5%)")
    assert ok


def test_06_B_robustness(f, upper_fold, upper_fold_400, fold_kernel, report):
    p2 = upper_fold.profile_at_fold
    b200 = compute_B(p2, fold_kernel, f).B
    p4 = upper_fold_400.profile_at_fold
    b400 = compute_B(p4, kernel_vector(assemble(p4, f)), f).B
    v = fold_kernel.values
    sp = np.concatenate([p2.values[1:], [1.0]])
    sv = np.concatenate([v[1:], [0.0]])
    shift = abs(float(b_terms(sp, sv, f, p2.a).sum()) - float(b_terms(p2, v, f).sum()))
    p0 = solve_standing_wave(f, 0.0)
    pairs = b_pair_sums(p0, kernel_vector(assemble(p0, f)), f)
    cancel = float(np.max(np.abs(pairs)))
    ok = abs(b200 - b400) < 1e-10 and shift < 1e-9 and cancel < 1e-14
    report(6, ok, f"|B200 - B400| = {abs(b200 - b400):.1e}, shift change {shift:.1e}, "
                  f"max pair sum at a=0 {cancel:.1e}")
    assert ok


def test_07_cubic_verdict(f, upper_fold, fold_kernel, report):
    rep = compute_B(upper_fold.profile_at_fold, fold_kernel, f)
    ok = rep.verdict is Verdict.HOLDS and abs(rep.B) > 1e-4 and abs(rep.B - B_FROZEN) < 1e-9
    report(7, ok, f"B = {rep.B:.14f} (frozen {B_FROZEN:.14f}), tail bound {rep.tail_bound:.1e}, "
                  f"verdict {rep.verdict.value}")
    assert ok


@pytest.fixture(scope="module")
def sim_a_plus0(f):
    return estimate_a_plus(f, Direction(), (0.0, 0.02), tol=1e-3)


def test_08_cross_method_a_plus(upper_fold, sim_a_plus0, report):
    gap = abs(sim_a_plus0.value - upper_fold.a_fold)
    ok = gap < 2e-3
    report(8, ok, f"simulated a+ = {sim_a_plus0.value:.6f}, continuation a+ = {upper_fold.a_fold:.6f}, "
                  f"gap {gap:.1e} (< 2e-3)")
    assert ok


def test_09_crystallographic_gap(f, upper_fold, report):
    t0 = time.perf_counter()
    dirs = [Direction(1, 2), Direction(1, 4), Direction(1, 8)]
    rows = sweep_theta(f, dirs, (0.0, 0.02), tol=1e-3, threads=3)
    elapsed = time.perf_counter() - t0
    ap = upper_fold.a_fold
    deltas = {str(d): ap - est for d, _, est in rows}
    ok = all(dl > 2e-3 for dl in deltas.values())
    ok &= all(est <= ap + 2e-3 for _, _, est in rows)
    ok &= elapsed < 600
    per = ", ".join(f"eps={k}: delta={v:.5f}" for k, v in deltas.items())
    report(9, ok, f"{per} (each > 2e-3, all <= a+(0) + 2e-3), {elapsed:.0f} s (< 600 s)")
    assert ok


def test_10_speed_monotone(f, report):
    a_vals = (0.02, 0.04, 0.08)
    runs = [measure_speed(f, a, Direction()) for a in a_vals]
    cs = [m.c_est for m in runs]
    ok = all(not m.pinned for m in runs) and cs[0] < cs[1] < cs[2]
    report(10, ok, "c_est " + ", ".join(f"c({a}) = {c:.6f}" for a, c in zip(a_vals, cs)) + " strictly increasing")
    assert ok


def test_11_reduced_map_ordering(report):
    up = reduced_map_iterate(1.0, -1e-3, -1.001e-3, 10_000)
    down = reduced_map_iterate(-1.0, 1e-3, 1.001e-3, 10_000)
    ok_up = prop52_ordering_check(up, 1.0, 100)
    ok_down = prop52_ordering_check(down, -1.0, 100)
    ok = ok_up and ok_down
    report(11, ok, f"B=1 orbit: ordering {ok_up} (length {len(up.eta)}, truncated {up.truncated}); "
                   f"B=-1 mirror: ordering {ok_down} (length {len(down.eta)}, truncated {down.truncated})")
    assert ok


def test_12_epsilon_ladder(f, upper_fold, report):
    ap = upper_fold.a_fold
    rec = epsilon_regime_probe(f, [0.2, 0.1, 0.05], "c_eq_eps", a_plus_ref=ap, a_floor=ap - 1e-3)
    a_eps = {r["eps"]: r["a_eps"] for r in rec["rows"]}
    gap = abs(a_eps[0.05] - ap)
    ok = rec["decreasing_with_eps"] and gap < 0.02
    ladder = ", ".join(f"a^{e} = {v:.5f}" for e, v in a_eps.items())
    report(12, ok, f"{ladder}; decreasing {rec['decreasing_with_eps']}, |a^0.05 - a+| = {gap:.4f} (< 0.02)")
    assert ok
