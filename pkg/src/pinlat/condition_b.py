"""The cubic moment B = 1/2 sum f''(p_n, a) v_n^3 at the fold, and the reduced map.

The reduced map eta' = 2 eta - omega + B eta^2, omega' = eta keeps only the
quadratic term of the centre-manifold dynamics; higher-order corrections are
not modelled.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotAtFold

__all__ = [
    "Verdict",
    "BReport",
    "ReducedOrbit",
    "b_terms",
    "b_pair_sums",
    "compute_B",
    "verdict_for",
    "reduced_map_iterate",
    "prop52_ordering_check",
    "stable_orbit_seed",
]

TOL_B = 1e-6
FOLD_GATE = 1e-6


class Verdict(str, enum.Enum):
    HOLDS = "ConditionBHolds"
    FAILS = "Fails"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class BReport:
    B: float
    truncation_N: int
    tail_bound: float
    verdict: Verdict
    sign: int
    tol_B: float = TOL_B
    lambda0: float = float("nan")
    a: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "truncation_N": self.truncation_N,
            "tail_bound": self.tail_bound,
            "verdict": self.verdict.value,
            "sign": self.sign,
            "tol_B": self.tol_B,
            "lambda0": self.lambda0,
            "a": self.a,
        }


def _as_arrays(p, v):
    pv = getattr(p, "values", p)
    vv = getattr(v, "values", v)
    return np.asarray(pv, dtype=float), np.asarray(vv, dtype=float)


def b_terms(p, v, f, a: float | None = None) -> np.ndarray:
    """Summands 1/2 f''(p_n, a) v_n^3 (no fold gate, no sign fix)."""
    pv, vv = _as_arrays(p, v)
    a = getattr(p, "a") if a is None else a
    return 0.5 * f.duu(pv, a) * vv**3


def b_pair_sums(p, v, f, a: float | None = None) -> np.ndarray:
    """Summands grouped in mirror pairs (n, -n-1), n = 0..N-1.

    For an off-site antisymmetric profile with an even eigenvector and an
    odd f'' each pair vanishes, so the grouped sum isolates rounding.
    """
    t = b_terms(p, v, f, a)
    N = (len(t) - 1) // 2
    n = np.arange(N)
    return t[N + n] + t[N - n - 1]


def verdict_for(B: float, tail_bound: float, tol_B: float = TOL_B, slope_ok: bool = True) -> Verdict:
    if slope_ok and abs(B) > tol_B and tail_bound < 0.1 * abs(B):
        return Verdict.HOLDS
    if slope_ok and abs(B) <= tol_B and tail_bound < tol_B:
        return Verdict.FAILS
    return Verdict.INCONCLUSIVE


def _tail_extrapolation(logs: np.ndarray) -> tuple[float, bool]:
    """Geometric continuation of the terms beyond the truncation edge.

    ``logs`` holds log|term| ordered towards the edge. Returns (log of the
    neglected mass, whether the fitted decay slope is negative).
    """
    k = np.arange(len(logs), dtype=float)
    ok = np.isfinite(logs)
    if ok.sum() < 3:
        return -math.inf, True
    slope, icpt = np.polyfit(k[ok], logs[ok], 1)
    if slope >= 0:
        return math.inf, False
    last = icpt + slope * (len(logs) - 1)
    # sum_{j>=1} r^j |t_last| = |t_last| r / (1 - r)
    return last + slope - math.log1p(-math.exp(slope)), True


def compute_B(p, v, f, tol_B: float = TOL_B, fold_gate: float = FOLD_GATE) -> BReport:
    """B at a fold profile ``p`` with its kernel vector ``v`` (a KernelVector)."""
    lam = float(getattr(v, "lambda0", 0.0))
    if not abs(lam) < fold_gate:
        raise NotAtFold(f"lambda0 = {lam:.3e} is not within {fold_gate:.0e} of zero")
    pv, vv = _as_arrays(p, v)
    # mandatory sign fix: the kernel vector is taken positive
    if vv[np.argmax(np.abs(vv))] < 0:
        vv = -vv
    a = float(p.a)
    terms = 0.5 * f.duu(pv, a) * vv**3
    B = float(np.sum(terms))
    N = (len(pv) - 1) // 2
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(0.5 * f.duu(pv, a))) + 3.0 * np.log(np.abs(vv))
    w = max(3, N // 2)
    right, ok_r = _tail_extrapolation(logs[-w:])
    left, ok_l = _tail_extrapolation(logs[:w][::-1])
    tail = math.exp(right) + math.exp(left) if (ok_r and ok_l) else math.inf
    verdict = verdict_for(B, tail, tol_B, ok_r and ok_l)
    sign = 0 if abs(B) <= tol_B else int(math.copysign(1, B))
    return BReport(B, N, tail, verdict, sign, tol_B, lam, a)


# reduced map -----------------------------------------------------------------------


@dataclass
class ReducedOrbit:
    eta: np.ndarray
    omega: np.ndarray
    B_used: float
    truncated: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "eta", "omega"])
        for m, (e, o) in enumerate(zip(self.eta, self.omega)):
            w.writerow([m, repr(float(e)), repr(float(o))])
        return buf.getvalue()


def reduced_map_iterate(B: float, eta0: float, omega0: float, steps: int, cap: float = 1e6) -> ReducedOrbit:
    """Iterate the quadratic map; stops early once |eta| exceeds ``cap``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    eta = [float(eta0)]
    omega = [float(omega0)]
    e, o = float(eta0), float(omega0)
    truncated = False
    for _ in range(steps):
        e, o = 2.0 * e - o + B * e * e, e
        eta.append(e)
        omega.append(o)
        if not abs(e) <= cap:
            truncated = True
            break
    return ReducedOrbit(np.array(eta), np.array(omega), float(B), truncated)


def prop52_ordering_check(orbit: ReducedOrbit, M: float, window_start: int) -> bool:
    """3M eta_m > M eta_{m-1} > M eta_m > 0 for every m from ``window_start`` on."""
    if M == 0:
        raise ValueError("M must be nonzero")
    x = orbit.eta
    if window_start < 1 or len(x) < window_start + 100:
        return False
    cur = M * x[window_start:]
    prev = M * x[window_start - 1 : -1]
    return bool(np.all(3.0 * cur > prev) and np.all(prev > cur) and np.all(cur > 0.0))


def stable_orbit_seed(B: float, eta0: float, steps: int = 10_000, iters: int = 200) -> float:
    """omega0 putting (eta0, omega0) on the orbit that decays to 0.

    Needs B * eta0 > 0. Found by bisection on the outcome: too small a drop
    turns back before reaching 0, too large a drop overshoots through 0.
    """
    if B * eta0 <= 0:
        raise ValueError("a decaying orbit needs B * eta0 > 0")
    s = math.copysign(1.0, eta0)

    def overshoots(omega0):
        orb = reduced_map_iterate(B, eta0, omega0, steps)
        return bool(np.any(s * orb.eta < 0))

    # omega0 = eta0 + s * drop; drop = 0 turns back, drop = |eta0| overshoots
    lo, hi = 0.0, abs(eta0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if overshoots(eta0 + s * mid):
            hi = mid
        else:
            lo = mid
    return eta0 + s * lo
