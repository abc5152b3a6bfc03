"""Linearization about a standing wave and its principal eigenpair.

The operator is the symmetric tridiagonal matrix with unit off-diagonals and
diagonal -2 - f'(p_n, a), truncated to n = -N..N with Dirichlet ends.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import DegenerateEigenvalue, NonHyperbolic

__all__ = [
    "Linearization",
    "KernelVector",
    "assemble",
    "count_below",
    "kth_largest",
    "lambda0",
    "kernel_vector",
    "decay_rate",
    "positive_spectrum_check",
]


@dataclass(frozen=True)
class Linearization:
    diag: np.ndarray
    N: int
    a: float
    off_diag: float = 1.0

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off_diag * v[1:]
        out[1:] += self.off_diag * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        idx = np.arange(self.size - 1)
        m[idx, idx + 1] = m[idx + 1, idx] = self.off_diag
        return m


def assemble(p, f, a: float | None = None) -> Linearization:
    """Linearize about ``p`` (a LatticeProfile, or a raw array with ``a`` given)."""
    if a is None:
        values, a = p.values, p.a
    else:
        values = np.asarray(p, dtype=float)
    if len(values) % 2 != 1:
        raise ValueError("profile must have odd length 2N+1")
    N = (len(values) - 1) // 2
    return Linearization(-2.0 - np.asarray(f.du(values, a), dtype=float), N, float(a))


# Sturm sequences ------------------------------------------------------------


def count_below(diag, off: float, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` (LDL^T inertia of T - xI)."""
    e2 = off * off
    tiny = 1e-300
    count = 0
    q = 1.0
    first = True
    for d in diag:
        q = d - x if first else d - x - e2 / q
        first = False
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def _gershgorin(lin: Linearization):
    r = 2.0 * abs(lin.off_diag)
    return float(np.min(lin.diag)) - r, float(np.max(lin.diag)) + r


def kth_largest(lin: Linearization, k: int = 0, tol: float = 1e-13) -> float:
    """k-th largest eigenvalue (k=0 is the top) by bisection."""
    m = lin.size
    if not 0 <= k < m:
        raise ValueError("k out of range")
    lo, hi = _gershgorin(lin)
    diag = lin.diag.tolist()
    # want the smallest x with count_below(x) >= m - k
    target = m - k
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if count_below(diag, lin.off_diag, mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _inverse_iteration(lin: Linearization, shift: float, max_iter: int = 40):
    m = lin.size
    ab = np.empty((3, m))
    ab[0, :] = lin.off_diag
    ab[2, :] = lin.off_diag
    scale = max(1.0, float(np.max(np.abs(lin.diag))))
    x = np.ones(m) / math.sqrt(m)
    nudge = 0.0
    for _ in range(max_iter):
        ab[1, :] = lin.diag - (shift + nudge)
        try:
            y = solve_banded((1, 1), ab, x, check_finite=False)
        except np.linalg.LinAlgError:
            nudge += 1e-15 * scale
            continue
        if not np.all(np.isfinite(y)):
            nudge += 1e-15 * scale
            continue
        y /= np.linalg.norm(y)
        if y[np.argmax(np.abs(y))] < 0:
            y = -y
        # componentwise convergence, including the exponentially small tails
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(y - x) / np.maximum(np.abs(y), 1e-300)
        x = y
        if np.max(rel) < 1e-12:
            break
    return x


def lambda0(lin: Linearization, tol: float = 1e-12) -> float:
    """Top eigenvalue: Sturm bisection, then a Rayleigh-quotient polish."""
    lam = kth_largest(lin, 0, tol=min(tol, 1e-13))
    v = _inverse_iteration(lin, lam, max_iter=3)
    rq = float(v @ lin.matvec(v))
    return rq if abs(rq - lam) <= 10 * tol else lam


@dataclass
class KernelVector:
    values: np.ndarray
    lambda0: float
    N: int
    decay_ratio_estimate: float
    left_decay_ratio_estimate: float
    gap: float

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "N": self.N,
            "decay_ratio_estimate": self.decay_ratio_estimate,
            "left_decay_ratio_estimate": self.left_decay_ratio_estimate,
            "gap": self.gap,
            "min_v": float(np.min(self.values)),
            "norm2": float(self.values @ self.values),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "v"])
        for n, v in zip(self.n, self.values):
            w.writerow([int(n), repr(float(v))])
        return buf.getvalue()


def _tail_ratio(v: np.ndarray, lo: int, hi: int) -> float:
    """Geometric mean of v[k+1]/v[k] for array indices lo <= k < hi."""
    if hi <= lo or np.any(v[lo : hi + 1] <= 0):
        return float("nan")
    return float(np.exp((np.log(v[hi]) - np.log(v[lo])) / (hi - lo)))


def kernel_vector(lin: Linearization, gap_tol: float = 1e-10) -> KernelVector:
    """Principal eigenvector, positive and unit l2-normalized."""
    lam0 = kth_largest(lin, 0)
    lam1 = kth_largest(lin, 1) if lin.size > 1 else -np.inf
    gap = lam0 - lam1
    if not gap > gap_tol:
        raise DegenerateEigenvalue(f"top eigenvalue gap {gap:.3e} is below {gap_tol:.1e}")
    v = _inverse_iteration(lin, lam0)
    N = lin.N
    if v[N] < 0:
        v = -v
    v = v / np.linalg.norm(v)
    rq = float(v @ lin.matvec(v))
    lam = rq if abs(rq - lam0) < 1e-10 else lam0
    # right tail window n in [N/2, N-5]; mirrored on the left
    lo, hi = N + N // 2, 2 * N - 5
    right = _tail_ratio(v, lo, hi)
    left = _tail_ratio(v[::-1], lo, hi)
    return KernelVector(v, lam, N, right, left, float(gap))


def decay_rate(f, a: float, lam: float, side: int) -> float:
    """Root in (0, 1) of mu + 1/mu = 2 + f'(side, a) + lam."""
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    d = f.du(float(side), a) + lam
    if not d > 0.0:
        raise NonHyperbolic(f"f'({side},a)+lambda = {d:.3e} is not positive")
    b = 2.0 + d
    # (b - sqrt(b^2-4))/2 written to avoid cancellation
    return 2.0 / (b + math.sqrt(b * b - 4.0))


def positive_spectrum_check(lin: Linearization, tol: float = 1e-8) -> bool:
    return lambda0(lin) <= tol
