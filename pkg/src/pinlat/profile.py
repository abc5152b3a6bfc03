"""Standing waves of p_{n+1} + p_{n-1} - 2 p_n = f(p_n, a) and their fold points.

Profiles live on n = -N..N with ghost values p_{-N-1} = -1, p_{N+1} = +1.
Internally every profile is stored as a deviation d_n from its anchor (-1 for
n < 0, +1 for n >= 0); this keeps the exponentially small tails resolved, so
strict monotonicity stays checkable in floating point.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from . import _kernels, spectral
from .errors import (
    BranchLost,
    EscapedDomain,
    MonotonicityLost,
    NoConvergence,
    NoFold,
    NotSettled,
)
from .nonlinearity import NormalFamily

__all__ = [
    "LatticeProfile",
    "Side",
    "FoldResult",
    "PinningInterval",
    "anchors",
    "preset_profile",
    "defect",
    "solve_standing_wave",
    "damped_flow",
    "damped_flow_dt",
    "continue_to_fold",
    "pinning_interval",
    "extreme_fold",
    "find_pinned_a",
    "planar_map_step",
    "planar_map_inverse",
    "map_eigenvalues",
    "trace_manifold",
]

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12


def anchors(N: int) -> np.ndarray:
    n = np.arange(-N, N + 1)
    return np.where(n < 0, -1.0, 1.0)


def _jump(N: int) -> np.ndarray:
    j = np.zeros(2 * N + 1)
    j[N - 1] = 2.0
    j[N] = -2.0
    return j


@dataclass
class LatticeProfile:
    values: np.ndarray
    a: float
    residual_norm: float
    deviation: np.ndarray | None = None
    iterations: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) % 2 != 1:
            raise ValueError("profile needs 2N+1 values")
        if self.deviation is None:
            self.deviation = self.values - anchors(self.half_width)

    @property
    def half_width(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def n(self) -> np.ndarray:
        N = self.half_width
        return np.arange(-N, N + 1)

    def is_monotone(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.values[:-1] <= self.values[1:] + tol))

    def is_strictly_monotone(self) -> bool:
        """p_n < p_{n+1} for every n, decided on the tail-resolved deviations."""
        N = self.half_width
        d = self.deviation
        left = np.all(d[: N - 1] < d[1:N]) if N > 1 else True
        right = np.all(d[N:-1] < d[N + 1 :])
        middle = self.values[N - 1] < self.values[N]
        return bool(left and right and middle)

    def crossing(self, level: float = 0.0) -> float:
        """Linearly interpolated index where the profile first crosses ``level``."""
        return _crossing(self.values, self.half_width, level)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "p"])
        for n, p in zip(self.n, self.values):
            w.writerow([int(n), repr(float(p))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "half_width": self.half_width,
            "a": self.a,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "crossing": self.crossing(),
        }


def _crossing(values, N, level=0.0) -> float:
    idx = np.nonzero(values >= level)[0]
    if idx.size == 0:
        return float(N + 1)
    k = int(idx[0])
    if k == 0:
        return float(-N)
    lo, hi = values[k - 1], values[k]
    return float(k - 1 - N + (level - lo) / (hi - lo))


def preset_profile(name: str, N: int) -> np.ndarray:
    """Initial data: ``offsite`` (tanh centred at -1/2), ``onsite`` (tanh at 0) or ``step``."""
    n = np.arange(-N, N + 1, dtype=float)
    if name == "offsite":
        return np.tanh(n + 0.5)
    if name == "onsite":
        return np.tanh(n)
    if name == "step":
        return np.where(n < 0, -1.0, 1.0)
    raise ValueError(f"unknown preset {name!r}")


def _init_deviation(init, N: int) -> np.ndarray:
    if isinstance(init, str):
        return preset_profile(init, N) - anchors(N)
    if isinstance(init, LatticeProfile):
        if init.half_width == N:
            return init.deviation.copy()
        # recentre/crop or pad with zero deviation
        d = np.zeros(2 * N + 1)
        M = init.half_width
        k = min(N, M)
        d[N - k : N + k + 1] = init.deviation[M - k : M + k + 1]
        return d
    p = np.asarray(init, dtype=float)
    if len(p) != 2 * N + 1:
        raise ValueError("initial profile has the wrong length")
    return p - anchors(N)


class _Chain:
    """Residual, Jacobian and a-derivative at fixed (f, a, N) in deviation form."""

    def __init__(self, f: NormalFamily, a: float, N: int):
        self.f, self.a, self.N = f, float(a), N
        self.cl = f.u_poly(a, -1.0)
        self.cr = f.u_poly(a, 1.0)
        self.dcl = np.polynomial.polynomial.polyder(self.cl)
        self.dcr = np.polynomial.polynomial.polyder(self.cr)
        self.acl = f.u_poly(a, -1.0, "da")
        self.acr = f.u_poly(a, 1.0, "da")
        self.jump = _jump(N)

    def _split(self, d, cl, cr):
        pv = np.polynomial.polynomial.polyval
        N = self.N
        return np.concatenate([pv(d[:N], cl), pv(d[N:], cr)])

    def fvals(self, d):
        return self._split(d, self.cl, self.cr)

    def residual(self, d):
        lap = -2.0 * d
        lap[1:] += d[:-1]
        lap[:-1] += d[1:]
        return lap + self.jump - self.fvals(d)

    def jac_diag(self, d):
        return -2.0 - self._split(d, self.dcl, self.dcr)

    def res_a(self, d):
        return -self._split(d, self.acl, self.acr)


def _banded(diag):
    ab = np.empty((3, len(diag)))
    ab[0, :] = 1.0
    ab[2, :] = 1.0
    ab[1, :] = diag
    return ab


def defect(values, f: NormalFamily, a: float) -> np.ndarray:
    """p_{n+1} + p_{n-1} - 2 p_n - f(p_n, a) with the clamped ghosts, on raw values."""
    p = np.asarray(values, dtype=float)
    ext = np.concatenate([[-1.0], p, [1.0]])
    return ext[2:] + ext[:-2] - 2.0 * p - f.eval(p, a)


def _newton(chain: _Chain, d: np.ndarray, tol: float, max_iter: int):
    r = chain.residual(d)
    rn = float(np.max(np.abs(r)))
    it = 0
    while rn >= tol:
        if it >= max_iter:
            raise NoConvergence(f"Newton did not converge in {max_iter} iterations (defect {rn:.3e})")
        try:
            step = solve_banded((1, 1), _banded(chain.jac_diag(d)), r, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NoConvergence(f"singular Jacobian: {exc}") from None
        lam = 1.0
        while True:
            trial = d - lam * step
            rt = chain.residual(trial)
            rtn = float(np.max(np.abs(rt)))
            if np.isfinite(rtn) and (rtn < rn or lam < 1.0 / 64):
                break
            lam *= 0.5
        d, r, rn = trial, rt, rtn
        it += 1
        if not np.isfinite(rn) or np.max(np.abs(d)) > 4.0:
            raise NoConvergence("Newton iterates diverged")
    return d, rn, it


def _finish(chain: _Chain, d, rn, it) -> LatticeProfile:
    N = chain.N
    p = anchors(N) + d
    prof = LatticeProfile(p, chain.a, rn, d, it)
    if abs(p[0] + 1.0) >= 0.05 or abs(p[-1] - 1.0) >= 0.05:
        raise NoConvergence("converged state is locked against the truncation boundary, not a standing wave")
    if not prof.is_monotone():
        raise MonotonicityLost("converged profile is not monotone")
    return prof


def solve_standing_wave(
    f: NormalFamily,
    a: float,
    init="offsite",
    N: int = 200,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> LatticeProfile:
    """Newton's method for the truncated standing-wave equation."""
    if not -1.0 < a < 1.0:
        raise ValueError("a must lie in (-1, 1)")
    if N < 20:
        raise ValueError("N must be at least 20")
    chain = _Chain(f, a, N)
    d, rn, it = _newton(chain, _init_deviation(init, N), tol, max_iter)
    return _finish(chain, d, rn, it)


# damped flow oracle -----------------------------------------------------------


def damped_flow_dt(f: NormalFamily, a: float) -> float:
    return 0.2 / (2.0 + f.max_abs_du(a))


def damped_flow(
    f: NormalFamily,
    a: float,
    init="step",
    N: int = 200,
    dt: float | None = None,
    t_end: float = 20000.0,
    tol: float = 1e-10,
    chunk: float = 10.0,
    margin: int = 10,
) -> LatticeProfile:
    """RK4 integration of du/dt = u_{n+1} + u_{n-1} - 2u_n - f(u_n, a) to rest.

    Raises NotSettled if the front is still moving at ``t_end`` or runs into
    the clamped ends (within ``margin`` sites).
    """
    bound = damped_flow_dt(f, a)
    dt = bound if dt is None else dt
    if dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability bound {bound:.4g}")
    chain = _Chain(f, a, N)
    d = _init_deviation(init, N)
    nchunk = max(1, int(round(chunk / dt)))
    total = int(math.ceil(t_end / dt))
    done = 0
    crossings = [(0.0, _crossing(anchors(N) + d, N))]
    while True:
        steps, norm = _kernels.rk4_chain(d, chain.jump, chain.cl, chain.cr, N, dt, min(nchunk, total - done), tol)
        done += steps
        t = done * dt
        x = _crossing(anchors(N) + d, N)
        if norm < tol:
            p = anchors(N) + d
            return LatticeProfile(p, float(a), float(norm), d, done)
        crossings.append((t, x))
        if abs(x) > N - margin:
            raise NotSettled(f"front reached the truncation boundary at t={t:.1f}", crossings)
        if done >= total:
            raise NotSettled(f"not at rest by t={t_end} (sup|du/dt| = {norm:.3e})", crossings)


# continuation -------------------------------------------------------------------


class Side(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass
class FoldResult:
    a_fold: float
    profile_at_fold: LatticeProfile
    side: Side
    branch_points: list = field(default_factory=list)
    converged: bool = True
    lambda0: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "a_fold": self.a_fold,
            "side": self.side.value,
            "converged": self.converged,
            "lambda0_at_fold": self.lambda0,
            "half_width": self.profile_at_fold.half_width,
            "residual_norm": self.profile_at_fold.residual_norm,
            "branch_points": [[float(a), float(l)] for a, l in self.branch_points],
        }


@dataclass
class PinningInterval:
    a_minus: float
    a_plus: float
    half_width_used: int
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "a_minus": self.a_minus,
            "a_plus": self.a_plus,
            "half_width_used": self.half_width_used,
            "tolerance": self.tolerance,
            "length": self.a_plus - self.a_minus,
        }


def _bordered_solve(jdiag, col, row, corner, rhs, rhs_last):
    """Solve [[J, col], [row^T, corner]] x = [rhs, rhs_last] with sparse LU."""
    m = len(jdiag)
    k = np.arange(m)
    rows = np.concatenate([k, k[:-1], k[1:], k, np.full(m, m), [m]])
    cols = np.concatenate([k, k[1:], k[:-1], np.full(m, m), k, [m]])
    vals = np.concatenate([jdiag, np.ones(m - 1), np.ones(m - 1), col, row, [corner]])
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(m + 1, m + 1))
    return splu(mat).solve(np.concatenate([rhs, [rhs_last]]))


def _tangent(chain: _Chain, d, prev):
    """Unit tangent of the branch, oriented by ``prev`` (vector of length m+1)."""
    x = _bordered_solve(chain.jac_diag(d), chain.res_a(d), prev[:-1], prev[-1], np.zeros(len(d)), 1.0)
    return x / np.linalg.norm(x)


def _correct(f, N, x0, t, h, tol=NEWTON_TOL, max_iter=25):
    """Pseudo-arclength corrector: F = 0 and t.(x - x0) = h."""
    x = x0 + h * t
    for _ in range(max_iter):
        a = x[-1]
        if not -1.0 < a < 1.0:
            return None
        chain = _Chain(f, a, N)
        d = x[:-1]
        r = chain.residual(d)
        g = float(t @ (x - x0)) - h
        if np.max(np.abs(r)) < tol and abs(g) < tol:
            return x, chain
        try:
            dx = _bordered_solve(chain.jac_diag(d), chain.res_a(d), t[:-1], t[-1], r, g)
        except RuntimeError:
            return None
        x = x - dx
        if not np.all(np.isfinite(x)):
            return None
    chain = _Chain(f, x[-1], N) if -1.0 < x[-1] < 1.0 else None
    if chain is not None and np.max(np.abs(chain.residual(x[:-1]))) < tol:
        return x, chain
    return None


def _lambda0_at(f, d, a, N):
    return spectral.lambda0(spectral.assemble(anchors(N) + d, f, a))


def continue_to_fold(
    f: NormalFamily,
    a_start: float = 0.0,
    side: Side | str = Side.UPPER,
    N: int = 200,
    ds: float = 0.02,
    init="offsite",
    max_steps: int = 5000,
    ds_min: float = 1e-7,
    s_tol: float = 1e-11,
) -> FoldResult:
    """Pseudo-arclength continuation in a until da/ds changes sign.

    The fold is then refined by bisection in arclength on the sign of da/ds.
    """
    side = Side(side)
    prof = solve_standing_wave(f, a_start, init, N)
    chain = _Chain(f, a_start, N)
    x = np.concatenate([prof.deviation, [prof.a]])
    e_a = np.zeros(len(x))
    e_a[-1] = 1.0
    t = _tangent(chain, prof.deviation, e_a)
    want = 1.0 if side is Side.UPPER else -1.0
    if t[-1] * want < 0:
        t = -t
    points = [(prof.a, _lambda0_at(f, prof.deviation, prof.a, N))]
    h = ds
    for _ in range(max_steps):
        res = _correct(f, N, x, t, h)
        if res is None:
            h *= 0.5
            if h < ds_min:
                raise BranchLost(f"corrector failed near a={x[-1]:.6g}")
            continue
        xn, chain = res
        tn = _tangent(chain, xn[:-1], t)
        if tn[-1] * t[-1] < 0:
            return _refine_fold(f, N, x, t, h, side, points, s_tol)
        x, t = xn, tn
        a = x[-1]
        points.append((a, _lambda0_at(f, x[:-1], a, N)))
        if not -1.0 < a < 1.0 or abs(a) > 1.0 - 1e-6:
            break
        h = min(ds, 2.0 * h)
    raise NoFold(f"branch reached a={x[-1]:.6g} without a fold")


def _refine_fold(f, N, x0, t0, h, side, points, s_tol):
    lo, hi = 0.0, h
    sign0 = math.copysign(1.0, t0[-1])
    best = None
    while hi - lo > s_tol:
        mid = 0.5 * (lo + hi)
        res = _correct(f, N, x0, t0, mid)
        if res is None:
            raise BranchLost("corrector failed while refining the fold")
        xm, chain = res
        tm = _tangent(chain, xm[:-1], t0)
        if tm[-1] * sign0 > 0:
            lo = mid
        else:
            hi = mid
        best = (xm, chain)
    if best is None:
        best = _correct(f, N, x0, t0, 0.5 * (lo + hi))
    xm, chain = best
    d, a = xm[:-1], float(xm[-1])
    rn = float(np.max(np.abs(chain.residual(d))))
    prof = LatticeProfile(anchors(N) + d, a, rn, d.copy(), 0)
    lam = _lambda0_at(f, d, a, N)
    points = list(points) + [(a, lam)]
    return FoldResult(a, prof, Side(side), points, rn < 1e-10, lam)


def find_pinned_a(f: NormalFamily, N: int = 200, span: float = 0.2, step: float = 1e-3):
    """Locate some a at which a standing wave exists.

    Starts from the continuum balance point (zero of the integral of f over
    [-1, 1]) and scans outwards.
    """
    g = lambda a: float(np.polynomial.polynomial.polyval(1.0, np.polynomial.polynomial.polyint(f.u_poly(a), lbnd=-1.0)))
    try:
        a0 = brentq(g, -0.999, 0.999)
    except ValueError:
        a0 = 0.0
    k_max = int(span / step)
    for k in range(k_max + 1):
        for a in ((a0,) if k == 0 else (a0 + k * step, a0 - k * step)):
            if not -1.0 < a < 1.0:
                continue
            for init in ("offsite", "onsite"):
                try:
                    solve_standing_wave(f, a, init, N)
                    return a, init
                except (NoConvergence, MonotonicityLost):
                    pass
    raise NoConvergence("no standing wave found near the balance point")


def pinning_interval(f: NormalFamily, N: int = 200, ds: float = 0.02, a_start: float | None = None) -> PinningInterval:
    """Both folds of the standing-wave branch.

    Continuation is started from the off-site and on-site profiles; the reported
    bounds are the extremes over the branches found.
    """
    if a_start is None:
        a_start = 0.0 if f.kind.value == "cubic" else find_pinned_a(f, N)[0]
    lower = extreme_fold(f, Side.LOWER, N, ds, a_start)
    upper = extreme_fold(f, Side.UPPER, N, ds, a_start)
    return PinningInterval(lower.a_fold, upper.a_fold, N, 1e-10)


def extreme_fold(f: NormalFamily, side: Side | str, N: int = 200, ds: float = 0.02, a_start: float | None = None) -> FoldResult:
    """Fold on one side, taking the extreme over the off-site and on-site seeds."""
    side = Side(side)
    if a_start is None:
        a_start = 0.0 if f.kind.value == "cubic" else find_pinned_a(f, N)[0]
    best = None
    for init in ("offsite", "onsite"):
        try:
            solve_standing_wave(f, a_start, init, N)
        except (NoConvergence, MonotonicityLost):
            continue
        res = continue_to_fold(f, a_start, side, N, ds, init)
        better = best is None or (res.a_fold > best.a_fold if side is Side.UPPER else res.a_fold < best.a_fold)
        if better:
            best = res
    if best is None:
        raise NoConvergence(f"no standing wave at a_start={a_start}")
    return best


# planar map -------------------------------------------------------------------------


def planar_map_step(q: float, r: float, f: NormalFamily, a: float):
    return 2.0 * q - r + f.eval(q, a), q


def planar_map_inverse(q: float, r: float, f: NormalFamily, a: float):
    # (q, r) = (x_{n+1}, x_n)  ->  (x_n, x_{n-1})
    return r, 2.0 * r - q + f.eval(r, a)


def map_eigenvalues(f: NormalFamily, a: float, fixed_point: int):
    """(mu, 1/mu): mu + 1/mu = 2 + f'(fixed_point, a), 0 < mu < 1."""
    mu = spectral.decay_rate(f, a, 0.0, fixed_point)
    return mu, 1.0 / mu


def trace_manifold(
    f: NormalFamily,
    a: float,
    fixed_point: int = -1,
    direction: str = "unstable",
    n_points: int = 200,
    n_iters: int = 20,
    seed_distance: float = 1e-6,
    on_escape: str = "raise",
    box: float = 3.0,
) -> np.ndarray:
    """Polyline (rows of (q, r)) along one branch of a saddle's invariant manifold.

    Seeds cover one fundamental domain on the eigenline, at distances from
    ``seed_distance`` up to ``seed_distance`` times the expansion factor, on
    the side facing the other saddle; they are then pushed forward (unstable)
    or backward (stable) ``n_iters`` times.
    """
    if fixed_point not in (1, -1):
        raise ValueError("fixed_point must be +1 or -1")
    if direction not in ("stable", "unstable"):
        raise ValueError("direction must be 'stable' or 'unstable'")
    mu, lam_u = map_eigenvalues(f, a, fixed_point)
    ev = lam_u if direction == "unstable" else mu
    vec = np.array([ev, 1.0]) / math.hypot(ev, 1.0)
    vec *= -fixed_point
    fp = np.array([float(fixed_point)] * 2)
    dist = seed_distance * lam_u ** (np.arange(n_points) / n_points)
    pts = fp + dist[:, None] * vec
    mapper = planar_map_step if direction == "unstable" else planar_map_inverse
    out = [pts]
    cur = pts.copy()
    for _ in range(n_iters):
        q, r = mapper(cur[:, 0], cur[:, 1], f, a)
        cur = np.column_stack([q, r])
        inside = np.all(np.abs(cur) <= box, axis=1) & np.all(np.isfinite(cur), axis=1)
        if not np.all(inside):
            if on_escape == "raise":
                raise EscapedDomain(f"manifold left [-{box},{box}]^2")
            k = int(np.argmin(inside))
            out.append(cur[:k])
            break
        out.append(cur)
    return np.vstack(out)
