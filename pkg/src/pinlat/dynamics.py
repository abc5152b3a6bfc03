"""Front propagation on Z^2 in rational directions.

Direction (1, s/q) is simulated on a q-row strip with helical identification
u[i, q] = u[i + s, 0]; a planar front along xi = i + (s/q) j is then exactly
compatible with the boundary. The window follows the front by whole-column
shifts, which commute with the helical coupling.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import BadBracket, BlowUp, FrontHitBoundary, NoFront

__all__ = [
    "Direction",
    "StripState",
    "WaveSpeedMeasurement",
    "APlusEstimate",
    "strip_dt",
    "make_strip",
    "strip_from_profile",
    "step",
    "front_position",
    "measure_speed",
    "estimate_a_plus",
    "sweep_theta",
    "sweep_to_csv",
    "epsilon_regime_probe",
]


@dataclass(frozen=True)
class Direction:
    """Direction vector (1, s/q); kappa is normalised to 1."""

    sigma_num: int = 0
    sigma_den: int = 1
    kappa: int = 1

    def __post_init__(self):
        if self.kappa != 1:
            raise ValueError("directions are normalised to kappa = 1")
        if self.sigma_den < 1 or self.sigma_num < 0:
            raise ValueError("need q >= 1 and s >= 0")
        if math.gcd(self.sigma_num, self.sigma_den) != 1 and not (self.sigma_num == 0 and self.sigma_den == 1):
            raise ValueError(f"s/q = {self.sigma_num}/{self.sigma_den} is not in lowest terms")

    @classmethod
    def from_slope(cls, eps, max_den: int = 64) -> "Direction":
        if isinstance(eps, (str, Fraction)):
            fr = Fraction(eps)
        else:
            fr = Fraction(float(eps)).limit_denominator(max_den)
        return cls(fr.numerator, fr.denominator)

    @property
    def eps(self) -> float:
        return self.sigma_num / self.sigma_den

    @property
    def theta(self) -> float:
        return math.atan2(self.sigma_num, self.sigma_den)

    def __str__(self) -> str:
        return f"{self.sigma_num}/{self.sigma_den}"


@dataclass
class StripState:
    u: np.ndarray  # shape (W, q)
    shear: int
    t: float
    dt: float
    offset: int = 0  # columns the window has been shifted by
    boundary: tuple = (-1.0, 1.0)  # values clamped beyond the left and right edges

    @property
    def width(self) -> int:
        return self.u.shape[0]

    @property
    def height(self) -> int:
        return self.u.shape[1]


def strip_dt(f, a: float) -> float:
    """Largest admissible step, 0.1 / (4 + max_{|u|<=1.1} |f'(u, a)|)."""
    return 0.1 / (4.0 + f.max_abs_du(a, 1.1))


def make_strip(direction: Direction, W: int, dt: float, xi0: float | None = None) -> StripState:
    """Sharp step: -1 where i + (s/q) j < xi0, +1 elsewhere."""
    q, s = direction.sigma_den, direction.sigma_num
    xi0 = W / 2.0 - 0.5 if xi0 is None else xi0
    i = np.arange(W)[:, None]
    j = np.arange(q)[None, :]
    xi = i + s * j / q
    u = np.where(xi < xi0, -1.0, 1.0)
    return StripState(np.ascontiguousarray(u), s, 0.0, dt)


def strip_from_profile(values, q: int, dt: float) -> StripState:
    """Replicate a 1D profile in every row of a theta = 0 strip."""
    u = np.repeat(np.asarray(values, dtype=float)[:, None], q, axis=1)
    return StripState(np.ascontiguousarray(u), 0, 0.0, dt)


def step(state: StripState, f, a: float, n_steps: int) -> StripState:
    """RK4 for du/dt = (Delta u) - f(u, a); returns a new state."""
    bound = strip_dt(f, a)
    if state.dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={state.dt} exceeds the stability guard {bound:.4g}")
    u = state.u.copy()
    lo, hi = map(float, state.boundary)
    peak = _kernels.rk4_strip(u, state.shear, f.u_poly(a), state.dt, int(n_steps), lo, hi)
    if not peak <= 2.0:
        raise BlowUp(f"|u| reached {peak:.3g}; dt too large?")
    return replace(state, u=u, t=state.t + n_steps * state.dt)


def _row_crossings(u: np.ndarray):
    w, q = u.shape
    out = np.empty(q)
    for j in range(q):
        col = u[:, j]
        idx = np.nonzero(col >= 0.0)[0]
        if idx.size == 0 or idx[0] == 0 or col[0] >= 0.0:
            raise NoFront(f"row {j} has no -/+ zero crossing")
        k = int(idx[0])
        lo, hi = col[k - 1], col[k]
        out[j] = k - 1 + (0.0 - lo) / (hi - lo)
    return out


def front_position(state: StripState) -> float:
    """Row average of the interpolated zero crossings, in xi = i + (s/q) j."""
    q = state.height
    cross = _row_crossings(state.u)
    xi = cross + state.shear * np.arange(q) / q
    return float(np.mean(xi)) + state.offset


def _recentre(state: StripState, local: float, slack: float = 4.0) -> StripState:
    k = int(round(local - state.width / 2.0))
    if abs(k) <= slack:
        return state
    u = state.u
    q = state.height
    if k > 0:
        u = np.vstack([u[k:], np.ones((k, q))])
    else:
        u = np.vstack([-np.ones((-k, q)), u[:k]])
    return replace(state, u=np.ascontiguousarray(u), offset=state.offset + k)


@dataclass
class WaveSpeedMeasurement:
    direction: Direction
    a: float
    c_est: float
    fit_residual: float
    pinned: bool
    window: tuple
    displacement: float = 0.0
    slope: float = 0.0
    times: np.ndarray = field(default=None, repr=False)
    positions: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "direction": str(self.direction),
            "theta": self.direction.theta,
            "a": self.a,
            "c_est": self.c_est,
            "fit_residual": self.fit_residual,
            "pinned": self.pinned,
            "window": list(self.window),
            "displacement": self.displacement,
            "slope": self.slope,
        }

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "xi_star"])
        for t, x in zip(self.times, self.positions):
            w.writerow([repr(float(t)), repr(float(x))])
        return buf.getvalue()


PIN_THRESHOLD = 0.5


def measure_speed(
    f,
    a: float,
    direction: Direction = Direction(),
    W: int = 60,
    t_end: float = 2000.0,
    dt: float | None = None,
    sample_dt: float = 1.0,
    margin: int = 20,
) -> WaveSpeedMeasurement:
    """Simulate a sheared step and fit xi*(t) = c t + b over t >= t_end / 2.

    ``fit_residual`` is the standard error of the fitted slope. The run is
    classed as pinned when the front moves less than half a site (peak to
    peak) over the fit window; c_est is then 0.
    """
    if not -1.0 < a < 1.0:
        raise ValueError("a must lie in (-1, 1)")
    dt = strip_dt(f, a) if dt is None else dt
    W = max(int(W), 2 * margin + 10)
    state = make_strip(direction, W, dt)
    per_sample = max(1, int(round(sample_dt / dt)))
    n_samples = int(math.ceil(t_end / (per_sample * dt)))
    coef = f.u_poly(a)
    times = [0.0]
    xs = [front_position(state)]
    u = state.u
    for k in range(n_samples):
        peak = _kernels.rk4_strip(u, state.shear, coef, dt, per_sample)
        if not peak <= 2.0:
            raise BlowUp(f"|u| reached {peak:.3g} at a={a}")
        state = replace(state, u=u, t=(k + 1) * per_sample * dt)
        cross = _row_crossings(u)
        if cross.min() < margin or cross.max() > W - 1 - margin:
            raise FrontHitBoundary(f"front within {margin} sites of the window edge at t={state.t:.1f}")
        xi = front_position(state)
        times.append(state.t)
        xs.append(xi)
        state = _recentre(state, xi - state.offset)
        u = state.u
    t = np.array(times)
    x = np.array(xs)
    sel = t >= t[-1] / 2.0
    tt, xx = t[sel], x[sel]
    A = np.column_stack([tt, np.ones_like(tt)])
    coefs, *_ = np.linalg.lstsq(A, xx, rcond=None)
    slope = float(coefs[0])
    resid = xx - A @ coefs
    dof = max(1, len(tt) - 2)
    se = math.sqrt(float(resid @ resid) / dof / float(np.sum((tt - tt.mean()) ** 2)))
    disp = float(xx.max() - xx.min())
    pinned = disp < PIN_THRESHOLD
    return WaveSpeedMeasurement(
        direction, float(a), 0.0 if pinned else slope, se, pinned, (float(tt[0]), float(tt[-1])), disp, slope, t, x
    )


@dataclass
class APlusEstimate:
    direction: Direction
    value: float
    tol: float
    brackets: list = field(default_factory=list)

    def __float__(self) -> float:
        return self.value


def estimate_a_plus(
    f,
    direction: Direction = Direction(),
    bracket: tuple = (0.0, 0.05),
    tol: float = 1e-3,
    **measure_kw,
) -> APlusEstimate:
    """Bisection on the pinned flag; the estimate is the final bracket midpoint."""
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise BadBracket("bracket must satisfy a_lo < a_hi")
    if not measure_speed(f, lo, direction, **measure_kw).pinned:
        raise BadBracket(f"front is not pinned at a_lo={lo}")
    top = measure_speed(f, hi, direction, **measure_kw)
    if top.pinned or top.c_est <= 0:
        raise BadBracket(f"front is not moving forward at a_hi={hi}")
    brackets = [(lo, hi)]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if measure_speed(f, mid, direction, **measure_kw).pinned:
            lo = mid
        else:
            hi = mid
        brackets.append((lo, hi))
    return APlusEstimate(direction, 0.5 * (lo + hi), tol, brackets)


def sweep_theta(f, directions, bracket=(0.0, 0.05), tol: float = 1e-3, threads: int = 1, **measure_kw):
    """a_+ estimates per direction, as rows (direction, theta, estimate).

    Distinct directions run concurrently on up to ``threads`` workers; repeated
    entries reuse the first result.
    """
    directions = list(directions)
    unique = list(dict.fromkeys(directions))

    def one(d):
        return estimate_a_plus(f, d, bracket, tol, **measure_kw)

    if threads > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(unique, pool.map(one, unique)))
    else:
        results = {d: one(d) for d in unique}
    return [(d, d.theta, results[d].value) for d in directions]


def sweep_to_csv(rows, tol: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "q", "theta", "a_plus_est", "tol"])
    for d, theta, est in rows:
        w.writerow([d.sigma_num, d.sigma_den, repr(theta), repr(est), repr(tol)])
    return buf.getvalue()


def epsilon_regime_probe(
    f,
    eps,
    mode: str = "c_eq_eps",
    a_plus_ref: float | None = None,
    a_floor: float = 0.0,
    xtol: float = 1e-5,
    t_end: float = 600.0,
    **measure_kw,
) -> dict:
    """Solve c(a) = eps (theta = 0) or c(a) = eps^2 (direction (1, eps)) for a.

    ``eps`` may be a single value or a ladder. ``a_floor`` must be a value
    where the target speed is not yet reached (e.g. inside the pinning
    interval).
    """
    if mode not in ("c_eq_eps", "c_eq_eps_sq"):
        raise ValueError("mode must be 'c_eq_eps' or 'c_eq_eps_sq'")
    ladder = [eps] if np.ndim(eps) == 0 else list(eps)
    rows = []
    for e in ladder:
        e = float(e)
        if not 0.0 < e <= 0.3:
            raise ValueError(f"eps={e} must lie in (0, 0.3]")
        if mode == "c_eq_eps":
            direction, target = Direction(), e
        else:
            direction = Direction.from_slope(e)
            target = direction.eps**2

        def excess(a, direction=direction, target=target):
            return measure_speed(f, a, direction, t_end=t_end, **measure_kw).c_est - target

        lo = a_floor
        if excess(lo) >= 0:
            raise BadBracket(f"speed already exceeds the target at a={lo}")
        hi = lo + max(2.0 * target, 0.01)
        while excess(hi) <= 0:
            lo, hi = hi, min(0.99, lo + 2.0 * (hi - lo))
            if hi >= 0.99:
                raise BadBracket("target speed not reached below a=0.99")
        a_eps = brentq(excess, lo, hi, xtol=xtol)
        rows.append(
            {
                "eps": e,
                "direction": str(direction),
                "target_speed": target,
                "a_eps": a_eps,
                "gap_to_a_plus": None if a_plus_ref is None else a_eps - a_plus_ref,
            }
        )
    a_vals = [r["a_eps"] for r in rows]
    order = np.argsort([r["eps"] for r in rows])[::-1]
    ordered = [a_vals[k] for k in order]
    decreasing = all(x > y for x, y in zip(ordered, ordered[1:]))
    return {"mode": mode, "a_plus_ref": a_plus_ref, "rows": rows, "decreasing_with_eps": decreasing}
