"""Bistable nonlinearities f(u, a) forming a normal family.

Every family is a polynomial in (u, a), so derivatives are exact and the
time-stepping kernels can work from plain coefficient arrays.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError

__all__ = [
    "Kind",
    "NormalFamily",
    "Violation",
    "ValidationReport",
    "cubic",
    "custom",
    "perturb",
    "validate",
    "family_from_config",
]


class Kind(str, enum.Enum):
    CUBIC = "cubic"
    PERTURBED = "perturbed"
    CUSTOM = "custom"


_CUBIC_MATRIX = np.array(
    [
        [0.0, 1.0],
        [-1.0, 0.0],
        [0.0, -1.0],
        [1.0, 0.0],
    ]
)  # (u^2 - 1)(u - a) = u^3 - a u^2 - u + a, indexed [power of u, power of a]


def _check_inputs(u, a):
    u = np.asarray(u, dtype=float)
    a = np.asarray(a, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite input to nonlinearity")
    if np.any(np.abs(a) >= 1.0):
        raise ValueError(f"detuning a must lie in (-1, 1), got {a}")
    return u, a


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class NormalFamily:
    """Immutable description of f(u, a).

    ``coefficients`` depends on ``kind``: empty for the cubic, the ascending
    coefficients of gamma(u) for a perturbed family (with ``base`` holding
    f0), and a nested tuple ``C[i][j]`` of the u^i a^j coefficients for a
    custom polynomial.
    """

    kind: Kind
    coefficients: tuple = ()
    label: str = ""
    base: "NormalFamily | None" = field(default=None, repr=False)

    # evaluation -----------------------------------------------------------

    def eval(self, u, a):
        u, a = _check_inputs(u, a)
        return _scalar(self._f(u, a, 0))

    __call__ = eval

    def du(self, u, a):
        u, a = _check_inputs(u, a)
        return _scalar(self._f(u, a, 1))

    def duu(self, u, a):
        u, a = _check_inputs(u, a)
        return _scalar(self._f(u, a, 2))

    def da(self, u, a):
        u, a = _check_inputs(u, a)
        return _scalar(self._fa(u, a))

    def _f(self, u, a, order):
        if self.kind is Kind.CUBIC:
            if order == 0:
                return (u * u - 1.0) * (u - a)
            if order == 1:
                return 3.0 * u * u - 2.0 * a * u - 1.0
            return 6.0 * u - 2.0 * a
        if self.kind is Kind.PERTURBED:
            g = np.asarray(self.coefficients, dtype=float)
            f0 = self.base
            # gamma(u) * f0(u, a), evaluated in exactly that order
            if order == 0:
                return P.polyval(u, g) * f0._f(u, a, 0)
            g1 = P.polyder(g)
            if order == 1:
                return P.polyval(u, g1) * f0._f(u, a, 0) + P.polyval(u, g) * f0._f(u, a, 1)
            g2 = P.polyder(g, 2)
            return (
                P.polyval(u, g2) * f0._f(u, a, 0)
                + 2.0 * P.polyval(u, g1) * f0._f(u, a, 1)
                + P.polyval(u, g) * f0._f(u, a, 2)
            )
        c = np.asarray(self.coefficients, dtype=float)
        if order:
            c = P.polyder(c, order, axis=0)
        return P.polyval2d(*np.broadcast_arrays(u, a), c)

    def _fa(self, u, a):
        if self.kind is Kind.CUBIC:
            return 1.0 - u * u
        if self.kind is Kind.PERTURBED:
            return P.polyval(u, np.asarray(self.coefficients, dtype=float)) * self.base._fa(u, a)
        c = P.polyder(np.asarray(self.coefficients, dtype=float), axis=1)
        return P.polyval2d(*np.broadcast_arrays(u, a), c)

    # polynomial views -------------------------------------------------------

    @property
    def coef_matrix(self) -> np.ndarray:
        """Coefficients ``C[i, j]`` of u^i a^j."""
        if self.kind is Kind.CUBIC:
            return _CUBIC_MATRIX.copy()
        if self.kind is Kind.PERTURBED:
            g = np.asarray(self.coefficients, dtype=float)
            base = self.base.coef_matrix
            out = np.zeros((base.shape[0] + len(g) - 1, base.shape[1]))
            for j in range(base.shape[1]):
                prod = P.polymul(g, base[:, j])
                out[: len(prod), j] = prod
            return out
        return np.array(self.coefficients, dtype=float)

    def u_poly(self, a: float, center: float = 0.0, which: str = "f") -> np.ndarray:
        """Ascending coefficients in d of f(center + d, a) (or of df/da).

        For ``center`` in {-1, 1} the constant term is replaced by the direct
        evaluation at the center, so tails of solutions keep full relative
        precision.
        """
        _check_inputs(center, a)
        c = self.coef_matrix
        if which == "da":
            c = P.polyder(c, axis=1)
        elif which != "f":
            raise ValueError(f"unknown polynomial {which!r}")
        apow = a ** np.arange(c.shape[1])
        cu = c @ apow
        if center != 0.0:
            shifted = P.polyval(np.polynomial.Polynomial([center, 1.0]), cu)
            cu = np.asarray(shifted.coef, dtype=float)
            cu[0] = self.eval(center, a) if which == "f" else self.da(center, a)
        return np.trim_zeros(cu, "b") if np.any(cu) else np.zeros(1)

    def max_abs_du(self, a: float, u_max: float = 1.1, n: int = 2001) -> float:
        u = np.linspace(-u_max, u_max, n)
        return float(np.max(np.abs(self.du(u, a))))

    def to_config(self) -> dict:
        if self.kind is Kind.CUBIC:
            return {"kind": "cubic"}
        if self.kind is Kind.PERTURBED:
            return {"kind": "perturbed", "gamma": list(self.coefficients), "base": self.base.to_config()}
        return {"kind": "custom", "coefficients": [list(r) for r in self.coefficients], "label": self.label}


def cubic() -> NormalFamily:
    return NormalFamily(Kind.CUBIC, (), "cubic (u^2-1)(u-a)")


def custom(coefficients, label: str = "custom") -> NormalFamily:
    c = np.atleast_2d(np.asarray(coefficients, dtype=float))
    if c.ndim != 2 or c.size == 0 or not np.all(np.isfinite(c)):
        raise ConfigError("custom coefficients must be a finite 2-D array C[i][j] of u^i a^j")
    return NormalFamily(Kind.CUSTOM, tuple(tuple(float(x) for x in row) for row in c), label)


def _min_on_unit_interval(g: np.ndarray, n_grid: int = 4001) -> float:
    grid = np.linspace(-1.0, 1.0, n_grid)
    cand = [grid]
    if len(g) > 2:
        roots = P.polyroots(P.polyder(g))
        real = roots[np.abs(roots.imag) < 1e-12].real
        cand.append(real[(real >= -1.0) & (real <= 1.0)])
    return float(np.min(P.polyval(np.concatenate(cand), g)))


def perturb(f0: NormalFamily, gamma_coeffs) -> NormalFamily:
    """Return the family gamma(u) * f0(u, a); gamma must be positive on [-1, 1]."""
    g = np.atleast_1d(np.asarray(gamma_coeffs, dtype=float))
    if g.ndim != 1 or g.size == 0 or not np.all(np.isfinite(g)):
        raise ConfigError("gamma must be a non-empty list of finite coefficients")
    gmin = _min_on_unit_interval(g)
    if gmin <= 0.0:
        raise ConfigError(f"gamma must be positive on [-1, 1]; its minimum there is {gmin:.6g}")
    label = f"({' + '.join(f'{c:g}u^{k}' for k, c in enumerate(g))}) * {f0.label or f0.kind.value}"
    return NormalFamily(Kind.PERTURBED, tuple(float(x) for x in g), label, f0)


def family_from_config(cfg: dict) -> NormalFamily:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("family must be an object with a 'kind' field")
    kind = cfg["kind"]
    if kind == "cubic":
        return cubic()
    if kind == "perturbed":
        if "gamma" not in cfg:
            raise ConfigError("perturbed family needs 'gamma'")
        base = family_from_config(cfg.get("base", {"kind": "cubic"}))
        return perturb(base, cfg["gamma"])
    if kind == "custom":
        if "coefficients" not in cfg:
            raise ConfigError("custom family needs 'coefficients'")
        return custom(cfg["coefficients"], cfg.get("label", "custom"))
    raise ConfigError(f"unknown family kind {kind!r}")


# validation -----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    condition: str
    u: float
    a: float
    value: float


@dataclass
class ValidationReport:
    valid: bool
    violations: list
    n_u: int
    n_a: int

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "n_u": self.n_u,
            "n_a": self.n_a,
            "violations": [vars(v) for v in self.violations],
        }


def validate(f: NormalFamily, n_u: int = 64, n_a: int = 64, root_tol: float = 1e-12) -> ValidationReport:
    """Sample the normal-family conditions on a uniform interior grid.

    Each failed condition is reported once, with its worst witness.
    """
    if n_u < 16 or n_a < 16:
        raise ValueError("grid sizes must be at least 16")
    a_grid = -1.0 + 2.0 * np.arange(1, n_a + 1) / (n_a + 1)
    u_grid = -1.0 + 2.0 * np.arange(1, n_u + 1) / (n_u + 1)
    U, A = np.meshgrid(u_grid, a_grid, indexing="ij")
    ones = np.ones_like(a_grid)
    violations = []

    def worst(name, u, a, value, bad, score):
        if np.any(bad):
            k = np.argmax(np.where(bad, score, -np.inf))
            violations.append(
                Violation(name, float(np.ravel(u)[k]), float(np.ravel(a)[k]), float(np.ravel(value)[k]))
            )

    for name, u in (("f(-1,a)=0", -ones), ("f(1,a)=0", ones), ("f(a,a)=0", a_grid)):
        val = f.eval(u, a_grid)
        worst(name, u, a_grid, val, np.abs(val) > root_tol, np.abs(val))
    for name, u, sgn in (("f'(-1,a)>0", -ones, 1.0), ("f'(1,a)>0", ones, 1.0), ("f'(a,a)<0", a_grid, -1.0)):
        val = f.du(u, a_grid)
        worst(name, u, a_grid, val, sgn * val <= 0.0, -sgn * val)

    fv = f.eval(U, A)
    below = U < A
    above = U > A
    worst("f>0 on (-1,a)", U, A, fv, below & (fv <= 0.0), -fv)
    worst("f<0 on (a,1)", U, A, fv, above & (fv >= 0.0), fv)

    fa = f.da(U, A)
    worst("df/da>0", U, A, fa, fa <= 0.0, -fa)
    return ValidationReport(not violations, violations, n_u, n_a)
