"""Semiparametric drift potentials for pairwise-interaction particle systems.

A drift potential is

    phi(y) = sum_{j=1}^{J} a_j phi_j(y) + beta(y)

with polynomial basis terms phi_j(y) = y^(2j) for j <= J1, trigonometric
terms phi_j(y) = cos(theta_j y) for J1 < j <= J, and an even, bounded
nonparametric component beta.  The convolved coefficients alpha are the
coefficients of phi * pi when pi is a symmetric probability density; the
linear maps a <-> alpha implemented here are exact given the even moments
of pi and its Fourier transform at the trigonometric frequencies.

All types in this module are treated as immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpecError",
    "NonIdentifiableFrequencyError",
    "BetaSpec",
    "DriftSpec",
    "ModelShape",
    "AlphaCoefficients",
    "eval_drift_parts",
    "convexity_certificate",
    "alpha_from_a",
    "a_from_alpha",
]

BETA_FAMILIES = ("zero", "cos-bump", "sinc-power", "tabulated")

# Shared crossover between the closed form and the Taylor branch of the
# analytic beta families.  Below this the closed forms lose up to all
# significant digits (the second derivative amplifies rounding like y^-4),
# above it the 10th-order series is accurate to ~1e-13.
_SERIES_CUTOFF = 0.25

# Search domain for the grid stage of inf beta''.
_INF_HALF_WIDTH = 50.0
_INF_POINTS = 2_000_001


class SpecError(ValueError):
    """A drift specification violates its structural constraints."""


class NonIdentifiableFrequencyError(ValueError):
    """The empirical characteristic function is too small at a frequency."""


def _g0(u):
    # (1 - cos u) / u^2
    u2 = u * u
    return 0.5 + u2 * (-1.0 / 24 + u2 * (1.0 / 720 + u2 * (-1.0 / 40320
           + u2 * (1.0 / 3628800 - u2 / 479001600))))


def _g1(u):
    # d/du of g0, i.e. (u sin u + 2 cos u - 2) / u^3
    u2 = u * u
    return u * (-1.0 / 12 + u2 * (1.0 / 180 + u2 * (-1.0 / 6720
           + u2 * (1.0 / 453600 - u2 / 47900160))))


def _g2(u):
    # second derivative of g0
    u2 = u * u
    return -1.0 / 12 + u2 * (1.0 / 60 + u2 * (-1.0 / 1344
           + u2 * (1.0 / 64800 - u2 / 5322240)))


def _sinc_parts(y):
    """sin(y)/y and its first two derivatives, stable near zero."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = np.empty_like(y)
    s1 = np.empty_like(y)
    s2 = np.empty_like(y)
    small = np.abs(y) < _SERIES_CUTOFF
    big = ~small
    yb = y[big]
    sin_y, cos_y = np.sin(yb), np.cos(yb)
    s[big] = sin_y / yb
    s1[big] = cos_y / yb - sin_y / yb**2
    s2[big] = -sin_y / yb - 2 * cos_y / yb**2 + 2 * sin_y / yb**3
    t = y[small]
    t2 = t * t
    s[small] = 1 + t2 * (-1.0 / 6 + t2 * (1.0 / 120 + t2 * (-1.0 / 5040
               + t2 * (1.0 / 362880 - t2 / 39916800))))
    s1[small] = t * (-1.0 / 3 + t2 * (1.0 / 30 + t2 * (-1.0 / 840
                + t2 * (1.0 / 45360 - t2 / 3991680))))
    s2[small] = -1.0 / 3 + t2 * (1.0 / 10 + t2 * (-1.0 / 168
                + t2 * (1.0 / 6480 - t2 / 443520)))
    return s, s1, s2


@dataclass
class BetaSpec:
    """Even nonparametric component of the drift potential.

    Families:

    * ``zero``:        beta identically 0.
    * ``cos-bump``:    beta(y) = (1 - cos(b y)) / y^2,  b > 0.
    * ``sinc-power``:  beta(y) = (sin(y) / y)^(2k),  integer k >= 1.
    * ``tabulated``:   even function given by values on a symmetric
      uniform grid; constant beyond the table (derivatives 0 there).
    """

    family: str
    b: float = 1.0
    k: int = 1
    table_half_width: float | None = None
    table_values: np.ndarray | None = None
    _inf_second: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in BETA_FAMILIES:
            raise SpecError(f"unknown beta family {self.family!r}")
        if self.family == "cos-bump" and not self.b > 0:
            raise SpecError("cos-bump requires b > 0")
        if self.family == "sinc-power" and (self.k < 1 or self.k != int(self.k)):
            raise SpecError("sinc-power requires integer k >= 1")
        if self.family == "tabulated":
            if self.table_half_width is None or self.table_values is None:
                raise SpecError("tabulated beta needs table_half_width and table_values")
            v = np.asarray(self.table_values, dtype=float)
            if v.ndim != 1 or v.size < 3 or v.size % 2 == 0:
                raise SpecError("tabulated values must be a 1-d odd-length vector")
            if not np.all(np.isfinite(v)):
                raise SpecError("tabulated values must be finite")
            v = 0.5 * (v + v[::-1])  # enforce evenness
            self.table_values = v
            half = v.size // 2
            self._x = self.table_half_width * (np.arange(v.size) - half) / half
            self._d1 = np.gradient(v, self._x)
            self._d2 = np.gradient(self._d1, self._x)

    @classmethod
    def zero(cls) -> "BetaSpec":
        return cls("zero")

    @classmethod
    def cos_bump(cls, b: float) -> "BetaSpec":
        return cls("cos-bump", b=b)

    @classmethod
    def sinc_power(cls, k: int) -> "BetaSpec":
        return cls("sinc-power", k=k)

    @classmethod
    def tabulated(cls, half_width: float, values) -> "BetaSpec":
        return cls("tabulated", table_half_width=half_width, table_values=values)

    @property
    def is_zero(self) -> bool:
        return self.family == "zero"

    def value(self, y):
        y, scalar = _as_array(y)
        if self.family == "zero":
            out = np.zeros_like(y)
        elif self.family == "cos-bump":
            u = self.b * y
            out = np.where(np.abs(u) < _SERIES_CUTOFF,
                           self.b**2 * _g0(u),
                           _safe_div(1 - np.cos(u), y * y))
        elif self.family == "sinc-power":
            s, _, _ = _sinc_parts(y)
            out = s ** (2 * self.k)
        else:
            out = np.interp(y, self._x, self.table_values)
        return out.item() if scalar else out

    def deriv(self, y):
        y, scalar = _as_array(y)
        if self.family == "zero":
            out = np.zeros_like(y)
        elif self.family == "cos-bump":
            u = self.b * y
            out = np.where(np.abs(u) < _SERIES_CUTOFF,
                           self.b**3 * _g1(u),
                           _safe_div(self.b * y * np.sin(u) + 2 * np.cos(u) - 2, y**3))
        elif self.family == "sinc-power":
            s, s1, _ = _sinc_parts(y)
            out = 2 * self.k * s ** (2 * self.k - 1) * s1
        else:
            out = np.interp(y, self._x, self._d1, left=0.0, right=0.0)
        return out.item() if scalar else out

    def second_deriv(self, y):
        y, scalar = _as_array(y)
        if self.family == "zero":
            out = np.zeros_like(y)
        elif self.family == "cos-bump":
            u = self.b * y
            out = np.where(np.abs(u) < _SERIES_CUTOFF,
                           self.b**4 * _g2(u),
                           _safe_div(u * u * np.cos(u) - 4 * u * np.sin(u)
                                     - 6 * np.cos(u) + 6, y**4))
        elif self.family == "sinc-power":
            s, s1, s2 = _sinc_parts(y)
            k = self.k
            out = 2 * k * (2 * k - 1) * s ** (2 * k - 2) * s1**2 + 2 * k * s ** (2 * k - 1) * s2
        else:
            out = np.interp(y, self._x, self._d2, left=0.0, right=0.0)
        return out.item() if scalar else out

    def sup_norm(self) -> float:
        """sup |beta|; exact for the analytic families (attained at 0)."""
        if self.family == "zero":
            return 0.0
        if self.family == "cos-bump":
            return self.b**2 / 2
        if self.family == "sinc-power":
            return 1.0
        return float(np.max(np.abs(self.table_values)))

    def inf_second_deriv(self) -> float:
        """inf over the real line of beta''.

        Dense grid search combined with the tail limit (beta'' -> 0 at
        infinity for every family in the catalog).
        """
        if self._inf_second is not None:
            return self._inf_second
        if self.family == "zero":
            val = 0.0
        elif self.family == "tabulated":
            val = min(float(np.min(self._d2)), 0.0)
        else:
            half = _INF_HALF_WIDTH
            if self.family == "cos-bump":
                # the oscillation scale is 1/b; keep resolution past it
                half = max(half, 10.0 / self.b)
            g = np.linspace(0.0, half, _INF_POINTS)
            val = min(float(np.min(self.second_deriv(g))), 0.0)
        self._inf_second = val
        return val


def _as_array(y):
    arr = np.asarray(y, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _safe_div(num, den):
    # den vanishes only where the series branch is selected; silence the
    # spurious division warning for those lanes.
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))


@dataclass
class ModelShape:
    """The part of a drift specification known to the estimator."""

    j1: int
    j: int
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if self.j1 < 1 or self.j < self.j1:
            raise SpecError("need 1 <= J1 <= J")
        if self.theta.size != self.j - self.j1:
            raise SpecError("theta must have J - J1 entries")
        if self.theta.size:
            if np.any(self.theta <= 0):
                raise SpecError("frequencies must be positive")
            if np.unique(self.theta).size != self.theta.size:
                raise SpecError("frequencies must be distinct")

    def basis_deriv(self, y):
        """Matrix of phi_j'(y) values, shape (J, len(y))."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        rows = [2 * k * y ** (2 * k - 1) for k in range(1, self.j1 + 1)]
        rows += [-th * np.sin(th * y) for th in self.theta]
        return np.vstack(rows)


@dataclass
class DriftSpec:
    """Full drift specification: shape, coefficients and beta.

    ``lam`` is the convexity floor the statistician is willing to assume;
    when omitted it defaults to the computed certificate
    2 a_1 - sum_{j>J1} theta_j^2 |a_j| + inf beta''.
    """

    j1: int
    j: int
    a: np.ndarray
    theta: np.ndarray
    beta: BetaSpec
    lam: float | None = None

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        ModelShape(self.j1, self.j, self.theta)  # shape-level validation
        if self.a.size != self.j:
            raise SpecError("a must have J entries")
        if not self.a[0] > 0:
            raise SpecError("a_1 must be positive")
        if not self.a[self.j1 - 1] > 0:
            raise SpecError("a_J1 must be positive")
        if self.j1 > 2 and np.any(self.a[1:self.j1 - 1] < 0):
            raise SpecError("interior polynomial coefficients must be nonnegative")
        cert = convexity_certificate(self)
        if cert <= 0:
            raise SpecError(f"convexity certificate {cert:.6g} is not positive")
        if self.lam is None:
            self.lam = cert
        elif not 0 < self.lam <= cert + 1e-12:
            raise SpecError(
                f"lambda floor {self.lam:.6g} exceeds certificate {cert:.6g}")

    @property
    def shape(self) -> ModelShape:
        return ModelShape(self.j1, self.j, self.theta)

    @property
    def a_poly(self) -> np.ndarray:
        return self.a[:self.j1]

    @property
    def a_trig(self) -> np.ndarray:
        return self.a[self.j1:]


def eval_drift_parts(spec: DriftSpec, y):
    """Evaluate phi, phi' and phi'' of the drift potential at y.

    Accepts scalars or arrays; total on finite input.
    """
    yy, scalar = _as_array(y)
    y2 = yy * yy
    phi = np.zeros_like(yy)
    dphi = np.zeros_like(yy)
    d2phi = np.zeros_like(yy)
    q = np.ones_like(yy)  # y^(2k-2)
    for k in range(1, spec.j1 + 1):
        ak = spec.a[k - 1]
        phi += ak * q * y2
        dphi += ak * (2 * k) * q * yy
        d2phi += ak * (2 * k) * (2 * k - 1) * q
        q = q * y2
    for idx, th in enumerate(spec.theta):
        aj = spec.a[spec.j1 + idx]
        c, s = np.cos(th * yy), np.sin(th * yy)
        phi += aj * c
        dphi += -aj * th * s
        d2phi += -aj * th * th * c
    phi += spec.beta.value(yy)
    dphi += spec.beta.deriv(yy)
    d2phi += spec.beta.second_deriv(yy)
    if scalar:
        return phi.item(), dphi.item(), d2phi.item()
    return phi, dphi, d2phi


def convexity_certificate(spec: DriftSpec) -> float:
    """Lower bound 2 a_1 - sum_{j>J1} theta_j^2 |a_j| + inf beta'' for phi''."""
    trig = float(np.sum(spec.theta**2 * np.abs(spec.a[spec.j1:]))) if spec.j > spec.j1 else 0.0
    return 2.0 * float(spec.a[0]) - trig + spec.beta.inf_second_deriv()


def alpha_from_a(spec: DriftSpec, even_moments, cf_at_theta=None) -> "AlphaCoefficients":
    """Map raw coefficients a to convolved coefficients alpha.

    ``even_moments[i]`` must be m_{2i} (so even_moments[0] = 1); at least
    J1 entries are required.  alpha_0 = sum_k m_{2k} a_k additionally
    needs m_{2 J1} and is set to None when that entry is missing.
    ``cf_at_theta`` supplies the Fourier transform of the density at each
    trigonometric frequency (required when J > J1).
    """
    m = np.atleast_1d(np.asarray(even_moments, dtype=float))
    j1, j = spec.j1, spec.j
    if m.size < j1:
        raise SpecError(f"need at least {j1} even moments, got {m.size}")
    if abs(m[0] - 1.0) > 1e-8:
        raise SpecError("even_moments[0] must be the total mass 1")
    alpha = np.zeros(j)
    for jj in range(1, j1 + 1):
        alpha[jj - 1] = sum(
            math.comb(2 * k, 2 * jj) * m[k - jj] * spec.a[k - 1]
            for k in range(jj, j1 + 1))
    if j > j1:
        cf = np.atleast_1d(np.asarray(cf_at_theta, dtype=float))
        if cf.size != j - j1:
            raise SpecError("cf_at_theta must have J - J1 entries")
        alpha[j1:] = spec.a[j1:] * cf
    alpha0 = None
    if m.size >= j1 + 1:
        alpha0 = float(sum(m[k] * spec.a[k - 1] for k in range(1, j1 + 1)))
    return AlphaCoefficients(j1=j1, alpha=alpha, alpha0=alpha0)


def a_from_alpha(alpha: "AlphaCoefficients", even_moments, emp_cf_at_theta=None,
                 cf_tol: float = 1e-10) -> np.ndarray:
    """Invert the triangular moment system to recover a from alpha.

    The polynomial block is solved by back-substitution (its diagonal is
    exactly 1); trigonometric entries divide by the real part of the
    empirical characteristic function and raise
    NonIdentifiableFrequencyError below ``cf_tol``.
    """
    m = np.atleast_1d(np.asarray(even_moments, dtype=float))
    j1 = alpha.j1
    j = alpha.alpha.size
    if m.size < j1:
        raise SpecError(f"need at least {j1} even moments, got {m.size}")
    a = np.zeros(j)
    for jj in range(j1, 0, -1):
        tail = sum(
            math.comb(2 * k, 2 * jj) * m[k - jj] * a[k - 1]
            for k in range(jj + 1, j1 + 1))
        a[jj - 1] = alpha.alpha[jj - 1] - tail
    if j > j1:
        cf = np.atleast_1d(np.asarray(emp_cf_at_theta))
        if cf.size != j - j1:
            raise SpecError("emp_cf_at_theta must have J - J1 entries")
        cf = np.real(cf)
        bad = np.abs(cf) < cf_tol
        if np.any(bad):
            raise NonIdentifiableFrequencyError(
                f"|cf| below {cf_tol:g} at frequency indices {np.nonzero(bad)[0].tolist()}")
        a[j1:] = alpha.alpha[j1:] / cf
    return a


@dataclass
class AlphaCoefficients:
    """Convolved drift coefficients alpha_1..alpha_J (and optionally alpha_0)."""

    j1: int
    alpha: np.ndarray
    alpha0: float | None = None

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))

    @property
    def alpha_bar_1(self) -> float:
        """Sum of the polynomial-block coefficients alpha_1..alpha_J1."""
        return float(np.sum(self.alpha[:self.j1]))
