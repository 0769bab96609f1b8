"""Kernel estimation of the observation density, its derivative and the
log-density derivative, with the bandwidth/threshold rules of the
estimation procedure.

Kernels are Gaussian-weighted even polynomials of exact order m: the first
m-1 moments vanish and the mth does not.  Density and derivative estimates
are evaluated on a shared symmetric grid, either by direct summation or by
linear binning plus FFT convolution for large samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .grids import GridFunction
from .model import AlphaCoefficients

__all__ = [
    "KernelSpec",
    "EstimatorConfig",
    "make_kernel",
    "default_bandwidths",
    "effective_sample_size",
    "density_estimate",
    "density_derivative_estimate",
    "log_derivative_estimate",
    "default_delta",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)

# Direct summation up to this many (sample x grid-point) kernel evaluations;
# beyond it the linearly-binned FFT path takes over.
_DIRECT_BUDGET = 1 << 24

# Gaussian-weighted kernels decay super-exponentially; 12 bandwidths of
# support keep the truncated mass far below quadrature error.
_SUPPORT_RADIUS = 12.0


@dataclass
class KernelSpec:
    """Smoothing kernel K(y) = p(y^2) g(y) of even order m.

    ``coeffs[i]`` multiplies y^(2i); g is the standard Gaussian density.
    """

    m: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self._poly(y) * np.exp(-0.5 * y * y) / _SQRT2PI

    def deriv(self, y):
        y = np.asarray(y, dtype=float)
        return (self._poly_deriv(y) - y * self._poly(y)) * np.exp(-0.5 * y * y) / _SQRT2PI

    def _poly(self, y):
        y2 = y * y
        out = np.zeros_like(y2)
        for c in self.coeffs[::-1]:
            out = out * y2 + c
        return out

    def _poly_deriv(self, y):
        y2 = y * y
        out = np.zeros_like(y2)
        for i in range(self.coeffs.size - 1, 0, -1):
            out = out * y2 + 2 * i * self.coeffs[i]
        return out * y

    def moment(self, j: int, half_width: float = 40.0, n: int = 200_001) -> float:
        """integral y^j K(y) dy by quadrature (for verification)."""
        y = np.linspace(-half_width, half_width, n)
        return float(np.trapezoid(y**j * self(y), y))

    def lipschitz(self, half_width: float = 20.0, n: int = 100_001) -> float:
        """Numerical bound on sup |K'|."""
        y = np.linspace(-half_width, half_width, n)
        return float(np.max(np.abs(self.deriv(y))))


def make_kernel(m: int) -> KernelSpec:
    """Gaussian-weighted polynomial kernel of exact even order m (2..10).

    Solves the even-moment system M c = e_0 with M[q, i] = (2(q+i)-1)!!
    exactly in rationals; m = 2 gives the Gaussian itself, m = 4 gives
    K(y) = ((3 - y^2)/2) g(y).
    """
    if m % 2 or not 2 <= m <= 10:
        raise ValueError(f"unsupported kernel order {m}; need even m in 2..10")
    from fractions import Fraction

    r = m // 2
    mat = [[Fraction(_double_factorial(2 * (q + i) - 1)) for i in range(r)]
           for q in range(r)]
    rhs = [Fraction(1 if q == 0 else 0) for q in range(r)]
    coeffs = _solve_exact(mat, rhs)
    return KernelSpec(m=m, coeffs=np.array([float(c) for c in coeffs]))


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def _solve_exact(mat, rhs):
    n = len(rhs)
    a = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def default_bandwidths(n_eff: float, m: int) -> tuple[float, float]:
    """Bandwidths (h0, h1) = (n^(-1/(2(m+1))), n^(-1/(2(m+2))))."""
    if n_eff < 1:
        raise ValueError("effective sample size must be >= 1")
    return (n_eff ** (-1.0 / (2 * (m + 1))), n_eff ** (-1.0 / (2 * (m + 2))))


def effective_sample_size(n: int, t: float, lam: float) -> float:
    """Combined rate (1/N + exp(-lambda T))^-1 with both constants set to 1."""
    return 1.0 / (1.0 / n + math.exp(-lam * t))


def _as_grid(grid) -> GridFunction:
    if isinstance(grid, GridFunction):
        return grid
    half_width, n_points = grid
    return GridFunction(half_width, np.zeros(n_points))


def _kde_eval(samples, kfun, h, grid, method, scale):
    """Common evaluation of (1/N) sum_i scale * kfun((y - Y_i)/h) on the grid."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    g = _as_grid(grid)
    x = g.x
    n = samples.size
    if method == "auto":
        method = "direct" if n * x.size <= _DIRECT_BUDGET else "fft"
    if method == "direct":
        out = np.zeros(x.size)
        rows = max(1, _DIRECT_BUDGET // x.size)
        for lo in range(0, n, rows):
            chunk = samples[lo:lo + rows]
            out += kfun((x[None, :] - chunk[:, None]) / h).sum(axis=0)
        out *= scale / n
    elif method == "fft":
        counts = _linear_bin(samples, g)
        m = int(np.ceil(_SUPPORT_RADIUS * h / g.dx))
        u = g.dx * np.arange(-m, m + 1)
        out = fftconvolve(counts, kfun(u / h), mode="same") * (scale / n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return g.with_values(out)


def _linear_bin(samples, grid: GridFunction) -> np.ndarray:
    """Distribute unit mass per sample onto the two nearest grid nodes."""
    x0, dx, n = -grid.half_width, grid.dx, grid.n_points
    pos = np.clip((samples - x0) / dx, 0.0, n - 1.0)
    left = np.minimum(pos.astype(np.int64), n - 2)
    frac = pos - left
    counts = np.zeros(n)
    np.add.at(counts, left, 1.0 - frac)
    np.add.at(counts, left + 1, frac)
    return counts


def density_estimate(samples, kernel: KernelSpec, h: float, grid,
                     method: str = "auto") -> GridFunction:
    """Kernel density estimate (1/N) sum_i K_h(y - Y_i) on the grid."""
    return _kde_eval(samples, kernel, h, grid, method, scale=1.0 / h)


def density_derivative_estimate(samples, kernel: KernelSpec, h: float, grid,
                                method: str = "auto") -> GridFunction:
    """Estimate of the density derivative, (1/(N h^2)) sum_i K'((y - Y_i)/h).

    This is the exact derivative in y of ``density_estimate`` at the same
    bandwidth.
    """
    return _kde_eval(samples, kernel.deriv, h, grid, method, scale=1.0 / h**2)


def log_derivative_estimate(pi_hat: GridFunction, pi_prime_hat: GridFunction,
                            delta: float) -> GridFunction:
    """Thresholded ratio (pi_hat' / pi_hat) 1{pi_hat > delta}; exact zero below."""
    pi_hat.require_same_grid(pi_prime_hat)
    num = pi_prime_hat.values
    den = pi_hat.values
    mask = den > delta
    out = np.zeros_like(den)
    np.divide(num, den, out=out, where=mask)
    out[~mask] = 0.0
    return pi_hat.with_values(out)


def default_delta(alpha: AlphaCoefficients, z_pi: float, beta_sup: float,
                  u: float) -> float:
    """Density threshold delta = delta0 exp(-abar1 U^(2 J1)) with
    delta0 = (2 Z)^-1 exp(-alpha0 - sum_{j>J1} |alpha_j| - sup|beta|)."""
    if alpha.alpha0 is None:
        raise ValueError("alpha0 is required for the delta rule")
    trig_l1 = float(np.sum(np.abs(alpha.alpha[alpha.j1:])))
    delta0 = math.exp(-alpha.alpha0 - trig_l1 - beta_sup) / (2.0 * z_pi)
    return delta0 * math.exp(-alpha.alpha_bar_1 * u ** (2 * alpha.j1))


@dataclass
class EstimatorConfig:
    """All tuning constants of the four-step estimator.

    ``half_width``/``n_points`` fix the shared evaluation grid; ``n_eff``
    records the effective sample size the thresholds were derived from
    (None when they were set manually).
    """

    m: int
    h0: float
    h1: float
    delta: float
    u: float
    epsilon: float
    omega: float
    z_max: float
    half_width: float
    n_points: int = 4097
    n_eff: float | None = None
    weight_kind: str = "indicator"
    symmetric_window: bool = False
    n_freq: int | None = None  # None: resolve from z_max and the grid
    kde_method: str = "auto"

    def __post_init__(self):
        if not (0 < self.h0 <= 1 and 0 < self.h1 <= 1):
            raise ValueError("bandwidths must lie in (0, 1]")
        if not (0 < self.delta < 1 and 0 < self.omega < 1):
            raise ValueError("thresholds must lie in (0, 1)")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.u >= 1:
            raise ValueError("window parameter U must be >= 1")
        if not self.epsilon * self.u < self.half_width:
            raise ValueError("window epsilon*U must fit inside the grid")
        if self.u > self.half_width:
            raise ValueError("window U must fit inside the grid")

    @property
    def grid(self) -> GridFunction:
        return GridFunction(self.half_width, np.zeros(self.n_points))
