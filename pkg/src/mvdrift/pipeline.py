"""Steps (ii)-(iv) of the estimation procedure.

Given the thresholded log-density derivative from the kde module, this
module fits the convolved coefficients alpha by weighted least squares on
the window [eps U, U], recovers the raw coefficients a from empirical
moments and the empirical characteristic function, isolates the convolved
interaction term Psi on [-eps U, eps U], and recovers beta' by thresholded
Fourier deconvolution against the empirical characteristic function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .grids import GridFunction
from .invariant import InvariantSolution, alpha_oracle, fourier
from .kde import (EstimatorConfig, default_bandwidths, default_delta,
                  density_derivative_estimate, density_estimate,
                  log_derivative_estimate, make_kernel)
from .model import AlphaCoefficients, ModelShape, a_from_alpha

__all__ = [
    "IllConditionedError",
    "WeightFunction",
    "ContrastSystem",
    "DeconvolutionResult",
    "EstimationResult",
    "weight_function",
    "contrast_matrix",
    "fit_alpha",
    "empirical_moments",
    "empirical_cf",
    "parametric_log_derivative",
    "psi_estimate",
    "deconvolve",
    "run_pipeline",
    "oracle_estimator_config",
]

COND_LIMIT = 1e12

# default omega never decays below this floor
OMEGA_FLOOR = 1e-4


class IllConditionedError(RuntimeError):
    """Contrast system is singular or numerically unusable."""


@dataclass
class WeightFunction:
    """Nonnegative weight supported exactly on [epsilon, 1]."""

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in ("indicator", "smooth-bump"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        inside = (v >= self.epsilon) & (v <= 1.0)
        if self.kind == "indicator":
            return inside.astype(float)
        out = np.zeros_like(v)
        strict = (v > self.epsilon) & (v < 1.0)
        vv = v[strict]
        # C-infinity bump, rescaled so its maximum (at the midpoint) is 1
        peak = 4.0 / (1.0 - self.epsilon) ** 2
        out[strict] = np.exp(peak - 1.0 / ((vv - self.epsilon) * (1.0 - vv)))
        return out


def weight_function(kind: str, epsilon: float) -> WeightFunction:
    return WeightFunction(kind=kind, epsilon=epsilon)


def _unit_basis(shape: ModelShape, u: float, v):
    """Contrast functions l(v): -phi_j'(v) for j <= J1, -phi_j'(U v) above."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    rows = [-2 * k * v ** (2 * k - 1) for k in range(1, shape.j1 + 1)]
    rows += [th * np.sin(th * u * v) for th in shape.theta]
    return np.vstack(rows)


@dataclass
class ContrastSystem:
    """Gram matrix of the contrast functions and fit metadata."""

    q: np.ndarray
    rhs: np.ndarray | None
    u: float
    epsilon: float
    weight: WeightFunction
    cond: float = field(init=False)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.cond = float(np.linalg.cond(self.q))
        if not np.isfinite(self.cond) or self.cond > COND_LIMIT:
            warnings.warn(f"contrast matrix condition number {self.cond:.3e}",
                          RuntimeWarning, stacklevel=2)


def contrast_matrix(shape: ModelShape, u: float, weight: WeightFunction) -> ContrastSystem:
    """Q = integral over [eps, 1] of l(v) l(v)^T w(v) dv by adaptive quadrature."""
    if u < 1:
        raise ValueError("U must be >= 1")
    j = shape.j
    q = np.zeros((j, j))
    for r in range(j):
        for c in range(r, j):
            def integrand(v, r=r, c=c):
                basis = _unit_basis(shape, u, v)[:, 0]
                return basis[r] * basis[c] * float(weight(v))
            val, _ = quad(integrand, weight.epsilon, 1.0, limit=200,
                          epsabs=1e-12, epsrel=1e-12)
            q[r, c] = q[c, r] = val
    return ContrastSystem(q=q, rhs=None, u=u, epsilon=weight.epsilon, weight=weight)


def _window_quadrature(l_hat: GridFunction, u: float, weight: WeightFunction,
                       side: int):
    """Grid nodes, trapezoid weights and l-values on one window [eps U, U]."""
    x = l_hat.x
    if side > 0:
        mask = (x >= weight.epsilon * u) & (x <= u)
    else:
        mask = (x <= -weight.epsilon * u) & (x >= -u)
    idx = np.nonzero(mask)[0]
    if idx.size < 2:
        raise ValueError("window [eps U, U] contains fewer than two grid points")
    nodes = x[idx]
    wq = np.full(idx.size, l_hat.dx)
    wq[0] = wq[-1] = 0.5 * l_hat.dx
    return nodes, wq, l_hat.values[idx]


def fit_alpha(l_hat: GridFunction, u: float, weight: WeightFunction,
              shape: ModelShape, symmetric_window: bool = False,
              return_system: bool = False):
    """Weighted least-squares fit of the scaled coefficients on [eps U, U].

    Solves Q alpha^U = integral l_hat(y) l(y/U) w_U(y) dy with w_U(y) =
    w(y/U)/U, then unscales alpha_j = alpha^U_j / U^(2j-1) for the
    polynomial block.  Q and the right-hand side are discretized with the
    same trapezoid rule on the grid of ``l_hat``, so the fit is a
    zero-residual projection whenever l_hat lies in the span of the
    contrast functions on the window.
    """
    if u < 1:
        raise ValueError("U must be >= 1")
    if l_hat.x[-1] < u:
        raise ValueError(f"grid (L={l_hat.half_width}) does not cover the window U={u}")
    sides = (1, -1) if symmetric_window else (1,)
    j = shape.j
    q = np.zeros((j, j))
    rhs = np.zeros(j)
    for side in sides:
        nodes, wq, lv = _window_quadrature(l_hat, u, weight, side)
        basis = _unit_basis(shape, u, nodes / u)
        wtot = wq * weight(np.abs(nodes) / u) / u
        q += (basis * wtot) @ basis.T
        rhs += basis @ (wtot * lv)
    system = ContrastSystem(q=q, rhs=rhs, u=u, epsilon=weight.epsilon, weight=weight)
    try:
        alpha_u = np.linalg.solve(q, rhs)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"contrast system is singular: {exc}") from exc
    scaling = np.ones(j)
    for k in range(1, shape.j1 + 1):
        scaling[k - 1] = u ** (2 * k - 1)
    alpha = alpha_u / scaling
    return (alpha, system) if return_system else alpha


def empirical_moments(samples, k_max: int) -> np.ndarray:
    """Plain sample moments (1/N) sum Y_i^k for k = 0..k_max."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    return np.array([np.mean(samples**k) for k in range(k_max + 1)])


def empirical_cf(samples, z):
    """Empirical characteristic function (1/N) sum exp(i z Y_i)."""
    samples = np.asarray(samples, dtype=float)
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(zz.size, dtype=complex)
    rows = max(1, (1 << 22) // max(samples.size, 1))
    for lo in range(0, zz.size, rows):
        zc = zz[lo:lo + rows]
        out[lo:lo + rows] = np.mean(np.exp(1j * zc[:, None] * samples[None, :]), axis=1)
    return out[0] if np.ndim(z) == 0 else out


def parametric_log_derivative(shape: ModelShape, alpha, y):
    """l(y, alpha) = -sum_j alpha_j phi_j'(y)."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return -(alpha @ shape.basis_deriv(y))


def psi_estimate(l_hat: GridFunction, alpha_hat, shape: ModelShape,
                 epsilon: float, u: float) -> GridFunction:
    """Windowed residual (l_hat - l(., alpha_hat)) 1{|y| <= eps U}."""
    x = l_hat.x
    vals = l_hat.values - parametric_log_derivative(shape, alpha_hat, x)
    vals = np.where(np.abs(x) <= epsilon * u, vals, 0.0)
    return l_hat.with_values(vals)


@dataclass
class DeconvolutionResult:
    beta_prime: GridFunction
    surviving_fraction: float
    degenerate: bool
    freq: np.ndarray | None = None
    f_beta_prime: np.ndarray | None = None


def frequency_count(z_max: float, half_width: float, oversample: float = 8.0) -> int:
    """Odd frequency-grid size resolving exp(-izy) over the space grid."""
    n = int(np.ceil(oversample * z_max * half_width / math.pi))
    n = max(n, 513)
    return n + 1 if n % 2 == 0 else n


def deconvolve(psi_hat: GridFunction, ecf, omega: float, z_max: float,
               n_freq: int | None = None, taper_frac: float = 0.2) -> DeconvolutionResult:
    """Thresholded Fourier deconvolution of Psi against a characteristic function.

    F(beta')(z) = -F(Psi)(z) conj(c(z)) / |c(z)|^2 on {|c(z)| > omega,
    |z| <= z_max} and zero elsewhere, inverted by trapezoid quadrature on a
    symmetric frequency grid.  ``ecf`` is a vectorized callable z -> c(z)
    and must be Hermitian (c(-z) = conj(c(z)), true of any characteristic
    function); it is only evaluated on the nonnegative half-grid.

    The forward quadrature multiplies the outer ``taper_frac`` of the grid
    by a cosine rolloff.  Inputs supported inside the untapered region
    (every windowed Psi estimate) are untouched; for slowly decaying
    inputs the rolloff suppresses truncation leakage into frequencies
    where the divisor is near the threshold.
    """
    if not 0 < omega < 1:
        raise ValueError("omega must lie in (0, 1)")
    if n_freq is None:
        n_freq = frequency_count(z_max, psi_hat.half_width)
    if n_freq % 2 == 0:
        n_freq += 1
    half = n_freq // 2
    z = z_max * ((np.arange(n_freq) - half) / half)
    x = psi_hat.x

    vals = psi_hat.values
    if taper_frac > 0:
        t0 = (1.0 - taper_frac) * psi_hat.half_width
        outer = np.abs(x) > t0
        if np.any(outer & (vals != 0.0)):
            taper = np.ones_like(vals)
            taper[outer] = np.cos(
                0.5 * np.pi * (np.abs(x[outer]) - t0) / (taper_frac * psi_hat.half_width)) ** 2
            vals = vals * taper

    fpsi = np.empty(n_freq, dtype=complex)
    rows = max(1, (1 << 22) // x.size)
    for lo in range(0, n_freq, rows):
        zc = z[lo:lo + rows]
        fpsi[lo:lo + rows] = np.trapezoid(
            np.exp(1j * zc[:, None] * x[None, :]) * vals, x, axis=1)

    z_pos = z[half:]
    cf_pos = np.asarray(ecf(z_pos), dtype=complex)
    if cf_pos.shape != z_pos.shape:
        cf_pos = np.array([complex(ecf(zi)) for zi in z_pos])
    cf = np.concatenate([np.conj(cf_pos[1:])[::-1], cf_pos])
    keep = np.abs(cf) > omega
    fbeta = np.zeros(n_freq, dtype=complex)
    np.divide(-fpsi * np.conj(cf), np.abs(cf) ** 2, out=fbeta, where=keep)
    if not keep.any():
        return DeconvolutionResult(
            beta_prime=psi_hat.with_values(np.zeros(x.size)),
            surviving_fraction=0.0, degenerate=True, freq=z, f_beta_prime=fbeta)

    out = np.empty(x.size)
    cols = max(1, (1 << 22) // n_freq)
    for lo in range(0, x.size, cols):
        xc = x[lo:lo + cols]
        integ = np.exp(-1j * np.outer(xc, z)) * fbeta
        out[lo:lo + cols] = np.trapezoid(integ, z, axis=1).real
    out /= 2.0 * math.pi
    return DeconvolutionResult(beta_prime=psi_hat.with_values(out),
                               surviving_fraction=float(np.mean(keep)),
                               degenerate=False, freq=z, f_beta_prime=fbeta)


@dataclass
class EstimationResult:
    """Output of the full four-step pipeline."""

    alpha_hat: np.ndarray
    a_hat: np.ndarray
    psi_hat: GridFunction
    beta_prime_hat: GridFunction
    diagnostics: dict

    def save(self, out_dir):
        """Write alpha.csv, a.csv, psi.csv, beta_prime.csv and diagnostics.txt."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        for name, vec in (("alpha", self.alpha_hat), ("a", self.a_hat)):
            with open(os.path.join(out_dir, f"{name}.csv"), "w") as fh:
                fh.write(f"index,{name}\n")
                for i, v in enumerate(vec, start=1):
                    fh.write(f"{i},{float(v)!r}\n")
        self.psi_hat.save(os.path.join(out_dir, "psi.csv"))
        self.beta_prime_hat.save(os.path.join(out_dir, "beta_prime.csv"))
        with open(os.path.join(out_dir, "diagnostics.txt"), "w") as fh:
            for k, v in self.diagnostics.items():
                fh.write(f"{k}: {v}\n")


def run_pipeline(samples, cfg: EstimatorConfig, shape: ModelShape) -> EstimationResult:
    """Compose the four estimation steps; deterministic given its inputs."""
    samples = np.asarray(samples, dtype=float)
    grid = cfg.grid
    kernel = make_kernel(cfg.m)
    weight = weight_function(cfg.weight_kind, cfg.epsilon)

    pi_hat = density_estimate(samples, kernel, cfg.h0, grid, method=cfg.kde_method)
    pi_prime_hat = density_derivative_estimate(samples, kernel, cfg.h1, grid,
                                               method=cfg.kde_method)
    l_hat = log_derivative_estimate(pi_hat, pi_prime_hat, cfg.delta)

    alpha_hat, system = fit_alpha(l_hat, cfg.u, weight, shape,
                                  symmetric_window=cfg.symmetric_window,
                                  return_system=True)
    k_max = 2 * (shape.j1 - 1)
    even_moments = empirical_moments(samples, max(k_max, 0))[::2]
    cf_theta = empirical_cf(samples, shape.theta) if shape.j > shape.j1 else None
    alpha_c = AlphaCoefficients(j1=shape.j1, alpha=alpha_hat)
    a_hat = a_from_alpha(alpha_c, even_moments, cf_theta)

    psi_hat = psi_estimate(l_hat, alpha_hat, shape, cfg.epsilon, cfg.u)

    dec = deconvolve(psi_hat, lambda z: empirical_cf(samples, z),
                     cfg.omega, cfg.z_max, n_freq=cfg.n_freq)

    diagnostics = {
        "q_cond": system.cond,
        "surviving_fraction": dec.surviving_fraction,
        "degenerate_deconvolution": dec.degenerate,
        "delta": cfg.delta,
        "omega": cfg.omega,
        "u": cfg.u,
        "z_max": cfg.z_max,
        "n_eff": cfg.n_eff if cfg.n_eff is not None else float(samples.size),
        "n_samples": int(samples.size),
    }
    return EstimationResult(alpha_hat=alpha_hat, a_hat=a_hat, psi_hat=psi_hat,
                            beta_prime_hat=dec.beta_prime, diagnostics=diagnostics)


def default_omega(n_eff: float) -> float:
    """Slow polynomial decay n_eff^(-1/4), floored at OMEGA_FLOOR."""
    return max(n_eff ** -0.25, OMEGA_FLOOR)


def default_window(n_eff: float, m: int, alpha_bar_1: float, j1: int) -> float:
    """U = (c log n_eff)^(1/(2 J1)) with c = m / (4 (m+2) abar1)."""
    c = m / (4.0 * (m + 2) * alpha_bar_1)
    return max(1.0, (c * math.log(n_eff)) ** (1.0 / (2 * j1)))


def oracle_z_max(sol: InvariantSolution, omega: float, z_cap: float = 40.0) -> float:
    """Largest frequency at which |F(pi)| still clears 2 omega."""
    z = np.linspace(0.0, z_cap, 4001)
    mod = np.abs(fourier(sol.pi, z))
    above = np.nonzero(mod >= 2.0 * omega)[0]
    return float(z[above[-1]]) if above.size else z_cap


def oracle_estimator_config(spec, sol: InvariantSolution, n_eff: float,
                            m: int = 2, epsilon: float = 0.25,
                            **overrides) -> EstimatorConfig:
    """Estimator configuration with all thresholds from the solved density.

    Bandwidths follow the n_eff power rules, delta the oracle threshold
    rule, U the half-cap logarithmic window, omega the slow polynomial
    decay, and z_max the largest frequency where |F(pi)| >= 2 omega.
    """
    alpha = alpha_oracle(spec, sol.pi)
    h0, h1 = default_bandwidths(n_eff, m)
    u = default_window(n_eff, m, alpha.alpha_bar_1, spec.j1)
    delta = default_delta(alpha, sol.z, spec.beta.sup_norm(), u)
    omega = default_omega(n_eff)
    z_max = oracle_z_max(sol, omega)
    kwargs = dict(m=m, h0=h0, h1=h1, delta=delta, u=u, epsilon=epsilon,
                  omega=omega, z_max=z_max, half_width=sol.pi.half_width,
                  n_points=sol.pi.n_points, n_eff=n_eff)
    kwargs.update(overrides)
    return EstimatorConfig(**kwargs)
