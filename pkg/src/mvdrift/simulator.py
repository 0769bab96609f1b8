"""Euler-Maruyama simulation of the pairwise-interaction particle system.

The N-particle dynamics are

    dX_i = -(1/(2N)) sum_j phi'(X_i - X_j) dt + dB_i,

started from i.i.d. draws of an initial law mu0.  Noise is generated by a
counter-based generator keyed on (seed, stream), so every replication is
bit-reproducible independently of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import BetaSpec, DriftSpec

__all__ = [
    "BlowUpError",
    "Mu0",
    "SimConfig",
    "ParticleEnsemble",
    "drift_naive",
    "drift_fast",
    "euler_step",
    "simulate",
    "project",
    "save_samples",
    "load_samples",
]

_BETA_FAMILY_CODES = {"cos-bump": 1, "sinc-power": 2}


class BlowUpError(RuntimeError):
    """A replication produced non-finite positions."""


@dataclass
class Mu0:
    """Initial law: a point mass at 0 or a centered Gaussian."""

    family: str = "gaussian"
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in ("point", "gaussian"):
            raise ValueError("mu0 family must be 'point' or 'gaussian'")
        if self.family == "gaussian" and self.variance < 0:
            raise ValueError("variance must be nonnegative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "point":
            return np.zeros(n)
        return rng.standard_normal(n) * np.sqrt(self.variance)


@dataclass
class SimConfig:
    n: int
    t: float
    dt: float = 0.01
    mu0: Mu0 | None = None
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if self.mu0 is None:
            self.mu0 = Mu0()
        if self.n < 1:
            raise ValueError("need at least one particle")
        if self.dt <= 0 or (self.t > 0 and self.dt > self.t):
            raise ValueError("need 0 < dt <= T")
        steps = self.t / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("T must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t / self.dt))


@dataclass
class ParticleEnsemble:
    """Positions plus simulation metadata; treated as immutable."""

    positions: np.ndarray
    time: float
    n_steps: int
    seed: int
    stream: int

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.size < 1:
            raise ValueError("empty ensemble")
        if not np.all(np.isfinite(self.positions)):
            raise BlowUpError("non-finite positions in ensemble")

    @property
    def n(self) -> int:
        return self.positions.size


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    # Philox is counter-based: the (seed, stream) key pins the whole noise
    # sequence independently of how replications are scheduled.
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _beta_drift(x: np.ndarray, beta: BetaSpec) -> np.ndarray:
    if beta.is_zero:
        return np.zeros_like(x)
    code = _BETA_FAMILY_CODES.get(beta.family)
    if code is not None and _kernels.beta_drift_pairwise_analytic is not None:
        return _kernels.beta_drift_pairwise_analytic(x, code, float(beta.b), int(beta.k))
    return _kernels.beta_drift_pairwise_callable(x, beta.deriv)


def drift_naive(positions, spec: DriftSpec) -> np.ndarray:
    """O(N^2) pairwise reference drift -(1/(2N)) sum_j phi'(x_i - x_j)."""
    x = np.ascontiguousarray(positions, dtype=float)
    out = _kernels.parametric_drift_naive(x, spec.a_poly, spec.theta, spec.a_trig)
    if not spec.beta.is_zero:
        out = out + _beta_drift(x, spec.beta)
    return out


def drift_fast(positions, spec: DriftSpec) -> np.ndarray:
    """Regrouped drift: O(N) for the parametric part via power sums and
    angle addition; the beta part (when present) stays pairwise."""
    x = np.ascontiguousarray(positions, dtype=float)
    out = _kernels.parametric_drift_fast(x, spec.a_poly, spec.theta, spec.a_trig)
    if not spec.beta.is_zero:
        out = out + _beta_drift(x, spec.beta)
    return out


def beta_drift_binned(positions, beta: BetaSpec, n_bins: int = 2048) -> np.ndarray:
    """Approximate beta' interaction drift by binning positions.

    Optional accelerator for very large N; not used by the estimation or
    experiment code paths.
    """
    x = np.asarray(positions, dtype=float)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    edges = np.linspace(lo, hi, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts, _ = np.histogram(x, bins=edges)
    # sum over bins of count_b * beta'(c_i - c_b), evaluated per pair of bins
    diff = centers[:, None] - centers[None, :]
    per_center = beta.deriv(diff.ravel()).reshape(diff.shape) @ counts
    interp = np.interp(x, centers, per_center)
    return interp * (-0.5 / x.size)


def euler_step(ens: ParticleEnsemble, spec: DriftSpec, dt: float, noise,
               method: str = "fast") -> ParticleEnsemble:
    """One Euler-Maruyama step x <- x + drift dt + sqrt(dt) noise."""
    noise = np.asarray(noise, dtype=float)
    if noise.size != ens.n:
        raise ValueError("noise must have one draw per particle")
    drift = drift_fast(ens.positions, spec) if method == "fast" else drift_naive(ens.positions, spec)
    x = ens.positions + drift * dt + np.sqrt(dt) * noise
    if not np.all(np.isfinite(x)):
        bad = int(np.count_nonzero(~np.isfinite(x)))
        raise BlowUpError(
            f"blow-up at step {ens.n_steps + 1}: {bad} non-finite positions "
            f"(max |x| before step {np.max(np.abs(ens.positions)):.3g})")
    n_steps = ens.n_steps + 1
    return ParticleEnsemble(positions=x, time=n_steps * dt, n_steps=n_steps,
                            seed=ens.seed, stream=ens.stream)


def simulate(cfg: SimConfig, spec: DriftSpec, method: str = "fast") -> ParticleEnsemble:
    """Run the particle system to time T; deterministic given (seed, stream)."""
    rng = _rng_for(cfg.seed, cfg.stream)
    x0 = cfg.mu0.sample(rng, cfg.n)
    ens = ParticleEnsemble(positions=x0, time=0.0, n_steps=0,
                           seed=cfg.seed, stream=cfg.stream)
    for _ in range(cfg.n_steps):
        noise = rng.standard_normal(cfg.n)
        ens = euler_step(ens, spec, cfg.dt, noise, method=method)
    return ens


def project(positions) -> np.ndarray:
    """Recenter positions by the ensemble mean."""
    x = np.asarray(positions, dtype=float)
    if x.size < 1:
        raise ValueError("empty ensemble")
    return x - x.mean()


def save_samples(path, samples, meta: dict | None = None):
    """Write one position per line with a '#'-prefixed metadata header."""
    samples = np.asarray(samples, dtype=float)
    lines = ["# mvdrift samples v1"]
    if meta:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in meta.items()))
    lines.extend(repr(float(v)) for v in samples)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_samples(path):
    """Read a samples file; returns (values, metadata dict)."""
    meta = {}
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            values.append(float(line))
    return np.asarray(values), meta
