"""Real-valued functions tabulated on a uniform symmetric grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GridMismatchError", "GridFunction"]


class GridMismatchError(ValueError):
    """Two grid functions do not share the same grid."""


@dataclass
class GridFunction:
    """Values on the symmetric uniform grid -L..L with an odd point count.

    The abscissae are generated as L * (i - n//2) / (n//2), which is exactly
    antisymmetric in floating point (x[-1-i] == -x[i]) and hits 0 and +-L
    exactly.  Instances are treated as immutable.
    """

    half_width: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 3 or self.values.size % 2 == 0:
            raise ValueError("values must be a 1-d odd-length vector (>= 3 points)")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        half = self.n_points // 2
        return self.half_width * ((np.arange(self.n_points) - half) / half)

    @classmethod
    def from_callable(cls, fn, half_width: float, n_points: int) -> "GridFunction":
        probe = cls(half_width, np.zeros(n_points))
        return cls(half_width, np.asarray(fn(probe.x), dtype=float))

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.n_points == other.n_points
                and abs(self.half_width - other.half_width) <= 1e-12 * self.half_width)

    def require_same_grid(self, other: "GridFunction"):
        if not self.same_grid(other):
            raise GridMismatchError(
                f"grids differ: (L={self.half_width}, n={self.n_points}) vs "
                f"(L={other.half_width}, n={other.n_points})")

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.half_width, values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.x))

    def symmetrized(self, parity: int = 1) -> "GridFunction":
        """Even (parity=+1) or odd (parity=-1) part of the tabulated function."""
        if parity not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        v = 0.5 * (self.values + parity * self.values[::-1])
        return self.with_values(v)

    def interp(self, y):
        return np.interp(y, self.x, self.values)

    def save(self, path):
        """Text format: one header line with the grid, one value per line.

        Paths ending in .csv instead get two columns (y, value).
        """
        path = str(path)
        if path.endswith(".csv"):
            with open(path, "w") as fh:
                fh.write("y,value\n")
                for xi, vi in zip(self.x, self.values):
                    fh.write(f"{float(xi)!r},{float(vi)!r}\n")
        else:
            with open(path, "w") as fh:
                fh.write(f"# gridfunction v1 L={float(self.half_width)!r} "
                         f"n_points={self.n_points}\n")
                for vi in self.values:
                    fh.write(f"{float(vi)!r}\n")

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = str(path)
        if path.endswith(".csv"):
            data = np.genfromtxt(path, delimiter=",", names=True)
            y = np.asarray(data["y"], dtype=float)
            v = np.asarray(data["value"], dtype=float)
            return cls(float(np.max(np.abs(y))), v)
        with open(path) as fh:
            header = fh.readline()
            if "gridfunction" not in header:
                raise ValueError(f"{path}: not a gridfunction file")
            fields = dict(tok.split("=", 1) for tok in header.split() if "=" in tok)
            half_width = float(fields["L"])
            values = np.array([float(line) for line in fh if line.strip()])
        return cls(half_width, values)
