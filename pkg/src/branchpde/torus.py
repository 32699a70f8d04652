"""Periodic box geometry."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, SolverBlowupError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TorusDomain:
    """The box ``[origin, origin + length)^dim`` with periodic identification."""

    dim: int = 2
    length: float = TWO_PI
    origin: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dim}")
        if not self.length > 0:
            raise ConfigError(f"side length must be positive, got {self.length}")

    @property
    def volume(self) -> float:
        return self.length**self.dim

    def wrap(self, x) -> np.ndarray:
        """Reduce coordinates into ``[origin, origin + length)``.

        Works on a single point or an ``(n, dim)`` array.  Values within one
        ulp below the upper edge can round to ``origin``.
        """
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(np.atleast_2d(x)))[0]
            raise SolverBlowupError(f"non-finite particle coordinate at index {tuple(bad)}")
        y = x - self.origin
        y = np.mod(y, self.length)
        # tiny negative inputs can round to length (or stay below 0 if y/length underflows)
        y = np.where((y >= self.length) | (y < 0.0), 0.0, y)
        return y + self.origin

    def uniform_grid(self, n_per_axis: int) -> np.ndarray:
        """Cell-corner grid with ``n_per_axis**dim`` points, row-major (axis 0 slowest)."""
        if n_per_axis < 1:
            raise ConfigError(f"n_per_axis must be >= 1, got {n_per_axis}")
        axis = self.grid_axis(n_per_axis)
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def grid_axis(self, n_per_axis: int) -> np.ndarray:
        return self.origin + np.arange(n_per_axis) * (self.length / n_per_axis)

    def min_image(self, x, center) -> np.ndarray:
        """Displacement ``x - center`` folded into ``[-L/2, L/2)`` per axis."""
        dx = np.asarray(x, dtype=np.float64) - np.asarray(center, dtype=np.float64)
        return dx - self.length * np.floor(dx / self.length + 0.5)
