"""Truncated tensor-product Fourier fields on the torus.

Mode indices run over ``{-K, ..., K}^d``.  Per axis, ``k > 0`` is
``cos(k x) / sqrt(pi)``, ``k < 0`` is ``sin(|k| x) / sqrt(pi)`` and ``k = 0``
the constant ``1 / sqrt(2 pi)``; the tensor products form an orthonormal set
on ``[0, 2 pi)^d``.

Coefficients are stored densely as an array of shape ``(2K+1,)*d`` where the
entry at ``[k_1 + K, ..., k_d + K]`` belongs to mode ``(k_1, ..., k_d)``.
The flat (C-order) form of that array is the on-disk linearisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Callable
import warnings

import numpy as np

from . import kernels
from ._kernels_py import axis_basis
from .errors import ConfigError
from .torus import TWO_PI, TorusDomain

INV_SQRT_2PI = 1.0 / math.sqrt(TWO_PI)
INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def _phi(k: int, x):
    x = np.asarray(x, dtype=np.float64)
    if k == 0:
        return np.full_like(x, INV_SQRT_2PI)
    if k > 0:
        return np.cos(k * x) * INV_SQRT_PI
    return np.sin(-k * x) * INV_SQRT_PI


def basis_eval(mode, x):
    """Evaluate the tensor basis function ``psi_mode`` at ``x``.

    ``x`` may be a single point or an ``(n, d)`` array.  Any integer mode is
    accepted; callers enforce the truncation.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != len(mode):
        raise ConfigError(f"mode {tuple(mode)} does not match point dimension {pts.shape[1]}")
    out = np.ones(pts.shape[0])
    for j, k in enumerate(mode):
        out = out * _phi(int(k), pts[:, j])
    return float(out[0]) if single else out


def mode_norm_sq(K: int, d: int) -> np.ndarray:
    """``|k|^2`` for every stored mode, shaped like the coefficient array."""
    k2 = np.arange(-K, K + 1, dtype=np.float64) ** 2
    grids = np.meshgrid(*([k2] * d), indexing="ij")
    return np.sum(grids, axis=0)


def _check_domain(domain: TorusDomain) -> None:
    if not math.isclose(domain.length, TWO_PI, rel_tol=0, abs_tol=1e-12):
        raise ConfigError("spectral fields need a 2*pi-periodic box")


@dataclass(frozen=True)
class SpectralField:
    """Immutable truncated Fourier series ``sum_m coeffs[m] psi_m(x)``."""

    domain: TorusDomain
    K: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_domain(self.domain)
        if self.K < 0:
            raise ConfigError(f"truncation K must be >= 0, got {self.K}")
        expected = (2 * self.K + 1,) * self.domain.dim
        c = np.array(self.coeffs, dtype=np.float64)
        if c.size != np.prod(expected):
            raise ConfigError(f"expected {np.prod(expected)} coefficients, got {c.size}")
        c = c.reshape(expected)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain: TorusDomain, K: int) -> "SpectralField":
        return cls(domain, K, np.zeros((2 * K + 1,) * domain.dim))

    @property
    def dim(self) -> int:
        return self.domain.dim

    def coefficient(self, mode) -> float:
        return float(self.coeffs[tuple(int(k) + self.K for k in mode)])

    def scaled(self, factor: float) -> "SpectralField":
        return SpectralField(self.domain, self.K, self.coeffs * factor)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_shape(self, other)
        return SpectralField(self.domain, self.K, self.coeffs - other.coeffs)

    def evaluate(self, x, workers: int = 1):
        x = np.asarray(x, dtype=np.float64)
        pts = np.atleast_2d(x)
        vals = kernels.evaluate(self.coeffs, pts, with_grad=False, workers=workers)
        return float(vals[0]) if x.ndim == 1 else vals

    def gradient(self, x, workers: int = 1):
        x = np.asarray(x, dtype=np.float64)
        pts = np.atleast_2d(x)
        _, grads = kernels.evaluate(self.coeffs, pts, with_grad=True, workers=workers)
        return grads[0] if x.ndim == 1 else grads

    def value_and_gradient(self, x, workers: int = 1):
        return kernels.evaluate(self.coeffs, np.atleast_2d(x), with_grad=True, workers=workers)

    def mass(self) -> float:
        """Integral over the box; only the constant mode contributes."""
        zero = (self.K,) * self.dim
        return float(self.coeffs[zero]) * TWO_PI ** (self.dim / 2)

    def sobolev_norm_sq(self, s: float) -> float:
        return sobolev_norm_sq(self, s)

    def sample_grid(self, n_per_axis: int, workers: int = 1) -> np.ndarray:
        """Values on ``domain.uniform_grid(n_per_axis)`` reshaped to ``(n,)*d``."""
        pts = self.domain.uniform_grid(n_per_axis)
        return self.evaluate(pts, workers=workers).reshape((n_per_axis,) * self.dim)

    def to_text(self) -> str:
        header = f"{self.dim} {self.K} {self.domain.length!r}"
        body = "\n".join(f"{v:.17g}" for v in self.coeffs.ravel())
        return header + "\n" + body + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SpectralField":
        lines = text.split()
        d, K, L = int(lines[0]), int(lines[1]), float(lines[2])
        values = np.array([float(v) for v in lines[3:]])
        return cls(TorusDomain(d, L), K, values)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "SpectralField":
        return cls.from_text(Path(path).read_text())


def _require_same_shape(a: SpectralField, b: SpectralField) -> None:
    if a.K != b.K or a.dim != b.dim:
        raise ConfigError(f"field shape mismatch: K={a.K}/{b.K}, d={a.dim}/{b.dim}")


def project_particles(positions, n_initial: int, K: int, domain: TorusDomain,
                      workers: int = 1) -> SpectralField:
    """Fixed-N projection of the empirical measure: ``a_m = (1/N) sum_i psi_m(X_i)``.

    ``n_initial`` is the initial population, not the current count, so the
    field's mass is ``len(positions) / n_initial``.
    """
    if n_initial <= 0:
        raise ConfigError(f"normalisation count must be positive, got {n_initial}")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, domain.dim)
    sums = kernels.basis_sums(pos, K, workers=workers)
    return SpectralField(domain, K, sums / n_initial)


def _grid_transform(values: np.ndarray, K: int) -> np.ndarray:
    """Trapezoid-rule coefficients from samples on the cell-corner grid."""
    q = values.shape[0]
    d = values.ndim
    x = np.arange(q) * (TWO_PI / q)
    basis = axis_basis(x, K)[0]  # (q, 2K+1)
    out = values
    for _ in range(d):
        # contract the leading grid axis; the mode axis rotates to the back
        out = np.tensordot(out, basis, axes=([0], [0]))
    return out * (TWO_PI / q) ** d


def project_function(f: Callable, K: int, q: int, domain: TorusDomain) -> SpectralField:
    """Project ``f`` (vectorised over ``(n, d)`` points) by periodic trapezoid quadrature.

    Exact for trigonometric polynomials of degree <= K when ``q >= 2K + 2``;
    ``q < 4K + 2`` triggers a ``RuntimeWarning`` (aliasing of products).
    """
    _check_domain(domain)
    if q < 1:
        raise ConfigError(f"quadrature size must be positive, got {q}")
    if q < 4 * K + 2:
        warnings.warn(f"quadrature q={q} below 4K+2={4 * K + 2}; coefficients may alias",
                      RuntimeWarning, stacklevel=2)
    pts = domain.uniform_grid(q)
    vals = np.asarray(f(pts), dtype=np.float64).reshape((q,) * domain.dim)
    return SpectralField(domain, K, _grid_transform(vals, K))


def project_grid(values, K: int, domain: TorusDomain) -> SpectralField:
    """Project samples already laid out on ``domain.uniform_grid(n)``."""
    _check_domain(domain)
    vals = np.asarray(values, dtype=np.float64)
    n = round(vals.size ** (1.0 / domain.dim))
    return SpectralField(domain, K, _grid_transform(vals.reshape((n,) * domain.dim), K))


def sobolev_norm_sq(field: SpectralField, s: float) -> float:
    """``sum_m (1 + |k|^2)^(-s) a_m^2``; eigenvalues of ``(I - Laplacian)`` weight each mode."""
    w = (1.0 + mode_norm_sq(field.K, field.dim)) ** (-s)
    return float(np.sum(w * field.coeffs**2))


def write_grid_csv(path, domain: TorusDomain, n_per_axis: int, values) -> None:
    """Grid-sampled snapshot: columns ``x1..xd,value`` in row-major grid order."""
    pts = domain.uniform_grid(n_per_axis)
    vals = np.asarray(values, dtype=np.float64).ravel()
    cols = ",".join(f"x{j + 1}" for j in range(domain.dim))
    lines = [f"{cols},value"]
    for p, v in zip(pts, vals):
        lines.append(",".join(f"{c:.17g}" for c in p) + f",{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path) -> tuple[int, int, np.ndarray]:
    """Return ``(d, n_per_axis, values shaped (n,)*d)`` from a grid CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = data.shape[1] - 1
    n = round(data.shape[0] ** (1.0 / d))
    return d, n, data[:, -1].reshape((n,) * d)
