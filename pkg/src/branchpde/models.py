"""Model coefficient sets and the named experiment presets.

Coefficient callables act elementwise on numpy arrays of physical values
(``u`` and ``v``, not the normalised densities).
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable

import numpy as np

from .errors import ConfigError
from .torus import TorusDomain

PI = math.pi
PI2 = PI * PI
ArrayFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class ScalarModel:
    """``u_t = div(a(u) u) + D lap u + r(u) u``.

    ``a`` maps u-values ``(n,)`` to velocities ``(n, d)``; ``None`` means no
    advection.  ``r=None`` means no reaction.  ``Z`` may be given
    analytically; otherwise it is computed by quadrature.  A finite
    ``u0_sup`` enables exact rejection sampling of the initial particles.
    """

    name: str
    D: float
    u0: ArrayFn
    a: ArrayFn | None = None
    r: ArrayFn | None = None
    Z: float | None = None
    u0_sup: float | None = None
    domain: TorusDomain = TorusDomain(2)

    def __post_init__(self):
        if not self.D > 0:
            raise ConfigError(f"diffusion coefficient must be positive, got {self.D}")
        if self.Z is not None and not self.Z > 0:
            raise ConfigError(f"normalisation mass must be positive, got {self.Z}")


@dataclass(frozen=True)
class KSModel:
    """``u_t - div(D_u grad u - chi(u) grad v) = f_u``, ``v_t - D_v lap v = f_v``.

    The cell drift is ``(chi(u)/u) grad v``.  Supplying ``chi_over_u``
    directly (a callable or a constant) avoids dividing by a floored density;
    otherwise ``chi`` is used with the floor.  ``f_u=None`` marks a
    conservative cell equation.
    """

    name: str
    u0: ArrayFn
    v0: ArrayFn
    chi: ArrayFn | None = None
    chi_over_u: ArrayFn | float | None = None
    f_u: ArrayFn | None = None
    f_v: ArrayFn | None = None
    Z_u: float | None = None
    Z_v: float | None = None
    u0_sup: float | None = None
    v0_sup: float | None = None
    D_u: float = 1.0
    D_v: float = 1.0
    domain: TorusDomain = TorusDomain(2)

    def __post_init__(self):
        if self.chi is None and self.chi_over_u is None:
            raise ConfigError("KS model needs chi or chi_over_u")
        for z in (self.Z_u, self.Z_v):
            if z is not None and not z > 0:
                raise ConfigError(f"normalisation mass must be positive, got {z}")
        if not (self.D_u > 0 and self.D_v > 0):
            raise ConfigError("diffusion coefficients must be positive")


def _sq_dist(domain: TorusDomain, x: np.ndarray, center) -> np.ndarray:
    dx = domain.min_image(x, center)
    return np.sum(dx * dx, axis=1)


def _gaussian_sum(domain: TorusDomain, x, centers, height: float, width: float) -> np.ndarray:
    x = np.atleast_2d(x)
    out = np.zeros(x.shape[0])
    for c in centers:
        out += height * np.exp(-width * _sq_dist(domain, x, c))
    return out


def _ac_u0(x):
    x = np.atleast_2d(x)
    return np.sin(x[:, 0]) ** 2 * np.cos(x[:, 1]) ** 2


def _linear_ks_v0(x):
    x = np.atleast_2d(x)
    return np.cos(x[:, 0]) + np.cos(x[:, 1]) + 2.0


def allen_cahn(D: float = 0.01) -> ScalarModel:
    """Allen-Cahn ``u_t = D lap u + u - u^3`` written as reaction rate ``1 - u^2``."""
    return ScalarModel(
        name="allen-cahn", D=D, u0=_ac_u0, a=None, r=lambda u: 1.0 - u * u, Z=PI2,
    )


def ks_linear() -> KSModel:
    """Linear Keller-Segel: chi(u) = u, f_u = 0, f_v = u - v."""
    return KSModel(
        name="ks-linear", u0=_ac_u0, v0=_linear_ks_v0, chi=lambda u: u, chi_over_u=1.0,
        f_u=None, f_v=lambda u, v: u - v, Z_u=PI2, Z_v=8 * PI2,
    )


def ks_blowup() -> KSModel:
    """Linear Keller-Segel dynamics from concentrated Gaussians at the origin (supercritical mass)."""
    dom = TorusDomain(2)
    origin = [(0.0, 0.0)]
    return KSModel(
        name="ks-blowup",
        u0=lambda x: _gaussian_sum(dom, x, origin, 840.0, 84.0),
        v0=lambda x: _gaussian_sum(dom, x, origin, 420.0, 42.0),
        chi=lambda u: u, chi_over_u=1.0, f_u=None, f_v=lambda u, v: u - v,
        # 840 * pi / 84 and 420 * pi / 42; periodic tails are below 1e-300
        Z_u=10 * PI, Z_v=10 * PI, u0_sup=840.0, v0_sup=420.0, domain=dom,
    )


LOGISTIC_U_CENTERS = [(0.5 * PI, 0.5 * PI), (PI, PI), (1.5 * PI, 1.5 * PI)]
LOGISTIC_V_CENTERS = [(0.4 * PI, 0.4 * PI), (0.8 * PI, 0.8 * PI), (1.2 * PI, 1.2 * PI), (1.6 * PI, 1.6 * PI)]


def ks_logistic() -> KSModel:
    """Saturating chemotaxis chi(u) = 4u/(1+u^2), logistic cells, f_v = u - v, Gaussian bumps."""
    dom = TorusDomain(2)
    return KSModel(
        name="ks-logistic",
        u0=lambda x: _gaussian_sum(dom, x, LOGISTIC_U_CENTERS, 1.0, 1.0),
        v0=lambda x: _gaussian_sum(dom, x, LOGISTIC_V_CENTERS, 1.0, 1.0),
        chi=lambda u: 4.0 * u / (1.0 + u * u),
        chi_over_u=lambda u: 4.0 / (1.0 + u * u),
        f_u=lambda u, v: u * (1.0 - u),
        f_v=lambda u, v: u - v,
        domain=dom,
    )


SCALAR_PRESETS = {"allen-cahn": allen_cahn}
KS_PRESETS = {"ks-linear": ks_linear, "ks-blowup": ks_blowup, "ks-logistic": ks_logistic}


def get_preset(name: str):
    if name in SCALAR_PRESETS:
        return SCALAR_PRESETS[name]()
    if name in KS_PRESETS:
        return KS_PRESETS[name]()
    raise ConfigError(f"unknown preset {name!r}; choose from {sorted(SCALAR_PRESETS) + sorted(KS_PRESETS)}")

