"""Explicit finite-difference reference solver on uniform periodic grids.

Second order in space (5-point Laplacian in 2-D, face-centred fluxes),
first order in time (forward Euler).  Fluxes are written in conservative
form, so with zero sources the discrete mass only changes by rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, SolverBlowupError
from .models import KSModel, ScalarModel
from .record import RunRecord, Snapshot
from .solver import snapshot_steps
from .torus import TorusDomain


@dataclass
class GridField:
    """Samples on ``domain.uniform_grid(n)`` stored as an ``(n,)*d`` array."""

    values: np.ndarray
    domain: TorusDomain = TorusDomain(2)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape[0] < 4:
            raise ConfigError("grid fields need at least 4 points per axis")
        if not np.all(np.isfinite(self.values)):
            raise SolverBlowupError("non-finite grid value")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.domain.length / self.n

    def mass(self) -> float:
        return float(np.sum(self.values) * self.h ** self.values.ndim)


def laplacian(U: np.ndarray, h: float) -> np.ndarray:
    """Periodic (2d+1)-point Laplacian."""
    out = -2.0 * U.ndim * U
    for ax in range(U.ndim):
        out = out + np.roll(U, 1, axis=ax) + np.roll(U, -1, axis=ax)
    return out / (h * h)


def _face_diff(V: np.ndarray, h: float, ax: int) -> np.ndarray:
    # (V[i+1] - V[i]) / h lives on face i+1/2
    return (np.roll(V, -1, axis=ax) - V) / h


def _face_avg(W: np.ndarray, ax: int) -> np.ndarray:
    return 0.5 * (W + np.roll(W, -1, axis=ax))


def _divergence(fluxes: list[np.ndarray], h: float) -> np.ndarray:
    out = np.zeros_like(fluxes[0])
    for ax, F in enumerate(fluxes):
        out = out + (F - np.roll(F, 1, axis=ax)) / h
    return out


def diffusion_dt(D: float, h: float, d: int) -> float:
    return h * h / (2.0 * d * D)


def fd_step_ac(U: np.ndarray, D: float, tau: float, h: float, reaction: bool = True) -> np.ndarray:
    """``U + tau (D lap U + U - U^3)``; ``reaction=False`` leaves pure diffusion."""
    bound = diffusion_dt(D, h, U.ndim)
    if tau > bound * (1 + 1e-12):
        raise ConfigError(f"explicit step tau={tau} exceeds the stability bound {bound}")
    rhs = D * laplacian(U, h)
    if reaction:
        rhs = rhs + U - U**3
    out = U + tau * rhs
    if not np.all(np.isfinite(out)):
        raise SolverBlowupError("non-finite value in Allen-Cahn FD update")
    return out


def _scalar_rhs(U: np.ndarray, model: ScalarModel, h: float):
    rhs = model.D * laplacian(U, h)
    speed = 0.0
    if model.a is not None:
        # div(a(u) u) with a(u) u averaged to faces
        au = np.asarray(model.a(U.ravel()), dtype=np.float64).reshape(U.shape + (U.ndim,))
        fluxes = []
        for ax in range(U.ndim):
            F = _face_avg(au[..., ax] * U, ax)
            fluxes.append(F)
            speed += float(np.max(np.abs(_face_avg(au[..., ax], ax))))
        rhs = rhs + _divergence(fluxes, h)
    if model.r is not None:
        rhs = rhs + np.asarray(model.r(U.ravel()), dtype=np.float64).reshape(U.shape) * U
    return rhs, speed


def scalar_dt_bound(U: np.ndarray, model: ScalarModel, h: float) -> float:
    _, speed = _scalar_rhs(U, model, h)
    return 1.0 / (2 * U.ndim * model.D / (h * h) + speed / h)


def fd_step_scalar(U: np.ndarray, model: ScalarModel, tau: float, h: float) -> np.ndarray:
    rhs, speed = _scalar_rhs(U, model, h)
    bound = 1.0 / (2 * U.ndim * model.D / (h * h) + speed / h)
    if tau > bound * (1 + 1e-12):
        raise ConfigError(f"explicit step tau={tau} exceeds the stability bound {bound}")
    out = U + tau * rhs
    if not np.all(np.isfinite(out)):
        raise SolverBlowupError("non-finite value in scalar FD update")
    return out


def _chemotaxis_fluxes(U: np.ndarray, V: np.ndarray, model: KSModel, h: float):
    """Face fluxes ``chi(u)_face * dv/dx_face`` and the matching advective speed per axis."""
    chi = model.chi
    if chi is None:
        c = model.chi_over_u
        chi = (lambda u: c(u) * u) if callable(c) else (lambda u: float(c) * u)
    chiU = np.asarray(chi(U.ravel()), dtype=np.float64).reshape(U.shape)
    fluxes, speed = [], 0.0
    for ax in range(U.ndim):
        g = _face_diff(V, h, ax)
        cf = _face_avg(chiU, ax)
        fluxes.append(cf * g)
        uf = _face_avg(U, ax)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_cell = np.where(np.abs(uf) > 1e-300, np.abs(cf) / np.abs(uf), 0.0)
        speed += float(np.max(per_cell * np.abs(g)))
    return fluxes, speed


def ks_dt_bound(U: np.ndarray, V: np.ndarray, model: KSModel, h: float) -> float:
    """Combined diffusion + advection bound for the explicit KS step."""
    _, speed = _chemotaxis_fluxes(U, V, model, h)
    D = max(model.D_u, model.D_v)
    return 1.0 / (2 * U.ndim * D / (h * h) + speed / h)


def fd_step_ks(U: np.ndarray, V: np.ndarray, model: KSModel, tau: float, h: float):
    """One forward-Euler step of the Keller-Segel system in conservative flux form."""
    fluxes, speed = _chemotaxis_fluxes(U, V, model, h)
    bound = 1.0 / (2 * U.ndim * max(model.D_u, model.D_v) / (h * h) + speed / h)
    if tau > bound * (1 + 1e-12):
        raise ConfigError(f"explicit step tau={tau} exceeds the stability bound {bound}")
    du = model.D_u * laplacian(U, h) - _divergence(fluxes, h)
    dv = model.D_v * laplacian(V, h)
    if model.f_u is not None:
        du = du + np.asarray(model.f_u(U, V), dtype=np.float64)
    if model.f_v is not None:
        dv = dv + np.asarray(model.f_v(U, V), dtype=np.float64)
    U1, V1 = U + tau * du, V + tau * dv
    if not (np.all(np.isfinite(U1)) and np.all(np.isfinite(V1))):
        raise SolverBlowupError("non-finite value in Keller-Segel FD update")
    return U1, V1


def _initial_grid(fn, domain: TorusDomain, n: int) -> np.ndarray:
    return np.asarray(fn(domain.uniform_grid(n)), dtype=np.float64).reshape((n,) * domain.dim)


def run_fd(model: ScalarModel | KSModel, n: int, t_end: float, tau: float | None = None,
           snapshot_times=None, n_snapshots: int = 5, safety: float = 0.5) -> RunRecord:
    """Integrate ``model`` on an ``n``-point-per-axis grid to ``t_end``.

    With ``tau=None`` every step uses ``safety`` times the current stability
    bound.  Steps are shortened to land exactly on snapshot times.
    """
    if n < 4:
        raise ConfigError("FD grid needs n >= 4")
    if t_end < 0:
        raise ConfigError("t_end must be nonnegative")
    domain = model.domain
    h = domain.length / n
    cell = h**domain.dim
    targets = (list(np.linspace(0.0, t_end, n_snapshots)) if snapshot_times is None
               else [float(t) for t in snapshot_times])
    targets = sorted(set(float(t) for t in targets if 0 <= t <= t_end))
    is_ks = isinstance(model, KSModel)
    config = {"kind": "fd", "model": model.name, "grid": n, "t_end": t_end, "tau": tau,
              "safety": safety, "snapshot_times": targets,
              "scheme": "forward Euler, periodic 5-point Laplacian, face-averaged conservative fluxes"}
    record = RunRecord("fd", config, None)

    U = _initial_grid(model.u0, domain, n)
    V = _initial_grid(model.v0, domain, n) if is_ks else None

    def row(t):
        return {"t": t, "count_u": None, "count_v": None, "mass_u": float(U.sum() * cell),
                "mass_v": float(V.sum() * cell) if is_ks else None, "floor_hits": 0, "cap_hits": 0}

    def snap(step, t):
        fields = {"u": U.copy()}
        if is_ks:
            fields["v"] = V.copy()
        record.snapshots.append(Snapshot(step, t, fields))

    t, step = 0.0, 0
    record.series.append(row(0.0))
    pending = [s for s in targets]
    if pending and pending[0] == 0.0:
        snap(0, 0.0)
        pending.pop(0)
    while t < t_end * (1 - 1e-14):
        try:
            if tau is None:
                bound = ks_dt_bound(U, V, model, h) if is_ks else scalar_dt_bound(U, model, h)
                dt = safety * bound
            else:
                dt = tau
            next_stop = pending[0] if pending else t_end
            dt = min(dt, next_stop - t)
            if is_ks:
                U, V = fd_step_ks(U, V, model, dt, h)
            else:
                U = fd_step_scalar(U, model, dt, h)
        except (SolverBlowupError, ConfigError) as exc:
            record.fail(step, str(exc))
            break
        step += 1
        t = next_stop if math.isclose(t + dt, next_stop, rel_tol=1e-12, abs_tol=1e-15) else t + dt
        record.series.append(row(t))
        if pending and t >= pending[0]:
            snap(step, t)
            pending.pop(0)
    record.config["n_steps"] = step
    return record
