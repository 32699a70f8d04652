"""Lie-Trotter drivers for the scalar ADR equation and the Keller-Segel system.

Each step is: project -> transport (Euler-Maruyama) -> project ->
birth-death -> project.  Densities that enter a nonlinearity or a
denominator are floored at ``density_floor``; drifts are capped in norm and
branching rates in ``|c tau|``.  Floor and cap activations are counted in
the run series.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
import math
import time
from typing import Callable

import numpy as np

from . import kernels
from .branching import birth_death, sde_propagate
from .errors import ConfigError, SolverBlowupError
from .models import KSModel, ScalarModel
from .particles import MHParams, ParticleSet, compute_Z, sample_initial, sample_rejection
from .record import RunRecord, Snapshot
from .spectral import SpectralField, project_particles
from .torus import TWO_PI, TorusDomain

SAMPLERS = ("auto", "mh", "rejection")


@dataclass
class SolverConfig:
    """Run parameters.  ``None`` entries are resolved to documented defaults.

    density_floor: ``1e-4 * (2 pi)^-d``.  drift_cap: ``0.25 L / tau``.
    n_v: same as ``n``.  Snapshots: ``n_snapshots`` evenly spaced times on
    ``[0, t_end]`` unless ``snapshot_times`` is given.
    """

    tau: float = 1e-3
    t_end: float = 0.1
    n: int = 10_000
    n_v: int | None = None
    K: int = 10
    seed: int = 0
    density_floor: float | None = None
    drift_cap: float | None = None
    rate_cap: float = 5.0
    population_cap_factor: float = 20.0
    n_snapshots: int = 5
    snapshot_times: list[float] | None = None
    grid: int = 100
    workers: int = 1
    mh_step: float = 0.8
    mh_burn_in: int = 200
    sampler: str = "auto"
    z_quadrature: int = 256
    debug_checks: bool = False

    def validate(self) -> None:
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.n < 1 or (self.n_v is not None and self.n_v < 1):
            raise ConfigError("particle counts must be >= 1")
        if self.density_floor is not None and not self.density_floor > 0:
            raise ConfigError("density_floor must be positive")
        if self.drift_cap is not None and not self.drift_cap > 0:
            raise ConfigError("drift_cap must be positive")
        if not self.rate_cap > 0:
            raise ConfigError("rate_cap must be positive")
        if not self.population_cap_factor >= 1:
            raise ConfigError("population_cap_factor must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}")
        if self.n_snapshots < 1:
            raise ConfigError("n_snapshots must be >= 1")
        if self.grid < 1 or self.workers < 1:
            raise ConfigError("grid and workers must be >= 1")

    def resolved(self, domain: TorusDomain) -> "SolverConfig":
        self.validate()
        out = SolverConfig(**asdict(self))
        if out.density_floor is None:
            out.density_floor = 1e-4 * TWO_PI ** (-domain.dim)
        if out.drift_cap is None:
            out.drift_cap = 0.25 * domain.length / out.tau
        if out.n_v is None:
            out.n_v = out.n
        if out.snapshot_times is None:
            out.snapshot_times = [float(t) for t in np.linspace(0.0, out.t_end, out.n_snapshots)]
        return out

    def echo(self) -> dict:
        """Config as a plain dict; ``workers`` is excluded from nothing (it never affects output)."""
        return asdict(self)


def time_grid(t_end: float, tau: float) -> np.ndarray:
    """``t_0 = 0 < ... < t_M = t_end`` with uniform steps; the last step may be shorter."""
    if t_end <= 0:
        return np.zeros(1)
    m = max(1, math.ceil(t_end / tau - 1e-9))
    t = np.arange(m + 1) * tau
    t[-1] = t_end
    return t


def snapshot_steps(times: np.ndarray, targets) -> dict[int, float]:
    """Map each requested time to the nearest grid step."""
    out = {}
    for target in targets:
        i = int(np.argmin(np.abs(times - target)))
        out[i] = float(times[i])
    return dict(sorted(out.items()))


def _cap_norm(b: np.ndarray, cap: float) -> tuple[np.ndarray, int]:
    norm = np.sqrt(np.sum(b * b, axis=1))
    over = norm > cap
    if np.any(over):
        b = b.copy()
        b[over] *= (cap / norm[over])[:, None]
    return b, int(over.sum())


def _floored(values: np.ndarray, eps: float, stats: Counter) -> np.ndarray:
    low = values < eps
    stats["floor_hits"] += int(low.sum())
    return np.where(low, eps, values)


def _project(particles: ParticleSet, cfg: SolverConfig, step: int, timers: Counter) -> SpectralField:
    t0 = time.perf_counter()
    f = project_particles(particles.positions, particles.n_initial, cfg.K, particles.domain, cfg.workers)
    timers["project"] += time.perf_counter() - t0
    if not np.all(np.isfinite(f.coeffs)):
        raise SolverBlowupError(f"non-finite spectral coefficient at step {step}", step=step)
    return f


def _sample(u0: Callable, Z: float, sup: float | None, n: int, domain: TorusDomain,
            cfg: SolverConfig, population: int) -> tuple[ParticleSet, str]:
    rho0 = lambda x: np.asarray(u0(x), dtype=np.float64) / Z
    use_rejection = cfg.sampler == "rejection" or (cfg.sampler == "auto" and sup is not None)
    if use_rejection:
        if sup is None:
            raise ConfigError("rejection sampling requested but the model gives no sup bound")
        return sample_rejection(rho0, n, domain, cfg.seed, sup / Z, population), "rejection"
    mh = MHParams(cfg.mh_step, cfg.mh_burn_in)
    return sample_initial(rho0, n, domain, cfg.seed, mh, population), "metropolis-hastings"


def _resolve_Z(given: float | None, u0: Callable, cfg: SolverConfig, domain: TorusDomain) -> tuple[float, str]:
    if given is not None:
        return float(given), "analytic"
    return compute_Z(u0, cfg.z_quadrature, domain), f"trapezoid q={cfg.z_quadrature}"


def step_scalar(particles: ParticleSet, rho: SpectralField, model: ScalarModel, cfg: SolverConfig,
                n: int, Z: float, tau: float | None = None, stats: Counter | None = None,
                timers: Counter | None = None) -> tuple[ParticleSet, SpectralField]:
    """Advance ``(particles, rho)`` by one Lie-Trotter step; ``rho`` must project ``particles``.

    ``cfg`` must already be resolved (see :meth:`SolverConfig.resolved`).
    """
    tau = cfg.tau if tau is None else tau
    stats = Counter() if stats is None else stats
    timers = Counter() if timers is None else timers
    eps = cfg.density_floor
    w = cfg.workers

    t0 = time.perf_counter()
    drift = None
    if model.a is not None:
        def drift(x):
            dens = _floored(rho.evaluate(x, workers=w), eps, stats)
            b = -np.asarray(model.a(Z * dens), dtype=np.float64).reshape(x.shape)
            b, hits = _cap_norm(b, cfg.drift_cap)
            stats["cap_hits"] += hits
            return b
    moved = sde_propagate(particles, tau, drift, math.sqrt(2.0 * model.D), n, cfg.seed)
    timers["transport"] += time.perf_counter() - t0

    if model.r is None:
        if cfg.debug_checks:
            moved.check()
        return moved, _project(moved, cfg, n, timers)

    rho_star = _project(moved, cfg, n, timers)

    def rate(x):
        dens = _floored(rho_star.evaluate(x, workers=w), eps, stats)
        return np.asarray(model.r(Z * dens), dtype=np.float64)

    t0 = time.perf_counter()
    branched = birth_death(moved, tau, rate, n, cfg.seed, rate_cap=cfg.rate_cap,
                           population_cap=int(cfg.population_cap_factor * particles.n_initial), stats=stats)
    timers["branch"] += time.perf_counter() - t0
    if cfg.debug_checks:
        branched.check()
    return branched, _project(branched, cfg, n, timers)


def _series_row(t, count_u, count_v, mass_u, mass_v, stats: Counter) -> dict:
    return {
        "t": float(t), "count_u": count_u, "count_v": count_v, "mass_u": mass_u, "mass_v": mass_v,
        "floor_hits": int(stats["floor_hits"]), "cap_hits": int(stats["cap_hits"]),
    }


def _config_echo(kind: str, model_name: str, cfg: SolverConfig, extra: dict) -> dict:
    doc = {"kind": kind, "model": model_name, "backend": kernels.backend_name()}
    doc.update(cfg.echo())
    doc.update(extra)
    return doc


def run_scalar(model: ScalarModel, cfg: SolverConfig) -> RunRecord:
    """Sample, then iterate :func:`step_scalar` to ``t_end`` recording series and snapshots."""
    domain = model.domain
    cfg = cfg.resolved(domain)
    timers: Counter = Counter()
    t0 = time.perf_counter()
    Z, z_source = _resolve_Z(model.Z, model.u0, cfg, domain)
    particles, sampler = _sample(model.u0, Z, model.u0_sup, cfg.n, domain, cfg, 0)
    timers["init"] += time.perf_counter() - t0

    times = time_grid(cfg.t_end, cfg.tau)
    snaps = snapshot_steps(times, cfg.snapshot_times)
    echo = _config_echo("scalar", model.name, cfg, {
        "Z": Z, "Z_source": z_source, "sampler_used": sampler, "sigma": math.sqrt(2 * model.D),
        "D": model.D, "n_steps": len(times) - 1, "snapshot_steps": sorted(snaps),
    })
    record = RunRecord("scalar", echo, cfg.seed)

    stats: Counter = Counter()
    rho = _project(particles, cfg, 0, timers)
    record.series.append(_series_row(0.0, len(particles), None, Z * len(particles) / cfg.n, None, stats))
    if 0 in snaps:
        record.snapshots.append(Snapshot(0, 0.0, {"u": rho.scaled(Z)}))
    for n in range(len(times) - 1):
        try:
            particles, rho = step_scalar(particles, rho, model, cfg, n, Z,
                                         tau=float(times[n + 1] - times[n]), stats=stats, timers=timers)
        except SolverBlowupError as exc:
            record.fail(n, str(exc))
            break
        t = float(times[n + 1])
        record.series.append(_series_row(t, len(particles), None, Z * len(particles) / cfg.n, None, stats))
        if n + 1 in snaps:
            record.snapshots.append(Snapshot(n + 1, t, {"u": rho.scaled(Z)}))
    record.wall_clock = {k: round(v, 6) for k, v in timers.items()}
    return record


@dataclass
class KSState:
    u: ParticleSet
    v: ParticleSet
    rho_u: SpectralField
    rho_v: SpectralField


def step_ks(state: KSState, model: KSModel, cfg: SolverConfig, n: int, Z_u: float, Z_v: float,
            tau: float | None = None, stats: Counter | None = None,
            timers: Counter | None = None) -> KSState:
    """One Lie-Trotter step of the two-population Keller-Segel scheme.

    Cell drift ``(chi(u)/u) grad v`` (up the chemical gradient), no chemical
    drift, ``sigma = sqrt(2 D)`` for both species.  Branching rates are the
    per-capita growth rates ``f_u/u`` and ``f_v/v`` evaluated on floored
    physical fields after transport.
    """
    tau = cfg.tau if tau is None else tau
    stats = Counter() if stats is None else stats
    timers = Counter() if timers is None else timers
    eps = cfg.density_floor
    w = cfg.workers
    rho_u, rho_v = state.rho_u, state.rho_v

    def drift_u(x):
        _, grad_v = rho_v.value_and_gradient(x, workers=w)
        if model.chi_over_u is not None and not callable(model.chi_over_u):
            factor = np.full(x.shape[0], float(model.chi_over_u))
        else:
            dens = rho_u.evaluate(x, workers=w)
            if callable(model.chi_over_u):
                factor = np.asarray(model.chi_over_u(Z_u * dens), dtype=np.float64)
            else:
                uf = Z_u * _floored(dens, eps, stats)
                factor = np.asarray(model.chi(uf), dtype=np.float64) / uf
        b = factor[:, None] * (Z_v * grad_v)
        b, hits = _cap_norm(b, cfg.drift_cap)
        stats["cap_hits"] += hits
        return b

    t0 = time.perf_counter()
    u_star = sde_propagate(state.u, tau, drift_u, math.sqrt(2.0 * model.D_u), n, cfg.seed, population=0)
    v_star = sde_propagate(state.v, tau, None, math.sqrt(2.0 * model.D_v), n, cfg.seed, population=1)
    timers["transport"] += time.perf_counter() - t0
    rs_u = _project(u_star, cfg, n, timers)
    rs_v = _project(v_star, cfg, n, timers)

    def fields_at(x):
        uf = Z_u * _floored(rs_u.evaluate(x, workers=w), eps, stats)
        vf = Z_v * _floored(rs_v.evaluate(x, workers=w), eps, stats)
        return uf, vf

    def rate_u(x):
        uf, vf = fields_at(x)
        return np.asarray(model.f_u(uf, vf), dtype=np.float64) / uf

    def rate_v(x):
        uf, vf = fields_at(x)
        return np.asarray(model.f_v(uf, vf), dtype=np.float64) / vf

    t0 = time.perf_counter()
    new_u, new_v = u_star, v_star
    if model.f_u is not None:
        new_u = birth_death(u_star, tau, rate_u, n, cfg.seed, population=0, rate_cap=cfg.rate_cap,
                            population_cap=int(cfg.population_cap_factor * state.u.n_initial), stats=stats)
    if model.f_v is not None:
        new_v = birth_death(v_star, tau, rate_v, n, cfg.seed, population=1, rate_cap=cfg.rate_cap,
                            population_cap=int(cfg.population_cap_factor * state.v.n_initial), stats=stats)
    timers["branch"] += time.perf_counter() - t0
    if cfg.debug_checks:
        new_u.check()
        new_v.check()
    out_u = rs_u if new_u is u_star else _project(new_u, cfg, n, timers)
    out_v = rs_v if new_v is v_star else _project(new_v, cfg, n, timers)
    return KSState(new_u, new_v, out_u, out_v)


def run_ks(model: KSModel, cfg: SolverConfig) -> RunRecord:
    """Two-population driver; records both masses and both fields at snapshot steps."""
    domain = model.domain
    cfg = cfg.resolved(domain)
    timers: Counter = Counter()
    t0 = time.perf_counter()
    Z_u, zs_u = _resolve_Z(model.Z_u, model.u0, cfg, domain)
    Z_v, zs_v = _resolve_Z(model.Z_v, model.v0, cfg, domain)
    s_u, sampler_u = _sample(model.u0, Z_u, model.u0_sup, cfg.n, domain, cfg, 0)
    s_v, sampler_v = _sample(model.v0, Z_v, model.v0_sup, cfg.n_v, domain, cfg, 1)
    timers["init"] += time.perf_counter() - t0

    times = time_grid(cfg.t_end, cfg.tau)
    snaps = snapshot_steps(times, cfg.snapshot_times)
    echo = _config_echo("ks", model.name, cfg, {
        "Z_u": Z_u, "Z_v": Z_v, "Z_u_source": zs_u, "Z_v_source": zs_v,
        "sampler_used_u": sampler_u, "sampler_used_v": sampler_v,
        "sigma_u": math.sqrt(2 * model.D_u), "sigma_v": math.sqrt(2 * model.D_v),
        "n_steps": len(times) - 1, "snapshot_steps": sorted(snaps),
    })
    record = RunRecord("ks", echo, cfg.seed)

    def row(t, st):
        return _series_row(t, len(st.u), len(st.v), Z_u * len(st.u) / cfg.n,
                           Z_v * len(st.v) / cfg.n_v, stats)

    def snap(step, t, st):
        record.snapshots.append(Snapshot(step, t, {"u": st.rho_u.scaled(Z_u), "v": st.rho_v.scaled(Z_v)}))

    stats: Counter = Counter()
    state = KSState(s_u, s_v, _project(s_u, cfg, 0, timers), _project(s_v, cfg, 0, timers))
    record.series.append(row(0.0, state))
    if 0 in snaps:
        snap(0, 0.0, state)
    for n in range(len(times) - 1):
        try:
            state = step_ks(state, model, cfg, n, Z_u, Z_v, tau=float(times[n + 1] - times[n]),
                            stats=stats, timers=timers)
        except SolverBlowupError as exc:
            record.fail(n, str(exc))
            break
        t = float(times[n + 1])
        record.series.append(row(t, state))
        if n + 1 in snaps:
            snap(n + 1, t, state)
    record.wall_clock = {k: round(v, 6) for k, v in timers.items()}
    return record
