"""Particle populations and initial sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng
from .errors import ConfigError, ModelError
from .torus import TorusDomain

Density = Callable[[np.ndarray], np.ndarray]


@dataclass
class ParticleSet:
    """Unweighted particles with a fixed normalisation count.

    ``positions`` is ``(n, d)``, ``ids`` holds one ``uint64`` lineage id per
    particle and ``n_initial`` is the population size at t = 0, which
    normalises every empirical measure for the whole run.
    """

    domain: TorusDomain
    positions: np.ndarray
    ids: np.ndarray
    n_initial: int
    _frozen_n: int = field(init=False, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, self.domain.dim)
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        if self.ids.shape[0] != self.positions.shape[0]:
            raise ConfigError("one lineage id per particle is required")
        if self.n_initial < 1:
            raise ConfigError(f"n_initial must be >= 1, got {self.n_initial}")
        self._frozen_n = self.n_initial

    @classmethod
    def from_positions(cls, domain: TorusDomain, positions, n_initial: int | None = None) -> "ParticleSet":
        pos = domain.wrap(np.asarray(positions, dtype=np.float64).reshape(-1, domain.dim))
        n = pos.shape[0] if n_initial is None else n_initial
        return cls(domain, pos, np.arange(pos.shape[0], dtype=np.uint64), n)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def replace(self, positions, ids) -> "ParticleSet":
        return ParticleSet(self.domain, positions, ids, self.n_initial)

    def check(self) -> None:
        """Debug assertion: positions wrapped, normalisation unchanged."""
        lo, hi = self.domain.origin, self.domain.origin + self.domain.length
        assert self.n_initial == self._frozen_n
        assert np.all((self.positions >= lo) & (self.positions < hi))

    def dump_csv(self, path) -> None:
        cols = ",".join(f"x{j + 1}" for j in range(self.domain.dim))
        rows = [f"id,{cols}"]
        for i, p in zip(self.ids, self.positions):
            rows.append(f"{int(i)}," + ",".join(f"{c:.17g}" for c in p))
        Path(path).write_text("\n".join(rows) + "\n")


@dataclass(frozen=True)
class MHParams:
    """Random-walk Metropolis-Hastings settings (one chain per particle)."""

    step: float = 0.8
    burn_in: int = 200


def _check_density(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ModelError("initial density must be finite and nonnegative")
    return values


def _uniform_points(domain: TorusDomain, key, ids, step: int) -> np.ndarray:
    d = domain.dim
    out = np.empty((ids.size, d))
    for block in range((d + 1) // 2):
        u1, u2 = rng.uniform_pair(key, ids, step, block)
        out[:, 2 * block] = u1
        if 2 * block + 1 < d:
            out[:, 2 * block + 1] = u2
    return domain.wrap(domain.origin + domain.length * out)


def sample_initial(rho0: Density, n: int, domain: TorusDomain, seed: int,
                   mh: MHParams = MHParams(), population: int = 0) -> ParticleSet:
    """Draw ``n`` particles from ``rho0`` with independent random-walk MH chains.

    Chain ``i`` starts at a uniform point and runs ``mh.burn_in`` Gaussian
    proposals; its final state is particle ``i``.  All randomness is keyed on
    ``(seed, population, i)``.
    """
    if n < 1:
        raise ConfigError(f"particle count must be >= 1, got {n}")
    key = rng.stream_key(seed, rng.TAG_INIT, population)
    ids = np.arange(n, dtype=np.uint64)
    x = _uniform_points(domain, key, ids, 0)
    px = _check_density(rho0(x))
    accepted = 0
    accept_draw = (domain.dim + 1) // 2
    for it in range(1, mh.burn_in + 1):
        prop = domain.wrap(x + mh.step * rng.normals(key, ids, it, domain.dim))
        pp = _check_density(rho0(prop))
        u, _ = rng.uniform_pair(key, ids, it, accept_draw)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(px > 0, pp / np.where(px > 0, px, 1.0), np.inf)
        take = u < ratio
        accepted += int(take.sum())
        x = np.where(take[:, None], prop, x)
        px = np.where(take, pp, px)
    if mh.burn_in > 0 and accepted == 0:
        raise ModelError("Metropolis-Hastings accepted no proposal during burn-in")
    if not np.any(px > 0):
        raise ModelError("initial density vanishes at every chain state")
    return ParticleSet(domain, x, ids, n)


def sample_rejection(rho0: Density, n: int, domain: TorusDomain, seed: int, sup: float,
                     population: int = 0, max_attempts: int = 1_000_000) -> ParticleSet:
    """Exact i.i.d. sampling from ``rho0`` given ``sup >= max rho0``."""
    if n < 1:
        raise ConfigError(f"particle count must be >= 1, got {n}")
    if not sup > 0:
        raise ConfigError("rejection sampling needs a positive sup bound")
    key = rng.stream_key(seed, rng.TAG_INIT, population)
    out = np.empty((n, domain.dim))
    pending = np.arange(n, dtype=np.uint64)
    accept_draw = (domain.dim + 1) // 2
    attempt = 0
    while pending.size:
        if attempt >= max_attempts:
            raise ModelError("rejection sampler exceeded its attempt budget")
        x = _uniform_points(domain, key, pending, attempt)
        val = _check_density(rho0(x))
        if np.any(val > sup * (1 + 1e-12)):
            raise ModelError(f"density exceeds the supplied sup bound {sup}")
        u, _ = rng.uniform_pair(key, pending, attempt, accept_draw)
        ok = u * sup < val
        out[pending[ok].astype(np.int64)] = x[ok]
        pending = pending[~ok]
        attempt += 1
    return ParticleSet(domain, out, np.arange(n, dtype=np.uint64), n)


def total_mass_estimate(particles: ParticleSet, Z: float) -> float:
    """``Z * |S| / N``: the fixed-N count estimator of the total mass."""
    return Z * len(particles) / particles.n_initial


def compute_Z(u0: Density, q: int, domain: TorusDomain) -> float:
    """Periodic trapezoid rule for the integral of ``u0`` over the box."""
    if q < 1:
        raise ConfigError(f"quadrature size must be positive, got {q}")
    vals = np.asarray(u0(domain.uniform_grid(q)), dtype=np.float64)
    if np.any(vals < 0):
        raise ModelError("initial datum takes negative values")
    if not np.all(np.isfinite(vals)):
        raise ModelError("initial datum is not finite on the quadrature grid")
    h = domain.length / q
    return float(np.sum(vals) * h**domain.dim)
