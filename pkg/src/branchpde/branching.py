"""Particle kernels: Euler-Maruyama transport and birth-death branching."""

from __future__ import annotations

from collections import Counter
import math
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import rng
from .errors import ConfigError, PopulationExplosionError, SolverBlowupError
from .particles import ParticleSet

DriftField = Callable[[np.ndarray], np.ndarray]
RateField = Callable[[np.ndarray], np.ndarray]

POISSON_INVERSION_MAX = 10.0


def _poisson_inversion(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    j = 0
    while np.any(active):
        j += 1
        idx = np.nonzero(active)[0]
        p[idx] *= lam[idx] / j
        cdf[idx] += p[idx]
        k[idx] = j
        # a vanished term means the cdf is saturated at rounding level
        active[idx] = (u[idx] > cdf[idx]) & (p[idx] > 0)
    return k


def _poisson_ptrs(lam: np.ndarray, key, ids: np.ndarray, step: int) -> np.ndarray:
    # Hormann (1993) transformed rejection with squeeze; exact for lam >= 10.
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2)
    out = np.full(lam.shape, -1, dtype=np.int64)
    pending = np.arange(lam.size)
    attempt = 1
    while pending.size:
        u, v = rng.uniform_pair(key, ids[pending], step, attempt)
        u = u - 0.5
        us = 0.5 - np.abs(u)
        a_, b_, lam_ = a[pending], b[pending], lam[pending]
        k = np.floor((2 * a_ / us + b_) * u + lam_ + 0.43)
        fast = (us >= 0.07) & (v <= vr[pending])
        reject = (k < 0) | ((us < 0.013) & (v > us))
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.log(v) + np.log(invalpha[pending]) - np.log(a_ / (us * us) + b_)
            rhs = -lam_ + k * loglam[pending] - gammaln(k + 1)
        slow = ~reject & (lhs <= rhs)
        ok = fast | slow
        out[pending[ok]] = k[ok].astype(np.int64)
        pending = pending[~ok]
        attempt += 1
    return out


def poisson_draws(lam, key, ids, step: int) -> np.ndarray:
    """Exact Poisson variates, one per id, from counter-based uniforms.

    Inversion by sequential search for ``lam <= 10`` (uses draw 0),
    transformed rejection above (draws 1, 2, ...).
    """
    lam = np.asarray(lam, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.uint64)
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ConfigError("Poisson mean must be finite and nonnegative")
    out = np.zeros(lam.shape, dtype=np.int64)
    small = lam <= POISSON_INVERSION_MAX
    if np.any(small):
        u, _ = rng.uniform_pair(key, ids[small], step, 0)
        out[small] = _poisson_inversion(lam[small], u)
    if np.any(~small):
        out[~small] = _poisson_ptrs(lam[~small], key, ids[~small], step)
    return out


def sample_poisson(lam: float, stream: rng.Stream) -> int:
    """Single Poisson(lam) draw from a :class:`~branchpde.rng.Stream`.

    The stream's draw counter is advanced so that repeated calls give
    independent variates.
    """
    if not math.isfinite(lam) or lam < 0:
        raise ConfigError(f"Poisson mean must be finite and nonnegative, got {lam}")
    step = (stream.step << 16) ^ stream.draw
    stream.draw += 1
    return int(poisson_draws([lam], stream.key, [stream.lineage_id], step)[0])


def sde_propagate(particles: ParticleSet, tau: float, drift: DriftField | None, sigma: float,
                  step_index: int, seed: int, population: int = 0) -> ParticleSet:
    """One Euler-Maruyama step ``X + b(X) tau + sqrt(tau) sigma xi``, wrapped."""
    if not tau > 0:
        raise ConfigError(f"time step must be positive, got {tau}")
    if sigma < 0:
        raise ConfigError(f"diffusion amplitude must be nonnegative, got {sigma}")
    x = particles.positions
    if len(particles) == 0:
        return particles.replace(x.copy(), particles.ids.copy())
    moved = x.copy()
    if drift is not None:
        b = np.asarray(drift(x), dtype=np.float64).reshape(x.shape)
        bad = ~np.all(np.isfinite(b), axis=1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SolverBlowupError(f"non-finite drift at particle {i}, position {x[i].tolist()}",
                                    step=step_index, position=x[i].copy())
        moved += b * tau
    if sigma > 0:
        key = rng.stream_key(seed, rng.TAG_SDE, population)
        moved += (math.sqrt(tau) * sigma) * rng.normals(key, particles.ids, step_index, x.shape[1])
    return particles.replace(particles.domain.wrap(moved), particles.ids.copy())


def cap_rates(c: np.ndarray, tau: float, rate_cap: float | None) -> tuple[np.ndarray, int]:
    """Clamp rates so that ``|c tau| <= rate_cap``; returns the number clamped."""
    if rate_cap is None:
        return c, 0
    lim = rate_cap / tau
    hits = int(np.count_nonzero(np.abs(c) > lim))
    return np.clip(c, -lim, lim), hits


def birth_death(particles: ParticleSet, tau: float, rate: RateField, step_index: int, seed: int,
                population: int = 0, rate_cap: float | None = None,
                population_cap: int | None = None, stats: Counter | None = None) -> ParticleSet:
    """Branch each particle over one step at rate ``c_i = rate(X_i)``.

    ``c_i > 0``: keep the parent plus ``Poisson(exp(c_i tau) - 1)`` copies.
    ``c_i < 0``: keep the parent with probability ``exp(c_i tau)``.
    Output order is surviving parents (input order), then children grouped
    by parent.
    """
    if not tau > 0:
        raise ConfigError(f"time step must be positive, got {tau}")
    n = len(particles)
    if n == 0:
        return particles.replace(particles.positions.copy(), particles.ids.copy())
    c = np.asarray(rate(particles.positions), dtype=np.float64).reshape(n)
    if not np.all(np.isfinite(c)):
        i = int(np.argmax(~np.isfinite(c)))
        raise SolverBlowupError(f"non-finite branching rate at particle {i}",
                                step=step_index, position=particles.positions[i].copy())
    c, hits = cap_rates(c, tau, rate_cap)
    if stats is not None:
        stats["cap_hits"] += hits
    if not np.any(c):
        return particles.replace(particles.positions.copy(), particles.ids.copy())

    key = rng.stream_key(seed, rng.TAG_BRANCH, population)
    keep = np.ones(n, dtype=bool)
    neg = c < 0
    if np.any(neg):
        u, _ = rng.uniform_pair(key, particles.ids[neg], step_index, 0)
        keep[neg] = u < np.exp(c[neg] * tau)
    n_children = np.zeros(n, dtype=np.int64)
    pos = c > 0
    if np.any(pos):
        n_children[pos] = poisson_draws(np.expm1(c[pos] * tau), key, particles.ids[pos], step_index)

    total = int(keep.sum() + n_children.sum())
    if population_cap is not None and total > population_cap:
        raise PopulationExplosionError(
            f"population {total} exceeds cap {population_cap} at step {step_index}", step=step_index)
    parent_idx = np.repeat(np.arange(n), n_children)
    ordinals = np.arange(parent_idx.size) - np.repeat(np.cumsum(n_children) - n_children, n_children) + 1
    new_pos = np.concatenate([particles.positions[keep], particles.positions[parent_idx]])
    new_ids = np.concatenate([
        particles.ids[keep],
        rng.child_ids(particles.ids[parent_idx], step_index, ordinals.astype(np.uint64)),
    ])
    return particles.replace(new_pos, new_ids)
