import math
from collections import Counter

import numpy as np
import pytest

from branchpde import PopulationExplosionError, SolverBlowupError, TorusDomain, birth_death, rng
from branchpde import sample_poisson, sde_propagate
from branchpde.branching import poisson_draws
from branchpde.errors import ConfigError
from branchpde.particles import ParticleSet

D2 = TorusDomain(2)


def _set(n, seed=0):
    pos = np.random.default_rng(seed).uniform(0, 2 * np.pi, size=(n, 2))
    return ParticleSet.from_positions(D2, pos)


def const(c):
    return lambda x: np.full(len(x), float(c))


@pytest.mark.parametrize("lam", [0.10517, 3.0, 10.0, 50.0, 400.0])
def test_poisson_moments(lam):
    n = 1_000_000
    k = poisson_draws(np.full(n, lam), rng.stream_key(int(lam * 7), rng.TAG_TEST),
                      np.arange(n, dtype=np.uint64), 1)
    assert k.dtype.kind == "i" and k.min() >= 0
    assert abs(k.mean() - lam) < 5 * math.sqrt(lam / n)
    # variance of the sample variance of a Poisson: (lam + 2 lam^2) / n approximately
    assert abs(k.var() - lam) < 5 * math.sqrt((lam + 2 * lam**2) / n)


def test_poisson_zero_and_pmf():
    n = 200_000
    z = poisson_draws(np.zeros(n), rng.stream_key(1, rng.TAG_TEST), np.arange(n, dtype=np.uint64), 0)
    assert not np.any(z)
    from scipy import stats
    for lam in (2.5, 30.0):
        k = poisson_draws(np.full(n, lam), rng.stream_key(2, rng.TAG_TEST), np.arange(n, dtype=np.uint64), 0)
        lo, hi = stats.poisson.ppf([0.001, 0.999], lam).astype(int)
        obs = np.array([np.sum(k == j) for j in range(lo, hi + 1)])
        exp = stats.poisson.pmf(np.arange(lo, hi + 1), lam) * n
        chi2 = np.sum((obs - exp) ** 2 / exp)
        assert stats.chi2.sf(chi2, len(obs) - 1) > 1e-3


def test_sample_poisson_stream():
    s = rng.Stream(3)
    draws = [sample_poisson(4.0, s) for _ in range(2000)]
    assert abs(np.mean(draws) - 4.0) < 5 * math.sqrt(4.0 / 2000)
    assert sample_poisson(0.0, rng.Stream(1)) == 0
    with pytest.raises(ConfigError):
        sample_poisson(float("inf"), rng.Stream(1))


def test_sde_trivial_cases():
    ps = _set(100)
    same = sde_propagate(ps, 0.1, None, 0.0, 0, 1)
    np.testing.assert_array_equal(same.positions, ps.positions)
    shifted = sde_propagate(ps, 0.1, lambda x: np.tile([1.0, 0.0], (len(x), 1)), 0.0, 0, 1)
    np.testing.assert_allclose(shifted.positions, D2.wrap(ps.positions + [0.1, 0.0]))
    np.testing.assert_array_equal(shifted.ids, ps.ids)


def test_sde_moments():
    n, tau, sigma = 100_000, 0.01, math.sqrt(2)
    start = np.full((n, 2), np.pi)
    ps = ParticleSet.from_positions(D2, start)
    out = sde_propagate(ps, tau, None, sigma, 4, 9)
    disp = out.positions - start
    for j in range(2):
        assert abs(disp[:, j].mean()) <= 5 * sigma * math.sqrt(tau) / math.sqrt(n)
        var = disp[:, j].var()
        assert abs(var - sigma**2 * tau) <= 5 * sigma**2 * tau * math.sqrt(2 / n)


def test_sde_errors():
    ps = _set(10)
    with pytest.raises(SolverBlowupError) as e:
        sde_propagate(ps, 0.1, lambda x: np.full((len(x), 2), np.nan), 1.0, 3, 0)
    assert e.value.step == 3 and e.value.position is not None
    with pytest.raises(ConfigError):
        sde_propagate(ps, 0.0, None, 1.0, 0, 0)


def test_birth_death_zero_rate_identity():
    ps = _set(1000)
    out = birth_death(ps, 0.1, const(0), 0, 1)
    np.testing.assert_array_equal(out.positions, ps.positions)
    np.testing.assert_array_equal(out.ids, ps.ids)


def test_birth_death_growth_band():
    n, tau = 100_000, 0.1
    out = birth_death(_set(n), tau, const(1), 0, 5)
    lam = math.expm1(tau)
    assert abs(len(out) - n * math.exp(tau)) <= 5 * math.sqrt(n * lam)
    assert n * math.exp(tau) == pytest.approx(110517.09, abs=0.01)


def test_birth_death_decay_band():
    n, tau = 100_000, 0.1
    out = birth_death(_set(n), tau, const(-1), 0, 5)
    p = math.exp(-tau)
    assert abs(len(out) - n * p) <= 5 * math.sqrt(n * p * (1 - p))


def test_children_layout():
    ps = _set(2000)
    out = birth_death(ps, 0.5, const(2), 3, 1)
    n = len(ps)
    np.testing.assert_array_equal(out.positions[:n], ps.positions)
    np.testing.assert_array_equal(out.ids[:n], ps.ids)
    children = out.ids[n:]
    assert len(np.unique(out.ids)) == len(out)
    # every child sits exactly on some parent, grouped in parent order
    lookup = {tuple(p): i for i, p in enumerate(ps.positions)}
    parents = [lookup[tuple(p)] for p in out.positions[n:]]
    assert parents == sorted(parents)
    assert len(children) > 0


def test_birth_death_deterministic():
    ps = _set(3000)
    rate = lambda x: np.sin(x[:, 0]) * 3
    a = birth_death(ps, 0.2, rate, 2, 11)
    b = birth_death(ps, 0.2, rate, 2, 11)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.ids, b.ids)


def test_rate_cap_and_population_cap():
    ps = _set(1000)
    stats = Counter()
    out = birth_death(ps, 0.1, const(1000.0), 0, 0, rate_cap=0.5, stats=stats)
    assert stats["cap_hits"] == 1000
    lam = math.expm1(0.5)
    assert abs(len(out) - 1000 * (1 + lam)) < 5 * math.sqrt(1000 * lam)
    with pytest.raises(PopulationExplosionError):
        birth_death(ps, 0.1, const(50.0), 0, 0, rate_cap=5.0, population_cap=20_000)
    with pytest.raises(SolverBlowupError):
        birth_death(ps, 0.1, const(np.inf), 0, 0)


def test_unbiased_against_test_function():
    # E[(1/N) sum f(X)] after branching = e^{c tau} (1/N) sum f(X) before
    n, tau, c = 20_000, 0.1, 1.0
    ps = _set(n, 7)
    f = lambda x: np.cos(x[:, 0]) + 2
    before = f(ps.positions).sum() / n
    vals = [f(birth_death(ps, tau, const(c), 0, s).positions).sum() / n for s in range(40)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - math.exp(c * tau) * before) < 5 * se
