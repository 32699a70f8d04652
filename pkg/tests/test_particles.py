import math

import numpy as np
import pytest
from scipy import stats

from branchpde import ConfigError, ModelError, TorusDomain, compute_Z, sample_initial, sample_rejection
from branchpde import total_mass_estimate
from branchpde.particles import MHParams, ParticleSet

PI = math.pi
D2 = TorusDomain(2)


def rho0(x):
    x = np.atleast_2d(x)
    return np.sin(x[:, 0]) ** 2 * np.cos(x[:, 1]) ** 2 / PI**2


def _cell_probs(nb):
    # exact cell integrals: int sin^2 = t/2 - sin(2t)/4, int cos^2 = t/2 + sin(2t)/4
    e = np.linspace(0, 2 * PI, nb + 1)
    Fs = e / 2 - np.sin(2 * e) / 4
    Fc = e / 2 + np.sin(2 * e) / 4
    return np.outer(np.diff(Fs), np.diff(Fc)) / PI**2


def _chi2_p(x, nb, probs):
    h, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=nb, range=[[0, 2 * PI]] * 2)
    expected = probs.ravel() * len(x)
    return stats.chisquare(h.ravel(), expected).pvalue


def test_cell_probabilities_sum_to_one():
    assert _cell_probs(50).sum() == pytest.approx(1.0, rel=1e-13)


def test_uniform_target_chi2():
    x = sample_initial(lambda p: np.ones(len(p)), 100_000, D2, seed=3).positions
    assert _chi2_p(x, 10, np.full((10, 10), 0.01)) > 1e-3


def test_mh_sample_mean_symmetry():
    x = sample_initial(rho0, 50_000, D2, seed=5).positions
    se = x[:, 0].std() / math.sqrt(len(x))
    assert abs(x[:, 0].mean() - PI) < 5 * se


def test_mh_histogram_chi2():
    x = sample_initial(rho0, 200_000, D2, seed=7).positions
    assert _chi2_p(x, 50, _cell_probs(50)) > 1e-3


def test_rejection_histogram_chi2():
    x = sample_rejection(rho0, 200_000, D2, seed=8, sup=1 / PI**2).positions
    assert _chi2_p(x, 50, _cell_probs(50)) > 1e-3


def test_sampling_deterministic():
    a = sample_initial(rho0, 2000, D2, seed=1)
    b = sample_initial(rho0, 2000, D2, seed=1)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.ids, np.arange(2000))
    c = sample_initial(rho0, 2000, D2, seed=2)
    assert not np.array_equal(a.positions, c.positions)
    r1 = sample_rejection(rho0, 1000, D2, 4, 1 / PI**2)
    r2 = sample_rejection(rho0, 1000, D2, 4, 1 / PI**2)
    np.testing.assert_array_equal(r1.positions, r2.positions)


def test_sampling_errors():
    with pytest.raises(ModelError):
        sample_initial(lambda p: np.full(len(p), -1.0), 10, D2, 0)
    with pytest.raises(ModelError):
        sample_initial(lambda p: np.zeros(len(p)), 10, D2, 0)
    with pytest.raises(ConfigError):
        sample_initial(rho0, 0, D2, 0)
    with pytest.raises(ConfigError):
        sample_rejection(rho0, 10, D2, 0, sup=0.0)


def test_positions_wrapped():
    ps = sample_initial(rho0, 1000, D2, 0, MHParams(step=3.0, burn_in=20))
    assert np.all((ps.positions >= 0) & (ps.positions < 2 * PI))
    ps.check()


def test_total_mass_estimate():
    ps = ParticleSet.from_positions(D2, np.zeros((10, 2)))
    assert total_mass_estimate(ps, PI**2) == PI**2
    empty = ps.replace(np.zeros((0, 2)), np.zeros(0, dtype=np.uint64))
    assert total_mass_estimate(empty, PI**2) == 0.0
    assert empty.n_initial == 10


@pytest.mark.parametrize("u0,expected", [
    (lambda x: np.sin(x[:, 0]) ** 2 * np.cos(x[:, 1]) ** 2, PI**2),
    (lambda x: np.ones(len(x)), 4 * PI**2),
    (lambda x: np.cos(x[:, 0]) + np.cos(x[:, 1]) + 2, 8 * PI**2),
])
def test_compute_Z(u0, expected):
    assert compute_Z(u0, 64, D2) == pytest.approx(expected, rel=1e-13)


def test_compute_Z_negative():
    with pytest.raises(ModelError):
        compute_Z(lambda x: np.cos(x[:, 0]), 16, D2)


def test_dump_csv(tmp_path):
    ps = ParticleSet.from_positions(D2, [[0.5, 1.0], [2.0, 3.0]])
    p = tmp_path / "p.csv"
    ps.dump_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "id,x1,x2"
    assert lines[1].startswith("0,0.5,1")
