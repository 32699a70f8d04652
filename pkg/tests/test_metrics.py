import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchpde import ConfigError, SolverConfig, TorusDomain, get_preset, run_ks
from branchpde.metrics import (TimeSeries, exact_mass_case2, fit_convergence_slope, fit_residual,
                               h_minus_s_distance, mass_series, rel_l2_grid, write_metrics_csv)
from branchpde.record import RunRecord
from branchpde.spectral import SpectralField

PI2 = math.pi**2
D2 = TorusDomain(2)


def test_rel_l2_examples():
    B = np.random.default_rng(0).normal(size=(8, 8))
    assert rel_l2_grid(B, B) == 0.0
    assert rel_l2_grid(2 * B, B) == pytest.approx(1.0)
    d = 0.3
    assert rel_l2_grid(B + d, B) == pytest.approx(d * 8 / np.linalg.norm(B))
    assert rel_l2_grid(-3 * (B + 1), -3 * B) == pytest.approx(rel_l2_grid(B + 1, B))
    with pytest.raises(ConfigError):
        rel_l2_grid(B, np.zeros_like(B))
    with pytest.raises(ConfigError):
        rel_l2_grid(B, B[:4])


def _field(K, seed):
    return SpectralField(D2, K, np.random.default_rng(seed).normal(size=(2 * K + 1, 2 * K + 1)))


def test_h_minus_s_examples():
    F = _field(3, 0)
    assert h_minus_s_distance(F, F, 2.5) == 0.0
    c = np.array(F.coeffs)
    c[3, 3] += 0.7
    assert h_minus_s_distance(SpectralField(D2, 3, c), F, 4.0) == pytest.approx(0.7)
    G = _field(3, 1)
    brute = 0.0
    for i in range(-3, 4):
        for j in range(-3, 4):
            brute += (1 + i * i + j * j) ** -2.5 * (F.coefficient((i, j)) - G.coefficient((i, j))) ** 2
    assert h_minus_s_distance(F, G, 2.5) == pytest.approx(math.sqrt(brute), rel=1e-13)
    with pytest.raises(ConfigError):
        h_minus_s_distance(F, _field(2, 0), 2.5)


def test_single_mode_weight():
    c = np.zeros((3, 3))
    c[2, 1] = 1.0
    for s in (1.0, 2.5, 3.0):
        assert h_minus_s_distance(SpectralField(D2, 1, c), SpectralField.zeros(D2, 1), s) ** 2 == pytest.approx(2.0**-s)


@given(st.integers(0, 10_000), st.floats(0.5, 4.0))
@settings(max_examples=25, deadline=None)
def test_h_minus_s_metric_axioms(seed, s):
    F, G, H = _field(2, seed), _field(2, seed + 1), _field(2, seed + 2)
    assert h_minus_s_distance(F, G, s) == pytest.approx(h_minus_s_distance(G, F, s))
    assert h_minus_s_distance(F, H, s) <= h_minus_s_distance(F, G, s) + h_minus_s_distance(G, H, s) + 1e-12


def test_exact_mass_case2():
    assert exact_mass_case2(0.0) == pytest.approx(8 * PI2)
    assert exact_mass_case2(0.5) == pytest.approx(51.77, abs=0.005)
    assert exact_mass_case2(60.0) == pytest.approx(PI2, rel=1e-12)
    h = 1e-4
    for t in (0.1, 0.7, 2.0):
        deriv = (exact_mass_case2(t + h) - exact_mass_case2(t - h)) / (2 * h)
        assert abs(deriv + exact_mass_case2(t) - PI2) <= 1e-6
    with pytest.raises(ConfigError):
        exact_mass_case2(-1.0)


def test_fit_slope():
    Ns = np.array([1e4, 2e4, 4e4, 8e4])
    s, b = fit_convergence_slope(list(zip(Ns, 3 / np.sqrt(Ns))))
    assert s == pytest.approx(-0.5, abs=1e-12) and math.exp(b) == pytest.approx(3.0)
    s, _ = fit_convergence_slope(list(zip(Ns, 2 / Ns)))
    assert s == pytest.approx(-1.0, abs=1e-12)
    assert fit_residual(list(zip(Ns, 2 / Ns)), -1.0, math.log(2)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        fit_convergence_slope([(1e4, 0.1), (2e4, 0.05)])
    with pytest.raises(ConfigError):
        fit_convergence_slope([(1e4, 0.1), (2e4, 0.0), (4e4, 0.02)])


def test_mass_series_linear_ks():
    rec = run_ks(get_preset("ks-linear"), SolverConfig(tau=1e-3, t_end=0.003, n=500, K=4))
    mv = mass_series(rec, "v")
    assert mv.values[0] == pytest.approx(8 * PI2)
    mu = mass_series(rec, "u")
    np.testing.assert_array_equal(mu.values, PI2)
    assert not mu.failed


def test_mass_series_failed_flag():
    rec = RunRecord("scalar", {}, 0, series=[{"t": 0.0, "mass_u": 1.0}, {"t": 0.1, "mass_u": 1.1}])
    rec.fail(1, "boom")
    ts = mass_series(rec, "u")
    assert ts.failed and len(ts.t) == 2


def test_time_series_monotone():
    with pytest.raises(ConfigError):
        TimeSeries([0.0, 0.0], [1.0, 2.0])


def test_write_metrics_csv(tmp_path):
    p = tmp_path / "m.csv"
    write_metrics_csv(p, [("rel_l2_u", 0.5, 0.25), ("slope", "fit", -0.5)])
    assert p.read_text().splitlines() == ["metric,key,value", "rel_l2_u,0.5,0.25", "slope,fit,-0.5"]
