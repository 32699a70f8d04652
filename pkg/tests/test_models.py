import math

import numpy as np
import pytest

from branchpde import ConfigError, KSModel, ScalarModel, compute_Z, get_preset
from branchpde.models import KS_PRESETS, SCALAR_PRESETS

PI = math.pi


def test_preset_lookup():
    assert set(SCALAR_PRESETS) == {"allen-cahn"}
    assert set(KS_PRESETS) == {"ks-linear", "ks-blowup", "ks-logistic"}
    with pytest.raises(ConfigError):
        get_preset("nope")


def test_allen_cahn():
    m = get_preset("allen-cahn")
    assert isinstance(m, ScalarModel) and m.D == 0.01 and m.Z == pytest.approx(PI**2)
    np.testing.assert_allclose(m.r(np.array([0.0, 1.0, 2.0])), [1.0, 0.0, -3.0])
    assert compute_Z(m.u0, 64, m.domain) == pytest.approx(m.Z, rel=1e-13)


def test_ks_linear():
    m = get_preset("ks-linear")
    assert m.f_u is None and m.chi_over_u == 1.0
    assert m.Z_u == pytest.approx(PI**2) and m.Z_v == pytest.approx(8 * PI**2)
    assert compute_Z(m.v0, 64, m.domain) == pytest.approx(m.Z_v, rel=1e-13)


def test_ks_blowup_initial_data():
    m = get_preset("ks-blowup")
    origin = np.zeros((1, 2))
    assert m.u0(origin)[0] == pytest.approx(840.0)
    assert m.v0(origin)[0] == pytest.approx(420.0)
    # periodic images: the corner (2pi, 2pi) is the same point as the origin
    corner = np.array([[2 * PI - 1e-9, 2 * PI - 1e-9]])
    assert m.u0(corner)[0] == pytest.approx(840.0, rel=1e-6)
    assert compute_Z(m.u0, 512, m.domain) == pytest.approx(m.Z_u, rel=1e-10)
    assert compute_Z(m.v0, 512, m.domain) == pytest.approx(m.Z_v, rel=1e-10)


def test_ks_logistic_initial_data():
    m = get_preset("ks-logistic")
    c = np.array([[PI, PI]])
    assert m.u0(c)[0] == pytest.approx(1.0, abs=0.02)
    assert m.chi_over_u(np.array([1.0]))[0] == pytest.approx(2.0)
    assert m.f_u(np.array([0.5]), None)[0] == pytest.approx(0.25)
    Z = compute_Z(m.u0, 256, m.domain)
    assert Z == pytest.approx(3 * PI, rel=1e-3)


def test_model_validation():
    with pytest.raises(ConfigError):
        ScalarModel("x", D=0.0, u0=lambda x: x[:, 0])
    with pytest.raises(ConfigError):
        KSModel("x", u0=lambda x: x[:, 0], v0=lambda x: x[:, 0])
