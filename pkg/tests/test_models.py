import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncft import models
from ncft.models import cubic_model, elasticity_model, make_model

CUBIC = cubic_model()
ELAS = elasticity_model()

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("ci")


def test_cubic_eigenvalue_at_one():
    lams, R, L = models.eigen(CUBIC, 1.0)
    assert lams[0] == pytest.approx(3.0, abs=1e-14)
    assert R[0, 0] == 1.0 and L[0, 0] == 1.0


def test_cubic_manifold_point():
    assert models.m_value(CUBIC, 0.0) == 0.0
    assert models.mu(CUBIC, 0.0) == 0.0


def test_cubic_parameter_is_identity():
    assert models.mu(CUBIC, 0.7) == pytest.approx(0.7, abs=1e-15)


def test_cubic_entropy_pair():
    assert models.entropy_pair(CUBIC, 1.0) == pytest.approx((1.0, 1.5), abs=1e-15)
    assert models.entropy_pair(CUBIC, 0.0) == (0.0, 0.0)


def test_elasticity_eigenvalues():
    lams, R, L = models.eigen(ELAS, (0.0, 1.0))
    assert lams == pytest.approx([-2.0, 2.0], abs=1e-14)
    # biorthonormal frame
    assert L @ R == pytest.approx(np.eye(2), abs=1e-13)
    # parameter-normalized orientation: grad(param_j) . r_j = 1
    for j in range(2):
        g = models.family_parameter_grad(ELAS, np.array([0.0, 1.0]), j)
        assert g @ R[:, j] == pytest.approx(1.0, abs=1e-13)


def test_elasticity_parameter_projection():
    assert models.mu(ELAS, (0.3, -0.2)) == pytest.approx(-0.2, abs=1e-15)


def test_elasticity_entropy_pair():
    U, F = models.entropy_pair(ELAS, (1.0, 0.0))
    assert U == pytest.approx(0.5, abs=1e-15)
    assert F == 0.0


def test_ball_rejection():
    with pytest.raises(models.BallViolation):
        models.require_in_ball(CUBIC, 1.6)
    with pytest.raises(models.BallViolation):
        models.require_in_ball(ELAS, (1.2, 1.2))
    models.require_in_ball(CUBIC, 1.5)  # boundary is inside


def test_field_kind_validation():
    with pytest.raises(ValueError):
        dataclasses.replace(CUBIC, field_kinds=("gnl",))  # cc_index must be cc
    with pytest.raises(ValueError):
        dataclasses.replace(CUBIC, delta1=3.0)  # delta1 <= delta0


def test_make_model_dispatch():
    m = make_model("cubic", {"delta0": 4.0, "delta1": 3.0})
    assert m.delta0 == 4.0 and m.delta1 == 3.0
    with pytest.raises(ValueError):
        make_model("unknown")


def test_cubic_self_check():
    rep = models.model_self_check(CUBIC, n_samples=200, seed=1)
    assert rep["max_compatibility_residual"] <= 1e-8
    assert rep["cc_sign_agreement"]
    assert rep["min_m_slope_along_r"] > 0
    assert rep["min_entropy_hessian_eigenvalue"] > 0


def test_elasticity_self_check():
    rep = models.model_self_check(ELAS, n_samples=200, seed=2)
    assert rep["max_compatibility_residual"] <= 1e-8
    assert rep["cc_sign_agreement"]
    assert rep["min_m_slope_along_r"] > 0
    # gap 2*sqrt(3w^2+1) never falls below 2
    assert rep["min_eigen_gap"] >= 2.0 - 1e-12


def test_eigen_gap_floor_thousand_samples():
    rep = models.model_self_check(ELAS, n_samples=1000, seed=3)
    assert rep["min_eigen_gap"] >= 2.0 - 1e-12


def test_generic_fallbacks_match_analytic():
    plain = dataclasses.replace(
        ELAS,
        eigen_fn=None,
        m_fn=None,
        family_parameter_grad=None,
        entropy_grad=None,
        entropy_hessian=None,
    )
    rng = np.random.default_rng(7)
    for a in models.sample_ball(ELAS, 25, rng):
        lams_a, R_a, _ = models.eigen(ELAS, a)
        lams_g, R_g, L_g = models.eigen(plain, a)
        assert lams_g == pytest.approx(lams_a, abs=1e-10)
        assert R_g == pytest.approx(R_a, abs=1e-6)
        assert L_g @ R_g == pytest.approx(np.eye(2), abs=1e-10)
        assert models.m_value(plain, a) == pytest.approx(
            models.m_value(ELAS, a), abs=1e-5
        )
        assert models.compatibility_residual(plain, a) <= 1e-8


def test_elasticity_m_formula():
    # m = 3w / sqrt(3w^2+1) for both families in this orientation
    for w in (-0.8, -0.1, 0.3, 1.0):
        want = 3 * w / np.sqrt(3 * w * w + 1)
        assert models.m_value(ELAS, (0.2, w), 0) == pytest.approx(want, abs=1e-14)
        assert models.m_value(ELAS, (0.2, w), 1) == pytest.approx(want, abs=1e-14)


@given(st.floats(-1.4, 1.4))
def test_cubic_sign_structure(u):
    muv = models.mu(CUBIC, u)
    mv = models.m_value(CUBIC, u)
    assert mv == pytest.approx(6 * u, abs=1e-14)
    if abs(muv) > 1e-12:
        assert np.sign(mv) == np.sign(muv)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_elasticity_frame_properties(v, w):
    a = np.array([v, w])
    if not models.in_ball(ELAS, a):
        return
    lams, R, L = models.eigen(ELAS, a)
    assert lams[0] < 0 < lams[1]
    assert L @ R == pytest.approx(np.eye(2), abs=1e-12)
    A = ELAS.jacobian(a)
    for j in range(2):
        assert A @ R[:, j] == pytest.approx(lams[j] * R[:, j], abs=1e-12)
