import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncft import curves, kinetics, models
from ncft.kinetics import (
    KineticFunction,
    check_hypotheses,
    default_samples,
    mu_flat,
    mu_nucleation,
    mu_sharp,
    nucleation_gap,
    phi_flat,
    phi_sharp,
)
from ncft.models import cubic_model, elasticity_model

CUBIC = cubic_model()
ELAS = elasticity_model()
KIN = KineticFunction(theta=0.5, nucleation_gamma=0.5)
KIN_NONUCL = KineticFunction(theta=0.5, nucleation_gamma=0.0)

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("ci")


def test_mu_flat_interpolation():
    assert mu_flat(CUBIC, KIN, 1.0) == pytest.approx(-0.75, abs=1e-10)
    assert mu_flat(CUBIC, KIN, 0.4) == pytest.approx(-0.3, abs=1e-10)
    # mirror side
    assert mu_flat(CUBIC, KIN, -1.0) == pytest.approx(0.75, abs=1e-10)


def test_theta_limits():
    classical = KineticFunction(theta=0.0)
    assert mu_flat(CUBIC, classical, 1.0) == pytest.approx(-0.5, abs=1e-10)
    extreme = KineticFunction(theta=1.0)
    assert mu_flat(CUBIC, extreme, 1.0) == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(ValueError):
        KineticFunction(theta=1.2)


def test_mu_sharp_companion():
    assert mu_sharp(CUBIC, KIN, 1.0) == pytest.approx(-0.25, abs=1e-10)
    assert mu_sharp(CUBIC, KIN, 0.4) == pytest.approx(-0.1, abs=1e-10)
    lam_flat = curves.shock_speed(CUBIC, 1.0, phi_flat(CUBIC, KIN, 1.0))
    lam_sharp = curves.shock_speed(CUBIC, 1.0, phi_sharp(CUBIC, KIN, 1.0))
    assert lam_flat == pytest.approx(lam_sharp, abs=1e-12)
    assert lam_flat == pytest.approx(0.8125, abs=1e-10)


def test_mu_nucleation_interpolation():
    assert mu_nucleation(CUBIC, KIN, 1.0) == pytest.approx(-0.375, abs=1e-10)
    assert nucleation_gap(CUBIC, KIN, 1.0) == pytest.approx(0.125, abs=1e-10)
    # no nucleation: threshold collapses onto the companion
    assert mu_nucleation(CUBIC, KIN_NONUCL, 1.0) == pytest.approx(-0.25, abs=1e-10)
    assert nucleation_gap(CUBIC, KIN_NONUCL, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_elasticity_kinetic_values():
    assert mu_flat(ELAS, KIN, (0.0, 0.5)) == pytest.approx(-0.375, abs=1e-9)
    assert mu_sharp(ELAS, KIN, (0.0, 0.5)) == pytest.approx(-0.125, abs=1e-9)
    assert nucleation_gap(ELAS, KIN, (0.0, 0.5)) == pytest.approx(0.0625, abs=1e-9)


def test_contraction_measurement():
    cff, witness, n = kinetics.measure_contraction(
        CUBIC, KIN, default_samples(CUBIC, 100, seed=4)
    )
    assert cff == pytest.approx(0.75, abs=1e-9)
    assert n > 50


def test_check_hypotheses_pass():
    rep = check_hypotheses(CUBIC, KIN)
    assert rep.passed
    assert rep.measured_Cff == pytest.approx(0.75, abs=1e-8)
    assert rep.lipschitz_estimate == pytest.approx(0.75, abs=1e-6)
    for name in ("H1", "H2", "H3", "H4"):
        assert rep.hypotheses[name]["passed"], name
    d = rep.to_json_dict()
    assert d["grid"]["n_samples"] == 200


def test_check_hypotheses_theta_one_fails_band():
    rep = check_hypotheses(CUBIC, KineticFunction(theta=1.0))
    assert not rep.passed
    assert not rep.hypotheses["H1"]["passed"]
    assert rep.hypotheses["H1"]["witness"] is not None


def test_check_hypotheses_elasticity():
    rep = check_hypotheses(ELAS, KIN)
    assert rep.passed
    # the contraction constant transfers through the shared parameter algebra
    assert rep.measured_Cff == pytest.approx(0.75, abs=1e-6)
    assert rep.grid["n_contraction_evaluated"] > 20


def test_user_table():
    table = KineticFunction(table=lambda model, u: -0.8 * float(u[0]))
    assert mu_flat(CUBIC, table, 1.0) == pytest.approx(-0.8, abs=1e-12)
    bad = KineticFunction(table=lambda model, u: -1.2 * float(u[0]))
    with pytest.raises(ValueError):
        mu_flat(CUBIC, bad, 1.0)


def test_identity_at_manifold():
    assert mu_flat(CUBIC, KIN, 0.0) == 0.0
    assert np.allclose(phi_flat(CUBIC, KIN, 0.0), [0.0])


@given(st.floats(0.1, 1.3))
def test_band_and_gap_properties(u):
    flat = mu_flat(CUBIC, KIN, u)
    sharp = mu_sharp(CUBIC, KIN, u)
    nucl = mu_nucleation(CUBIC, KIN, u)
    nat = curves.mu_natural(CUBIC, u)
    b0 = curves.mu_flat_zero(CUBIC, u)
    # band: flat strictly inside (b0, nat]; threshold between nat and sharp
    assert b0 < flat <= nat + 1e-12
    assert nat - 1e-12 <= nucl <= sharp + 1e-12
    assert nucleation_gap(CUBIC, KIN, u) >= 0
    assert nucleation_gap(CUBIC, KIN, u) > 0  # gamma > 0 here


@given(st.floats(0.1, 1.3), st.one_of(st.just(0.0), st.floats(1e-9, 1.0)))
def test_gap_vanishes_iff_gamma_zero(u, gamma):
    kin = KineticFunction(theta=0.5, nucleation_gamma=gamma)
    gap = nucleation_gap(CUBIC, kin, u)
    if gamma == 0.0:
        assert gap == pytest.approx(0.0, abs=1e-12)
    else:
        assert gap > 0
