"""Riemann solver tests.

Scalar fans are checked against hand-evaluated chord speeds and kinetic
values; the elasticity solves are checked against a test-local shooting
oracle built from the closed-form wave curves of that model.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from ncft import curves, kinetics as kin_mod, models, riemann
from ncft.kinetics import KineticFunction
from ncft.models import cubic_model, elasticity_model
from ncft.riemann import (
    KIND_CLASSICAL,
    KIND_NONCLASSICAL,
    KIND_RAREFACTION,
    IdGen,
    solve_riemann,
    wave_curve_point,
)

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("ci")

CUBIC = cubic_model()
ELAS = elasticity_model()
KIN = KineticFunction(theta=0.5, nucleation_gamma=0.5)
KIN0 = KineticFunction(theta=0.0, nucleation_gamma=0.0)


def fan_kinds(fan):
    return [w.kind for w in fan.waves]


def test_rarefaction_fan():
    fan = solve_riemann(CUBIC, KIN, 1.0, 1.2)
    assert fan_kinds(fan) == [KIND_RAREFACTION]
    w = fan.waves[0]
    assert w.speed[0] == pytest.approx(3.0, abs=1e-12)
    assert w.speed[1] == pytest.approx(4.32, abs=1e-12)
    assert w.strength == pytest.approx(0.2, abs=1e-12)
    assert np.array_equal(fan.right_state, np.array([1.2]))


def test_lax_fan():
    fan = solve_riemann(CUBIC, KIN, 1.0, 0.5)
    assert fan_kinds(fan) == [KIND_CLASSICAL]
    assert fan.waves[0].speed == pytest.approx(1.75, abs=1e-12)
    assert fan.waves[0].strength == pytest.approx(-0.5, abs=1e-12)


def test_equal_states_empty_fan():
    fan = solve_riemann(CUBIC, KIN, 0.7, 0.7)
    assert fan.waves == ()
    fan2 = solve_riemann(ELAS, KIN, (0.1, 0.4), (0.1, 0.4))
    assert fan2.waves == ()


def test_nonclassical_fan_with_trailing_shock():
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.45)
    assert fan_kinds(fan) == [KIND_NONCLASSICAL, KIND_CLASSICAL]
    nc, up = fan.waves
    assert nc.right[0] == pytest.approx(-0.75, abs=1e-12)
    assert nc.speed == pytest.approx(0.8125, abs=1e-11)
    assert up.speed == pytest.approx(1.1025, abs=1e-11)
    assert nc.speed < up.speed
    assert nc.strength == pytest.approx(-0.25, abs=1e-10)
    assert up.strength == pytest.approx(-0.30, abs=1e-10)
    # the nonclassical jump satisfies the kinetic relation exactly
    assert nc.right[0] == pytest.approx(
        kin_mod.mu_flat(CUBIC, KIN, nc.left), abs=1e-12
    )


def test_nonclassical_fan_with_trailing_rarefaction():
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.9)
    assert fan_kinds(fan) == [KIND_NONCLASSICAL, KIND_RAREFACTION]
    nc, rf = fan.waves
    assert nc.speed == pytest.approx(0.8125, abs=1e-11)
    assert rf.left[0] == pytest.approx(-0.75, abs=1e-12)
    assert rf.speed[0] == pytest.approx(1.6875, abs=1e-10)
    assert rf.speed[1] == pytest.approx(2.43, abs=1e-12)
    assert nc.speed <= rf.speed[0]


def test_nucleation_keeps_classical_inside_overlap():
    # jump to -0.3: distance 1.3 beats the threshold distance 1.375
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.3)
    assert fan_kinds(fan) == [KIND_CLASSICAL]
    assert fan.waves[0].speed == pytest.approx(0.79, abs=1e-12)


def test_nucleation_switch_point():
    ids = IdGen()
    # at the threshold itself the tie goes classical
    _, frag = wave_curve_point(CUBIC, KIN, 1.0, 0, -0.375, True, ids)
    assert [w.kind for w in frag] == [KIND_CLASSICAL]
    assert frag[0].speed == pytest.approx(0.765625, abs=1e-12)
    _, frag = wave_curve_point(CUBIC, KIN, 1.0, 0, -0.375 - 1e-9, True, ids)
    assert [w.kind for w in frag] == [KIND_NONCLASSICAL, KIND_CLASSICAL]


def test_no_nucleation_threshold_is_companion():
    # without nucleation the classical branch ends at the companion -0.25,
    # so -0.3 now takes the nonclassical branch
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.3, use_nucleation=False)
    assert fan_kinds(fan) == [KIND_NONCLASSICAL, KIND_CLASSICAL]
    assert fan.waves[1].speed == pytest.approx(0.8775, abs=1e-11)
    # gamma=0 with nucleation enabled gives the same threshold
    kin_g0 = KineticFunction(theta=0.5, nucleation_gamma=0.0)
    fan2 = solve_riemann(CUBIC, kin_g0, 1.0, -0.3, use_nucleation=True)
    assert fan_kinds(fan2) == fan_kinds(fan)


def test_manifold_state_spreads_both_ways():
    for u_r in (0.3, -0.3):
        fan = solve_riemann(CUBIC, KIN, 0.0, u_r)
        assert fan_kinds(fan) == [KIND_RAREFACTION]


def test_mirror_fan():
    fan = solve_riemann(CUBIC, KIN, -1.0, 0.45)
    assert fan_kinds(fan) == [KIND_NONCLASSICAL, KIND_CLASSICAL]
    assert fan.waves[0].right[0] == pytest.approx(0.75, abs=1e-12)
    assert fan.waves[0].speed == pytest.approx(0.8125, abs=1e-11)


def test_theta_zero_leading_piece_is_classical_contact():
    # the tangent jump 1 -> -0.5 is a Lax tie, so it carries the
    # classical label, and the join to the tail is speed-continuous
    fan = solve_riemann(CUBIC, KIN0, 1.0, -0.6, use_nucleation=False)
    assert fan_kinds(fan) == [KIND_CLASSICAL, KIND_RAREFACTION]
    lead, tail = fan.waves
    assert lead.right[0] == pytest.approx(-0.5, abs=1e-12)
    assert lead.speed == pytest.approx(0.75, abs=1e-11)
    assert tail.speed[0] == pytest.approx(lead.speed, abs=1e-10)


def test_gamma_zero_speed_continuity_at_companion_join():
    kin_g0 = KineticFunction(theta=0.5, nucleation_gamma=0.0)
    ids = IdGen()
    eps = 1e-7
    _, above = wave_curve_point(CUBIC, kin_g0, 1.0, 0, -0.25 + eps, True, ids)
    _, below = wave_curve_point(CUBIC, kin_g0, 1.0, 0, -0.25 - eps, True, ids)
    assert [w.kind for w in above] == [KIND_CLASSICAL]
    assert [w.kind for w in below] == [KIND_NONCLASSICAL, KIND_CLASSICAL]
    # single-shock speed and trailing-shock speed meet at the companion
    assert above[0].speed == pytest.approx(below[1].speed, abs=1e-5)
    assert abs(above[0].speed - 0.8125) < 1e-6


def test_reached_parameter_matches_target():
    ids = IdGen()
    for m in np.linspace(-1.4, 1.4, 29):
        state, frag = wave_curve_point(CUBIC, KIN, 1.0, 0, float(m), True, ids)
        assert abs(state[0] - m) < 1e-9
        for w in frag:
            assert w.strength != 0.0


def test_self_similarity_resplits():
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.45)
    mid = fan.waves[0].right
    sub = solve_riemann(CUBIC, KIN, mid, -0.45)
    assert fan_kinds(sub) == [KIND_CLASSICAL]
    assert sub.waves[0].speed == pytest.approx(fan.waves[1].speed, abs=1e-10)
    lead = solve_riemann(CUBIC, KIN, 1.0, mid)
    assert fan_kinds(lead) == [KIND_NONCLASSICAL]
    assert lead.waves[0].speed == pytest.approx(fan.waves[0].speed, abs=1e-10)


def test_no_solution_gap_guard(monkeypatch):
    # unreachable for interpolated kinetics; force the threshold past the
    # companion to exercise the guard
    monkeypatch.setattr(kin_mod, "mu_nucleation", lambda model, kin, u: -0.2)
    with pytest.raises(riemann.NoSolutionGap):
        wave_curve_point(CUBIC, KIN, 1.0, 0, -0.22, True, IdGen())


def test_ball_enforced_on_inputs():
    with pytest.raises(models.BallViolation):
        solve_riemann(CUBIC, KIN, 1.6, 0.5)


# elasticity oracle: closed-form wave curves and a one-parameter shooting


def _G(s):
    return 0.5 * s * np.sqrt(3 * s * s + 1) + np.arcsinh(np.sqrt(3.0) * s) / (
        2 * np.sqrt(3.0)
    )


def _sigma(w):
    return w**3 + w


def _chord(wl, wr):
    return (_sigma(wr) - _sigma(wl)) / (wr - wl)


def _fam0_to(v_l, w_l, w):
    if w == w_l:
        return v_l
    if w > w_l:  # slow-family shock side for w > 0
        lam = -np.sqrt(_chord(w_l, w))
        return v_l - lam * (w - w_l)
    return v_l + (_G(w) - _G(w_l))


def _fam1_to(v_m, w_m, w):
    if w == w_m:
        return v_m
    if w < w_m:  # fast-family shock side for w > 0
        lam = np.sqrt(_chord(w_m, w))
        return v_m - lam * (w - w_m)
    return v_m - (_G(w) - _G(w_m))


def test_elasticity_weak_classical_pair():
    u_l = (0.0, 0.6)
    u_r = (0.05, 0.55)

    def shoot(w_m):
        v_m = _fam0_to(u_l[0], u_l[1], w_m)
        return _fam1_to(v_m, w_m, u_r[1]) - u_r[0]

    w_mid = brentq(shoot, 0.4, 0.8, xtol=1e-14)
    v_mid = _fam0_to(u_l[0], u_l[1], w_mid)

    fan = solve_riemann(ELAS, KIN, u_l, u_r)
    assert len(fan.waves) == 2
    assert [w.family for w in fan.waves] == [0, 1]
    mid = fan.waves[0].right
    assert mid[0] == pytest.approx(v_mid, abs=1e-9)
    assert mid[1] == pytest.approx(w_mid, abs=1e-9)
    assert np.max(np.abs(fan.right_state - np.array(u_r))) == 0.0
    for w in fan.waves:
        if not isinstance(w.speed, tuple):
            E = curves.entropy_dissipation(ELAS, w.left, w.right)
            assert E <= 1e-9


def test_elasticity_fan_speeds_ordered_across_families():
    fan = solve_riemann(ELAS, KIN, (0.0, 0.6), (0.05, 0.55))
    assert fan.waves[0].speed_hi < 0 < fan.waves[1].speed_lo


def test_elasticity_nonclassical_system_fan():
    # build the target state by walking the true curves forward, then ask
    # the solver to recover the construction
    ids = IdGen()
    mid, frag0 = wave_curve_point(ELAS, KIN, (0.0, 0.5), 0, -0.45, True, ids)
    assert [w.kind for w in frag0] == [KIND_RAREFACTION]
    end, frag1 = wave_curve_point(ELAS, KIN, mid, 1, -0.30, True, ids)
    assert [w.kind for w in frag1] == [KIND_NONCLASSICAL, KIND_CLASSICAL]

    fan = solve_riemann(ELAS, KIN, (0.0, 0.5), end)
    assert fan_kinds(fan) == [KIND_RAREFACTION, KIND_NONCLASSICAL, KIND_CLASSICAL]
    assert fan.waves[0].right[1] == pytest.approx(0.45, abs=1e-8)
    assert fan.waves[1].right[1] == pytest.approx(frag1[0].right[1], abs=1e-8)
    assert np.max(np.abs(fan.right_state - end)) == 0.0
    fan.validate()


def test_wave_json_round_trip():
    fan = solve_riemann(CUBIC, KIN, 1.0, -0.45)
    d = fan.to_json_dict()
    assert [w["kind"] for w in d["waves"]] == [KIND_NONCLASSICAL, KIND_CLASSICAL]
    assert d["waves"][0]["speed"] == pytest.approx(0.8125)
    assert isinstance(d["waves"][0]["id"], int)
    fan2 = solve_riemann(CUBIC, KIN, 1.0, 1.2)
    assert fan2.to_json_dict()["waves"][0]["speed"] == [3.0, 4.32]


@given(
    ul=st.floats(-1.4, 1.4),
    ur=st.floats(-1.4, 1.4),
)
def test_scalar_fan_invariants(ul, ur):
    fan = solve_riemann(CUBIC, KIN, ul, ur)
    if fan.waves:
        assert np.array_equal(fan.waves[0].left, np.array([ul]))
        assert np.array_equal(fan.waves[-1].right, np.array([ur]))
    fan.validate()
    for w in fan.waves:
        if isinstance(w.speed, tuple):
            assert w.speed[0] <= w.speed[1] + 1e-12
        else:
            E = curves.entropy_dissipation(CUBIC, w.left, w.right)
            assert E <= 1e-9
            if w.kind == KIND_NONCLASSICAL:
                cls = curves.classify_shock(CUBIC, w.left, w.right, 0)
                assert cls in ("SlowUndercompressive", "FastUndercompressive")
                want = kin_mod.mu_flat(CUBIC, KIN, w.left)
                assert abs(w.right[0] - want) <= 1e-10


@given(
    vl=st.floats(-0.15, 0.15),
    wl=st.floats(0.35, 0.65),
    dv=st.floats(-0.08, 0.08),
    dw=st.floats(-0.08, 0.08),
)
@settings(max_examples=30)
def test_elasticity_weak_fan_invariants(vl, wl, dv, dw):
    u_l = (vl, wl)
    u_r = (vl + dv, wl + dw)
    fan = solve_riemann(ELAS, KIN, u_l, u_r)
    fan.validate()
    if fan.waves:
        assert np.max(np.abs(fan.right_state - np.array(u_r))) == 0.0
    for w in fan.waves:
        if not isinstance(w.speed, tuple):
            res = ELAS.flux(w.right) - ELAS.flux(w.left) - w.speed * (
                w.right - w.left
            )
            assert np.max(np.abs(res)) < 1e-8
            assert curves.entropy_dissipation(ELAS, w.left, w.right) <= 1e-9
