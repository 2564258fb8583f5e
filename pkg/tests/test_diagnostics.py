"""Diagnostics tests.

Functional values are hand-computed from the cubic closed forms: the
projected parameter folds u<0 through -u, chord speeds follow
lam(a,b) = a^2+ab+b^2, and the three-state pattern at u_l=1 (theta=0.5,
gamma=0.5) has N at 0.8125, trailing classical at 0.984375, companion
-0.25, threshold -0.375, gap 0.125.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncft import diagnostics as dg
from ncft import tracking
from ncft.kinetics import KineticFunction
from ncft.models import cubic_model, elasticity_model
from ncft.riemann import KIND_CLASSICAL, KIND_NONCLASSICAL, KIND_PIECE, Wave
from ncft.tracking import FrontSet, init_fronts, run

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("ci")

CUBIC = cubic_model()
ELAS = elasticity_model()
KIN = KineticFunction(theta=0.5, nucleation_gamma=0.5)
KIN_G0 = KineticFunction(theta=0.5, nucleation_gamma=0.0)
W = dg.lemma_weights(0.75, zeta=0.1, K=1.0)


def _front(x, v, strength, uid, kind=KIND_CLASSICAL, family=0,
           left=0.0, right=0.0):
    w = Wave(family, kind, np.atleast_1d(np.asarray(left, dtype=float)),
             np.atleast_1d(np.asarray(right, dtype=float)), v, strength, uid)
    return tracking.Front(x, w, v)


def _fs(fronts, y_id=None, z_id=None):
    return FrontSet(0.0, fronts, y_id, z_id, 0.01)


@pytest.fixture(scope="module")
def split_run():
    fs = init_fronts(CUBIC, KIN, [1.0, -0.368, -0.388], [0.0, 0.05], h=0.005)
    return run(CUBIC, KIN, fs, t_end=0.5, snapshot_dt=0.1)


@pytest.fixture(scope="module")
def merge_run_g0():
    fs = init_fronts(CUBIC, KIN_G0, [1.0, -0.24, -0.28, -0.24],
                     [0.0, 0.05, 0.1], h=0.005)
    return run(CUBIC, KIN_G0, fs, t_end=1.0, snapshot_dt=0.25)


@pytest.fixture(scope="module")
def merge_run_three_state():
    fs = init_fronts(CUBIC, KIN, [1.0, -0.75, -0.375, -0.22],
                     [0.0, 0.02, 0.1], h=0.01, strong_jumps=[0, 1])
    return run(CUBIC, KIN, fs, t_end=2.0)


def test_lemma_weights_values():
    assert W.kL == pytest.approx(1.85)
    assert W.kM == 1.0 and W.kR == 1.0
    assert (W.kL_less, W.kM_less, W.kR_less) == pytest.approx((0.9, 1.0, 1.1))
    assert (W.kL_grt, W.kM_grt, W.kR_grt) == pytest.approx((1.1, 1.0, 0.9))
    rep = dg.validate_constraints(W, cff=0.75)
    assert rep["passed"]
    assert rep["constraints"]["W1"]["margin"] == pytest.approx(0.1)
    assert rep["constraints"]["Q1"]["passed"] is None


def test_weights_positivity_enforced():
    with pytest.raises(ValueError):
        dg.Weights(kL=1.85, kM=0.0, kR=1.0, kL_less=0.9, kM_less=1.0,
                   kR_less=1.1, kL_grt=1.1, kM_grt=1.0, kR_grt=0.9,
                   K=1.0, zeta=0.1)
    with pytest.raises(ValueError):
        dg.lemma_weights(1.0)


def test_validate_zeta_out_of_range_flagged():
    w = dg.lemma_weights(0.75, zeta=0.6)
    rep = dg.validate_constraints(w, cff=0.75)
    # the ordering rows still hold, only the range row trips
    assert rep["constraints"]["W2"]["passed"]
    assert rep["constraints"]["W3"]["passed"]
    assert not rep["constraints"]["zeta_range"]["passed"]
    assert not rep["passed"]


def test_validate_q1_floor():
    rep = dg.validate_constraints(W, cff=0.75, measured={"k_floor": 2.0})
    assert not rep["constraints"]["Q1"]["passed"]
    assert rep["constraints"]["Q1"]["margin"] == pytest.approx(-1.0)
    w2 = dg.lemma_weights(0.75, zeta=0.1, K=2.5)
    rep2 = dg.validate_constraints(w2, cff=0.75, measured={"k_floor": 2.0})
    assert rep2["constraints"]["Q1"]["passed"]


def test_validate_eps_advisory_rows():
    rep = dg.validate_constraints(W, cff=0.75, eps_bound=0.02,
                                  strong={"N": -0.25, "Cup": -0.3})
    assert rep["advisory"]["eps_vs_N"]["passed"]
    assert rep["advisory"]["eps_vs_unit"]["passed"]
    rep2 = dg.validate_constraints(W, cff=0.75, eps_bound=0.4,
                                   strong={"N": -0.25})
    assert not rep2["advisory"]["eps_vs_N"]["passed"]


def test_wave_strength_examples():
    assert dg.wave_strength(CUBIC, 1.0, -0.75, 0) == pytest.approx(
        -0.25, abs=1e-10)
    s1 = dg.wave_strength(CUBIC, 1.0, -0.75, 0)
    s2 = dg.wave_strength(CUBIC, -0.75, -0.45, 0)
    s12 = dg.wave_strength(CUBIC, 1.0, -0.45, 0)
    assert s2 == pytest.approx(-0.3, abs=1e-10)
    assert s1 + s2 == pytest.approx(s12, abs=1e-10)
    assert dg.wave_strength(CUBIC, 0.7, 0.7, 0) == 0.0


def test_functionals_region_weights():
    strong = _front(0.0, 0.767, -0.632, uid=10)
    weak = _front(-1.0, 0.9, -0.01, uid=11)
    fs = _fs([weak, strong], y_id=10)
    v_l, v_m, v_r, total = dg.functionals(CUBIC, fs, W)
    assert v_l == pytest.approx(1.85 * 0.01)
    assert v_m == 0.0 and v_r == 0.0
    assert total == pytest.approx(0.0185)
    fs2 = _fs([strong, _front(1.0, 0.3, -0.01, uid=11)], y_id=10)
    assert dg.functionals(CUBIC, fs2, W)[2] == pytest.approx(0.01)


def test_functionals_no_strong_all_middle():
    fs = _fs([_front(0.0, 0.9, -0.01, uid=1), _front(1.0, 0.5, 0.02, uid=2)])
    v_l, v_m, v_r, total = dg.functionals(CUBIC, fs, W)
    assert v_l == 0.0 and v_r == 0.0
    assert v_m == pytest.approx(0.03)
    assert total == v_m


def test_functionals_missing_strong_identity():
    fs = _fs([_front(0.0, 0.9, -0.01, uid=1)], y_id=999)
    with pytest.raises(dg.DiagnosticsError):
        dg.functionals(CUBIC, fs, W)


def test_potential_speed_gap_weight():
    fs = _fs([_front(0.0, 0.9, -0.01, uid=1), _front(1.0, 0.5, -0.02, uid=2)])
    assert dg.interaction_potential(CUBIC, fs) == pytest.approx(
        0.4 * 0.0002, abs=1e-15)
    # rarefaction pieces of one family never approach each other
    fs2 = _fs([_front(0.0, 0.9, 0.01, uid=1, kind=KIND_PIECE),
               _front(1.0, 0.5, 0.02, uid=2, kind=KIND_PIECE)])
    assert dg.interaction_potential(CUBIC, fs2) == 0.0


def test_potential_first_sum_unweighted():
    # elasticity designates family 1; a family-0 pair lands in the
    # unweighted sum whatever its speeds
    fs = _fs([
        _front(0.0, -1.0, -0.01, uid=1, family=0, left=[0.0, 0.5],
               right=[0.0, 0.5]),
        _front(1.0, -1.2, 0.01, uid=2, family=0, kind=KIND_PIECE,
               left=[0.0, 0.5], right=[0.0, 0.5]),
    ])
    q0, q1 = dg.potential_parts(ELAS, fs)
    assert q0 == pytest.approx(1e-4, abs=1e-18)
    assert q1 == 0.0


def test_potential_weak_only_flag():
    strong = _front(0.0, 0.767, -0.632, uid=10)
    weak = _front(-1.0, 0.9, -0.01, uid=11)
    fs = _fs([weak, strong], y_id=10)
    full = dg.interaction_potential(CUBIC, fs)
    assert full == pytest.approx((0.9 - 0.767) * 0.632 * 0.01, abs=1e-15)
    assert dg.interaction_potential(CUBIC, fs, q_weak_only=True) == 0.0


def test_perturbation_counts_weak_only():
    fs = init_fronts(CUBIC, KIN, [1.0, -0.75, -0.375], [0.0, 0.02],
                     h=0.01, strong_jumps=[0, 1])
    assert dg.perturbation(fs) == 0.0
    strong = _front(0.0, 0.767, -0.632, uid=10)
    fs2 = _fs([strong, _front(1.0, 0.4, -0.01, uid=11),
               _front(2.0, 0.3, 0.02, uid=12)], y_id=10)
    assert dg.perturbation(fs2) == pytest.approx(0.03)


def test_snapshot_of_split_initial(split_run):
    snap = dg.snapshot(CUBIC, split_run.initial, W)
    assert snap.V_L == 0.0 and snap.V_M == 0.0
    assert snap.V_R == pytest.approx(0.02, abs=1e-12)
    assert snap.W == snap.V_L + snap.V_M + snap.V_R
    assert snap.eps == pytest.approx(0.02, abs=1e-12)
    assert snap.Q > 0.0
    assert snap.lyapunov == pytest.approx(snap.W + W.K * snap.Q)
    rec = snap.strong_wave_state
    assert rec["u_l"] == [1.0]
    assert len(rec["strengths"]) == 1
    assert len(snap.csv_row()) == len(dg.CSV_HEADER)


def test_strong_record_three_state():
    fs = init_fronts(CUBIC, KIN, [1.0, -0.75, -0.375], [0.0, 0.02],
                     h=0.01, strong_jumps=[0, 1])
    rec = dg.strong_wave_state(fs)
    assert rec["u_l"] == [1.0]
    assert rec["u_m"][0] == pytest.approx(-0.75, abs=1e-11)
    assert rec["u_r"][0] == pytest.approx(-0.375, abs=1e-12)
    assert rec["speeds"] == pytest.approx([0.8125, 0.984375], abs=1e-11)


def test_classify_split_run(split_run):
    tags = dg.annotate_events(split_run.events)
    assert [t for t, _ in tags] == ["Case3", "Case1", "Case3", "Case3"]
    assert tags[1][1] == "CR-4"
    assert split_run.events[1].case_tag == "Case1"


def test_classify_merge_run(merge_run_g0):
    tags = [t for t, _ in dg.annotate_events(merge_run_g0.events)]
    assert tags.count("Case1") == 1
    assert tags.count("Case2") == 1
    assert tags[-1] == "Case2"
    assert all(t in ("Case1", "Case2", "Case3") for t in tags)


def test_classify_weak_weak_and_residual():
    fs = init_fronts(CUBIC, KIN, [0.5, 0.45, 0.42], [0.0, 0.05],
                     h=0.1, strong_jumps=[])
    res = run(CUBIC, KIN, fs, t_end=2.0)
    assert len(res.events) == 1
    assert dg.classify_case(res.events[0]) == ("WeakWeak", None)
    residual, product = dg.glimm_residual(res.events[0])
    assert residual <= 1e-12
    assert product == pytest.approx(0.0015, abs=1e-12)


def test_glimm_residual_merge_exact(merge_run_three_state):
    dg.annotate_events(merge_run_three_state.events)
    merges = [ev for ev in merge_run_three_state.events
              if ev.case_tag == "Case2"]
    assert len(merges) == 1
    residual, product = dg.glimm_residual(merges[0])
    assert residual <= 1e-10
    assert product == pytest.approx(0.25 * 0.53, abs=1e-10)


def test_event_deltas_monotone(split_run):
    rep = dg.lyapunov_series(CUBIC, split_run.events, split_run.snapshots, W)
    assert rep["n_flagged"] == 0
    assert rep["max_delta"] <= dg.LYAPUNOV_TOL
    for row in rep["events"]:
        assert row["q_cluster_post"] == 0.0
        assert row["q_cluster_pre"] >= 0.0
    series = rep["series"]
    assert series[-1].lyapunov <= series[0].lyapunov
    for a, b in zip(series, series[1:]):
        assert b.lyapunov <= a.lyapunov + 1e-12


def test_lyapunov_series_merge_run(merge_run_g0):
    rep = dg.lyapunov_series(CUBIC, merge_run_g0.events,
                             merge_run_g0.snapshots, W)
    assert rep["n_flagged"] == 0
    assert rep["series"][-1].lyapunov <= 1e-12
    cases = [row["case"] for row in rep["events"]]
    assert "Case2" in cases


def test_cycle_audit_gamma0(merge_run_g0):
    audit = dg.cycle_audit(CUBIC, KIN_G0, merge_run_g0.events,
                           merge_run_g0.snapshots, W, cff=0.75)
    assert audit.n_completed == 1 and audit.n_open == 0
    rec = audit.records[0]
    assert rec.eta == pytest.approx(0.0, abs=1e-11)
    assert rec.checks["eta_condition"] is None
    assert rec.checks["drop_nonnegative"]
    assert rec.lyapunov_drop > 0.0
    assert rec.ledgers["alpha_R"] == pytest.approx(0.065, abs=1e-9)
    assert rec.n_crossings == 6
    assert audit.fitted_c is None
    assert audit.passed
    json.dumps(audit.to_json_dict())


def test_cycle_audit_three_state(merge_run_three_state):
    audit = dg.cycle_audit(CUBIC, KIN, merge_run_three_state.events,
                           merge_run_three_state.snapshots, W, cff=0.75)
    assert audit.n_completed == 1 and audit.n_open == 0
    rec = audit.records[0]
    assert rec.t0 == 0.0
    assert rec.eta == pytest.approx(0.125, abs=1e-9)
    assert rec.signed_variation == pytest.approx(0.155, abs=1e-9)
    assert rec.checks["eta_condition"]
    assert rec.ledgers["alpha_R"] == pytest.approx(0.155, abs=1e-9)
    # the whole initial Lyapunov stock burns down in one cycle
    assert rec.lyapunov_drop == pytest.approx(0.2173971875, rel=1e-6)
    assert audit.fitted_c == pytest.approx(1.7391775, rel=1e-6)
    assert audit.passed


def test_cycle_audit_open_cycle(split_run):
    audit = dg.cycle_audit(CUBIC, KIN, split_run.events, split_run.snapshots,
                           W, cff=0.75)
    assert audit.n_completed == 0 and audit.n_open == 1
    rec = audit.records[0]
    assert rec.open and rec.tf is None
    assert rec.ledgers["alpha_R"] == pytest.approx(0.01, abs=1e-10)
    assert rec.n_crossings == 2
    assert audit.fitted_c is None
    assert audit.passed


def test_calibrate_scalar():
    rep = dg.calibrate(CUBIC, KIN, W, n=400, scales=(0.05, 0.02), seed=1)
    assert rep.n_evaluated == 400
    assert rep.max_zero_product_residual <= 1e-11
    assert rep.n_zero_product >= 1
    # same-side scalar strengths telescope: the fit is pure roundoff
    assert rep.fitted_glimm_C <= 1e-9
    assert rep.k_floor == 0.0
    assert rep.K_recommended == 1.0
    assert rep.witnesses == []
    per_scale_n = sum(v["n"] for v in rep.per_scale.values())
    assert per_scale_n == 400
    json.dumps(rep.to_json_dict())


def test_calibrate_feeds_q1_row():
    rep = dg.calibrate(CUBIC, KIN, W, n=60, scales=(0.02,), seed=3)
    out = dg.validate_constraints(W, cff=0.75,
                                  measured={"k_floor": rep.k_floor})
    assert out["constraints"]["Q1"]["passed"]


@given(st.lists(
    st.tuples(st.floats(-4.0, 4.0), st.floats(-0.4, 0.4),
              st.floats(-1.0, 1.0), st.booleans()),
    max_size=6,
))
def test_snapshot_invariants_synthetic(rows):
    fronts = []
    xs = set()
    for k, (x, s, v, shock) in enumerate(sorted(rows)):
        if x in xs or s != s:
            continue
        xs.add(x)
        fronts.append(_front(
            x, v, s, uid=k, kind=KIND_CLASSICAL if shock else KIND_PIECE))
    fs = _fs(fronts)
    snap = dg.snapshot(CUBIC, fs, W)
    assert snap.V_L >= 0.0 and snap.V_M >= 0.0 and snap.V_R >= 0.0
    assert snap.W == snap.V_L + snap.V_M + snap.V_R
    assert snap.Q >= 0.0
    assert snap.eps == pytest.approx(sum(abs(f.wave.strength)
                                         for f in fronts))
    assert snap.lyapunov == pytest.approx(snap.W + W.K * snap.Q)
