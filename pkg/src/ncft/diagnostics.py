"""Functionals and audits over front-tracking runs.

The weighted variation W splits the line into three regions by the two
strong fronts (left of y, between y and z, right of z) and weighs each
weak wave by its region and by how its family compares with the
designated one. The quadratic potential Q pairs approaching waves, with
a speed-gap weight on every pair touching the designated family. W+K*Q
is the Lyapunov quantity: it must not increase at interactions, and each
completed splitting-merging cycle must burn at least c*eta of it when
the nucleation gap eta is positive.

Everything here is replay: pure functions over the immutable event and
snapshot logs a run leaves behind.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from ncft import curves, kinetics as kin_mod, models, riemann, tracking
from ncft.kinetics import KineticFunction
from ncft.models import FluxModel
from ncft.riemann import (
    KIND_CLASSICAL,
    KIND_NONCLASSICAL,
    KIND_PIECE,
    KIND_RAREFACTION,
    Wave,
)
from ncft.tracking import FrontSet, InteractionEvent

Array = np.ndarray

SHOCK_KINDS = (KIND_CLASSICAL, KIND_NONCLASSICAL)
RAREFACTION_KINDS = (KIND_RAREFACTION, KIND_PIECE)

# per-event increase allowed on W+K*Q, scaled by the pre-event value
LYAPUNOV_TOL = 1e-9
# strengths below this count as zero in ratio fits
STRENGTH_FLOOR = 1e-14

CSV_HEADER = ("t", "V_L", "V_M", "V_R", "W", "Q", "eps", "lyapunov")

CASE_TAGS = ("Case1", "Case2", "Case3", "Case4", "Case5", "Case6", "Case7",
             "WeakWeak", "Other")


class DiagnosticsError(ValueError):
    pass


def wave_strength(model: FluxModel, u_minus, u_plus, family: int) -> float:
    """Signed generalized strength of the jump; see curves for the fold."""
    return curves.generalized_strength(model, u_minus, u_plus, family)


@dataclasses.dataclass(frozen=True)
class Weights:
    """Nine region/family weights plus the potential weight K.

    zeta is the asymmetry knob of the lemma instance; its (0, 0.5) range
    is advisory and checked by validate_constraints, not here, so that
    out-of-range instances can still be built and inspected.
    """

    kL: float
    kM: float
    kR: float
    kL_less: float
    kM_less: float
    kR_less: float
    kL_grt: float
    kM_grt: float
    kR_grt: float
    K: float
    zeta: float

    def __post_init__(self):
        for name in ("kL", "kM", "kR", "kL_less", "kM_less", "kR_less",
                     "kL_grt", "kM_grt", "kR_grt", "K"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"weight {name} must be positive")

    def row(self, family: int, cc_index: int) -> tuple:
        if family == cc_index:
            return (self.kL, self.kM, self.kR)
        if family < cc_index:
            return (self.kL_less, self.kM_less, self.kR_less)
        return (self.kL_grt, self.kM_grt, self.kR_grt)

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def lemma_weights(cff: float, zeta: float = 0.1, K: float = 1.0) -> Weights:
    """The explicit weight choice built from the measured contraction."""
    if not 0.0 <= cff < 1.0:
        raise ValueError("contraction constant must lie in [0, 1)")
    return Weights(
        kL=1.0 + cff + zeta, kM=1.0, kR=1.0,
        kL_less=1.0 - zeta, kM_less=1.0, kR_less=1.0 + zeta,
        kL_grt=1.0 + zeta, kM_grt=1.0, kR_grt=1.0 - zeta,
        K=K, zeta=zeta,
    )


# ---------------------------------------------------------------------------
# region assignment and the linear functionals


def _strong_indices(fs: FrontSet) -> tuple:
    iy = iz = None
    for k, f in enumerate(fs.fronts):
        if fs.y_id is not None and f.id == fs.y_id:
            iy = k
        if fs.z_id is not None and f.id == fs.z_id:
            iz = k
    if fs.y_id is not None and iy is None:
        raise DiagnosticsError("y identity references no front")
    if fs.z_id is not None and iz is None:
        raise DiagnosticsError("z identity references no front")
    return iy, iz


def _region_labels(fs: FrontSet) -> list:
    """Per-front labels: L/M/R for weak fronts, S for the strong ones.

    With a single strong front the middle region is empty; with none,
    every weak wave counts as middle."""
    iy, iz = _strong_indices(fs)
    if iy is None and iz is None:
        return ["M"] * len(fs.fronts)
    if iy is None:
        iy = iz
    if iz is None:
        iz = iy
    labels = []
    for k in range(len(fs.fronts)):
        if k == iy or k == iz:
            labels.append("S")
        elif k < iy:
            labels.append("L")
        elif k > iz:
            labels.append("R")
        else:
            labels.append("M")
    return labels


def functionals(model: FluxModel, fs: FrontSet, w: Weights) -> tuple:
    """(V_L, V_M, V_R, W) over the weak waves; strong fronts excluded."""
    i = model.cc_index
    sums = {"L": 0.0, "M": 0.0, "R": 0.0}
    for f, lab in zip(fs.fronts, _region_labels(fs)):
        if lab == "S":
            continue
        row = w.row(f.wave.family, i)
        sums[lab] += row["LMR".index(lab)] * abs(f.wave.strength)
    return sums["L"], sums["M"], sums["R"], sums["L"] + sums["M"] + sums["R"]


def perturbation(fs: FrontSet) -> float:
    """Total strength of everything that is not a strong front."""
    strong = set(fs.strong_ids)
    return sum(abs(f.wave.strength) for f in fs.fronts if f.id not in strong)


# ---------------------------------------------------------------------------
# the quadratic potential


def _is_shock(wave: Wave) -> bool:
    return wave.kind in SHOCK_KINDS


def _approaching(left: Wave, right: Wave) -> bool:
    if left.family != right.family:
        return left.family > right.family
    return _is_shock(left) or _is_shock(right)


def _potential_over(items: list, cc_index: int, q_weak_only: bool) -> tuple:
    """(Q0, Q1) over position-ordered (wave, speed, strong) triples.

    Q0 collects approaching pairs with neither wave in the designated
    family, unweighted; Q1 collects pairs touching that family with the
    positive part of the speed gap as weight. Strong fronts join Q1
    unless q_weak_only is set."""
    q0 = 0.0
    q1 = 0.0
    for a in range(len(items)):
        wa, va, sa = items[a]
        for b in range(a + 1, len(items)):
            wb, vb, sb = items[b]
            if not _approaching(wa, wb):
                continue
            p = abs(wa.strength) * abs(wb.strength)
            if wa.family != cc_index and wb.family != cc_index:
                q0 += p
            else:
                if q_weak_only and (sa or sb):
                    continue
                q1 += max(va - vb, 0.0) * p
    return q0, q1


def _fs_items(fs: FrontSet) -> list:
    strong = set(fs.strong_ids)
    return [(f.wave, f.assigned_speed, f.id in strong) for f in fs.fronts]


def potential_parts(model: FluxModel, fs: FrontSet,
                    q_weak_only: bool = False) -> tuple:
    return _potential_over(_fs_items(fs), model.cc_index, q_weak_only)


def interaction_potential(model: FluxModel, fs: FrontSet,
                          q_weak_only: bool = False) -> float:
    q0, q1 = potential_parts(model, fs, q_weak_only)
    return q0 + q1


# ---------------------------------------------------------------------------
# snapshots


@dataclasses.dataclass
class DiagnosticsSnapshot:
    t: float
    V_L: float
    V_M: float
    V_R: float
    W: float
    Q: float
    eps: float
    lyapunov: float
    strong_wave_state: Optional[dict]

    def csv_row(self) -> tuple:
        return (self.t, self.V_L, self.V_M, self.V_R, self.W, self.Q,
                self.eps, self.lyapunov)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t, "V_L": self.V_L, "V_M": self.V_M, "V_R": self.V_R,
            "W": self.W, "Q": self.Q, "eps": self.eps,
            "lyapunov": self.lyapunov,
            "strong_wave_state": self.strong_wave_state,
        }


def strong_wave_state(fs: FrontSet) -> Optional[dict]:
    fy = fs.find(fs.y_id) if fs.y_id is not None else None
    fz = fs.find(fs.z_id) if fs.z_id is not None else None
    if fy is None and fz is None:
        return None
    lead = fy if fy is not None else fz
    tail = fz if fz is not None else fy
    rec = {
        "u_l": lead.wave.left.tolist(),
        "u_m": lead.wave.right.tolist(),
        "u_r": tail.wave.right.tolist(),
        "strengths": [lead.wave.strength],
        "speeds": [lead.assigned_speed],
        "x": [lead.position],
    }
    if fz is not None and fy is not None:
        rec["strengths"].append(fz.wave.strength)
        rec["speeds"].append(fz.assigned_speed)
        rec["x"].append(fz.position)
    return rec


def snapshot(model: FluxModel, fs: FrontSet, w: Weights,
             q_weak_only: bool = False) -> DiagnosticsSnapshot:
    v_l, v_m, v_r, total = functionals(model, fs, w)
    q = interaction_potential(model, fs, q_weak_only)
    eps = perturbation(fs)
    return DiagnosticsSnapshot(
        t=fs.time, V_L=v_l, V_M=v_m, V_R=v_r, W=total, Q=q, eps=eps,
        lyapunov=total + w.K * q,
        strong_wave_state=strong_wave_state(fs),
    )


# ---------------------------------------------------------------------------
# event classification


def classify_case(ev: InteractionEvent) -> tuple:
    """(tag, sub) for one interaction.

    The seven tagged cases cover the splitting-merging pattern: split of
    the lone classical (Case1), merge (Case2), designated-family weak
    waves crossing the classical fronts (Case3) or the nonclassical one
    (Case4), and transversal-family crossings (Case5/6/7). Anything
    outside the table is Other; callers dump those, never refile them.
    """
    roles = ev.incoming_roles
    waves = list(ev.incoming)
    strong_in = [(k, wv) for k, wv in enumerate(waves) if wv.id in roles]
    weak_in = [(k, wv) for k, wv in enumerate(waves) if wv.id not in roles]
    n_strong_out = len(ev.outgoing_roles)
    if not strong_in:
        return "WeakWeak", None
    if len(strong_in) == 2:
        if n_strong_out == 1 and not weak_in:
            return "Case2", None
        return "Other", None
    k_s, ws = strong_in[0]
    role = roles[ws.id]
    i = ws.family
    weak_i = [(k, wv) for k, wv in weak_in if wv.family == i]
    weak_j = [(k, wv) for k, wv in weak_in if wv.family != i]
    if len(weak_in) != 1:
        return "Other", None
    if weak_j:
        if ws.kind == KIND_NONCLASSICAL:
            return "Case6", None
        return ("Case7", None) if role == "z" else ("Case5", None)
    k_w, wi = weak_i[0]
    from_left = k_w < k_s
    raref = wi.kind in RAREFACTION_KINDS
    if ws.kind == KIND_NONCLASSICAL:
        if from_left:
            return "Case4", "RN" if raref else "CN-3"
        return "Case4", "other"
    if role == "y" and n_strong_out == 2:
        if from_left:
            return "Case1", "RC-3" if raref else "CC-3"
        return "Case1", "CR-4" if raref else "other"
    return "Case3", None


def annotate_events(events) -> list:
    """Stamp case_tag/case_sub on every event; returns the (tag, sub) list."""
    out = []
    for ev in events:
        tag, sub = classify_case(ev)
        ev.case_tag = tag
        ev.case_sub = sub
        out.append((tag, sub))
    return out


# ---------------------------------------------------------------------------
# interaction estimates


def glimm_residual(ev: InteractionEvent) -> tuple:
    """(residual, approaching product) of one interaction.

    Residual is the per-family defect of strength additivity between the
    incoming waves and the outgoing fan; the product sums |strength|
    products over approaching incoming pairs."""
    fams = {wv.family for wv in ev.incoming}
    fams |= {wv.family for wv in ev.outgoing.waves}
    residual = 0.0
    for fam in fams:
        a = sum(wv.strength for wv in ev.incoming if wv.family == fam)
        g = sum(wv.strength for wv in ev.outgoing.waves if wv.family == fam)
        residual += abs(g - a)
    product = 0.0
    for a in range(len(ev.incoming)):
        for b in range(a + 1, len(ev.incoming)):
            if _approaching(ev.incoming[a], ev.incoming[b]):
                product += abs(ev.incoming[a].strength) * \
                    abs(ev.incoming[b].strength)
    return residual, product


def _cluster_items(ev: InteractionEvent) -> tuple:
    """Incoming and outgoing (wave, speed, strong) triples of the cluster.

    Outgoing fronts are the ones whose ids did not exist before the
    event; the solver mints fresh ids for every placed wave."""
    in_ids = {wv.id for wv in ev.incoming}
    pre_ids = {f.id for f in ev.pre.fronts}
    pre_strong = set(ev.pre.strong_ids)
    post_strong = set(ev.post.strong_ids)
    pre = [(f.wave, f.assigned_speed, f.id in pre_strong)
           for f in ev.pre.fronts if f.id in in_ids]
    post = [(f.wave, f.assigned_speed, f.id in post_strong)
            for f in ev.post.fronts if f.id not in pre_ids]
    return pre, post


def event_delta(model: FluxModel, ev: InteractionEvent, w: Weights,
                q_weak_only: bool = False) -> dict:
    """Replay one event against the functionals.

    q_cluster_pre is the potential stored in the colliding cluster
    itself; placement orders outgoing waves by speed, so the cluster
    part of Q can only be released, never created."""
    pre_snap = snapshot(model, ev.pre, w, q_weak_only)
    post_snap = snapshot(model, ev.post, w, q_weak_only)
    items_pre, items_post = _cluster_items(ev)
    q0_pre, q1_pre = _potential_over(items_pre, model.cc_index, q_weak_only)
    q0_post, q1_post = _potential_over(items_post, model.cc_index, q_weak_only)
    residual, product = glimm_residual(ev)
    delta = post_snap.lyapunov - pre_snap.lyapunov
    return {
        "t": ev.time,
        "case": ev.case_tag,
        "sub": ev.case_sub,
        "pre_lyapunov": pre_snap.lyapunov,
        "post_lyapunov": post_snap.lyapunov,
        "delta": delta,
        "flagged": delta > LYAPUNOV_TOL * max(1.0, pre_snap.lyapunov),
        "residual": residual,
        "product": product,
        "q_cluster_pre": q0_pre + q1_pre,
        "q_cluster_post": q0_post + q1_post,
    }


def lyapunov_series(model: FluxModel, events, snapshots, w: Weights,
                    q_weak_only: bool = False,
                    calibration: Optional["CalibrationReport"] = None) -> dict:
    """Time series of W+K*Q plus the per-event replay.

    Flagged events carry their case tag and, when a calibration is
    supplied, the measured quadratic bound the delta should respect."""
    annotate_events(events)
    series = [snapshot(model, fs, w, q_weak_only) for fs in snapshots]
    rows = []
    for ev in events:
        row = event_delta(model, ev, w, q_weak_only)
        if calibration is not None:
            row["bound"] = calibration.growth_coefficient * row["product"]
        rows.append(row)
    max_delta = max((r["delta"] for r in rows), default=0.0)
    return {
        "series": series,
        "events": rows,
        "max_delta": max_delta,
        "n_flagged": sum(1 for r in rows if r["flagged"]),
    }


# ---------------------------------------------------------------------------
# constraint validation


def validate_constraints(w: Weights, cff: float,
                         measured: Optional[dict] = None,
                         eps_bound: Optional[float] = None,
                         strong: Optional[dict] = None,
                         p_const: float = 1.0) -> dict:
    """Report on the weight inequalities and the potential-weight floor.

    measured carries the calibration output (k_floor at least); strong
    maps wave labels to |strength| for the perturbation-size rows. All
    rows are report-only: nothing raises."""
    rows = {}
    rows["W1"] = {
        "passed": w.kL > (1.0 + cff) * w.kM,
        "margin": w.kL - (1.0 + cff) * w.kM,
    }
    rows["W2"] = {
        "passed": w.kL_less < w.kM_less < w.kR_less,
        "margin": min(w.kM_less - w.kL_less, w.kR_less - w.kM_less),
    }
    rows["W3"] = {
        "passed": w.kL_grt > w.kM_grt > w.kR_grt,
        "margin": min(w.kL_grt - w.kM_grt, w.kM_grt - w.kR_grt),
    }
    rows["zeta_range"] = {
        "passed": 0.0 < w.zeta < 0.5,
        "margin": min(w.zeta, 0.5 - w.zeta),
    }
    if measured is not None and measured.get("k_floor") is not None:
        floor = measured["k_floor"]
        rows["Q1"] = {
            "passed": w.K >= floor,
            "margin": w.K - floor,
            "floor": floor,
        }
    else:
        rows["Q1"] = {"passed": None, "margin": None, "floor": None}
    advisory = {}
    if eps_bound is not None and strong:
        for label, mag in strong.items():
            advisory[f"eps_vs_{label}"] = {
                "passed": eps_bound <= p_const * abs(mag),
                "eps": eps_bound,
                "bound": p_const * abs(mag),
            }
        advisory["eps_vs_unit"] = {
            "passed": eps_bound <= p_const,
            "eps": eps_bound,
            "bound": p_const,
        }
    hard = [r["passed"] for r in rows.values() if r["passed"] is not None]
    return {
        "passed": all(hard),
        "constraints": rows,
        "advisory": advisory,
        "cff": cff,
    }


# ---------------------------------------------------------------------------
# splitting-merging cycles


@dataclasses.dataclass
class CycleRecord:
    t0: float
    tf: Optional[float]
    u_l0: list
    u_r0: list
    u_lf: Optional[list]
    u_rf: Optional[list]
    ledgers: dict
    eta: Optional[float]
    signed_variation: Optional[float]
    lyapunov_drop: Optional[float]
    n_crossings: int
    checks: dict

    @property
    def open(self) -> bool:
        return self.tf is None

    def to_json_dict(self) -> dict:
        return {
            "t0": self.t0, "tf": self.tf, "open": self.open,
            "u_l0": self.u_l0, "u_r0": self.u_r0,
            "u_lf": self.u_lf, "u_rf": self.u_rf,
            "ledgers": self.ledgers, "eta": self.eta,
            "signed_variation": self.signed_variation,
            "lyapunov_drop": self.lyapunov_drop,
            "n_crossings": self.n_crossings, "checks": self.checks,
        }


LEDGER_KEYS = ("alpha_L", "alpha_R", "alpha_R_tilde",
               "beta_L", "beta_L_tilde", "beta_R", "beta_R_tilde")


@dataclasses.dataclass
class CycleAudit:
    records: list
    fitted_c: Optional[float]
    n_completed: int
    n_open: int
    cff: float
    passed: bool

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def to_json_dict(self) -> dict:
        return {
            "records": [r.to_json_dict() for r in self.records],
            "fitted_c": self.fitted_c,
            "n_completed": self.n_completed,
            "n_open": self.n_open,
            "cff": self.cff,
            "passed": self.passed,
        }


class _OpenCycle:
    def __init__(self, t0, u_l0, u_r0, lyapunov_before, eps0):
        self.t0 = t0
        self.u_l0 = u_l0
        self.u_r0 = u_r0
        self.L0 = lyapunov_before
        self.eps0 = eps0
        self.ledgers = {k: 0.0 for k in LEDGER_KEYS}
        self.n_crossings = 0
        self.well_formed = True


def _strong_in_wave(ev: InteractionEvent, role: str) -> Optional[Wave]:
    for wv in ev.incoming:
        if ev.incoming_roles.get(wv.id) == role:
            return wv
    return None


def _strong_out_wave(ev: InteractionEvent, role: str) -> Optional[Wave]:
    for f in ev.post.fronts:
        if ev.outgoing_roles.get(f.id) == role:
            return f.wave
    return None


def _weak_in_strength(ev: InteractionEvent) -> float:
    return sum(abs(wv.strength) for wv in ev.incoming
               if wv.id not in ev.incoming_roles)


def _weak_out_strength(ev: InteractionEvent) -> float:
    pre_ids = {f.id for f in ev.pre.fronts}
    return sum(abs(f.wave.strength) for f in ev.post.fronts
               if f.id not in pre_ids and f.id not in ev.outgoing_roles)


def cycle_audit(model: FluxModel, kin: KineticFunction, events, snapshots,
                w: Weights, q_weak_only: bool = False,
                cff: Optional[float] = None,
                slack: Optional[float] = None,
                drop_floor: float = 1e-3) -> CycleAudit:
    """Pair splits with merges and check each completed cycle.

    A cycle opens at a Case1 split, or at time zero when the run starts
    with both strong fronts already present. It closes at the Case2
    merge. In between, the crossing ledgers accumulate weak strengths by
    case: alpha entries for designated-family waves hitting the
    nonclassical front (incoming alpha_L, transmitted alpha_R_tilde) or
    the trailing classical (alpha_R), beta entries for the transversal
    families. Checks per completed cycle: the signed-variation gap
    condition when eta is positive, the drop of W+K*Q, and the crossing
    bounds with the measured contraction and a (1+slack) allowance.
    """
    annotate_events(events)
    if cff is None:
        cff = kin.measured_Cff
    if cff is None:
        rep = kin_mod.check_hypotheses(model, kin)
        cff = rep.measured_Cff
    initial = snapshots[0]
    records = []
    current = None
    tol = 1e-12

    def lyapunov_of(fs):
        return snapshot(model, fs, w, q_weak_only).lyapunov

    if initial.y_id is not None and initial.z_id is not None:
        fy = initial.find(initial.y_id)
        fz = initial.find(initial.z_id)
        current = _OpenCycle(initial.time, fy.wave.left.tolist(),
                             fz.wave.right.tolist(), lyapunov_of(initial),
                             perturbation(initial))

    def close(ev):
        nonlocal current
        wy = _strong_in_wave(ev, "y")
        wz = _strong_in_wave(ev, "z")
        u_lf = wy.left.tolist()
        u_rf = wz.right.tolist()
        if current.u_l0:
            eta = min(
                kin_mod.nucleation_gap(model, kin, np.asarray(current.u_l0)),
                kin_mod.nucleation_gap(model, kin, np.asarray(u_lf)),
            )
            sv = (
                kin_mod.mu_sharp(model, kin, np.asarray(current.u_l0))
                - kin_mod.mu_sharp(model, kin, np.asarray(u_lf))
                + models.mu(model, np.asarray(u_rf))
                - models.mu(model, np.asarray(current.u_r0))
            )
        else:
            # orphan merge: the opening state was never seen
            eta = None
            sv = None
        drop = current.L0 - lyapunov_of(ev.post)
        allow = 1.0 + (current.eps0 if slack is None else slack)
        led = current.ledgers
        checks = {
            "well_formed": current.well_formed,
            "eta_condition": (sv > eta) if eta is not None and eta > tol
            else None,
            "drop_nonnegative": drop >= -tol,
            "crossing_alpha": led["alpha_R_tilde"]
            <= cff * led["alpha_L"] * allow + tol,
            "crossing_beta_L": led["beta_L_tilde"]
            <= led["beta_L"] * allow + tol,
            "crossing_beta_R": led["beta_R_tilde"]
            <= led["beta_R"] * allow + tol,
        }
        records.append(CycleRecord(
            t0=current.t0, tf=ev.time,
            u_l0=current.u_l0, u_r0=current.u_r0,
            u_lf=u_lf, u_rf=u_rf,
            ledgers=dict(led), eta=eta, signed_variation=sv,
            lyapunov_drop=drop, n_crossings=current.n_crossings,
            checks=checks,
        ))
        current = None

    for ev in events:
        tag = ev.case_tag
        if tag == "Case1":
            if current is not None:
                # nested split never leaves the tracked pattern intact;
                # keep the record but mark it
                current.well_formed = False
            wy = _strong_out_wave(ev, "y")
            wz = _strong_out_wave(ev, "z")
            current = _OpenCycle(ev.time, wy.left.tolist(),
                                 wz.right.tolist(),
                                 lyapunov_of(ev.pre), perturbation(ev.post))
        elif tag == "Case2":
            if current is None:
                current = _OpenCycle(initial.time, [], [],
                                     lyapunov_of(initial),
                                     perturbation(initial))
                current.well_formed = False
            close(ev)
        elif current is not None:
            led = current.ledgers
            if tag == "Case4":
                led["alpha_L"] += _weak_in_strength(ev)
                led["alpha_R_tilde"] += _weak_out_strength(ev)
            elif tag == "Case3":
                led["alpha_R"] += _weak_in_strength(ev)
            elif tag == "Case6":
                led["beta_L"] += _weak_in_strength(ev)
                led["beta_L_tilde"] += _weak_out_strength(ev)
            elif tag == "Case7":
                led["beta_R"] += _weak_in_strength(ev)
                led["beta_R_tilde"] += _weak_out_strength(ev)
            if tag in ("Case3", "Case4", "Case5", "Case6", "Case7"):
                current.n_crossings += 1

    if current is not None:
        records.append(CycleRecord(
            t0=current.t0, tf=None,
            u_l0=current.u_l0, u_r0=current.u_r0,
            u_lf=None, u_rf=None,
            ledgers=dict(current.ledgers), eta=None,
            signed_variation=None, lyapunov_drop=None,
            n_crossings=current.n_crossings,
            checks={"well_formed": current.well_formed},
        ))

    completed = [r for r in records if not r.open]
    ratios = [r.lyapunov_drop / r.eta for r in completed
              if r.eta is not None and r.eta > tol]
    fitted_c = min(ratios) if ratios else None
    ok = all(
        all(v for v in r.checks.values() if v is not None)
        for r in completed
    )
    if fitted_c is not None:
        ok = ok and fitted_c >= drop_floor
    return CycleAudit(
        records=records, fitted_c=fitted_c,
        n_completed=len(completed),
        n_open=len(records) - len(completed),
        cff=cff, passed=ok,
    )


# ---------------------------------------------------------------------------
# calibration


@dataclasses.dataclass
class CalibrationReport:
    n_requested: int
    n_evaluated: int
    n_skipped: int
    scales: tuple
    seed: int
    fitted_glimm_C: float
    max_residual: float
    growth_coefficient: float
    k_floor_physical: float
    k_floor: float
    K_recommended: float
    n_zero_product: int
    max_zero_product_residual: float
    per_scale: dict
    witnesses: list

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scales"] = list(self.scales)
        return d


def _wave_chord(model: FluxModel, wv: Wave) -> float:
    if isinstance(wv.speed, tuple):
        return tracking._chord_speed(model, wv.left, wv.right)
    return float(wv.speed)


def _single_wave(model: FluxModel, kin: KineticFunction, u_from, fam: int,
                 m: float, use_nucleation: bool) -> Optional[tuple]:
    state, frag = riemann.wave_curve_point(model, kin, u_from, fam, m,
                                           use_nucleation)
    if len(frag) != 1:
        return None
    wv = frag[0]
    return state, wv, _wave_chord(model, wv)


def calibrate(model: FluxModel, kin: KineticFunction, w: Weights,
              n: int = 10000, scales: tuple = (0.05, 0.02, 0.005),
              seed: int = 0, zero_fraction: float = 0.1,
              use_nucleation: bool = True,
              cross_family: bool = True) -> CalibrationReport:
    """Measure the interaction constants on random weak binary collisions.

    Each sample chains two weak waves off a random base state, keeps the
    pair only when it genuinely approaches, and re-solves the outer
    Riemann problem. The Glimm fit is the worst residual-to-product
    ratio; the potential-weight floor comes from the interactions where
    the weighted variation grew, scaled by three to cover the weight
    spread of the region table. Separate expansive same-family pairs pin
    the zero-product branch of the estimate.
    """
    rng = np.random.default_rng(seed)
    i = model.cc_index
    mid_w = {fam: w.row(fam, i)[1] for fam in range(model.N)}

    def base_state(fam):
        for _ in range(64):
            u0 = models.sample_ball(model, 1, rng, margin=0.6)[0]
            if abs(model.family_parameter(u0, fam)) >= 0.25:
                return u0
        return None

    n_eval = 0
    n_skip = 0
    max_residual = 0.0
    glimm_ratios = [0.0]
    growth_ratios = [0.0]
    witnesses = []
    per_scale = {s: {"n": 0, "max_residual_ratio": 0.0,
                     "max_growth_ratio": 0.0} for s in scales}
    trials = 0
    while n_eval < n and trials < 12 * n:
        trials += 1
        scale = scales[n_eval % len(scales)]
        fam1 = i
        fam2 = i
        if model.N > 1 and cross_family and rng.uniform() < 0.3:
            fam1 = int(rng.integers(1, model.N))
            fam2 = int(rng.integers(0, fam1))
        u0 = base_state(fam1)
        if u0 is None:
            n_skip += 1
            continue
        d1 = scale * rng.uniform(0.25, 1.0) * (1 if rng.uniform() < 0.5 else -1)
        d2 = scale * rng.uniform(0.25, 1.0) * (1 if rng.uniform() < 0.5 else -1)
        try:
            first = _single_wave(
                model, kin, u0, fam1,
                float(model.family_parameter(u0, fam1)) + d1, use_nucleation)
            if first is None:
                n_skip += 1
                continue
            ub, w1, v1 = first
            second = _single_wave(
                model, kin, ub, fam2,
                float(model.family_parameter(ub, fam2)) + d2, use_nucleation)
            if second is None:
                n_skip += 1
                continue
            uc, w2, v2 = second
            if not _approaching(w1, w2) or v1 <= v2 + 1e-10:
                n_skip += 1
                continue
            fan = riemann.solve_riemann(model, kin, u0, uc, use_nucleation)
        except (curves.CurveError, riemann.SolverError, models.BallViolation):
            n_skip += 1
            continue
        n_eval += 1
        residual = 0.0
        for fam in range(model.N):
            a = sum(wv.strength for wv in (w1, w2) if wv.family == fam)
            g = sum(wv.strength for wv in fan.waves if wv.family == fam)
            residual += abs(g - a)
        product = abs(w1.strength) * abs(w2.strength)
        max_residual = max(max_residual, residual)
        bucket = per_scale[scale]
        bucket["n"] += 1
        if product > STRENGTH_FLOOR:
            ratio = residual / product
            glimm_ratios.append(ratio)
            bucket["max_residual_ratio"] = max(
                bucket["max_residual_ratio"], ratio)
        w_pre = mid_w[fam1] * abs(w1.strength) + mid_w[fam2] * abs(w2.strength)
        w_post = sum(mid_w[wv.family] * abs(wv.strength) for wv in fan.waves)
        d_w = w_post - w_pre
        if w1.family != i and w2.family != i:
            q_pre = product
        else:
            q_pre = max(v1 - v2, 0.0) * product
        out_items = [(wv, _wave_chord(model, wv), False) for wv in fan.waves]
        q0_post, q1_post = _potential_over(out_items, i, False)
        d_q = (q0_post + q1_post) - q_pre
        if d_w > 1e-13:
            if d_q < -STRENGTH_FLOOR:
                g_ratio = d_w / (-d_q)
                growth_ratios.append(g_ratio)
                bucket["max_growth_ratio"] = max(
                    bucket["max_growth_ratio"], g_ratio)
            else:
                # growth with no potential release: no K can compensate
                witnesses.append({
                    "u0": u0.tolist(), "d1": d1, "d2": d2,
                    "d_w": d_w, "d_q": d_q,
                })

    # expansive same-family pairs: approaching product identically zero
    n_zero = max(1, int(n * zero_fraction))
    zero_done = 0
    max_zero_resid = 0.0
    trials = 0
    while zero_done < n_zero and trials < 12 * n_zero:
        trials += 1
        scale = scales[zero_done % len(scales)]
        u0 = base_state(i)
        if u0 is None:
            break
        mu0 = float(model.family_parameter(u0, i))
        s = 1.0 if mu0 > 0 else -1.0
        d1 = s * scale * rng.uniform(0.25, 1.0)
        d2 = s * scale * rng.uniform(0.25, 1.0)
        try:
            first = _single_wave(model, kin, u0, i, mu0 + d1, use_nucleation)
            if first is None or first[1].kind not in RAREFACTION_KINDS:
                continue
            ub = first[0]
            second = _single_wave(model, kin, ub, i, mu0 + d1 + d2,
                                  use_nucleation)
            if second is None or second[1].kind not in RAREFACTION_KINDS:
                continue
            uc = second[0]
            fan = riemann.solve_riemann(model, kin, u0, uc, use_nucleation)
        except (curves.CurveError, riemann.SolverError, models.BallViolation):
            continue
        zero_done += 1
        a = first[1].strength + second[1].strength
        g = sum(wv.strength for wv in fan.waves if wv.family == i)
        max_zero_resid = max(max_zero_resid, abs(g - a))

    growth = max(growth_ratios)
    k_floor = 3.0 * growth
    return CalibrationReport(
        n_requested=n, n_evaluated=n_eval, n_skipped=n_skip,
        scales=tuple(scales), seed=seed,
        fitted_glimm_C=max(glimm_ratios),
        max_residual=max_residual,
        growth_coefficient=growth,
        k_floor_physical=growth,
        k_floor=k_floor,
        K_recommended=1.05 * k_floor if k_floor > 0 else 1.0,
        n_zero_product=zero_done,
        max_zero_product_residual=max_zero_resid,
        per_scale={str(k): v for k, v in per_scale.items()},
        witnesses=witnesses[:20],
    )
