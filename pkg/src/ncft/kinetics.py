"""Kinetic relation for the nonclassical branch and its companions.

The kinetic function picks, for each left state, the parameter value of
the admissible nonclassical jump inside the band between the
zero-dissipation point (excluded) and the tangency point (included). The
default one-parameter family interpolates linearly between these two ends
in parameter coordinates; a user-supplied table can replace it. The
nucleation threshold interpolates between the tangency point and the
equal-speed companion of the kinetic value, controlled by a second weight.

check_hypotheses certifies the structural assumptions on sampled states:
band membership (H1), Lipschitz bound and injectivity (H2), identity on
the sign-change manifold and monotonicity along integral-curve arcs (H3),
and strict contractivity of the round trip through the involution (H4).
It returns a report; callers decide whether to abort.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

from ncft import curves, models
from ncft.models import FluxModel

Array = np.ndarray


@dataclasses.dataclass(frozen=True)
class KineticFunction:
    """theta in [0, 1]: kinetic interpolation weight (0 gives the classical
    limit at the tangency point, 1 degenerates onto the open band end and
    fails conformance); table: optional override mapping (model, state) to
    the kinetic parameter value; nucleation_gamma in [0, 1]: nucleation
    interpolation weight (0 disables nucleation); measured_Cff: filled in
    by measurement, never assumed."""

    theta: float = 0.5
    table: Optional[Callable[[FluxModel, Array], float]] = None
    nucleation_gamma: float = 0.0
    measured_Cff: Optional[float] = None

    def __post_init__(self):
        if self.table is None and not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")
        if not (0.0 <= self.nucleation_gamma <= 1.0):
            raise ValueError("nucleation_gamma must lie in [0, 1]")


def _kin_cache(kin: KineticFunction, model: FluxModel, u: Array) -> dict:
    cache = getattr(kin, "_ncft_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(kin, "_ncft_cache", cache)
    if len(cache) > 8192:
        cache.clear()
    key = (id(model), u.tobytes())
    entry = cache.get(key)
    if entry is None:
        entry = {}
        cache[key] = entry
    return entry


def mu_flat(model: FluxModel, kin: KineticFunction, u) -> float:
    """Kinetic parameter value for left state u."""
    a = models.as_state(model, u)
    entry = _kin_cache(kin, model, a)
    if "flat" in entry:
        return entry["flat"]
    muv = models.mu(model, a)
    if abs(muv) < 1e-12:
        entry["flat"] = muv
        return muv
    m_nat = curves.mu_natural(model, a)
    m_b0 = curves.mu_flat_zero(model, a)
    if kin.table is not None:
        val = float(kin.table(model, a))
        s = 1.0 if muv > 0 else -1.0
        # reject values outside the closed band; the open-end boundary
        # itself is judged by check_hypotheses, not here
        if s * val < s * m_b0 - 1e-12 or s * val > s * m_nat + 1e-12:
            raise ValueError(
                f"kinetic table value {val} outside the band "
                f"[{m_b0}, {m_nat}] at state {a.tolist()}"
            )
    else:
        val = (1.0 - kin.theta) * m_nat + kin.theta * m_b0
    entry["flat"] = float(val)
    return float(val)


def phi_flat(model: FluxModel, kin: KineticFunction, u) -> Array:
    a = models.as_state(model, u)
    return curves.hugoniot_point(model, a, model.cc_index, mu_flat(model, kin, a)).state


def mu_sharp(model: FluxModel, kin: KineticFunction, u) -> float:
    """Equal-shock-speed companion of the kinetic value."""
    a = models.as_state(model, u)
    entry = _kin_cache(kin, model, a)
    if "sharp" in entry:
        return entry["sharp"]
    muv = models.mu(model, a)
    if abs(muv) < 1e-12:
        entry["sharp"] = muv
        return muv
    val = curves.companion_parameter(model, a, mu_flat(model, kin, a))
    entry["sharp"] = float(val)
    return float(val)


def phi_sharp(model: FluxModel, kin: KineticFunction, u) -> Array:
    a = models.as_state(model, u)
    return curves.hugoniot_point(model, a, model.cc_index, mu_sharp(model, kin, a)).state


def mu_nucleation(model: FluxModel, kin: KineticFunction, u) -> float:
    """Nucleation threshold: convex combination of the companion and the
    tangency parameter. With weight 0 it coincides with the companion and
    nucleation never constrains anything."""
    a = models.as_state(model, u)
    entry = _kin_cache(kin, model, a)
    if "nucl" in entry:
        return entry["nucl"]
    muv = models.mu(model, a)
    if abs(muv) < 1e-12:
        entry["nucl"] = muv
        return muv
    g = kin.nucleation_gamma
    val = (1.0 - g) * mu_sharp(model, kin, a) + g * curves.mu_natural(model, a)
    entry["nucl"] = float(val)
    return float(val)


def nucleation_gap(model: FluxModel, kin: KineticFunction, u) -> float:
    """Distance eta between the companion and the nucleation threshold;
    zero exactly when the nucleation weight is zero."""
    a = models.as_state(model, u)
    return abs(mu_sharp(model, kin, a) - mu_nucleation(model, kin, a))


def default_samples(model: FluxModel, n: int = 200, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return models.sample_ball(model, n, rng)


def measure_contraction(model: FluxModel, kin: KineticFunction, samples) -> tuple:
    """Max over samples of |projected parameter of the kinetic image| /
    |parameter|: the contraction constant of the round trip through the
    zero-dissipation involution."""
    best = 0.0
    witness = None
    evaluated = 0
    for u in samples:
        a = models.as_state(model, u)
        muv = models.mu(model, a)
        if abs(muv) < 1e-3:
            continue
        try:
            image = phi_flat(model, kin, a)
            ratio = abs(curves.mu_flat_zero(model, image)) / abs(muv)
        except curves.CurveError:
            continue
        evaluated += 1
        if ratio > best:
            best = ratio
            witness = a
    return best, witness, evaluated


@dataclasses.dataclass
class ConformanceReport:
    passed: bool
    hypotheses: dict
    measured_Cff: Optional[float]
    lipschitz_estimate: Optional[float]
    grid: dict

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "hypotheses": self.hypotheses,
            "measured_Cff": self.measured_Cff,
            "lipschitz_estimate": self.lipschitz_estimate,
            "grid": self.grid,
        }


def check_hypotheses(model: FluxModel, kin: KineticFunction,
                     samples=None, arc_points: int = 21,
                     arc_span: float = 0.2) -> ConformanceReport:
    if samples is None:
        samples = default_samples(model)
    states = [models.as_state(model, u) for u in samples]
    usable = [a for a in states if abs(models.mu(model, a)) >= 1e-3]

    hyps = {}
    n_skipped = 0

    # H1: strict band membership, open at the zero-dissipation end,
    # closed at the tangency end. Samples whose curves leave the outer
    # ball cannot be evaluated and are skipped, not failed.
    h1_witness = None
    reachable = []
    for a in usable:
        muv = models.mu(model, a)
        s = 1.0 if muv > 0 else -1.0
        try:
            m_b0 = curves.mu_flat_zero(model, a)
            m_nat = curves.mu_natural(model, a)
            val = mu_flat(model, kin, a)
        except curves.CurveError:
            n_skipped += 1
            continue
        reachable.append(a)
        if h1_witness is None and not (
            s * val > s * m_b0 + 1e-12 * max(1.0, abs(muv))
            and s * val <= s * m_nat + 1e-12
        ):
            h1_witness = a.tolist()
    usable = reachable
    hyps["H1"] = {"passed": h1_witness is None, "witness": h1_witness}

    # H2: Lipschitz estimate along the parameter and injectivity of the
    # kinetic map on each side of the manifold.
    pairs = []
    for side in (1.0, -1.0):
        side_states = sorted(
            (a for a in usable if side * models.mu(model, a) > 0),
            key=lambda a: models.mu(model, a),
        )
        vals = [mu_flat(model, kin, a) for a in side_states]
        mus = [models.mu(model, a) for a in side_states]
        for i in range(len(side_states) - 1):
            dmu = mus[i + 1] - mus[i]
            if abs(dmu) < 1e-9:
                continue
            pairs.append((vals[i + 1] - vals[i]) / dmu)
    lipschitz = max((abs(r) for r in pairs), default=None)
    injective = all(abs(r) > 1e-9 for r in pairs)
    hyps["H2"] = {
        "passed": lipschitz is not None and injective,
        "lipschitz_estimate": lipschitz,
        "injective": injective,
    }

    # H3: identity on the manifold, and monotone decrease of the kinetic
    # value along integral-curve arcs through sampled states.
    manifold_ok = True
    for a in states[: max(1, len(states) // 10)]:
        try:
            proj = curves.rarefaction_point(model, a, model.cc_index, 0.0).state
            if abs(mu_flat(model, kin, proj)) > 1e-9:
                manifold_ok = False
                break
        except curves.CurveError:
            n_skipped += 1
            continue
    arcs_ok = True
    arc_witness = None
    for a in usable[: max(1, len(usable) // 4)]:
        mu0 = models.mu(model, a)
        span = min(arc_span, 0.45 * (model.delta1 - abs(mu0)))
        if span <= 1e-6:
            continue
        grid = np.linspace(mu0 - span, mu0 + span, arc_points)
        vals = []
        try:
            for m in grid:
                st = curves.rarefaction_point(model, a, model.cc_index, m).state
                vals.append(mu_flat(model, kin, st))
        except curves.CurveError:
            continue
        diffs = np.diff(vals)
        if kin.theta > 1e-12 or kin.table is not None:
            if not np.all(diffs < 1e-12):
                arcs_ok = False
                arc_witness = a.tolist()
                break
        else:
            if not np.all(diffs <= 1e-12):
                arcs_ok = False
                arc_witness = a.tolist()
                break
    hyps["H3"] = {
        "passed": manifold_ok and arcs_ok,
        "identity_on_manifold": manifold_ok,
        "monotone_arcs": arcs_ok,
        "witness": arc_witness,
    }

    # H4: strict uniform contraction of the involution round trip.
    cff, cff_witness, n_cff = measure_contraction(model, kin, usable)
    hyps["H4"] = {
        "passed": cff < 1.0,
        "measured_Cff": cff,
        "witness": None if cff < 1.0 else (
            cff_witness.tolist() if cff_witness is not None else None
        ),
    }

    return ConformanceReport(
        passed=all(h["passed"] for h in hyps.values()),
        hypotheses=hyps,
        measured_Cff=cff,
        lipschitz_estimate=lipschitz,
        grid={
            "n_samples": len(states),
            "n_usable": len(usable),
            "n_skipped_ball": n_skipped,
            "n_contraction_evaluated": n_cff,
            "arc_points": arc_points,
            "arc_span": arc_span,
        },
    )
