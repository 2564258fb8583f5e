"""Riemann solvers: classical composite curves for the ordinary families
and the multi-branch nonclassical curve, with kinetics and optional
nucleation, for the designated concave-convex family.

The nonclassical curve for a left state on the positive parameter side
(mirrored otherwise): rarefactions beyond the base parameter; a single
classical shock down to the nucleation threshold; below it a nonclassical
jump to the kinetic state followed by a classical shock up the threshold
gap, or by a rarefaction once the target drops past the kinetic value.
Classical shocks are preferred throughout the overlap, ties included.

Scalar problems read the solution straight off the curve; systems
intersect the per-family curves with a damped Newton on the parameter
targets, warm-started from the classical (trivial-kinetics) solution.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Optional, Union

import numpy as np

from ncft import curves, kinetics as kin_mod, models
from ncft.kinetics import KineticFunction
from ncft.models import FluxModel

Array = np.ndarray

KIND_CLASSICAL = "ClassicalShock"
KIND_NONCLASSICAL = "NonclassicalShock"
KIND_RAREFACTION = "Rarefaction"
KIND_CONTACT = "Contact"
KIND_PIECE = "RarefactionShockPiece"

RESIDUAL_TOL = 1e-11
FD_STRENGTH = 1e-7
MAX_ITER = 60
ENTROPY_TOL = 1e-9
KINETIC_TOL = 1e-10
# Threshold parameters come out of iterative root solves, so a target that
# ties with one mathematically can land on either side by roundoff; ties
# must still take the classical branch.
THRESHOLD_TIE = 1e-12


class SolverError(ValueError):
    pass


class NoSolutionGap(SolverError):
    """Target parameter falls in the uncovered interval between the
    nucleation threshold and the companion; only reachable with a
    pathological kinetic table."""


class IdGen:
    """Monotone id source; one per run keeps output ids deterministic."""

    def __init__(self, start: int = 0):
        self._c = itertools.count(start)

    def __call__(self) -> int:
        return next(self._c)


_default_ids = IdGen()


@dataclasses.dataclass(frozen=True)
class Wave:
    family: int
    kind: str
    left: Array
    right: Array
    speed: Union[float, tuple]
    strength: float
    id: int

    @property
    def speed_lo(self) -> float:
        return self.speed[0] if isinstance(self.speed, tuple) else self.speed

    @property
    def speed_hi(self) -> float:
        return self.speed[1] if isinstance(self.speed, tuple) else self.speed

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "kind": self.kind,
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "speed": list(self.speed) if isinstance(self.speed, tuple) else self.speed,
            "strength": self.strength,
            "id": self.id,
        }


@dataclasses.dataclass(frozen=True)
class WaveFan:
    waves: tuple

    @property
    def left_state(self) -> Optional[Array]:
        return self.waves[0].left if self.waves else None

    @property
    def right_state(self) -> Optional[Array]:
        return self.waves[-1].right if self.waves else None

    def validate(self, tol: float = 1e-9):
        for a, b in zip(self.waves, self.waves[1:]):
            if not np.array_equal(a.right, b.left):
                raise SolverError("fan states do not chain")
            if b.speed_lo < a.speed_hi - tol:
                raise SolverError(
                    f"fan speeds out of order: {a.speed_hi} then {b.speed_lo}"
                )
        return self

    def to_json_dict(self) -> dict:
        return {"waves": [w.to_json_dict() for w in self.waves]}


def _mk_discontinuity(model: FluxModel, family: int, left: Array, right: Array,
                      speed: float, ids: IdGen, kind_hint: Optional[str] = None,
                      kin: Optional[KineticFunction] = None,
                      with_strength: bool = True) -> Wave:
    """Build a shock/contact wave, derive its kind from the classification,
    and enforce the admissibility invariants."""
    if model.field_kinds[family] == "ld":
        kind = KIND_CONTACT
    else:
        cls = curves.classify_shock(model, left, right, family)
        if cls == "Lax":
            kind = KIND_CLASSICAL
        elif cls in ("SlowUndercompressive", "FastUndercompressive"):
            kind = KIND_NONCLASSICAL
        else:
            raise SolverError(
                f"inadmissible expansive shock emitted on family {family}"
            )
        E = curves.entropy_dissipation(model, left, right)
        if E > ENTROPY_TOL:
            raise SolverError(f"entropy dissipation {E:.3e} positive on a shock")
        if kind == KIND_NONCLASSICAL and kin is not None:
            want = kin_mod.mu_flat(model, kin, left)
            got = float(model.family_parameter(right, family))
            if abs(got - want) > KINETIC_TOL:
                raise SolverError(
                    f"nonclassical jump violates the kinetic relation: "
                    f"{got} vs {want}"
                )
    if kind_hint == KIND_PIECE:
        kind = KIND_PIECE
    strength = (curves.generalized_strength(model, left, right, family)
                if with_strength else 0.0)
    return Wave(family, kind, left.copy(), right.copy(), float(speed),
                float(strength), ids())


def _mk_rarefaction(model: FluxModel, family: int, left: Array, right: Array,
                    ids: IdGen, with_strength: bool = True) -> Wave:
    lam_l = float(models.eigen(model, left)[0][family])
    lam_r = float(models.eigen(model, right)[0][family])
    if lam_r < lam_l - 1e-10:
        raise SolverError(
            f"rarefaction with decreasing characteristic speed on family {family}"
        )
    strength = (curves.generalized_strength(model, left, right, family)
                if with_strength else 0.0)
    return Wave(family, KIND_RAREFACTION, left.copy(), right.copy(),
                (lam_l, lam_r), float(strength), ids())


def wave_curve_point(model: FluxModel, kin: KineticFunction, u_minus, family: int,
                     m: float, use_nucleation: bool = True,
                     ids: Optional[IdGen] = None,
                     with_strengths: bool = True) -> tuple:
    """Point of the family's forward wave curve at parameter value m.

    Returns (state, fragment): the reached state and the list of waves
    (possibly empty, possibly two for the nonclassical branch) that
    realize the jump."""
    ids = ids or _default_ids
    a = models.as_state(model, u_minus)
    mu0 = float(model.family_parameter(a, family))
    m = float(m)
    if abs(m - mu0) < 1e-14:
        return a.copy(), []
    if model.field_kinds[family] == "ld":
        pt = curves.hugoniot_point(model, a, family, m)
        return pt.state, [_mk_discontinuity(model, family, a, pt.state,
                                            pt.speed, ids,
                                            with_strength=with_strengths)]
    if family != model.cc_index:
        return _classical_point(model, a, family, m, ids, with_strengths)
    return _nonclassical_point(model, kin, a, family, m, use_nucleation, ids,
                               with_strengths)


def _classical_point(model: FluxModel, a: Array, family: int, m: float,
                     ids: IdGen, with_strengths: bool = True) -> tuple:
    """Single shock or rarefaction by the local genuine-nonlinearity sign.
    Non-designated families are only supported away from their own
    sign-change manifolds."""
    mu0 = float(model.family_parameter(a, family))
    m_loc = models.m_value(model, a, family)
    if abs(m_loc) < 1e-8:
        raise SolverError(
            f"family {family} degenerate at {a.tolist()}: composite curves "
            "are only constructed for the designated family"
        )
    shock_side = (m < mu0) if m_loc > 0 else (m > mu0)
    if shock_side:
        pt = curves.hugoniot_point(model, a, family, m)
        return pt.state, [_mk_discontinuity(model, family, a, pt.state,
                                            pt.speed, ids,
                                            with_strength=with_strengths)]
    pt = curves.rarefaction_point(model, a, family, m)
    return pt.state, [_mk_rarefaction(model, family, a, pt.state, ids,
                                      with_strengths)]


def _nonclassical_point(model: FluxModel, kin: KineticFunction, a: Array,
                        family: int, m: float, use_nucleation: bool,
                        ids: IdGen, with_strengths: bool = True) -> tuple:
    mu0 = float(model.family_parameter(a, family))
    if abs(mu0) < 1e-12:
        # on the manifold the characteristic speed grows both ways
        pt = curves.rarefaction_point(model, a, family, m)
        return pt.state, [_mk_rarefaction(model, family, a, pt.state, ids,
                                          with_strengths)]
    s = 1.0 if mu0 > 0 else -1.0
    if s * (m - mu0) >= 0:
        pt = curves.rarefaction_point(model, a, family, m)
        return pt.state, [_mk_rarefaction(model, family, a, pt.state, ids,
                                          with_strengths)]
    if s * m >= 0:
        # same-sign weak shock: inside the classical range for any
        # admissible kinetics, so skip the critical-point machinery
        pt = curves.hugoniot_point(model, a, family, m)
        return pt.state, [_mk_discontinuity(model, family, a, pt.state,
                                            pt.speed, ids, kin=kin,
                                            with_strength=with_strengths)]
    m_sharp = kin_mod.mu_sharp(model, kin, a)
    if use_nucleation:
        threshold = kin_mod.mu_nucleation(model, kin, a)
    else:
        threshold = m_sharp
    if s * (m - threshold) >= -THRESHOLD_TIE:
        # classical shocks are preferred throughout the overlap, ties also
        pt = curves.hugoniot_point(model, a, family, m)
        return pt.state, [_mk_discontinuity(model, family, a, pt.state,
                                            pt.speed, ids, kin=kin,
                                            with_strength=with_strengths)]
    if s * (m - m_sharp) > 0:
        raise NoSolutionGap(
            f"target {m} between the companion {m_sharp} and the "
            f"nucleation threshold {threshold}: uncovered by either branch"
        )
    m_flat = kin_mod.mu_flat(model, kin, a)
    pt_flat = curves.hugoniot_point(model, a, family, m_flat)
    leading = _mk_discontinuity(model, family, a, pt_flat.state,
                                pt_flat.speed, ids, kin=kin,
                                with_strength=with_strengths)
    if abs(m - m_flat) < 1e-14:
        return pt_flat.state, [leading]
    if s * (m - m_flat) > 0:
        pt = curves.hugoniot_point(model, pt_flat.state, family, m)
        trailing = _mk_discontinuity(model, family, pt_flat.state, pt.state,
                                     pt.speed, ids, kin=kin,
                                     with_strength=with_strengths)
    else:
        pt = curves.rarefaction_point(model, pt_flat.state, family, m)
        trailing = _mk_rarefaction(model, family, pt_flat.state, pt.state, ids,
                                   with_strengths)
    return pt.state, [leading, trailing]


def solve_riemann(model: FluxModel, kin: KineticFunction, u_l, u_r,
                  use_nucleation: bool = True,
                  ids: Optional[IdGen] = None) -> WaveFan:
    ids = ids or _default_ids
    a = models.require_in_ball(model, u_l)
    b = models.require_in_ball(model, u_r)
    if float(np.max(np.abs(b - a))) < 1e-14:
        return WaveFan(())
    if model.N == 1:
        m = float(model.family_parameter(b, 0))
        _, frag = wave_curve_point(model, kin, a, 0, m, use_nucleation, ids)
        frag = _snap_last(model, frag, b)
        return WaveFan(tuple(frag)).validate()
    targets = _newton_targets(model, kin, a, b, use_nucleation)
    waves = []
    state = a
    for j in range(model.N):
        state, frag = wave_curve_point(model, kin, state, j, targets[j],
                                       use_nucleation, ids)
        waves.extend(frag)
    waves = _snap_last(model, waves, b)
    return WaveFan(tuple(waves)).validate()


def _snap_last(model: FluxModel, waves: list, u_r: Array) -> list:
    """Pin the fan's right end to the requested state bit-for-bit; the
    residual being absorbed is below RESIDUAL_TOL."""
    if not waves:
        return waves
    last = waves[-1]
    gap = float(np.max(np.abs(last.right - u_r)))
    if gap == 0.0:
        return waves
    if gap > 1e-9:
        raise SolverError(f"fan endpoint off by {gap:.3e}")
    if last.kind == KIND_RAREFACTION:
        lam_l = last.speed[0]
        lam_r = float(models.eigen(model, u_r)[0][last.family])
        speed = (lam_l, lam_r)
    else:
        speed = last.speed
    waves[-1] = dataclasses.replace(last, right=u_r.copy(), speed=speed)
    return waves


def _initial_targets(model: FluxModel, a: Array, b: Array) -> np.ndarray:
    """Eigenbasis projection of the jump at the midpoint state, converted
    to per-family parameter targets."""
    mid = 0.5 * (a + b)
    _, _, L = models.eigen(model, mid)
    incr = L @ (b - a)
    targets = np.empty(model.N)
    state = a
    for j in range(model.N):
        targets[j] = float(model.family_parameter(state, j)) + incr[j]
        # predict the next intermediate state linearly for the base point
        statej = state + incr[j] * models.eigen(model, state)[1][:, j]
        state = statej
    return targets


def _fan_endpoint(model: FluxModel, kin: KineticFunction, a: Array,
                  targets: np.ndarray, use_nucleation: bool) -> Array:
    state = a
    scratch = IdGen()
    for j in range(model.N):
        state, _ = wave_curve_point(model, kin, state, j, targets[j],
                                    use_nucleation, scratch,
                                    with_strengths=False)
    return state


def _newton_targets(model: FluxModel, kin: KineticFunction, a: Array, b: Array,
                    use_nucleation: bool) -> np.ndarray:
    classical = KineticFunction(theta=0.0, nucleation_gamma=0.0)
    guess = _initial_targets(model, a, b)
    try:
        guess = _newton_refine(model, classical, a, b, guess, False)
    except SolverError:
        pass  # the warm start is allowed to be rough
    return _newton_refine(model, kin, a, b, guess, use_nucleation)


def _newton_refine(model: FluxModel, kin: KineticFunction, a: Array, b: Array,
                   targets: np.ndarray, use_nucleation: bool) -> np.ndarray:
    n = model.N

    def residual(t):
        return _fan_endpoint(model, kin, a, t, use_nucleation) - b

    r = residual(targets)
    best = float(np.max(np.abs(r)))
    for _ in range(MAX_ITER):
        if best <= RESIDUAL_TOL:
            return targets
        J = np.empty((n, n))
        for j in range(n):
            probe = targets.copy()
            probe[j] += FD_STRENGTH
            J[:, j] = (residual(probe) - r) / FD_STRENGTH
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular Jacobian in the curve intersection") from exc
        # damping by halving until the residual decreases
        scale = 1.0
        for _ in range(12):
            trial = targets + scale * step
            try:
                r_trial = residual(trial)
            except (curves.CurveError, SolverError):
                scale *= 0.5
                continue
            norm = float(np.max(np.abs(r_trial)))
            if norm < best:
                targets, r, best = trial, r_trial, norm
                break
            scale *= 0.5
        else:
            raise SolverError(
                f"curve intersection stalled at residual {best:.3e}"
            )
    if best <= RESIDUAL_TOL:
        return targets
    raise SolverError(f"curve intersection did not converge: residual {best:.3e}")
