"""Flux models for 1-D systems of conservation laws.

A FluxModel bundles the flux, its Jacobian, a strictly convex entropy pair,
and the per-family structure the wave machinery needs: a smooth scalar
parameter for every characteristic family and the index of the designated
concave-convex family, whose genuine-nonlinearity measure m changes sign
across a manifold that the family's integral curves cross transversally.

States are numpy vectors of length N. Solver-facing entry points check
inputs against the inner working ball (radius delta1); the curve layer
accepts the outer ball (radius delta0), because critical-point
compositions and continuation legitimately roam beyond the inner one.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

Array = np.ndarray

# Central-difference step for all fallback gradients.
FD_STEP = 1e-6

# Eigenvalues closer than this trip the strict-hyperbolicity guard.
EIGEN_GAP_TOL = 1e-10

BALL_TOL = 1e-12


class BallViolation(ValueError):
    """State outside the working ball."""


class HyperbolicityError(ValueError):
    """Eigenvalue collision within tolerance."""


@dataclasses.dataclass(frozen=True)
class FluxModel:
    """A hyperbolic system with entropy pair and family parameters.

    flux, jacobian, entropy are functions of the state vector; entropy
    returns the pair (U, F). family_parameter(u, j) is the scalar
    parameter of family j, strictly monotone along the family's integral
    curves; for the designated concave-convex family (cc_index) it is the
    global parameter mu with mu = 0 exactly on the sign-change manifold
    of m. Eigenvectors are normalized so the directional derivative of
    the family parameter along r_j equals 1, which makes the parameter
    the natural arclength for rarefaction integration and makes
    m_j = grad(lambda_j) . r_j the derivative of lambda_j in that
    parameter.

    The analytic hooks (eigen_fn, family_parameter_grad, m_fn,
    entropy_grad, entropy_hessian) are optional; finite differences with
    step FD_STEP fill in for any that are absent.
    """

    name: str
    N: int
    flux: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    entropy: Callable[[Array], tuple]
    field_kinds: tuple
    delta0: float
    delta1: float
    cc_index: int
    family_parameter: Callable[[Array, int], float]
    family_parameter_grad: Optional[Callable[[Array, int], Array]] = None
    eigen_fn: Optional[Callable[[Array], tuple]] = None
    m_fn: Optional[Callable[[Array, int], float]] = None
    entropy_grad: Optional[Callable[[Array], tuple]] = None
    entropy_hessian: Optional[Callable[[Array], Array]] = None

    def __post_init__(self):
        if not (0 < self.delta1 <= self.delta0):
            raise ValueError("ball radii must satisfy 0 < delta1 <= delta0")
        if len(self.field_kinds) != self.N:
            raise ValueError("field_kinds must have one tag per family")
        if self.field_kinds[self.cc_index] != "cc":
            raise ValueError("cc_index must point at a cc family")
        for kind in self.field_kinds:
            if kind not in ("gnl", "ld", "cc"):
                raise ValueError(f"unknown field kind {kind!r}")


def as_state(model: FluxModel, u) -> Array:
    """Coerce scalars / sequences to a float vector of length model.N."""
    a = np.atleast_1d(np.asarray(u, dtype=float))
    if a.shape != (model.N,):
        raise ValueError(f"state must have {model.N} components, got shape {a.shape}")
    return a


def in_ball(model: FluxModel, u, radius: str = "delta1", tol: float = BALL_TOL) -> bool:
    r = model.delta1 if radius == "delta1" else model.delta0
    return float(np.linalg.norm(np.atleast_1d(u))) <= r + tol


def require_in_ball(model: FluxModel, u, radius: str = "delta1") -> Array:
    a = as_state(model, u)
    if not in_ball(model, a, radius):
        r = model.delta1 if radius == "delta1" else model.delta0
        raise BallViolation(
            f"state {a.tolist()} outside working ball of radius {r} ({radius})"
        )
    return a


def family_parameter_grad(model: FluxModel, u: Array, family: int) -> Array:
    if model.family_parameter_grad is not None:
        return np.asarray(model.family_parameter_grad(u, family), dtype=float)
    g = np.empty(model.N)
    for k in range(model.N):
        e = np.zeros(model.N)
        e[k] = FD_STEP
        g[k] = (
            model.family_parameter(u + e, family)
            - model.family_parameter(u - e, family)
        ) / (2 * FD_STEP)
    return g


def eigen(model: FluxModel, u) -> tuple:
    """Eigenstructure (lambdas, R, L) at u.

    Eigenvalues ascending; columns of R are right eigenvectors normalized
    so grad(family_parameter_j) . r_j = 1; rows of L are the biorthonormal
    left eigenvectors (L = R^-1, so l_j . r_k = delta_jk).
    """
    a = as_state(model, u)
    if model.eigen_fn is not None:
        lams, R, L = model.eigen_fn(a)
        return np.asarray(lams, float), np.asarray(R, float), np.asarray(L, float)
    A = np.asarray(model.jacobian(a), dtype=float)
    lams, vecs = np.linalg.eig(A)
    if np.max(np.abs(lams.imag)) > 1e-10:
        raise HyperbolicityError(f"complex eigenvalues at {a.tolist()}")
    lams = lams.real
    order = np.argsort(lams)
    lams = lams[order]
    vecs = vecs.real[:, order]
    gaps = np.diff(lams)
    if model.N > 1 and np.min(gaps) < EIGEN_GAP_TOL:
        raise HyperbolicityError(
            f"eigenvalue gap {np.min(gaps):.3e} below tolerance at {a.tolist()}"
        )
    R = np.empty_like(vecs)
    for j in range(model.N):
        g = family_parameter_grad(model, a, j)
        scale = float(g @ vecs[:, j])
        if abs(scale) < 1e-12:
            raise ValueError(
                f"family parameter {j} not transversal to its eigenvector at {a.tolist()}"
            )
        R[:, j] = vecs[:, j] / scale
    L = np.linalg.inv(R)
    return lams, R, L


def mu(model: FluxModel, u) -> float:
    """Global parameter of the designated concave-convex family."""
    a = as_state(model, u)
    return float(model.family_parameter(a, model.cc_index))


def mu_grad(model: FluxModel, u, family: Optional[int] = None) -> Array:
    a = as_state(model, u)
    j = model.cc_index if family is None else family
    return family_parameter_grad(model, a, j)


def m_value(model: FluxModel, u, family: Optional[int] = None) -> float:
    """Genuine-nonlinearity measure m_j = grad(lambda_j) . r_j."""
    a = as_state(model, u)
    j = model.cc_index if family is None else family
    if model.m_fn is not None:
        return float(model.m_fn(a, j))
    _, R, _ = eigen(model, a)
    r = R[:, j]
    step = FD_STEP / max(1.0, float(np.linalg.norm(r)))
    lp = eigen(model, a + step * r)[0][j]
    lm = eigen(model, a - step * r)[0][j]
    return float((lp - lm) / (2 * step))


def m_grad_along_r(model: FluxModel, u, family: Optional[int] = None) -> float:
    """Directional derivative of m_j along r_j (transversality measure)."""
    a = as_state(model, u)
    j = model.cc_index if family is None else family
    _, R, _ = eigen(model, a)
    r = R[:, j]
    step = FD_STEP / max(1.0, float(np.linalg.norm(r)))
    return float(
        (m_value(model, a + step * r, j) - m_value(model, a - step * r, j)) / (2 * step)
    )


def entropy_pair(model: FluxModel, u) -> tuple:
    a = as_state(model, u)
    U, F = model.entropy(a)
    return float(U), float(F)


def entropy_gradients(model: FluxModel, u) -> tuple:
    a = as_state(model, u)
    if model.entropy_grad is not None:
        gU, gF = model.entropy_grad(a)
        return np.asarray(gU, float), np.asarray(gF, float)
    gU = np.empty(model.N)
    gF = np.empty(model.N)
    for k in range(model.N):
        e = np.zeros(model.N)
        e[k] = FD_STEP
        Up, Fp = model.entropy(a + e)
        Um, Fm = model.entropy(a - e)
        gU[k] = (Up - Um) / (2 * FD_STEP)
        gF[k] = (Fp - Fm) / (2 * FD_STEP)
    return gU, gF


def compatibility_residual(model: FluxModel, u) -> float:
    """Max-norm defect of grad(F)^T = grad(U)^T Df at u."""
    a = as_state(model, u)
    gU, gF = entropy_gradients(model, a)
    A = np.asarray(model.jacobian(a), dtype=float)
    return float(np.max(np.abs(gF - gU @ A)))


def sample_ball(model: FluxModel, n: int, rng: np.random.Generator,
                radius: str = "delta1", margin: float = 0.98) -> list:
    """n states uniform in the working ball, shrunk by margin."""
    r = (model.delta1 if radius == "delta1" else model.delta0) * margin
    out = []
    for _ in range(n):
        v = rng.normal(size=model.N)
        v /= np.linalg.norm(v)
        out.append(v * r * rng.uniform() ** (1.0 / model.N))
    return out


def model_self_check(model: FluxModel, n_samples: int = 1000, seed: int = 0) -> dict:
    """Sampled structural checks: hyperbolicity gap, entropy compatibility,
    convexity, and the sign/transversality structure of the cc family."""
    rng = np.random.default_rng(seed)
    states = sample_ball(model, n_samples, rng)
    min_gap = np.inf
    max_compat = 0.0
    min_hess_eig = np.inf
    sign_ok = True
    min_m_slope = np.inf
    for a in states:
        lams, R, L = eigen(model, a)
        if model.N > 1:
            min_gap = min(min_gap, float(np.min(np.diff(lams))))
        max_compat = max(max_compat, compatibility_residual(model, a))
        if model.entropy_hessian is not None:
            H = np.asarray(model.entropy_hessian(a), dtype=float)
        else:
            H = _fd_entropy_hessian(model, a)
        min_hess_eig = min(min_hess_eig, float(np.min(np.linalg.eigvalsh(H))))
        muv = mu(model, a)
        mv = m_value(model, a)
        if abs(muv) > 1e-8 and np.sign(mv) != np.sign(muv):
            sign_ok = False
        min_m_slope = min(min_m_slope, m_grad_along_r(model, a))
    return {
        "n_samples": n_samples,
        "min_eigen_gap": None if model.N == 1 else min_gap,
        "max_compatibility_residual": max_compat,
        "min_entropy_hessian_eigenvalue": min_hess_eig,
        "cc_sign_agreement": sign_ok,
        "min_m_slope_along_r": min_m_slope,
    }


def _fd_entropy_hessian(model: FluxModel, a: Array) -> Array:
    h = 1e-4
    H = np.empty((model.N, model.N))
    for i in range(model.N):
        for j in range(model.N):
            ei = np.zeros(model.N)
            ej = np.zeros(model.N)
            ei[i] = h
            ej[j] = h
            H[i, j] = (
                model.entropy(a + ei + ej)[0]
                - model.entropy(a + ei - ej)[0]
                - model.entropy(a - ei + ej)[0]
                + model.entropy(a - ei - ej)[0]
            ) / (4 * h * h)
    return H


# ---------------------------------------------------------------------------
# Canonical models


def cubic_model(delta0: float = 2.0, delta1: float = 1.5) -> FluxModel:
    """Scalar model f(u) = u^3 with entropy pair (u^2, (3/2)u^4).

    The single family is concave-convex: lambda = 3u^2, m = 6u, and the
    global parameter is the state itself.
    """

    def flux(u):
        return np.array([u[0] ** 3])

    def jacobian(u):
        return np.array([[3.0 * u[0] ** 2]])

    def entropy(u):
        return u[0] ** 2, 1.5 * u[0] ** 4

    def family_parameter(u, j):
        return float(u[0])

    def family_parameter_grad_(u, j):
        return np.array([1.0])

    def eigen_fn(u):
        return (
            np.array([3.0 * u[0] ** 2]),
            np.array([[1.0]]),
            np.array([[1.0]]),
        )

    def m_fn(u, j):
        return 6.0 * u[0]

    def entropy_grad(u):
        return np.array([2.0 * u[0]]), np.array([6.0 * u[0] ** 3])

    def entropy_hessian(u):
        return np.array([[2.0]])

    return FluxModel(
        name="cubic",
        N=1,
        flux=flux,
        jacobian=jacobian,
        entropy=entropy,
        field_kinds=("cc",),
        delta0=delta0,
        delta1=delta1,
        cc_index=0,
        family_parameter=family_parameter,
        family_parameter_grad=family_parameter_grad_,
        eigen_fn=eigen_fn,
        m_fn=m_fn,
        entropy_grad=entropy_grad,
        entropy_hessian=entropy_hessian,
    )


def elasticity_model(delta0: float = 2.0, delta1: float = 1.5) -> FluxModel:
    """Nonlinear elasticity: d_t v - d_x sigma(w) = 0, d_t w - d_x v = 0
    with sigma(w) = w^3 + w, entropy U = v^2/2 + w^4/4 + w^2/2, F = -v sigma(w).

    State is (v, w). Both families are concave-convex in w (m changes sign
    at w = 0); the second family carries parameter w with the reference
    orientation and is the designated one. The first family carries
    parameter -w so its weak admissible shocks also sit at negative
    parameter increments.
    """

    def sigma(w):
        return w ** 3 + w

    def sigma_p(w):
        return 3.0 * w ** 2 + 1.0

    def flux(u):
        return np.array([-sigma(u[1]), -u[0]])

    def jacobian(u):
        return np.array([[0.0, -sigma_p(u[1])], [-1.0, 0.0]])

    def entropy(u):
        v, w = u
        return v * v / 2 + w ** 4 / 4 + w * w / 2, -v * sigma(w)

    def family_parameter(u, j):
        return float(-u[1] if j == 0 else u[1])

    def family_parameter_grad_(u, j):
        return np.array([0.0, -1.0]) if j == 0 else np.array([0.0, 1.0])

    def eigen_fn(u):
        s = np.sqrt(sigma_p(u[1]))
        lams = np.array([-s, s])
        # Columns normalized so grad(parameter_j) . r_j = 1.
        R = np.array([[-s, -s], [-1.0, 1.0]])
        L = np.array([[-0.5 / s, -0.5], [-0.5 / s, 0.5]])
        return lams, R, L

    def m_fn(u, j):
        # d lambda_j / d parameter_j along the integral curve, both families.
        return 3.0 * u[1] / np.sqrt(sigma_p(u[1]))

    def entropy_grad(u):
        v, w = u
        return np.array([v, sigma(w)]), np.array([-sigma(w), -v * sigma_p(w)])

    def entropy_hessian(u):
        return np.array([[1.0, 0.0], [0.0, sigma_p(u[1])]])

    return FluxModel(
        name="elasticity",
        N=2,
        flux=flux,
        jacobian=jacobian,
        entropy=entropy,
        field_kinds=("cc", "cc"),
        delta0=delta0,
        delta1=delta1,
        cc_index=1,
        family_parameter=family_parameter,
        family_parameter_grad=family_parameter_grad_,
        eigen_fn=eigen_fn,
        m_fn=m_fn,
        entropy_grad=entropy_grad,
        entropy_hessian=entropy_hessian,
    )


MODEL_FACTORIES = {
    "cubic": cubic_model,
    "elasticity": elasticity_model,
}


def make_model(name: str, params: Optional[dict] = None) -> FluxModel:
    if name not in MODEL_FACTORIES:
        raise ValueError(f"unknown model {name!r}; known: {sorted(MODEL_FACTORIES)}")
    return MODEL_FACTORIES[name](**(params or {}))
