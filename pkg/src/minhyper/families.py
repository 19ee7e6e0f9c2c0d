"""Concrete immersions of 3-dimensional charts into the unit sphere of R^5."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import expr as ex
from .errors import BadBasis, DomainEscape, EmptyInterval, NotOnSphere, PoleSingularity
from .kernel import DiffConfig, Jet2, SECOND_INDEX, jet
from .phase import BOUNDARY_GUARD, PhaseSolution, gh, gh_jet, solve_phase, validity_interval

__all__ = [
    "Domain",
    "Example11Params",
    "Example12Params",
    "Immersion",
    "default_example11_basis",
    "make_cartan_tube",
    "make_example11",
    "make_example12",
    "make_expr_immersion",
    "veronese",
    "veronese_chart",
    "veronese_mean_curvature",
]

INF = math.inf
SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class Domain:
    """Product of open intervals, optionally cut down by a pointwise predicate."""

    u_range: tuple[float, float] = (-INF, INF)
    v_range: tuple[float, float] = (-INF, INF)
    z_range: tuple[float, float] = (-INF, INF)
    predicate: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        for name in ("u_range", "v_range", "z_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a nonempty open interval")

    def contains(self, u, v, z) -> np.ndarray:
        u, v, z = (np.asarray(c, dtype=float) for c in (u, v, z))
        ok = (
            (u > self.u_range[0]) & (u < self.u_range[1])
            & (v > self.v_range[0]) & (v < self.v_range[1])
            & (z > self.z_range[0]) & (z < self.z_range[1])
        )
        if self.predicate is not None:
            ok = ok & np.asarray(self.predicate(u, v, z), dtype=bool)
        return ok


@dataclass(frozen=True)
class Immersion:
    """A chart map (u, v, z) -> R^5 landing on the unit sphere.

    ``evaluator`` is vectorised: it takes broadcastable arrays and returns
    an array with a trailing axis of length 5.  ``expected_lambda`` gives the
    positive principal curvature in closed form where it is known.
    """

    evaluator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    domain: Domain
    label: str
    family: str
    analytic_jet: Optional[Callable[[Sequence[float]], Jet2]] = None
    expected_lambda: Optional[Callable[[float, float, float], float]] = None
    params: object = None

    def __call__(self, u, v, z) -> np.ndarray:
        return self.evaluator(u, v, z)

    def point(self, p: Sequence[float]) -> np.ndarray:
        u, v, z = (float(c) for c in p)
        if not bool(self.domain.contains(u, v, z)):
            raise DomainEscape(f"point {tuple(p)} outside the domain of {self.label}")
        return np.asarray(self.evaluator(u, v, z), dtype=float)

    def jet(self, p: Sequence[float], cfg: DiffConfig = DiffConfig()) -> Jet2:
        if cfg.analytic and self.analytic_jet is not None:
            if not bool(self.domain.contains(*p)):
                raise DomainEscape(f"point {tuple(p)} outside the domain of {self.label}")
            return self.analytic_jet(p)
        return jet(self.evaluator, p, cfg, self.domain)


def _combine(coeffs: Sequence[np.ndarray], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """sum_k coeffs[k][..., None] * vectors[k]"""
    out = 0.0
    for c, vec in zip(coeffs, vectors):
        out = out + np.asarray(c, dtype=float)[..., None] * vec
    return np.asarray(out)


def _check_basis(C: Sequence[np.ndarray], norms2: Sequence[float], tol: float = 1e-12) -> None:
    G = np.array([[float(np.dot(a, b)) for b in C] for a in C])
    target = np.diag(norms2)
    if G.shape != (5, 5) or not np.all(np.abs(G - target) <= tol):
        raise BadBasis(f"basis vectors violate the required Gram matrix (max dev {np.max(np.abs(G - target)):.2e})")


# --- example11 -----------------------------------------------------------


def default_example11_basis() -> tuple[np.ndarray, ...]:
    s = 1 / SQRT2
    eye = np.eye(5)
    return (s * eye[0], s * eye[1], s * eye[2], s * eye[3], eye[4])


@dataclass(frozen=True)
class Example11Params:
    C: tuple[np.ndarray, ...] = field(default_factory=default_example11_basis)

    def __post_init__(self) -> None:
        C = tuple(np.asarray(c, dtype=float) for c in self.C)
        if len(C) != 5 or any(c.shape != (5,) for c in C):
            raise BadBasis("need five vectors of R^5")
        object.__setattr__(self, "C", C)
        _check_basis(C, (0.5, 0.5, 0.5, 0.5, 1.0))


def make_example11(params: Example11Params = None) -> Immersion:
    """x = (cos(√2u)C1 + sin(√2u)C2 + cos(√2v)C3 + sin(√2v)C4 + zC5) / sqrt(1+z^2)."""
    params = params or Example11Params()
    C1, C2, C3, C4, C5 = params.C

    def evaluate(u, v, z):
        u, v, z = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (u, v, z)))
        q = 1 / np.sqrt(1 + z * z)
        return _combine(
            [q * np.cos(SQRT2 * u), q * np.sin(SQRT2 * u), q * np.cos(SQRT2 * v), q * np.sin(SQRT2 * v), q * z],
            [C1, C2, C3, C4, C5],
        )

    def analytic(p):
        u, v, z = (float(c) for c in p)
        q = 1 / math.sqrt(1 + z * z)
        q1 = -z * q**3
        q2 = q**5 * (2 * z * z - 1)
        cu, su = math.cos(SQRT2 * u), math.sin(SQRT2 * u)
        cv, sv = math.cos(SQRT2 * v), math.sin(SQRT2 * v)
        U = cu * C1 + su * C2
        V = cv * C3 + sv * C4
        U1 = SQRT2 * (-su * C1 + cu * C2)
        V1 = SQRT2 * (-sv * C3 + cv * C4)
        M = U + V + z * C5
        value = q * M
        d1 = np.array([q * U1, q * V1, q1 * M + q * C5])
        second = {
            (0, 0): -2 * q * U,
            (0, 1): np.zeros(5),
            (0, 2): q1 * U1,
            (1, 1): -2 * q * V,
            (1, 2): q1 * V1,
            (2, 2): q2 * M + 2 * q1 * C5,
        }
        return Jet2(value, d1, np.array([second[k] for k in SECOND_INDEX]))

    domain = Domain((-10.0, 10.0), (-10.0, 10.0), (-5.0, 5.0))
    return Immersion(
        evaluate,
        domain,
        "example11",
        "example11",
        analytic_jet=analytic,
        expected_lambda=lambda u, v, z: math.sqrt(z * z + 1),
        params=params,
    )


# --- example12 -----------------------------------------------------------


@dataclass(frozen=True)
class Example12Params:
    c1: float = 0.1
    c2: float = 1.0
    C: tuple[np.ndarray, ...] = field(default_factory=lambda: tuple(np.eye(5)))
    phase: Optional[PhaseSolution] = None

    def __post_init__(self) -> None:
        if not (self.c1 > 0 and self.c2 > 0):
            raise EmptyInterval("c1 and c2 must be positive")
        if not self.c2 > 2 * self.c1:
            raise EmptyInterval("empty validity interval (c2 <= 2*c1)")
        C = tuple(np.asarray(c, dtype=float) for c in self.C)
        if len(C) != 5 or any(c.shape != (5,) for c in C):
            raise BadBasis("need five vectors of R^5")
        object.__setattr__(self, "C", C)
        _check_basis(C, (1.0,) * 5)
        if self.phase is None:
            object.__setattr__(self, "phase", solve_phase(self.c1, self.c2))


def make_example12(params: Example12Params = None) -> Immersion:
    """x = e^{-v}(cos u C1 + sin u C2)/sqrt(c2(z^2+1)) + (z C3 + g(v) C4 + h(v) C5)/sqrt(z^2+1)."""
    params = params or Example12Params()
    c1, c2 = params.c1, params.c2
    sol = params.phase
    C1, C2, C3, C4, C5 = params.C
    rc2 = math.sqrt(c2)

    def evaluate(u, v, z):
        u, v, z = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (u, v, z)))
        g, h = gh(v, sol)
        q = 1 / np.sqrt(1 + z * z)
        F = np.exp(-v) * q / rc2
        return _combine([F * np.cos(u), F * np.sin(u), q * z, q * g, q * h], [C1, C2, C3, C4, C5])

    def analytic(p):
        u, v, z = (float(c) for c in p)
        (g0, g1, g2), (h0, h1, h2) = gh_jet(v, sol)
        q = 1 / math.sqrt(1 + z * z)
        q1 = -z * q**3
        q2 = q**5 * (2 * z * z - 1)
        ev = math.exp(-v) / rc2
        F, Fz, Fzz = ev * q, ev * q1, ev * q2
        P = math.cos(u) * C1 + math.sin(u) * C2
        Pu = -math.sin(u) * C1 + math.cos(u) * C2
        A5 = g0 * C4 + h0 * C5
        A5v = g1 * C4 + h1 * C5
        A5vv = g2 * C4 + h2 * C5
        W = z * C3 + A5
        value = F * P + q * W
        d1 = np.array([F * Pu, -F * P + q * A5v, Fz * P + q1 * W + q * C3])
        second = {
            (0, 0): -F * P,
            (0, 1): -F * Pu,
            (0, 2): Fz * Pu,
            (1, 1): F * P + q * A5vv,
            (1, 2): -Fz * P + q1 * A5v,
            (2, 2): Fzz * P + q2 * W + 2 * q1 * C3,
        }
        return Jet2(value, d1, np.array([second[k] for k in SECOND_INDEX]))

    lo, hi = sol.interval
    domain = Domain((-20.0, 20.0), (lo + BOUNDARY_GUARD, hi - BOUNDARY_GUARD), (-5.0, 5.0))
    return Immersion(
        evaluate,
        domain,
        f"example12 (c1={c1:g}, c2={c2:g})",
        "example12",
        analytic_jet=analytic,
        expected_lambda=lambda u, v, z: c1 * math.exp(2 * v) * math.sqrt(z * z + 1),
        params=params,
    )


# --- Veronese surface and the Cartan tube ------------------------------------


def _sym_to_r5(M: np.ndarray) -> np.ndarray:
    """Linear map from symmetric 3x3 matrices to R^5 killing multiples of the identity."""
    return np.stack(
        [
            SQRT3 * M[..., 1, 2],
            SQRT3 * M[..., 0, 2],
            SQRT3 * M[..., 0, 1],
            0.5 * SQRT3 * (M[..., 0, 0] - M[..., 1, 1]),
            0.5 * (M[..., 0, 0] + M[..., 1, 1] - 2 * M[..., 2, 2]),
        ],
        axis=-1,
    )


def veronese(a: float, b: float, c: float) -> np.ndarray:
    """Veronese embedding of the unit 2-sphere (mod ±1) into the unit 4-sphere."""
    n = np.array([a, b, c], dtype=float)
    if abs(float(n @ n) - 1.0) > 1e-12:
        raise NotOnSphere(f"({a}, {b}, {c}) is not on the unit 2-sphere")
    return _sym_to_r5(np.outer(n, n))


def _sphere_frame(u, v):
    """Unit normal n and orthonormal tangents t1 = n_u, t2 = n_v / sin u of the 2-sphere."""
    su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
    zero = np.zeros_like(su)
    n = np.stack([su * cv, su * sv, cu], axis=-1)
    t1 = np.stack([cu * cv, cu * sv, -su], axis=-1)
    t2 = np.stack([-sv, cv, zero], axis=-1)
    return n, t1, t2


def veronese_chart(u, v) -> np.ndarray:
    """Veronese surface in spherical angles (u polar, v azimuth)."""
    n, _, _ = _sphere_frame(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return _sym_to_r5(n[..., :, None] * n[..., None, :])


def veronese_mean_curvature(u: float, v: float, step: float = 1e-4) -> float:
    """Norm of the mean curvature vector of the Veronese chart inside the 4-sphere (FD)."""
    cfg = DiffConfig(base_step=step)
    j = jet(lambda a, b, c: veronese_chart(a, b), (u, v, 0.0), cfg)
    X = j.d1[:2]
    g = X @ X.T
    ginv = np.linalg.inv(g)
    lap = sum(ginv[i, k] * j.second(i, k) for i in range(2) for k in range(2))
    basis = np.vstack([j.value, X])
    Q, _ = np.linalg.qr(basis.T)
    normal_part = lap - Q @ (Q.T @ lap)
    return float(0.5 * np.linalg.norm(normal_part))


# Jets of the sphere frame in (u, v): keys "", "u", "v", "uu", "uv", "vv".
_KEYS = ("", "u", "v", "uu", "uv", "vv")


def _frame_jets(u: float, v: float) -> tuple[dict, dict]:
    su, cu, sv, cv = math.sin(u), math.cos(u), math.sin(v), math.cos(v)
    n = np.array([su * cv, su * sv, cu])
    t1 = np.array([cu * cv, cu * sv, -su])
    t2 = np.array([-sv, cv, 0.0])
    w = np.array([cv, sv, 0.0])
    zero = np.zeros(3)
    T1 = {"": t1, "u": -n, "v": cu * t2, "uu": -t1, "uv": -su * t2, "vv": -cu * w}
    T2 = {"": t2, "u": zero, "v": -w, "uu": zero, "uv": zero, "vv": -t2}
    return T1, T2


def _outer_jet(A: dict, B: dict) -> dict:
    o = np.outer
    return {
        "": o(A[""], B[""]),
        "u": o(A["u"], B[""]) + o(A[""], B["u"]),
        "v": o(A["v"], B[""]) + o(A[""], B["v"]),
        "uu": o(A["uu"], B[""]) + 2 * o(A["u"], B["u"]) + o(A[""], B["uu"]),
        "vv": o(A["vv"], B[""]) + 2 * o(A["v"], B["v"]) + o(A[""], B["vv"]),
        "uv": o(A["uv"], B[""]) + o(A["u"], B["v"]) + o(A["v"], B["u"]) + o(A[""], B["uv"]),
    }


def make_cartan_tube(pole_tol: float = 1e-6) -> Immersion:
    """Tube of radius pi/2 over the Veronese surface.

    For the Veronese point p = V(n), with (t1, t2) the spherical-angle
    tangent frame at n, the unit vectors

        xi1 = L(t1 t1^T - t2 t2^T) / sqrt(3),   xi2 = L(t1 t2^T + t2 t1^T) / sqrt(3)

    (L the linear map behind the Veronese formula) are orthonormal and
    orthogonal to p, p_u and p_v.  The chart is x = cos(z) xi1 + sin(z) xi2,
    a point at spherical distance pi/2 from p along a normal direction.
    """

    def _guard(u):
        if np.any(np.abs(np.sin(u)) < pole_tol):
            raise PoleSingularity("chart point too close to a pole of the 2-sphere")

    def evaluate(u, v, z):
        u, v, z = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (u, v, z)))
        _guard(u)
        _, t1, t2 = _sphere_frame(u, v)
        outer = lambda a, b: a[..., :, None] * b[..., None, :]
        xi1 = _sym_to_r5(outer(t1, t1) - outer(t2, t2)) / SQRT3
        xi2 = _sym_to_r5(outer(t1, t2) + outer(t2, t1)) / SQRT3
        return np.cos(z)[..., None] * xi1 + np.sin(z)[..., None] * xi2

    def analytic(p):
        u, v, z = (float(c) for c in p)
        _guard(u)
        T1, T2 = _frame_jets(u, v)
        o11, o22, o12 = _outer_jet(T1, T1), _outer_jet(T2, T2), _outer_jet(T1, T2)
        xi1 = {k: _sym_to_r5(o11[k] - o22[k]) / SQRT3 for k in _KEYS}
        xi2 = {k: _sym_to_r5(o12[k] + o12[k].T) / SQRT3 for k in _KEYS}
        cz, sz = math.cos(z), math.sin(z)
        at = {k: cz * xi1[k] + sz * xi2[k] for k in _KEYS}
        dz = {k: -sz * xi1[k] + cz * xi2[k] for k in _KEYS}
        d1 = np.array([at["u"], at["v"], dz[""]])
        second = {
            (0, 0): at["uu"],
            (0, 1): at["uv"],
            (0, 2): dz["u"],
            (1, 1): at["vv"],
            (1, 2): dz["v"],
            (2, 2): -at[""],
        }
        return Jet2(at[""], d1, np.array([second[k] for k in SECOND_INDEX]))

    domain = Domain(
        (0.0, math.pi),
        (-20.0, 20.0),
        (-20.0, 20.0),
        predicate=lambda u, v, z: np.abs(np.sin(u)) >= pole_tol,
    )
    return Immersion(
        evaluate,
        domain,
        "Cartan tube over the Veronese surface",
        "cartan",
        analytic_jet=analytic,
        expected_lambda=lambda u, v, z: SQRT3,
    )


# --- expression-defined immersions -------------------------------------------

NORM_WARN = 1e-8
NORM_ERROR = 1e-4


def make_expr_immersion(
    components: Sequence[ex.Expr],
    constants: Mapping[str, float] = None,
    domain: Domain = None,
    label: str = "expression immersion",
    expected_lambda: Optional[Callable[[float, float, float], float]] = None,
) -> Immersion:
    """Immersion whose five coordinates are expression ASTs in u, v, z.

    The unit-norm condition is checked on every evaluation: deviations above
    1e-8 warn, above 1e-4 raise NotOnSphere.  Exact jets come from forward
    differentiation of the ASTs.
    """
    comps = [ex.parse(c) if isinstance(c, str) else c for c in components]
    if len(comps) != 5:
        raise ValueError("need exactly five component expressions")
    consts = dict(constants or {})
    domain = domain or Domain()
    # Fail early on unbound names rather than at first evaluation.
    probe = ex.Env(0.0, 0.0, 0.0, consts)
    for c in comps:
        _check_names(c, probe)

    def evaluate(u, v, z):
        u, v, z = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (u, v, z)))
        env = ex.Env(u, v, z, consts)
        cols = [np.broadcast_to(np.asarray(ex.evaluate(c, env), dtype=float), u.shape) for c in comps]
        out = np.stack(cols, axis=-1)
        dev = float(np.max(np.abs(np.linalg.norm(out, axis=-1) - 1.0)))
        if dev > NORM_ERROR:
            raise NotOnSphere(f"{label}: |x| deviates from 1 by {dev:.3e}")
        if dev > NORM_WARN:
            warnings.warn(f"{label}: |x| deviates from 1 by {dev:.3e}", RuntimeWarning, stacklevel=2)
        return out

    def analytic(p):
        env = ex.Env(float(p[0]), float(p[1]), float(p[2]), consts)
        duals = [ex.evaluate_jet(c, env) for c in comps]
        value = np.array([d.val for d in duals])
        if abs(float(np.linalg.norm(value)) - 1.0) > NORM_ERROR:
            raise NotOnSphere(f"{label}: |x| deviates from 1 at {tuple(p)}")
        d1 = np.array([[d.grad[a] for d in duals] for a in range(3)])
        d2 = np.array([[d.hess[a, b] for d in duals] for a, b in SECOND_INDEX])
        return Jet2(value, d1, d2)

    return Immersion(evaluate, domain, label, "expr", analytic_jet=analytic, expected_lambda=expected_lambda, params=consts)


def _check_names(node: ex.Expr, env: ex.Env) -> None:
    if isinstance(node, ex.NamedConst):
        env.lookup_const(node.name)
    elif isinstance(node, ex.Unary):
        _check_names(node.child, env)
    elif isinstance(node, ex.Binary):
        _check_names(node.left, env)
        _check_names(node.right, env)
    elif isinstance(node, ex.Call):
        _check_names(node.arg, env)


def example11_component_sources() -> list[str]:
    """Source text of example11 with the default basis, one string per coordinate."""
    return [
        "cos(sqrt(2)*u)/sqrt(2)/sqrt(1+z^2)",
        "sin(sqrt(2)*u)/sqrt(2)/sqrt(1+z^2)",
        "cos(sqrt(2)*v)/sqrt(2)/sqrt(1+z^2)",
        "sin(sqrt(2)*v)/sqrt(2)/sqrt(1+z^2)",
        "z/sqrt(1+z^2)",
    ]
