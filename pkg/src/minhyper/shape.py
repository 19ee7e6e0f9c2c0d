"""Pointwise extrinsic geometry of hypersurfaces of the unit 4-sphere.

Conventions: chart axes are (u, v, z) = (0, 1, 2).  ``X`` is the 5x3 matrix
whose columns are x_u, x_v, x_z.  Frames are 3x3 matrices ``E`` whose
columns are chart components of e1, e2, e3; ``T = X @ E`` holds the same
vectors pushed into R^5.  Principal curvatures are reported in the order
(largest, most negative, middle), which for a spectrum (lam, 0, -lam) is the
order (lam, -lam, 0) used throughout the identities checked here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DegeneratePencil, DomainEscape, FrameAlignmentFailure
from .families import Immersion
from .kernel import DiffConfig, Jet2, central_derivative, generalized_sym_eig3, normal_complement

__all__ = [
    "AlphaSample",
    "CurvatureSample",
    "PointAnalysis",
    "adapted_analysis",
    "alpha_coefficients",
    "align_frame",
    "christoffel",
    "christoffel_from_metric",
    "codazzi_residuals",
    "curvature",
    "frame_structure_residuals",
    "fundamental_forms",
    "gauss_residual",
    "lie_bracket",
    "lie_bracket_residuals",
    "orient_normal",
    "pde28_residuals",
    "riemann",
    "scalar_consistency",
    "self_adjointness",
    "structure_residuals_prop33",
    "structure_residuals_prop36",
    "weingarten_residual",
]

ALIGN_FLOOR = 0.9
# Order (largest, most negative, middle) of the descending eigenvalues.
_CANONICAL_ORDER = (0, 2, 1)


@dataclass(frozen=True)
class CurvatureSample:
    point: tuple[float, float, float]
    I: np.ndarray
    II: np.ndarray
    S: np.ndarray
    normal: np.ndarray
    lambdas: np.ndarray
    raw_lambdas: np.ndarray
    frame: np.ndarray
    tangent_frame: np.ndarray
    H: float
    H2: float
    K: float
    degenerate: bool
    canonical_spectrum: bool


@dataclass(frozen=True)
class AlphaSample:
    alpha: np.ndarray  # alpha[0] is alpha_1
    lam: float

    def __getitem__(self, k: int) -> float:
        """1-based access: ``sample[3]`` is alpha_3."""
        return float(self.alpha[k - 1])


def orient_normal(y: np.ndarray, ref: Optional[np.ndarray] = None) -> np.ndarray:
    if ref is not None:
        return y if float(np.dot(y, ref)) >= 0 else -y
    for comp in y:
        if abs(comp) > 1e-8:
            return y if comp > 0 else -y
    return y


def _forms(j: Jet2, ref_normal: Optional[np.ndarray] = None):
    X = j.d1.T
    I = X.T @ X
    y = orient_normal(normal_complement(j.value, *j.d1), ref_normal)
    II = np.array([[float(np.dot(j.second(a, b), y)) for b in range(3)] for a in range(3)])
    return I, 0.5 * (II + II.T), y


def fundamental_forms(imm: Immersion, p: Sequence[float], cfg: DiffConfig = DiffConfig()):
    """First and second fundamental forms and the unit normal y at ``p``.

    II_ab = <x_ab, y>: the components of x_ab along x and along the tangent
    space are annihilated by the inner product with y.
    """
    return _forms(imm.jet(p, cfg))


def align_frame(T: np.ndarray, ref_T: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Greedy permutation and signs matching the columns of ``T`` to ``ref_T``."""
    perm: list[int] = []
    signs = np.empty(3)
    for i in range(3):
        dots = [(abs(float(np.dot(ref_T[:, i], T[:, j]))), j) for j in range(3) if j not in perm]
        best, j = max(dots)
        if best <= ALIGN_FLOOR:
            raise FrameAlignmentFailure(f"frame vector {i + 1} has no partner (best |dot| {best:.3f})")
        perm.append(j)
        signs[i] = 1.0 if float(np.dot(ref_T[:, i], T[:, j])) > 0 else -1.0
    return perm, signs


def _sample(
    p: Sequence[float],
    j: Jet2,
    cfg: DiffConfig,
    ref_frame: Optional[np.ndarray] = None,
    ref_normal: Optional[np.ndarray] = None,
) -> CurvatureSample:
    I, II, y = _forms(j, ref_normal)
    eig = generalized_sym_eig3(II, I, cfg.degenerate_gap)
    order = list(_CANONICAL_ORDER)
    E = eig.vectors[:, order]
    lams = eig.values[order]
    X = j.d1.T
    T = X @ E
    if ref_frame is not None:
        perm, signs = align_frame(T, ref_frame)
        E = E[:, perm] * signs
        T = T[:, perm] * signs
        lams = lams[perm]
    S = np.linalg.solve(I, II)
    l1, l2, l3 = eig.values
    scale = max(1.0, float(np.max(np.abs(eig.values))))
    canonical = abs(l1 + l3) <= 1e-6 * scale and abs(l2) <= 1e-6 * scale
    return CurvatureSample(
        point=tuple(float(c) for c in p),
        I=I,
        II=II,
        S=S,
        normal=y,
        lambdas=lams,
        raw_lambdas=eig.values,
        frame=E,
        tangent_frame=T,
        H=float((l1 + l2 + l3) / 3),
        H2=float((l1 * l2 + l1 * l3 + l2 * l3) / 3),
        K=float(l1 * l2 * l3),
        degenerate=eig.degenerate,
        canonical_spectrum=canonical,
    )


def curvature(imm: Immersion, p: Sequence[float], cfg: DiffConfig = DiffConfig()) -> CurvatureSample:
    return PointAnalysis(imm, p, cfg).sample


class PointAnalysis:
    """Lazily computed geometry at one chart point.

    Quantities that need derivatives of frame fields are computed by
    central differences of frames evaluated at neighbouring points and
    aligned (order and sign) to the frame here.
    """

    def __init__(
        self,
        imm: Immersion,
        p: Sequence[float],
        cfg: DiffConfig = DiffConfig(),
        ref_frame: Optional[np.ndarray] = None,
        ref_normal: Optional[np.ndarray] = None,
    ):
        self.imm = imm
        self.p = np.asarray(p, dtype=float)
        self.cfg = cfg
        self.ref_frame = ref_frame
        self.ref_normal = ref_normal

    @cached_property
    def jet(self) -> Jet2:
        return self.imm.jet(self.p, self.cfg)

    @cached_property
    def sample(self) -> CurvatureSample:
        return _sample(self.p, self.jet, self.cfg, self.ref_frame, self.ref_normal)

    @property
    def X(self) -> np.ndarray:
        return self.jet.d1.T

    def step(self, axis: int) -> float:
        """Absolute step for derivatives of derived fields along ``axis``.

        Capped at a quarter of the clearance to the chart box so that nested
        stencils (a derivative of a derivative) stay inside the domain.
        """
        dom = self.imm.domain
        lo, hi = (dom.u_range, dom.v_range, dom.z_range)[axis]
        clearance = min(self.p[axis] - lo, hi - self.p[axis])
        h = min(self.cfg.frame_step, 0.25 * clearance)
        if not h > 0:
            raise DomainEscape(f"no room for a difference stencil at {tuple(self.p)}")
        return h

    def derivative(self, fn: Callable[[np.ndarray], np.ndarray], axis: int) -> np.ndarray:
        return central_derivative(fn, self.p, axis, self.step(axis), self.cfg.richardson, scaled=False)

    def gradient(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Array of the three chart partials of ``fn``."""
        return np.array([self.derivative(fn, a) for a in range(3)])

    def neighbour(self, q: Sequence[float]) -> "PointAnalysis":
        s = self.sample
        return PointAnalysis(self.imm, q, self.cfg, s.tangent_frame, s.normal)

    def _require_separated(self, sample: CurvatureSample) -> None:
        if sample.degenerate:
            raise DegeneratePencil(f"principal curvatures collide near {sample.point}")

    @cached_property
    def frame_derivatives(self) -> dict:
        """Chart partials of T, E, the principal curvatures and the normal."""
        s = self.sample
        self._require_separated(s)

        def pack(q):
            n = self.neighbour(q).sample
            self._require_separated(n)
            return np.concatenate([n.tangent_frame.ravel(), n.frame.ravel(), n.lambdas, n.normal])

        parts = self.gradient(pack)
        return {
            "T": parts[:, :15].reshape(3, 5, 3),
            "E": parts[:, 15:24].reshape(3, 3, 3),
            "lam": parts[:, 24:27],
            "y": parts[:, 27:32],
        }

    @cached_property
    def connection(self) -> np.ndarray:
        """omega[i, j, k] = I(nabla_{e_i} e_j, e_k)."""
        s = self.sample
        dT = self.frame_derivatives["T"]
        E, T = s.frame, s.tangent_frame
        D = np.einsum("ai,ajk->ijk", E, dT)  # D[i, :, j] = dbar_{e_i} T_j
        D = np.transpose(D, (0, 2, 1))  # D[i, j, :]
        return np.einsum("ijm,mk->ijk", D, T)

    @cached_property
    def ambient_derivatives(self) -> np.ndarray:
        """D[i, j] = flat derivative of dx(e_j) along e_i, as a vector of R^5."""
        s = self.sample
        dT = self.frame_derivatives["T"]
        return np.einsum("ai,amj->ijm", s.frame, dT)

    @cached_property
    def alpha(self) -> AlphaSample:
        w = self.connection
        a = np.empty(9)
        a[0] = w[0, 0, 1]
        a[1] = w[0, 0, 2]
        a[2] = w[0, 1, 2]
        a[3] = -w[1, 0, 1]
        a[4] = w[1, 1, 2]
        a[5] = w[1, 0, 2]
        a[6] = -w[2, 0, 2]
        a[7] = -w[2, 1, 2]
        a[8] = w[2, 0, 1]
        return AlphaSample(a, float(self.sample.lambdas[0]))

    def directional(self, partials: np.ndarray) -> np.ndarray:
        """Frame derivatives e_i(f) from chart partials of shape (3, ...)."""
        return np.tensordot(self.sample.frame.T, partials, axes=(1, 0))

    @cached_property
    def frame_lambda_derivatives(self) -> np.ndarray:
        """d[i, j] = e_i(lambda_j)."""
        return self.directional(self.frame_derivatives["lam"])

    @cached_property
    def normal_derivatives(self) -> np.ndarray:
        """Chart partials y_a of the unit normal (oriented as in ``sample``)."""
        y0 = self.sample.normal

        def normal_at(q):
            return _forms(self.imm.jet(q, self.cfg), y0)[2]

        return self.gradient(normal_at)


def alpha_coefficients(imm: Immersion, p: Sequence[float], cfg: DiffConfig = DiffConfig()) -> AlphaSample:
    return PointAnalysis(imm, p, cfg).alpha


# --- pointwise invariants ------------------------------------------------------


def self_adjointness(sample: CurvatureSample) -> float:
    IS = sample.I @ sample.S
    return float(np.linalg.norm(IS - IS.T) / max(np.linalg.norm(sample.II), 1e-300))


def scalar_consistency(sample: CurvatureSample) -> dict[str, float]:
    S = sample.S
    tr = np.trace(S)
    tr2 = np.trace(S @ S)
    ref = {"H": tr / 3, "H2": (tr * tr - tr2) / 6, "K": np.linalg.det(S)}
    scale = max(1.0, float(np.max(np.abs(sample.raw_lambdas))) ** 3)
    return {k: abs(getattr(sample, k) - float(v)) / scale for k, v in ref.items()}


def weingarten_residual(pa: PointAnalysis) -> float:
    """max_a || y_a + sum_j S_ja x_j ||, the Weingarten equation dy = -dx(S)."""
    s = pa.sample
    dy = pa.normal_derivatives
    X = pa.X
    return float(max(np.linalg.norm(dy[a] + X @ s.S[:, a]) for a in range(3)))


# --- Codazzi and the K = 0 specialisations -------------------------------------


def codazzi_residuals(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig()) -> dict[str, float]:
    pa = _analysis(imm_or_pa, p, cfg)
    a = pa.alpha
    l1, l2, l3 = pa.sample.lambdas
    d = pa.frame_lambda_derivatives  # d[i, j] = e_{i+1}(lambda_{j+1})
    lam = l1
    res = {
        "2.5:e1(l2)": d[0, 1] - a[4] * (l2 - l1),
        "2.5:e1(l3)": d[0, 2] - a[7] * (l3 - l1),
        "2.5:e2(l1)": d[1, 0] - a[1] * (l1 - l2),
        "2.5:e2(l3)": d[1, 2] - a[8] * (l3 - l2),
        "2.5:e3(l1)": d[2, 0] - a[2] * (l1 - l3),
        "2.5:e3(l2)": d[2, 1] - a[5] * (l2 - l3),
        "2.5:chain_93": a[9] * (l1 - l2) - a[3] * (l2 - l3),
        "2.5:chain_36": a[3] * (l2 - l3) - a[6] * (l1 - l3),
        "2.6:e1(lam)": d[0, 0] - 2 * a[4] * lam,
        "2.6:e2(lam)": d[1, 0] - 2 * a[1] * lam,
        "2.6:e3(lam)": d[2, 0] - a[2] * lam,
        "2.7:a5=a2": a[5] - a[2],
        "2.7:2a9=-a3": 2 * a[9] + a[3],
        "2.7:-a3=a6": a[6] + a[3],
        "2.7:2a9=a6": 2 * a[9] - a[6],
        "2.7:a7": a[7],
        "2.7:a8": a[8],
    }
    return {k: abs(float(v)) for k, v in res.items()}


def frame_structure_residuals(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig()) -> dict[str, float]:
    """Residuals of the frame form of the Gauss-Weingarten system.

    The sixth line is checked as alpha3 dx(e1) - alpha2 dx(e2); the literal
    variant alpha3 dx(e2) - alpha2 dx(e2) is returned under a ``literal``
    key for reporting only.
    """
    pa = _analysis(imm_or_pa, p, cfg)
    s = pa.sample
    a = pa.alpha
    D = pa.ambient_derivatives
    T = s.tangent_frame
    T1, T2, T3 = T[:, 0], T[:, 1], T[:, 2]
    x = pa.jet.value
    y = s.normal
    lam = s.lambdas[0]
    dy = pa.directional(pa.normal_derivatives)
    rhs = {
        "2.9:11": (D[0, 0], a[1] * T2 + a[2] * T3 + lam * y - x),
        "2.9:12": (D[0, 1], -a[1] * T1 + a[3] * T3),
        "2.9:13": (D[0, 2], -a[2] * T1 - a[3] * T2),
        "2.9:21": (D[1, 0], -a[4] * T2 - a[3] * T3),
        "2.9:22": (D[1, 1], a[4] * T1 + a[2] * T3 - lam * y - x),
        "2.9:23": (D[1, 2], a[3] * T1 - a[2] * T2),
        "2.9:31": (D[2, 0], -0.5 * a[3] * T2),
        "2.9:32": (D[2, 1], 0.5 * a[3] * T1),
        "2.9:33": (D[2, 2], -x),
        "2.9:dy(e1)": (dy[0], -lam * T1),
        "2.9:dy(e2)": (dy[1], lam * T2),
        "2.9:dy(e3)": (dy[2], np.zeros(5)),
    }
    out = {k: float(np.linalg.norm(lhs - r)) for k, (lhs, r) in rhs.items()}
    out["literal:2.9:23"] = float(np.linalg.norm(D[1, 2] - (a[3] * T2 - a[2] * T2)))
    return out


# --- Lie brackets --------------------------------------------------------------


def lie_bracket(frame_fn: Callable[[np.ndarray], np.ndarray], p: Sequence[float], step: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Chart components B[:, i, j] of [f_i, f_j] for a frame field given as 3x3 column matrices."""
    p = np.asarray(p, dtype=float)
    F = np.asarray(frame_fn(p), dtype=float)
    dF = np.array([central_derivative(frame_fn, p, a, step, richardson) for a in range(3)])
    # (f_i f_j)^b = sum_a F[a, i] dF[a, b, j]
    grad = np.einsum("ai,abj->bij", F, dF)
    return grad - np.transpose(grad, (0, 2, 1))


def lie_bracket_residuals(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig()) -> dict[str, float]:
    pa = _analysis(imm_or_pa, p, cfg)
    s = pa.sample
    a = pa.alpha
    E = s.frame
    dE = pa.frame_derivatives["E"]
    grad = np.einsum("ai,abj->bij", E, dE)
    B = grad - np.transpose(grad, (0, 2, 1))
    coeff = np.einsum("bij,bc,ck->ijk", B, s.I, E)  # coefficients along e_k
    expected = {
        (0, 1): (-a[1], a[4], 2 * a[3]),
        (0, 2): (-a[2], -0.5 * a[3], 0.0),
        (1, 2): (0.5 * a[3], -a[2], 0.0),
    }
    return {
        f"[e{i + 1},e{j + 1}]": float(np.linalg.norm(coeff[i, j] - np.array(rhs)))
        for (i, j), rhs in expected.items()
    }


# --- Gauss equation --------------------------------------------------------------


def christoffel(j: Jet2) -> np.ndarray:
    """G[k, a, b] = Gamma^k_ab = I^{kl} <x_ab, x_l>."""
    X = j.d1.T
    Iinv = np.linalg.inv(X.T @ X)
    low = np.einsum("abm,ml->abl", j.hessian(), X)
    return np.einsum("kl,abl->kab", Iinv, low)


def christoffel_from_metric(metric_fn: Callable[[np.ndarray], np.ndarray], p: Sequence[float], step: float = 1e-3) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    g = np.asarray(metric_fn(p), dtype=float)
    dg = np.array([central_derivative(metric_fn, p, a, step) for a in range(3)])  # dg[c, a, b]
    ginv = np.linalg.inv(g)
    # Gamma_{l,ab} = 1/2 (d_a g_bl + d_b g_al - d_l g_ab)
    low = 0.5 * (np.einsum("abl->lab", dg) + np.einsum("bal->lab", dg) - dg)
    return np.einsum("kl,lab->kab", ginv, low)


def riemann(
    gamma_fn: Callable[[np.ndarray], np.ndarray],
    p: Sequence[float],
    step: Union[float, Sequence[float]] = 1e-3,
    richardson: bool = True,
    scaled: bool = True,
) -> np.ndarray:
    """R[i, j, k, :] = chart components of R(d_i, d_j) d_k = nabla_i nabla_j d_k - nabla_j nabla_i d_k."""
    p = np.asarray(p, dtype=float)
    steps = np.broadcast_to(np.asarray(step, dtype=float), (3,))
    G = np.asarray(gamma_fn(p))
    dG = np.array([central_derivative(gamma_fn, p, a, steps[a], richardson, scaled) for a in range(3)])  # dG[i, l, j, k]
    R = np.einsum("iljk->ijkl", dG) - np.einsum("jlik->ijkl", dG)
    R += np.einsum("mjk,lim->ijkl", G, G) - np.einsum("mik,ljm->ijkl", G, G)
    return R


def gauss_residual(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig(), detail: bool = False):
    """max over frame pairs i<j and k of ||R(e_i,e_j)e_k - RHS||_I."""
    pa = _analysis(imm_or_pa, p, cfg)
    s = pa.sample
    imm, cfg = pa.imm, pa.cfg
    steps = [pa.step(a) for a in range(3)]
    R = riemann(lambda q: christoffel(imm.jet(q, cfg)), pa.p, steps, cfg.richardson, scaled=False)
    E, I, II, S = s.frame, s.I, s.II, s.S
    worst = 0.0
    out = {}
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for k in range(3):
            ei, ej, ek = E[:, i], E[:, j], E[:, k]
            lhs = np.einsum("a,b,c,abcl->l", ei, ej, ek, R)
            rhs = (ek @ I @ ej) * ei - (ek @ I @ ei) * ej + (ek @ II @ ej) * (S @ ei) - (ek @ II @ ei) * (S @ ej)
            diff = lhs - rhs
            val = float(math.sqrt(max(diff @ I @ diff, 0.0)))
            out[f"R(e{i + 1},e{j + 1})e{k + 1}"] = val
            worst = max(worst, val)
    return out if detail else worst


# --- second-order structure systems in the adapted coordinates ------------------


def _x_uuu(pa: PointAnalysis) -> np.ndarray:
    imm, cfg = pa.imm, pa.cfg
    return pa.derivative(lambda q: imm.jet(q, cfg).second(0, 0), 0)


def _pick_orientation(pa: PointAnalysis, residual: Callable[[np.ndarray], float]) -> float:
    y = pa.sample.normal
    return 1.0 if residual(y) <= residual(-y) else -1.0


def structure_residuals_prop33(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig()) -> dict[str, float]:
    """Second-order system satisfied by example11 in its own coordinates, lam = sqrt(z^2+1)."""
    pa = _analysis(imm_or_pa, p, cfg)
    j = pa.jet
    x = j.value
    xu, xv, xz = j.d1
    z = pa.p[2]
    lam = math.sqrt(z * z + 1)
    w = z * (z * z + 1)
    e10 = lambda y: float(np.linalg.norm(lam**2 * j.second(0, 0) - (w * xz + lam * y - x)))
    sign = _pick_orientation(pa, e10)
    y = sign * pa.sample.normal
    dy = sign * pa.normal_derivatives
    k = z / (z * z + 1)
    n = np.linalg.norm
    res = {
        "3.10": e10(y),
        "3.11": n(j.second(0, 1)),
        "3.12": n(j.second(0, 2) + k * xu),
        "3.13": n(lam**2 * j.second(1, 1) - (w * xz - lam * y - x)),
        "3.14": n(j.second(1, 2) + k * xv),
        "3.15": n((z * z + 1) ** 2 * j.second(2, 2) + 2 * w * xz + x),
        "3.16": n(dy[0] + lam * xu),
        "3.17": n(dy[1] - lam * xv),
        "3.18": n(dy[2]),
        "x_uuu": n(_x_uuu(pa) + 2 * xu),
    }
    return {k_: float(v) for k_, v in res.items()}


def structure_residuals_prop36(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig(), with_alpha: bool = True) -> dict[str, float]:
    """Second-order system, f-identity and coefficient relations of example12."""
    pa = _analysis(imm_or_pa, p, cfg)
    params = pa.imm.params
    c1, c2 = params.c1, params.c2
    j = pa.jet
    x = j.value
    xu, xv, xz = j.d1
    u, v, z = pa.p
    a2 = z
    lam = c1 * math.exp(2 * v) * math.sqrt(z * z + 1)
    a1sq = (z * z + 1) * (c2 * math.exp(2 * v) - 1 - c1 * c1 * math.exp(4 * v))
    f2 = 1.0 / (1 + lam * lam + a1sq + a2 * a2)
    k = a2 / (a2 * a2 + 1)
    n = np.linalg.norm
    e32 = lambda y: float(n(j.second(0, 0) - f2 * (a1sq * xv + a2 * (a2 * a2 + 1) * xz + lam * y - x)))
    sign = _pick_orientation(pa, e32)
    y = sign * pa.sample.normal
    dy = sign * pa.normal_derivatives
    res = {
        "3.25:f2": abs((1 + z * z) * f2 - math.exp(-2 * v) / c2),
        "3.29": n(j.second(1, 2) + k * xv),
        "3.30": n(j.second(0, 2) + k * xu),
        "3.31": n(j.second(0, 1) + xu),
        "3.32": e32(y),
        "3.33": n(j.second(2, 2) + 2 * k * xz + x / (a2 * a2 + 1) ** 2),
        "3.34": n(j.second(1, 1) - (-(a1sq + a2 * a2 + 1 - lam * lam) * xv + a2 * (a2 * a2 + 1) * xz - lam * y - x) / a1sq),
        "3.35": n(dy[0] + lam * xu),
        "3.36": n(dy[1] - lam * xv),
        "3.37": n(dy[2]),
        "3.38": n(_x_uuu(pa) + xu),
    }
    res.update(_decomposition_residuals(pa.imm, u, v, z, f2, c2))
    if with_alpha:
        al = (pa if sign > 0 else PointAnalysis(pa.imm, pa.p, pa.cfg, ref_normal=y)).alpha
        f_num2 = 1.0 / (1 + al.lam**2 + al[1] ** 2 + al[2] ** 2)
        res["3.25:f2_numeric"] = abs(f_num2 - f2)
    return {k_: float(val) for k_, val in res.items()}


def adapted_analysis(imm: Immersion, p: Sequence[float], cfg: DiffConfig = DiffConfig()) -> PointAnalysis:
    """Analysis whose normal matches the orientation of the coordinate system.

    Reversing y swaps e1 and e2 and with them alpha1 and alpha4.  For
    example12 the coordinates are built so that alpha4 vanishes, which
    fixes the sign through the x_uu equation; other families keep the
    canonical sign.
    """
    pa = PointAnalysis(imm, p, cfg)
    if imm.family != "example12":
        return pa
    params = imm.params
    c1, c2 = params.c1, params.c2
    j = pa.jet
    _, v, z = pa.p
    lam = c1 * math.exp(2 * v) * math.sqrt(z * z + 1)
    a1sq = (z * z + 1) * (c2 * math.exp(2 * v) - 1 - c1 * c1 * math.exp(4 * v))
    f2 = 1.0 / (1 + lam * lam + a1sq + z * z)
    base = a1sq * j.d1[1] + z * (z * z + 1) * j.d1[2] - j.value
    e32 = lambda y: float(np.linalg.norm(j.second(0, 0) - f2 * (base + lam * y)))
    if _pick_orientation(pa, e32) > 0:
        return pa
    return PointAnalysis(imm, p, cfg, ref_normal=-pa.sample.normal)


def _decomposition_residuals(imm: Immersion, u: float, v: float, z: float, f2: float, c2: float) -> dict[str, float]:
    """Split x = cos(u) A1 + sin(u) A2 + A3 by sampling u and test the Gram relations."""
    x0 = imm.point((0.0, v, z))
    xpi = imm.point((math.pi, v, z))
    xhalf = imm.point((0.5 * math.pi, v, z))
    A1 = 0.5 * (x0 - xpi)
    A3 = 0.5 * (x0 + xpi)
    A2 = xhalf - A3
    xu = -math.sin(u) * A1 + math.cos(u) * A2
    A5 = 0.5 * (imm.point((0.0, v, 0.0)) + imm.point((math.pi, v, 0.0)))
    d = lambda a, b: float(np.dot(a, b))
    return {
        "3.39": float(np.linalg.norm(imm.point((u, v, z)) - (math.cos(u) * A1 + math.sin(u) * A2 + A3))),
        "3.40": max(abs(d(A1, A1) - f2), abs(d(A2, A2) - f2), abs(d(A1, A2)), abs(d(xu, xu) - f2)),
        "3.42": max(abs(1 - f2 - d(A3, A3)), abs(d(A1, A3)), abs(d(A2, A3))),
        "3.47": abs(d(A5, A5) - (1 - math.exp(-2 * v) / c2)),
    }


# --- the Gauss-derived first-order system for the alphas -------------------------


def pde28_residuals(imm_or_pa, p=None, cfg: DiffConfig = DiffConfig()) -> dict[str, float]:
    pa = _analysis(imm_or_pa, p, cfg)
    a = pa.alpha

    def alphas(q):
        return pa.neighbour(q).alpha.alpha

    dal = pa.gradient(alphas)
    e = pa.directional(dal)  # e[i, k] = e_{i+1}(alpha_{k+1})
    E = lambda i, k: e[i - 1, k - 1]
    lam = a.lam
    res = {
        "2.8:1": E(1, 4) + E(2, 1) - (1 - lam**2 + a[1] ** 2 + a[2] ** 2 + 2 * a[3] ** 2 + a[4] ** 2),
        "2.8:2": E(3, 1) + 0.5 * E(1, 3) - (a[1] * a[2] - 0.5 * a[3] * a[4]),
        "2.8:3": E(3, 4) - 0.5 * E(2, 3) - (a[2] * a[4] + 0.5 * a[1] * a[3]),
        "2.8:4": E(3, 2) - (1 + a[2] ** 2 - a[3] ** 2),
        "2.8:5": E(3, 3) - 2 * a[2] * a[3],
        "2.8:6": E(1, 2) - E(2, 3),
        "2.8:7": E(1, 3) + E(2, 2),
    }
    return {k: abs(float(v)) for k, v in res.items()}


def _analysis(imm_or_pa, p, cfg) -> PointAnalysis:
    if isinstance(imm_or_pa, PointAnalysis):
        return imm_or_pa
    return PointAnalysis(imm_or_pa, p, cfg)
