"""Small dense linear algebra and finite-difference jets on R^5 charts.

Everything here works on plain numpy arrays: a point of R^5 is a float
array of shape ``(5,)``, a 3x3 matrix is ``(3, 3)``.  Chart points are
triples ``(u, v, z)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateFrame, DomainEscape, NotPositiveDefinite

__all__ = [
    "AXES",
    "SECOND_INDEX",
    "DiffConfig",
    "EigResult",
    "Jet2",
    "central_derivative",
    "dot",
    "generalized_sym_eig3",
    "jet",
    "normal_complement",
    "step_sizes",
]

AXES = ("u", "v", "z")
# Storage order of the six distinct second partials.
SECOND_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_PAIR_SLOT = {pair: k for k, pair in enumerate(SECOND_INDEX)}
_PAIR_SLOT.update({(j, i): k for (i, j), k in list(_PAIR_SLOT.items())})

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiffConfig:
    """Finite-difference settings.

    ``base_step`` and ``richardson`` govern the jet of the immersion itself;
    ``frame_step`` is the (larger) step used when differentiating derived
    fields such as principal frames, normals and connection coefficients.
    With ``analytic`` set, immersions that carry a hand-coded jet use it
    instead of finite differences.
    """

    base_step: float = 1e-4
    richardson: bool = True
    degenerate_gap: float = 1e-9
    frame_step: float = 1e-2
    analytic: bool = False

    def __post_init__(self) -> None:
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if not self.degenerate_gap > 0:
            raise ValueError("degenerate_gap must be positive")
        if not self.frame_step > 0:
            raise ValueError("frame_step must be positive")


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a chart map into R^5 at one point.

    ``d1[a]`` is the partial along axis ``a``; ``d2[k]`` is the second
    partial for the index pair ``SECOND_INDEX[k]``.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def second(self, a: int, b: int) -> np.ndarray:
        return self.d2[_PAIR_SLOT[(a, b)]]

    def hessian(self) -> np.ndarray:
        """Full ``(3, 3, 5)`` array of second partials."""
        out = np.empty((3, 3, self.value.shape[-1]))
        for a in range(3):
            for b in range(3):
                out[a, b] = self.second(a, b)
        return out


@dataclass(frozen=True)
class EigResult:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns, B-orthonormal
    min_gap: float
    degenerate: bool


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.dot(np.asarray(a, dtype=float), np.asarray(b, dtype=float)))


def normal_complement(v1, v2, v3, v4) -> np.ndarray:
    """Unit vector of R^5 orthogonal to four given vectors.

    Generalized cross product: the cofactors of a 5x5 determinant whose
    first row is the symbolic basis and whose remaining rows are the inputs.
    """
    rows = np.array([v1, v2, v3, v4], dtype=float)
    if rows.shape != (4, 5):
        raise ValueError("normal_complement expects four vectors of R^5")
    n = np.empty(5)
    for i in range(5):
        minor = np.delete(rows, i, axis=1)
        n[i] = (-1) ** i * np.linalg.det(minor)
    norm = np.linalg.norm(n)
    if norm < 1e-10:
        raise DegenerateFrame(f"inputs are nearly dependent (cofactor norm {norm:.3e})")
    return n / norm


def step_sizes(p: Sequence[float], base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(np.asarray(p, dtype=float)))


def _stencil_offsets() -> tuple[np.ndarray, list]:
    """Unit offsets for one central-difference stencil and their roles."""
    offsets = [np.zeros(3)]
    roles: list = [("center",)]
    for a in range(3):
        for s in (1, -1):
            e = np.zeros(3)
            e[a] = s
            offsets.append(e)
            roles.append(("axis", a, s))
    for a, b in itertools.combinations(range(3), 2):
        for sa, sb in itertools.product((1, -1), repeat=2):
            e = np.zeros(3)
            e[a], e[b] = sa, sb
            offsets.append(e)
            roles.append(("pair", a, b, sa * sb))
    return np.array(offsets), roles


_OFFSETS, _ROLES = _stencil_offsets()


def _check_domain(domain, pts: np.ndarray) -> None:
    if domain is None:
        return
    inside = domain.contains(pts[:, 0], pts[:, 1], pts[:, 2])
    if not np.all(inside):
        bad = pts[~np.asarray(inside, dtype=bool)][0]
        raise DomainEscape(f"stencil point {tuple(bad)} leaves the validity domain")


def _raw_jet(f: Evaluator, p: np.ndarray, h: np.ndarray, domain) -> Jet2:
    pts = p + _OFFSETS * h
    _check_domain(domain, pts)
    vals = np.asarray(f(pts[:, 0], pts[:, 1], pts[:, 2]), dtype=float)
    center = vals[0]
    plus = {}
    minus = {}
    cross: dict = {}
    for val, role in zip(vals[1:], _ROLES[1:]):
        if role[0] == "axis":
            (plus if role[2] > 0 else minus)[role[1]] = val
        else:
            a, b, sign = role[1], role[2], role[3]
            cross[(a, b)] = cross.get((a, b), 0.0) + sign * val
    d1 = np.array([(plus[a] - minus[a]) / (2 * h[a]) for a in range(3)])
    d2 = np.empty((6, vals.shape[1]))
    for k, (a, b) in enumerate(SECOND_INDEX):
        if a == b:
            d2[k] = (plus[a] - 2 * center + minus[a]) / h[a] ** 2
        else:
            d2[k] = cross[(a, b)] / (4 * h[a] * h[b])
    return Jet2(center, d1, d2)


def jet(f: Evaluator, p: Sequence[float], cfg: DiffConfig = DiffConfig(), domain=None) -> Jet2:
    """Central-difference jet of ``f`` at chart point ``p``.

    Steps are ``base_step * max(1, |p_a|)`` per axis.  With Richardson on,
    estimates at h and h/2 are combined as (4 D(h/2) - D(h)) / 3, leaving an
    O(h^4) truncation error against an O(eps / h^2) roundoff floor.
    """
    p = np.asarray(p, dtype=float)
    h = step_sizes(p, cfg.base_step)
    coarse = _raw_jet(f, p, h, domain)
    if not cfg.richardson:
        return coarse
    fine = _raw_jet(f, p, h / 2, domain)
    return Jet2(
        fine.value,
        (4 * fine.d1 - coarse.d1) / 3,
        (4 * fine.d2 - coarse.d2) / 3,
    )


def central_derivative(
    fn: Callable[[np.ndarray], np.ndarray],
    p: Sequence[float],
    axis: int,
    step: float,
    richardson: bool = True,
    scaled: bool = True,
) -> np.ndarray:
    """First partial of an arbitrary array-valued field along one chart axis.

    With ``scaled`` the step is ``step * max(1, |p[axis]|)``, otherwise it is
    used as given.
    """
    p = np.asarray(p, dtype=float)
    h = step * max(1.0, abs(p[axis])) if scaled else step
    e = np.zeros(3)
    e[axis] = 1.0

    def diff(hh: float) -> np.ndarray:
        return (np.asarray(fn(p + hh * e)) - np.asarray(fn(p - hh * e))) / (2 * hh)

    if not richardson:
        return diff(h)
    return (4 * diff(h / 2) - diff(h)) / 3


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def generalized_sym_eig3(A, B, degenerate_gap: float = 1e-9) -> EigResult:
    """Solve ``A v = lam B v`` for symmetric A and symmetric positive-definite B.

    Reduces to a standard symmetric problem through the Cholesky factor of B.
    Eigenvalues come back in descending order, eigenvectors as B-orthonormal
    columns whose largest-magnitude component is positive.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("metric matrix is not positive-definite") from exc
    Linv = np.linalg.inv(L)
    C = Linv @ A @ Linv.T
    w, W = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(w)[::-1]
    w = w[order]
    V = Linv.T @ W[:, order]
    V = _canonical_signs(V)
    gap = float(np.min(np.abs(np.diff(w))))
    return EigResult(w, V, gap, gap < degenerate_gap)
