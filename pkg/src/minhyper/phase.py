"""Phase function and oscillatory solutions of the second-order ODE

    (c2 e^{2v} - 1 - c1^2 e^{4v}) A'' + (1 - c1^2 e^{4v}) A' + 2 A = 0

on the open interval where the leading coefficient is positive.  Writing
A = sqrt(c2 - e^{-2v}) B turns it into B'' - (phi''/phi') B' + phi'^2 B = 0,
solved by cos(phi) and sin(phi) for the phase phi defined through its
closed-form derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptyInterval, OutOfInterval, QuadratureFailure

__all__ = [
    "PhaseSolution",
    "adaptive_simpson",
    "gh",
    "gh_jet",
    "leading_coefficient",
    "ode_residual_323",
    "ode_residual_324",
    "phi",
    "phi_log_derivative",
    "phi_prime",
    "phi_second",
    "phi_second_fd",
    "solve_phase",
    "validity_interval",
]

BOUNDARY_GUARD = 1e-6
MAX_EVALUATIONS = 10**6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def validity_interval(c1: float, c2: float) -> tuple[float, float]:
    """Open v-interval on which c2 e^{2v} - 1 - c1^2 e^{4v} > 0."""
    if not (c1 > 0 and c2 > 0):
        raise EmptyInterval("c1 and c2 must be positive")
    disc = c2 * c2 - 4 * c1 * c1
    if disc <= 0:
        raise EmptyInterval("empty validity interval (c2 <= 2*c1)")
    root = math.sqrt(disc)
    # Small root via the product of roots (t- * t+ = 1 / c1^2) avoids cancellation.
    t_plus = (c2 + root) / (2 * c1 * c1)
    t_minus = 1.0 / (c1 * c1 * t_plus)
    return 0.5 * math.log(t_minus), 0.5 * math.log(t_plus)


def leading_coefficient(v, c1: float, c2: float):
    t = np.exp(2 * np.asarray(v, dtype=float))
    return c2 * t - 1 - c1 * c1 * t * t


def _inside(v, lo: float, hi: float, guard: float = 0.0) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all((v > lo + guard) & (v < hi - guard)))


def _phi_prime_raw(v, c1: float, c2: float):
    t = np.exp(2 * np.asarray(v, dtype=float))
    q = c2 * t - 1
    d = q - c1 * c1 * t * t
    return np.sqrt(c2 * c1 * c1 * t**3 / (q * q * d))


def phi_prime(v, c1: float, c2: float):
    """Closed-form derivative of the phase; poles at both interval ends."""
    lo, hi = validity_interval(c1, c2)
    if not _inside(v, lo, hi):
        raise OutOfInterval(f"v={v} outside ({lo}, {hi})")
    out = _phi_prime_raw(v, c1, c2)
    return float(out) if np.ndim(out) == 0 else out


def phi_log_derivative(v, c1: float, c2: float):
    """phi''/phi' in the rational form obtained by eliminating B from the ODE."""
    t = np.exp(2 * np.asarray(v, dtype=float))
    q = c2 * t - 1
    d = q - c1 * c1 * t * t
    return (3 + c1 * c1 * t * t + c2 * c1 * c1 * t**3 - 3 * c2 * t) / (q * d)


def phi_second(v, c1: float, c2: float):
    """phi'' from direct logarithmic differentiation of phi' (independent of the rational form)."""
    t = np.exp(2 * np.asarray(v, dtype=float))
    q = c2 * t - 1
    d = q - c1 * c1 * t * t
    # log phi' = 1/2 (log N - 2 log q - log d), N ~ e^{6v}
    dlog = 0.5 * (6.0 - 2 * (2 * c2 * t) / q - (2 * c2 * t - 4 * c1 * c1 * t * t) / d)
    return _phi_prime_raw(v, c1, c2) * dlog


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_evals: int = MAX_EVALUATIONS,
) -> float:
    """Adaptive Simpson quadrature with Richardson-corrected panels.

    Panels are bisected until |S_left + S_right - S_whole| <= 15 tol_panel,
    the tolerance being halved at each bisection.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    evals = 3
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        evals += 2
        if evals > max_evals:
            raise QuadratureFailure(f"tolerance {tol} not reached within {max_evals} evaluations")
        left = (mid - lo) / 6 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6 * (fmid + 4 * frm + fhi)
        delta = left + right - s
        if abs(delta) <= 15 * eps or depth >= 60:
            if depth >= 60 and abs(delta) > 15 * eps:
                raise QuadratureFailure("maximum bisection depth reached")
            total += left + right + delta / 15
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return sign * total


@dataclass(frozen=True)
class PhaseSolution:
    """Frozen phase table for one (c1, c2) pair.

    ``phi_table`` holds phi at equally spaced nodes of the guarded interval,
    accumulated outward from the anchor ``v0`` (the midpoint, phi(v0) = 0)
    by adaptive Simpson.  Off-node values add a fixed-node Gauss-Legendre
    integral from the nearest node, which keeps phi smooth in v (so that
    finite differences of g and h are not polluted by quadrature noise).
    """

    c1: float
    c2: float
    interval: tuple[float, float]
    v0: float
    nodes: np.ndarray = field(repr=False)
    phi_table: np.ndarray = field(repr=False)
    a: float = 1.0
    b: float = 0.0

    def check(self, v) -> None:
        lo, hi = self.interval
        if not _inside(v, lo, hi, BOUNDARY_GUARD):
            raise OutOfInterval(f"v outside the guarded interval ({lo}, {hi})")

    def phi(self, v):
        self.check(v)
        v = np.asarray(v, dtype=float)
        flat = np.atleast_1d(v).ravel()
        out = np.array([self._phi_scalar(x) for x in flat])
        return float(out[0]) if v.ndim == 0 else out.reshape(v.shape)

    def _phi_scalar(self, v: float) -> float:
        k = int(np.clip(np.searchsorted(self.nodes, v), 1, len(self.nodes) - 1))
        if v - self.nodes[k - 1] < self.nodes[k] - v:
            k -= 1
        vk = self.nodes[k]
        base = self.phi_table[k]
        if v == vk:
            return float(base)
        lo, hi = self.interval
        length = abs(v - vk)
        clearance = min(min(v, vk) - lo, hi - max(v, vk))
        if clearance > 3 * length:
            half = 0.5 * (v - vk)
            mid = 0.5 * (v + vk)
            xs = mid + half * _GL_NODES
            return float(base + half * np.dot(_GL_WEIGHTS, _phi_prime_raw(xs, self.c1, self.c2)))
        return float(base + adaptive_simpson(self._integrand, vk, v, tol=1e-10))

    def _integrand(self, v: float) -> float:
        return float(_phi_prime_raw(v, self.c1, self.c2))

    def shrunk_interval(self, margin: float = 0.01) -> tuple[float, float]:
        lo, hi = self.interval
        pad = margin * (hi - lo)
        return lo + pad, hi - pad


def solve_phase(c1: float, c2: float, cells: int = 512, tol: float = 1e-10) -> PhaseSolution:
    lo, hi = validity_interval(c1, c2)
    v0 = 0.5 * (lo + hi)
    nodes = np.linspace(lo + BOUNDARY_GUARD, hi - BOUNDARY_GUARD, 2 * (cells // 2) + 1)
    nodes[cells // 2] = v0
    table = np.zeros_like(nodes)
    mid = cells // 2

    def integrand(v: float) -> float:
        return float(_phi_prime_raw(v, c1, c2))

    # Each cell is integrated to ``tol``; near the poles phi' reaches ~1e4,
    # so a tighter absolute tolerance would sit below the roundoff floor.
    for k in range(mid + 1, len(nodes)):
        table[k] = table[k - 1] + adaptive_simpson(integrand, nodes[k - 1], nodes[k], tol)
    for k in range(mid - 1, -1, -1):
        table[k] = table[k + 1] - adaptive_simpson(integrand, nodes[k], nodes[k + 1], tol)
    return PhaseSolution(c1, c2, (lo, hi), v0, nodes, table)


def phi(v, sol: PhaseSolution):
    return sol.phi(v)


def _amplitude(v, c2: float):
    return np.sqrt(c2 - np.exp(-2 * np.asarray(v, dtype=float)))


def gh(v, sol: PhaseSolution):
    """The two particular solutions (g, h) = sqrt(c2 - e^{-2v}) (cos phi, sin phi) / sqrt(c2)."""
    ph = sol.phi(v)
    amp = _amplitude(v, sol.c2)
    if np.any(amp <= 0):
        raise OutOfInterval("c2 - e^{-2v} must be positive on the validity interval")
    s = math.sqrt(sol.c2)
    return amp * np.cos(ph) / s, amp * np.sin(ph) / s


def gh_jet(v, sol: PhaseSolution):
    """Exact (g, g', g'') and (h, h', h'') using closed-form phi' and phi''."""
    ph = sol.phi(v)
    c1, c2 = sol.c1, sol.c2
    e2 = np.exp(-2 * np.asarray(v, dtype=float))
    r = np.sqrt(c2 - e2)
    r1 = e2 / r
    r2 = -2 * e2 / r - e2 * e2 / r**3
    p1 = _phi_prime_raw(v, c1, c2)
    p2 = phi_second(v, c1, c2)
    c, s = np.cos(ph), np.sin(ph)
    k = 1 / math.sqrt(c2)
    g = (k * r * c, k * (r1 * c - r * p1 * s), k * (r2 * c - 2 * r1 * p1 * s - r * p2 * s - r * p1 * p1 * c))
    h = (k * r * s, k * (r1 * s + r * p1 * c), k * (r2 * s + 2 * r1 * p1 * c + r * p2 * c - r * p1 * p1 * s))
    return g, h


def _fd_step(v: float, step: float, interval: tuple[float, float]) -> float:
    """Step for differentiating near the interval ends, where phi' has poles."""
    lo, hi = interval
    clearance = min(v - lo, hi - v) - BOUNDARY_GUARD
    h = min(step * max(1.0, abs(v)), 0.004 * clearance)
    if h <= 1e-6 or not (lo + BOUNDARY_GUARD < v - 2 * h and v + 2 * h < hi - BOUNDARY_GUARD):
        raise OutOfInterval(f"no room for a difference stencil around v={v} in ({lo}, {hi})")
    return h


def _fd12(fn: Callable, v: float, h: float) -> tuple[float, float]:
    """First and second derivatives by Richardson-extrapolated central differences."""

    def est(hh: float):
        fp, f0, fm = fn(v + hh), fn(v), fn(v - hh)
        return (fp - fm) / (2 * hh), (fp - 2 * f0 + fm) / (hh * hh)

    d1a, d2a = est(h)
    d1b, d2b = est(h / 2)
    return (4 * d1b - d1a) / 3, (4 * d2b - d2a) / 3


def ode_residual_323(A: Callable[[float], float], v: float, c1: float, c2: float, step: float = 1e-3) -> float:
    """Left-hand side of the A-equation with finite-difference A' and A''.

    The step is ``step * max(1, |v|)``, reduced to 0.4% of the distance to the
    nearer interval end.
    """
    h = _fd_step(v, step, validity_interval(c1, c2))
    d1, d2 = _fd12(A, v, h)
    t = math.exp(2 * v)
    return float((c2 * t - 1 - c1 * c1 * t * t) * d2 + (1 - c1 * c1 * t * t) * d1 + 2 * A(v))


def ode_residual_324(B: Callable[[float], float], v: float, c1: float, c2: float, step: float = 1e-3) -> float:
    """Residual of B'' - (phi''/phi') B' + phi'^2 B with closed-form phi' and FD phi''."""
    h = _fd_step(v, step, validity_interval(c1, c2))
    d1, d2 = _fd12(B, v, h)
    p1 = float(_phi_prime_raw(v, c1, c2))
    p2, _ = _fd12(lambda w: float(_phi_prime_raw(w, c1, c2)), v, h)
    return float(d2 - (p2 / p1) * d1 + p1 * p1 * B(v))


def phi_second_fd(v: float, c1: float, c2: float, step: float = 1e-3) -> float:
    """phi'' by differencing the closed-form phi'."""
    h = _fd_step(v, step, validity_interval(c1, c2))
    return _fd12(lambda w: float(_phi_prime_raw(w, c1, c2)), v, h)[0]
