import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minhyper.errors import EmptyInterval, OutOfInterval, QuadratureFailure
from minhyper.phase import (
    adaptive_simpson,
    gh,
    gh_jet,
    leading_coefficient,
    ode_residual_323,
    ode_residual_324,
    phi_log_derivative,
    phi_prime,
    phi_second,
    phi_second_fd,
    solve_phase,
    validity_interval,
)

C1, C2 = 0.1, 1.0


@pytest.fixture(scope="module")
def sol():
    return solve_phase(C1, C2)


def interior(sol, n, seed=0):
    a, b = sol.shrunk_interval()
    return np.random.default_rng(seed).uniform(a, b, n)


def _hp_interval(c1, c2, digits=40):
    """Quadratic-root oracle in 40-digit decimal arithmetic."""
    getcontext().prec = digits
    c1, c2 = Decimal(repr(c1)), Decimal(repr(c2))
    root = (c2 * c2 - 4 * c1 * c1).sqrt()
    half = Decimal("0.5")
    return half * ((c2 - root) / (2 * c1 * c1)).ln(), half * ((c2 + root) / (2 * c1 * c1)).ln()


# --- validity interval -----------------------------------------------------


def test_validity_interval_matches_quadratic_oracle():
    lo, hi = validity_interval(C1, C2)
    want = _hp_interval(C1, C2)
    assert abs(lo - float(want[0])) <= 1e-12
    assert abs(hi - float(want[1])) <= 1e-12
    # closed form of the roots for c1 = 0.1, c2 = 1
    assert abs(lo - 0.5 * math.log((1 - math.sqrt(0.96)) / 0.02)) <= 1e-12
    assert abs(hi - 0.5 * math.log((1 + math.sqrt(0.96)) / 0.02)) <= 1e-12


def test_validity_interval_midpoint_sign():
    lo, hi = validity_interval(C1, C2)
    assert leading_coefficient(0.5 * (lo + hi), C1, C2) > 0
    assert leading_coefficient(lo - 1e-3, C1, C2) < 0
    assert leading_coefficient(hi + 1e-3, C1, C2) < 0


@pytest.mark.parametrize("c1, c2", [(0.5, 1.0), (1.0, 1.0), (0.6, 1.0), (0.0, 1.0), (0.1, -1.0)])
def test_empty_interval(c1, c2):
    with pytest.raises(EmptyInterval):
        validity_interval(c1, c2)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(1.001, 50.0))
def test_interval_positivity_property(c1, ratio):
    c2 = 2 * c1 * ratio
    lo, hi = validity_interval(c1, c2)
    assert lo < hi
    want = _hp_interval(c1, c2)
    assert abs(lo - float(want[0])) <= 1e-12 * max(1.0, abs(float(want[0])))
    assert abs(hi - float(want[1])) <= 1e-12 * max(1.0, abs(float(want[1])))
    vs = np.linspace(lo, hi, 102)[1:-1]
    assert np.all(leading_coefficient(vs, c1, c2) > 0)


# --- phi' --------------------------------------------------------------------


def _hp_phi_prime(v, c1, c2):
    getcontext().prec = 40
    c1, c2, v = Decimal(repr(c1)), Decimal(repr(c2)), Decimal(repr(v))
    t = (2 * v).exp()
    q = c2 * t - 1
    return (c2 * c1 * c1 * t**3 / (q * q * (q - c1 * c1 * t * t))).sqrt()


def test_phi_prime_against_high_precision():
    for v in (0.1, 1.0, 2.0, 2.29):
        assert phi_prime(v, C1, C2) == pytest.approx(float(_hp_phi_prime(v, C1, C2)), rel=1e-13)


def test_phi_prime_positive_and_blows_up_at_ends():
    lo, hi = validity_interval(C1, C2)
    vs = np.linspace(lo, hi, 1002)[1:-1]
    assert np.all(phi_prime(vs, C1, C2) > 0)
    assert phi_prime(hi - 1e-9, C1, C2) > 1e3
    assert phi_prime(lo + 1e-9, C1, C2) > 1e3
    assert math.isfinite(phi_prime(hi - 1e-12, C1, C2))


@pytest.mark.parametrize("v", [-1.0, 3.0, 0.0050767117164339471])
def test_phi_prime_outside(v):
    with pytest.raises(OutOfInterval):
        phi_prime(v, C1, C2)


def test_phi_prime_small_c1_series():
    v, c2 = 1.0, 1.0
    for c1 in (1e-2, 1e-3, 1e-4):
        lead = c1 * math.sqrt(c2 * math.exp(6 * v)) / (c2 * math.exp(2 * v) - 1) ** 1.5
        assert abs(phi_prime(v, c1, c2) - lead) <= 10 * c1**3 * math.exp(6 * v)
    assert phi_prime(v, 2e-3, c2) > phi_prime(v, 1e-3, c2)


def test_log_derivative_forms_agree():
    lo, hi = validity_interval(C1, C2)
    vs = np.linspace(lo, hi, 52)[1:-1]
    ratio = phi_second(vs, C1, C2) / phi_prime(vs, C1, C2)
    assert np.allclose(ratio, phi_log_derivative(vs, C1, C2), rtol=1e-10)


def test_log_derivative_identity_fd(sol):
    worst = 0.0
    for v in interior(sol, 50, seed=1):
        fd = phi_second_fd(v, C1, C2) / phi_prime(v, C1, C2)
        worst = max(worst, abs(fd - phi_log_derivative(v, C1, C2)) / max(1.0, abs(fd)))
    assert worst <= 1e-5


# --- quadrature and phi ------------------------------------------------------


def test_adaptive_simpson_known_integrals():
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(math.exp, 1, 0) == pytest.approx(1 - math.e, abs=1e-10)
    assert adaptive_simpson(lambda x: 1 / math.sqrt(x), 1e-6, 1) == pytest.approx(2 - 2e-3, abs=1e-8)
    assert adaptive_simpson(math.cos, 2.0, 2.0) == 0.0


def test_adaptive_simpson_evaluation_budget():
    with pytest.raises(QuadratureFailure):
        adaptive_simpson(lambda x: math.sin(1 / x), 1e-8, 1, tol=1e-14, max_evals=1000)


def test_phi_anchor(sol):
    lo, hi = sol.interval
    assert sol.v0 == 0.5 * (lo + hi)
    assert sol.phi(sol.v0) == 0.0


def test_phi_monotone(sol):
    rng = np.random.default_rng(2)
    a, b = sol.shrunk_interval()
    pairs = np.sort(rng.uniform(a, b, (100, 2)), axis=1)
    pairs = pairs[pairs[:, 1] > pairs[:, 0]]
    assert np.all(sol.phi(pairs[:, 1]) > sol.phi(pairs[:, 0]))


def test_phi_derivative_matches_phi_prime(sol):
    for v in interior(sol, 50, seed=3):
        h = 1e-3
        d = lambda k: (sol.phi(v + k) - sol.phi(v - k)) / (2 * k)
        fd = (4 * d(h / 2) - d(h)) / 3  # Richardson
        exact = phi_prime(v, C1, C2)
        assert abs(fd - exact) <= 1e-6 * max(1.0, exact)


def _gauss_legendre_integral(f, a, b, panels=2000, order=20):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += 0.5 * (hi - lo) * np.dot(w, f(0.5 * (hi + lo) + 0.5 * (hi - lo) * x))
    return total


def test_phi_against_independent_quadrature(sol):
    a, b = sol.shrunk_interval()
    for v in (a, 0.3, 1.7, b):
        want = _gauss_legendre_integral(lambda x: phi_prime(x, C1, C2), sol.v0, v)
        assert abs(sol.phi(v) - want) <= 1e-8


def test_phi_refuses_boundary(sol):
    lo, hi = sol.interval
    with pytest.raises(OutOfInterval):
        sol.phi(hi - 1e-7)
    with pytest.raises(OutOfInterval):
        sol.phi(lo)


# --- g and h ------------------------------------------------------------------


def test_gh_at_anchor(sol):
    g, h = gh(sol.v0, sol)
    assert g == pytest.approx(math.sqrt(C2 - math.exp(-2 * sol.v0)) / math.sqrt(C2), abs=1e-15)
    assert h == 0.0


def test_gh_norm_identity(sol):
    lo, hi = validity_interval(C1, C2)
    vs = np.linspace(lo, hi, 202)[1:-1]
    vs = vs[(vs > lo + 1e-5) & (vs < hi - 1e-5)]
    g, h = gh(vs, sol)
    assert np.max(np.abs(g**2 + h**2 - (1 - np.exp(-2 * vs) / C2))) <= 1e-12


def test_wronskian(sol):
    for v in interior(sol, 20, seed=4):
        (g, g1, _), (h, h1, _) = gh_jet(v, sol)
        w = g * h1 - g1 * h
        assert w > 0
        assert w == pytest.approx((C2 - math.exp(-2 * v)) * phi_prime(v, C1, C2) / C2, rel=1e-12)
        # finite-difference Wronskian, independent of gh_jet
        s = 1e-5
        gp, hp = gh(v + s, sol)
        gm, hm = gh(v - s, sol)
        w_fd = g * (hp - hm) / (2 * s) - (gp - gm) / (2 * s) * h
        assert w_fd == pytest.approx(w, rel=1e-6)


def test_gh_jet_matches_fd(sol):
    for v in interior(sol, 10, seed=5):
        (g, g1, g2), (h, h1, h2) = gh_jet(v, sol)
        s = 1e-4
        gp, hp = gh(v + s, sol)
        gm, hm = gh(v - s, sol)
        assert abs(g1 - (gp - gm) / (2 * s)) <= 1e-6 * max(1, abs(g1))
        assert abs(g2 - (gp - 2 * g + gm) / s**2) <= 1e-4 * max(1, abs(g2))
        assert abs(h2 - (hp - 2 * h + hm) / s**2) <= 1e-4 * max(1, abs(h2))


# --- ODE residuals --------------------------------------------------------------


def test_amplitude_ode_residual_for_g_and_h(sol):
    for v in interior(sol, 50, seed=6):
        assert abs(ode_residual_323(lambda t: gh(t, sol)[0], v, C1, C2)) <= 1e-6
        assert abs(ode_residual_323(lambda t: gh(t, sol)[1], v, C1, C2)) <= 1e-6


def test_amplitude_ode_residual_constant():
    assert ode_residual_323(lambda t: 1.0, 1.0, C1, C2) == 2.0


def test_phase_ode_residual_cos_sin_phi(sol):
    for v in interior(sol, 50, seed=7):
        assert abs(ode_residual_324(lambda t: math.cos(sol.phi(t)), v, C1, C2)) <= 1e-6
        assert abs(ode_residual_324(lambda t: math.sin(sol.phi(t)), v, C1, C2)) <= 1e-6


def test_phase_ode_residual_constant():
    v = 1.0
    assert ode_residual_324(lambda t: 1.0, v, C1, C2) == pytest.approx(phi_prime(v, C1, C2) ** 2, rel=1e-15)


def test_residual_stencil_refused_at_boundary(sol):
    lo, hi = sol.interval
    with pytest.raises(OutOfInterval):
        ode_residual_323(lambda t: 1.0, hi - 1e-6, C1, C2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.02, 0.98))
def test_general_solution_property(a, b, frac):
    s = _SOL
    lo, hi = s.shrunk_interval()
    v = lo + frac * (hi - lo)

    def A(t):
        g, h = gh(t, s)
        return math.sqrt(C2) * (a * g + b * h)

    assert abs(ode_residual_323(A, v, C1, C2)) <= 1e-5


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.02, 0.98))
def test_residual_linearity(alpha, beta, frac):
    lo, hi = _SOL.shrunk_interval()
    v = lo + frac * (hi - lo)
    A1 = math.sin
    A2 = lambda t: t**3
    r1 = ode_residual_323(A1, v, C1, C2)
    r2 = ode_residual_323(A2, v, C1, C2)
    r = ode_residual_323(lambda t: alpha * A1(t) + beta * A2(t), v, C1, C2)
    assert abs(r - (alpha * r1 + beta * r2)) <= 1e-8 * (1 + abs(alpha * r1) + abs(beta * r2))


_SOL = solve_phase(C1, C2)
