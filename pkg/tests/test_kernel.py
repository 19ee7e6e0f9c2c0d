import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minhyper.errors import DegenerateFrame, DomainEscape, NotPositiveDefinite
from minhyper.families import Domain, make_example11
from minhyper.kernel import (
    DiffConfig,
    central_derivative,
    dot,
    generalized_sym_eig3,
    jet,
    normal_complement,
)

S2 = 1 / math.sqrt(2)


def test_dot_examples():
    assert dot([1, 0, 0, 0, 0], [0, 1, 0, 0, 0]) == 0
    assert dot([1] * 5, [1] * 5) == 5
    c1 = [S2, 0, 0, 0, 0]
    assert abs(dot(c1, c1) - 0.5) < 1e-15


def test_normal_complement_of_standard_basis():
    e = np.eye(5)
    n = normal_complement(*e[:4])
    assert np.allclose(np.abs(n), e[4], atol=1e-15)


def test_normal_complement_rejects_repeated_vector():
    e = np.eye(5)
    with pytest.raises(DegenerateFrame):
        normal_complement(e[0], e[1], e[1], e[3])


def test_normal_complement_example11_origin():
    j = make_example11().jet((0.0, 0.0, 0.0), DiffConfig(analytic=True))
    n = normal_complement(j.value, *j.d1)
    expected = np.array([-S2, 0, S2, 0, 0])
    assert min(np.linalg.norm(n - expected), np.linalg.norm(n + expected)) < 1e-12


def _cofactor_free_orthogonality(vectors, n):
    return max(abs(float(np.dot(v, n))) for v in vectors)


@settings(max_examples=1000, deadline=None)
@given(arrays(np.float64, (4, 5), elements=st.floats(-1, 1)))
def test_normal_complement_orthonormal(rows):
    # Only well-conditioned quadruples: smallest singular value bounded away from 0.
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv[-1] < 0.1:
        return
    n = normal_complement(*rows)
    assert abs(np.linalg.norm(n) - 1) <= 1e-12
    assert _cofactor_free_orthogonality(rows, n) <= 1e-12 * max(1.0, float(np.max(np.abs(rows)))) * 10


def test_jet_of_constant_is_zero():
    j = jet(lambda u, v, z: np.broadcast_to(np.array([1.0, 2, 3, 4, 5]), np.shape(u) + (5,)), (0.3, 0.2, 0.1))
    assert np.all(j.d1 == 0)
    assert np.all(j.d2 == 0)


def _poly(u, v, z):
    u, v, z = np.broadcast_arrays(u, v, z)
    return np.stack([u**2, u * v, 3 * v * z - z**2, u + 2 * z, np.ones_like(u)], axis=-1)


def test_jet_quadratic_exact():
    j = jet(lambda u, v, z: np.stack([u**2, 0 * u, 0 * u, 0 * u, 0 * u], axis=-1), (1.0, 0.0, 0.0))
    assert np.allclose(j.d1[0], [2, 0, 0, 0, 0], atol=1e-8)
    assert np.allclose(j.second(0, 0), [2, 0, 0, 0, 0], atol=1e-8)


def _quadratic_errors(p, cfg):
    u, v, z = p
    j = jet(_poly, p, cfg)
    d1 = np.array([[2 * u, v, 0, 1, 0], [0, u, 3 * z, 0, 0], [0, 0, 3 * v - 2 * z, 2, 0]])
    d2 = {(0, 0): [2, 0, 0, 0, 0], (0, 1): [0, 1, 0, 0, 0], (1, 2): [0, 0, 3, 0, 0], (2, 2): [0, 0, -2, 0, 0]}
    e1 = np.max(np.abs(j.d1 - d1))
    e2 = max(np.max(np.abs(j.second(a, b) - np.array(w))) for (a, b), w in d2.items())
    return e1, e2


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(-3, 3)] * 3))
def test_jet_exact_on_quadratics(p):
    # No truncation error on quadratics; a step of 1e-2 keeps roundoff below 1e-9.
    e1, e2 = _quadratic_errors(p, DiffConfig(base_step=1e-2))
    assert e1 <= 1e-9
    assert e2 <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(-3, 3)] * 3))
def test_jet_quadratic_error_is_roundoff_at_default_step(p):
    # At h = 1e-4 the only error left is eps*|f|/h^2 (times the Richardson factor).
    h = 1e-4 * max(1.0, *map(abs, p))
    fmax = 3 * 9 + 9
    bound = 64 * np.finfo(float).eps * fmax / h**2
    e1, e2 = _quadratic_errors(p, DiffConfig())
    assert e2 <= bound
    assert e1 <= 1e-9


def test_jet_example11_uu():
    # x1 = cos(sqrt2 u)/sqrt2/sqrt(1+z^2): d2/du2 at u=0, z=1 is -2/sqrt2/sqrt2 = -1.
    j = jet(make_example11().evaluator, (0.0, 0.0, 1.0))
    assert abs(j.second(0, 0)[0] - (-1.0)) <= 1e-6


def _trig(u, v, z):
    u, v, z = np.broadcast_arrays(u, v, z)
    return np.stack([np.sin(u) * np.cos(v), np.cos(u + z), np.sin(2 * z), np.cos(v) * np.sin(z), np.sin(u * v)], axis=-1)


def test_jet_observed_order_at_least_two():
    p = (0.4, -0.7, 0.9)
    exact = jet(_trig, p, DiffConfig(base_step=1e-3))  # Richardson reference
    errs = []
    for h in (4e-2, 2e-2):
        j = jet(_trig, p, DiffConfig(base_step=h, richardson=False))
        errs.append(np.max(np.abs(j.d2 - exact.d2)))
    order = math.log2(errs[0] / errs[1])
    assert order >= 1.9


def test_jet_refuses_stencils_outside_domain():
    dom = Domain(u_range=(0.0, 1.0))
    with pytest.raises(DomainEscape):
        jet(_trig, (1e-6, 0, 0), DiffConfig(), dom)


def test_central_derivative_scaled_and_absolute():
    f = lambda q: np.array([math.sin(q[0])])
    for scaled in (True, False):
        d = central_derivative(f, (2.0, 0, 0), 0, 1e-3, scaled=scaled)
        assert abs(d[0] - math.cos(2.0)) < 1e-11


def test_diffconfig_validation():
    with pytest.raises(ValueError):
        DiffConfig(base_step=0)
    with pytest.raises(ValueError):
        DiffConfig(degenerate_gap=-1)


def test_eig_diagonal():
    r = generalized_sym_eig3(np.diag([3.0, 2, 1]), np.eye(3))
    assert np.allclose(r.values, [3, 2, 1])
    assert np.allclose(r.vectors, np.eye(3))
    assert not r.degenerate


def _cubic_oracle(A, B):
    """Roots of det(A - lam B) from the characteristic cubic, sorted descending."""
    # det(A - lam B) = -det(B) lam^3 + c2 lam^2 - c1 lam + det(A)
    def d(lam):
        return np.linalg.det(A - lam * B)

    # recover cubic coefficients from four samples (exact for a cubic)
    xs = np.array([-1.0, 0.0, 1.0, 2.0])
    coeffs = np.polyfit(xs, [d(x) for x in xs], 3)
    return np.sort(np.real(np.roots(coeffs)))[::-1]


def _cubic_coefficients(A, B):
    """Monic coefficients of det(A - lam B) / det(-B), from four exact samples."""
    xs = np.array([-1.0, 0.0, 1.0, 2.0])
    coeffs = np.polyfit(xs, [np.linalg.det(A - x * B) for x in xs], 3)
    return coeffs / coeffs[0]


def test_eig_degenerate_pencil_flag():
    A = np.diag([2.0, 2, 2])
    B = np.diag([2.0, 1, 1])
    r = generalized_sym_eig3(A, B)
    assert np.allclose(r.values, _cubic_oracle(A, B), atol=1e-7)
    assert np.allclose(r.values, [2, 2, 1])
    assert r.degenerate


def test_eig_example11_z1():
    from minhyper.shape import fundamental_forms

    I, II, _ = fundamental_forms(make_example11(), (0.4, 1.1, 1.0), DiffConfig(analytic=True))
    r = generalized_sym_eig3(II, I)
    assert np.allclose(r.values, [math.sqrt(2), 0, -math.sqrt(2)], atol=1e-12)


def test_eig_rejects_indefinite_metric():
    with pytest.raises(NotPositiveDefinite):
        generalized_sym_eig3(np.eye(3), np.diag([1.0, -1, 1]))


def _spd(draw_mat):
    M = np.asarray(draw_mat)
    return M @ M.T + 0.5 * np.eye(3)


@settings(max_examples=300, deadline=None)
@given(
    arrays(np.float64, (3, 3), elements=st.floats(-2, 2)),
    arrays(np.float64, (3, 3), elements=st.floats(-2, 2)),
)
def test_eig_reconstruction_and_orthonormality(a, m):
    A = a + a.T
    B = _spd(m)
    r = generalized_sym_eig3(A, B)
    V, lam = r.vectors, r.values
    scale = max(np.linalg.norm(A), 1e-300)
    assert np.linalg.norm(A - B @ V @ np.diag(lam) @ V.T @ B) <= 1e-9 * max(scale, 1.0)
    assert np.max(np.abs(V.T @ B @ V - np.eye(3))) <= 1e-10
    assert np.all(np.diff(lam) <= 0)
    for j in range(3):
        col = V[:, j]
        assert col[np.argmax(np.abs(col))] > 0
    # Compare symmetric functions, not roots: repeated roots make root-finding ill-conditioned.
    assert np.allclose(np.poly(lam), _cubic_coefficients(A, B), atol=1e-8 * max(1.0, scale) ** 3)
