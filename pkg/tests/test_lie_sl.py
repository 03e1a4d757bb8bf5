import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from orbcount.errors import ConfigurationError, NumericDomainError
from orbcount.flags import act, opposite_standard_flag, random_flag, standard_flag
from orbcount.lie_sl import (
    ChamberVector,
    GroupElement,
    LinearForm,
    busemann_iwasawa,
    cartan_projection,
    direct_sum,
    exp_chamber,
    fundamental_weight,
    jordan_projection,
    opposition_involution,
    random_element,
)

SIGNATURES = [(2,), (3,), (4,), (5,), (2, 3), (2, 2)]

seeds = st.integers(0, 2 ** 32 - 1)
signatures = st.sampled_from(SIGNATURES)


def element(seed, sig, bound=3.0):
    return random_element(np.random.default_rng(seed), sig, bound)


def rotation(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


# --- construction -----------------------------------------------------------


def test_determinant_renormalised_within_tolerance():
    m = np.diag([2.0, 0.5]) * (1 + 1e-7)
    g = GroupElement([m])
    assert abs(np.linalg.det(g.blocks[0]) - 1) < 1e-12


def test_determinant_rejected_beyond_tolerance():
    with pytest.raises(ConfigurationError):
        GroupElement([np.diag([2.0, 1.0])])


def test_non_finite_entries_rejected():
    with pytest.raises(NumericDomainError):
        GroupElement([np.array([[np.nan, 0.0], [0.0, 1.0]])])


def test_element_is_immutable():
    g = GroupElement.identity((2,))
    with pytest.raises(ValueError):
        g.blocks[0][0, 0] = 5.0


def test_chamber_vector_shape_checked():
    with pytest.raises(ConfigurationError):
        ChamberVector(np.zeros(3), (2,))


# --- Cartan projection ------------------------------------------------------


def test_cartan_identity_is_zero():
    assert np.all(cartan_projection(GroupElement.identity((3, 2))).coords == 0)


def test_cartan_diagonal():
    g = GroupElement([np.diag(np.exp([2.0, 0.0, -2.0]))])
    assert np.allclose(cartan_projection(g).coords, [2, 0, -2], atol=1e-14)


def test_cartan_fibonacci_matrix_against_characteristic_root():
    # singular values squared are the roots of x^2 - tr(g^T g) x + 1
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    gtg = g.T @ g
    tr = gtg[0, 0] + gtg[1, 1]
    top = brentq(lambda x: x * x - tr * x + 1, 1.0, tr)
    r = 0.5 * np.log(top)
    assert np.isclose(r, 0.5 * np.log((7 + 3 * np.sqrt(5)) / 2), rtol=1e-14)
    assert np.allclose(cartan_projection(GroupElement([g])).coords, [r, -r], rtol=1e-13)


@given(seeds, signatures)
def test_cartan_is_dominant_and_matches_svd(seed, sig):
    g = element(seed, sig)
    a = cartan_projection(g)
    assert a.is_dominant()
    ref = np.concatenate([np.log(np.linalg.svd(b, compute_uv=False)) for b in g.blocks])
    assert np.allclose(a.coords, ref, atol=1e-10)
    assert np.allclose(a.block_sums(), 0, atol=1e-9)


def special_orthogonal(rng, d):
    q = np.linalg.qr(rng.normal(size=(d, d)))[0]
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@given(seeds, signatures)
def test_cartan_invariant_under_rotations(seed, sig):
    rng = np.random.default_rng(seed)
    g = random_element(rng, sig)
    k1 = GroupElement([special_orthogonal(rng, d) for d in sig])
    k2 = GroupElement([special_orthogonal(rng, d) for d in sig])
    assert np.allclose(cartan_projection(k1 @ g @ k2).coords, cartan_projection(g).coords, atol=1e-10)


@given(seeds, seeds, signatures)
def test_triangle_inequality(s1, s2, sig):
    g, h = element(s1, sig), element(s2, sig)
    assert cartan_projection(g @ h).norm() <= cartan_projection(g).norm() + cartan_projection(h).norm() + 1e-8


# --- Jordan projection ------------------------------------------------------


def test_jordan_identity_and_unipotent():
    assert np.all(jordan_projection(GroupElement.identity((3,))).coords == 0)
    u = GroupElement([np.array([[1.0, 1.0], [0.0, 1.0]])])
    assert np.allclose(jordan_projection(u).coords, 0, atol=1e-12)


def test_jordan_fibonacci_matrix_quadratic_formula():
    lam = np.log((3 + np.sqrt(5)) / 2)
    got = jordan_projection(GroupElement([np.array([[2.0, 1.0], [1.0, 1.0]])])).coords
    assert np.allclose(got, [lam, -lam], rtol=1e-14)


def test_jordan_rotation_is_zero():
    assert np.allclose(jordan_projection(GroupElement([rotation(0.7)])).coords, 0, atol=1e-14)


@given(seeds, signatures, st.integers(1, 8))
def test_jordan_homogeneous_under_powers(seed, sig, n):
    g = element(seed, sig)
    lam = jordan_projection(g).coords
    got = jordan_projection(g.power(n)).coords
    # elliptic parts have lambda = 0, so the error is measured against max(|n lambda|, 1)
    assert np.linalg.norm(got - n * lam) <= 1e-8 * max(np.linalg.norm(n * lam), 1.0)


@given(seeds, signatures)
def test_jordan_log_majorised_by_cartan(seed, sig):
    g = element(seed, sig)
    a, lam = cartan_projection(g), jordan_projection(g)
    for ab, lb in zip(a.blocks(), lam.blocks()):
        assert np.all(np.cumsum(ab)[:-1] - np.cumsum(lb)[:-1] >= -1e-9)


@given(seeds, st.sampled_from([(2,), (3,), (4,)]))
def test_jordan_matches_eigenvalue_moduli(seed, sig):
    g = element(seed, sig)
    ref = np.sort(np.log(np.abs(np.linalg.eigvals(g.blocks[0]))))[::-1]
    assert np.allclose(jordan_projection(g).coords, ref, atol=1e-8)


def test_jordan_conjugation_invariant(rng):
    g, h = random_element(rng, (4,)), random_element(rng, (4,))
    assert np.allclose(jordan_projection(h @ g @ h.inverse()).coords, jordan_projection(g).coords, atol=1e-9)


# --- opposition involution --------------------------------------------------


def test_opposition_examples():
    sig = (3,)
    assert np.array_equal(opposition_involution(ChamberVector([2.0, 0.0, -2.0], sig)).coords, [2, 0, -2])
    assert np.array_equal(opposition_involution(ChamberVector([3.0, -1.0, -2.0], sig)).coords, [2, 1, -3])


@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
def test_opposition_is_isometric_involution(xs):
    sig = (2, 3)
    v = np.array(xs)
    w = opposition_involution(v, sig)
    assert np.array_equal(opposition_involution(w, sig), v)
    assert np.isclose(np.linalg.norm(w), np.linalg.norm(v), rtol=1e-15)


@given(seeds, signatures)
def test_opposition_of_cartan_is_cartan_of_inverse(seed, sig):
    g = element(seed, sig)
    lhs = opposition_involution(cartan_projection(g)).coords
    assert np.abs(lhs - cartan_projection(g.inverse()).coords).max() <= 1e-9


def test_opposition_needs_signature_for_raw_coords():
    with pytest.raises(ConfigurationError):
        opposition_involution(np.zeros(3))


# --- Busemann cocycle -------------------------------------------------------


@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_busemann_of_diagonal_at_standard_flag(xs):
    sig = (2, 3)
    v = ChamberVector(np.concatenate([np.array(xs[:2]) - np.mean(xs[:2]), np.array(xs[2:]) - np.mean(xs[2:])]), sig)
    assert np.allclose(busemann_iwasawa(exp_chamber(v), standard_flag(sig)).coords, v.coords, atol=1e-12)


@given(seeds, st.floats(0, 2 * np.pi))
def test_busemann_of_rotation_vanishes(seed, t):
    x = random_flag(np.random.default_rng(seed), (2,))
    assert np.allclose(busemann_iwasawa(GroupElement([rotation(t)]), x).coords, 0, atol=1e-12)


def test_busemann_cocycle_worked_example():
    g = GroupElement([np.array([[2.0, 1.0], [1.0, 1.0]])])
    h = GroupElement([np.array([[1.0, 0.0], [1.0, 1.0]])])
    x = standard_flag((2,))
    lhs = busemann_iwasawa(g @ h, x).coords
    rhs = busemann_iwasawa(g, act(h, x)).coords + busemann_iwasawa(h, x).coords
    # by hand: (gh) e1 = (3, 2), so the first coordinate is log sqrt(13)
    assert np.isclose(lhs[0], 0.5 * np.log(13), rtol=1e-14)
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(seeds, seeds, seeds, signatures)
def test_busemann_cocycle_identity(s1, s2, s3, sig):
    g, h = element(s1, sig), element(s2, sig)
    x = random_flag(np.random.default_rng(s3), sig)
    lhs = busemann_iwasawa(g @ h, x).coords
    rhs = busemann_iwasawa(g, act(h, x)).coords + busemann_iwasawa(h, x).coords
    assert np.linalg.norm(lhs - rhs) <= 1e-8


def test_busemann_at_opposite_flag_of_diagonal():
    a = GroupElement([np.diag(np.exp([1.0, 0.5, -1.5]))])
    assert np.allclose(busemann_iwasawa(a, opposite_standard_flag((3,))).coords, [-1.5, 0.5, 1.0])


# --- direct sums and forms --------------------------------------------------


def test_direct_sum_identity_and_concatenation():
    e = direct_sum(GroupElement.identity((2,)), GroupElement.identity((2,)))
    assert e.allclose(GroupElement.identity((2, 2)))
    g = GroupElement([np.diag([np.e, 1 / np.e])])
    h = GroupElement([np.diag([np.e ** 2, np.e ** -2])])
    assert np.allclose(cartan_projection(direct_sum(g, h)).coords, [1, -1, 2, -2], atol=1e-14)


def test_direct_sum_signature_mismatch():
    g = GroupElement.identity((2,))
    with pytest.raises(ConfigurationError):
        direct_sum(g, g, signature=(3, 2))


@given(seeds, seeds)
def test_direct_sum_norm_is_pythagorean(s1, s2):
    g, h = element(s1, (3,)), element(s2, (2,))
    n2 = cartan_projection(direct_sum(g, h)).norm() ** 2
    assert np.isclose(n2, cartan_projection(g).norm() ** 2 + cartan_projection(h).norm() ** 2, rtol=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=15, max_size=15), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_form_is_linear(xs, alpha, beta):
    sig = (2, 3)
    phi, u, v = LinearForm(xs[:5], sig), np.array(xs[5:10]), np.array(xs[10:15])
    lhs = phi(alpha * u + beta * v)
    rhs = alpha * phi(u) + beta * phi(v)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(alpha * phi(u)) + abs(beta * phi(v))) + 1e-12


def test_fundamental_weight_partial_sum():
    w = fundamental_weight((4,), 0, 2)
    v = np.array([3.0, 1.0, -1.0, -3.0])
    assert np.isclose(w(v), 4.0)
    with pytest.raises(ConfigurationError):
        fundamental_weight((4,), 0, 4)
