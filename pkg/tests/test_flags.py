import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbcount.errors import ConfigurationError, NotProximalError, TransversalityError
from orbcount.flags import (
    Flag,
    act,
    attracting_flag,
    busemann_weights,
    cocycle_period,
    exterior_power,
    flag_distance,
    gromov_product,
    is_transverse,
    limit_flag,
    opposite_standard_flag,
    random_flag,
    repelling_flag,
    standard_flag,
    wedge,
)
from orbcount.lie_sl import (
    ChamberVector,
    GroupElement,
    busemann_iwasawa,
    cartan_projection,
    exp_chamber,
    jordan_projection,
    opposition_involution,
    random_element,
)
from orbcount.presets import schottky2_sym
from orbcount.words import free_reduce, inverse_word, parse_word, word_element

seeds = st.integers(0, 2 ** 32 - 1)
signatures = st.sampled_from([(2,), (3,), (4,), (5,), (2, 3)])


def orthogonal(rng, d):
    q = np.linalg.qr(rng.normal(size=(d, d)))[0]
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def minor_matrix(m, k):
    """Lambda^k by brute-force minors on lexicographic index sets (independent of the library)."""
    idx = list(itertools.combinations(range(m.shape[0]), k))
    return np.array([[np.linalg.det(m[np.ix_(r, c)]) for c in idx] for r in idx])


# --- flags and transversality ----------------------------------------------


def test_non_orthogonal_basis_rejected():
    with pytest.raises(ConfigurationError):
        Flag([np.array([[1.0, 1.0], [0.0, 1.0]])])


def test_standard_pair_transverse_with_unit_margin():
    for sig in [(2,), (3,), (2, 4)]:
        rep = is_transverse(standard_flag(sig), opposite_standard_flag(sig))
        assert rep.transverse and rep.margin == pytest.approx(1.0)


def test_flag_not_transverse_to_itself():
    assert not is_transverse(standard_flag((2,)), standard_flag((2,)))
    assert not is_transverse(standard_flag((3,)), standard_flag((3,)))


def test_upper_triangular_fixes_standard_flag():
    g = GroupElement([np.array([[2.0, 5.0, -1.0], [0.0, 1.0, 3.0], [0.0, 0.0, 0.5]])])
    assert act(g, standard_flag((3,))).equals(standard_flag((3,)))


def test_rotated_standard_pair_margin_is_a_determinant(rng):
    # rotating both flags by the same k leaves every pairing determinant unchanged;
    # rotating only one gives margin = min_k |det(k[d-k:, :k])| computed directly
    d = 4
    k = orthogonal(rng, d)
    x = Flag([k])
    y = opposite_standard_flag((d,))
    expected = min(abs(np.linalg.det(k[:k_][:, :k_])) for k_ in range(1, d))
    assert is_transverse(x, y).margin == pytest.approx(expected, rel=1e-12)
    both = is_transverse(Flag([k]), Flag([k @ np.eye(d)[:, ::-1]]))
    assert both.margin == pytest.approx(1.0)


def test_act_identity_and_rotation(rng):
    x = random_flag(rng, (3,))
    assert act(GroupElement.identity((3,)), x).equals(x)
    k = orthogonal(rng, 3)
    assert np.allclose(act(GroupElement([k]), standard_flag((3,))).bases[0], k, atol=1e-12)


@given(seeds, signatures)
def test_action_is_associative(seed, sig):
    rng = np.random.default_rng(seed)
    g, h, x = random_element(rng, sig), random_element(rng, sig), random_flag(rng, sig)
    assert act(g @ h, x).equals(act(g, act(h, x)), tol=1e-7)


# --- attracting and limit flags -------------------------------------------


def test_attracting_flag_of_ordered_diagonal():
    g = GroupElement([np.diag([3.0, 1.0, 1 / 3])])
    assert attracting_flag(g).equals(standard_flag((3,)))
    assert repelling_flag(g).equals(opposite_standard_flag((3,)))


def test_not_proximal_raises():
    with pytest.raises(NotProximalError):
        attracting_flag(GroupElement.identity((2,)))
    rot = GroupElement([np.array([[0.0, -1.0], [1.0, 0.0]])])
    with pytest.raises(NotProximalError):
        attracting_flag(rot)


@given(seeds)
def test_attracting_flag_is_fixed(seed):
    g = random_element(np.random.default_rng(seed), (3,))
    try:
        f = attracting_flag(g)
    except NotProximalError:
        return
    assert flag_distance(f, act(g, f)) <= 1e-7


def test_attracting_flag_is_limit_of_iterates(rng):
    a, b = schottky2_sym()
    g = a @ b @ b
    x = random_flag(rng, (2,))
    for _ in range(40):
        x = act(g, x)
    assert flag_distance(x, attracting_flag(g)) <= 1e-6


def test_limit_flag_of_constant_ray():
    a, b = schottky2_sym()
    assert limit_flag((0,) * 10, [a, b]).equals(attracting_flag(a))


def test_limit_flag_equivariance_and_cauchy():
    gens = schottky2_sym()
    ray = parse_word("abAbaBBa") + parse_word("ab")
    shifted = (2,) + ray
    lhs = limit_flag(shifted, gens)
    rhs = act(gens[1], limit_flag(ray, gens))
    assert flag_distance(lhs, rhs) <= 1e-6
    _, gap = limit_flag(ray, gens, return_gap=True)
    assert gap < 1e-3


def test_limit_flags_of_distinct_rays_are_transverse(rng):
    gens = schottky2_sym()
    for _ in range(20):
        w1 = _random_ray(rng, 12)
        w2 = _random_ray(rng, 12)
        if w1[0] == w2[0]:
            continue
        assert is_transverse(limit_flag(w1, gens), limit_flag(w2, gens)).margin > 0


def _random_ray(rng, n):
    w = [int(rng.integers(4))]
    while len(w) < n:
        c = int(rng.integers(4))
        if c != w[-1] ^ 1:
            w.append(c)
    return tuple(w)


def test_limit_flag_rejects_unreduced_prefix():
    with pytest.raises(ConfigurationError):
        limit_flag((0, 1), schottky2_sym())


# --- exterior powers --------------------------------------------------------


def test_exterior_power_first_and_diagonal():
    g = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 4.0], [1.0, 0.0, 0.5]])
    assert np.allclose(exterior_power(g, 1), g)
    assert np.allclose(exterior_power(np.diag([2.0, 3.0, 5.0]), 2), np.diag([6.0, 10.0, 15.0]))
    with pytest.raises(ConfigurationError):
        exterior_power(g, 0)


@given(seeds, st.integers(2, 5))
def test_exterior_power_matches_brute_force_minors(seed, d):
    g = random_element(np.random.default_rng(seed), (d,)).blocks[0]
    for k in range(1, d):
        assert np.allclose(exterior_power(g, k), minor_matrix(g, k), atol=1e-10)


@given(seeds, seeds, st.integers(2, 5))
def test_exterior_power_is_multiplicative(s1, s2, d):
    g = random_element(np.random.default_rng(s1), (d,)).blocks[0]
    h = random_element(np.random.default_rng(s2), (d,)).blocks[0]
    for k in range(1, d):
        lhs = exterior_power(g @ h, k)
        rhs = exterior_power(g, k) @ exterior_power(h, k)
        assert np.abs(lhs - rhs).max() <= 1e-8 * max(1.0, np.abs(lhs).max())


@given(seeds, st.integers(2, 5))
def test_exterior_power_norm_is_fundamental_weight_of_cartan(seed, d):
    g = random_element(np.random.default_rng(seed), (d,))
    a = cartan_projection(g).coords
    for k in range(1, d):
        assert np.log(np.linalg.norm(exterior_power(g.blocks[0], k), 2)) == pytest.approx(a[:k].sum(), abs=1e-9)


def test_wedge_of_orthonormal_vectors_is_unit():
    assert np.linalg.norm(wedge(np.eye(4)[:, :2])) == pytest.approx(1.0)


# --- Busemann weights and Gromov product -----------------------------------


def test_busemann_weights_trivial_cases(rng):
    k = GroupElement([orthogonal(rng, 3)])
    x = random_flag(rng, (3,))
    assert np.allclose(busemann_weights(k, x).coords, 0, atol=1e-12)
    v = ChamberVector([1.5, -0.25, -1.25], (3,))
    assert np.allclose(busemann_weights(exp_chamber(v), standard_flag((3,))).coords, v.coords, atol=1e-12)


@given(seeds, signatures)
def test_two_busemann_paths_agree(seed, sig):
    rng = np.random.default_rng(seed)
    g, x = random_element(rng, sig), random_flag(rng, sig)
    assert np.linalg.norm(busemann_weights(g, x).coords - busemann_iwasawa(g, x).coords) <= 1e-8


def test_gromov_of_standard_pair_is_zero():
    assert np.allclose(gromov_product(standard_flag((3,)), opposite_standard_flag((3,))).coords, 0, atol=1e-15)


def test_gromov_rejects_non_transverse():
    with pytest.raises(TransversalityError):
        gromov_product(standard_flag((2,)), standard_flag((2,)))


@given(seeds, signatures)
def test_gromov_weights_are_nonpositive(seed, sig):
    rng = np.random.default_rng(seed)
    x, y = random_flag(rng, sig), random_flag(rng, sig)
    g = gromov_product(x, y)
    for blk in g.blocks():
        assert np.all(np.cumsum(blk)[:-1] <= 1e-12)


@given(seeds)
def test_gromov_invariant_under_rotation(seed):
    rng = np.random.default_rng(seed)
    x, y = random_flag(rng, (4,)), random_flag(rng, (4,))
    k = GroupElement([orthogonal(rng, 4)])
    assert np.allclose(gromov_product(act(k, x), act(k, y)).coords, gromov_product(x, y).coords, atol=1e-9)


@given(seeds, signatures)
def test_gromov_transformation_law(seed, sig):
    rng = np.random.default_rng(seed)
    g, x, y = random_element(rng, sig), random_flag(rng, sig), random_flag(rng, sig)
    gx, gy = act(g, x), act(g, y)
    if min(is_transverse(x, y).margin, is_transverse(gx, gy).margin) < 1e-3:
        return
    lhs = gromov_product(gx, gy).coords - gromov_product(x, y).coords
    rhs = -(opposition_involution(busemann_iwasawa(g, x)).coords + busemann_iwasawa(g, y).coords)
    assert np.abs(lhs - rhs).max() <= 1e-8


# --- cocycle periods --------------------------------------------------------


def test_period_of_generator_is_its_jordan_projection():
    gens = schottky2_sym()
    for w in [(0,), (1,), (2,), (3,)]:
        lam = jordan_projection(word_element(w, gens)).coords
        assert np.allclose(cocycle_period(w, gens).coords, lam, rtol=1e-12)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_period_of_inverse_is_opposition(w):
    w = free_reduce(w)
    if not w:
        return
    gens = schottky2_sym()
    p = cocycle_period(w, gens).coords
    q = cocycle_period(inverse_word(w), gens).coords
    assert np.allclose(q, opposition_involution(p, (2,)), rtol=1e-8, atol=1e-10)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_period_matches_jordan_projection(w):
    w = free_reduce(w)
    if not w:
        return
    gens = schottky2_sym()
    lam = jordan_projection(word_element(w, gens)).coords
    per = cocycle_period(w, gens, depth=24).coords
    assert np.linalg.norm(per - lam) <= 1e-6 * np.linalg.norm(lam)
