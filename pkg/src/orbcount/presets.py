"""Shipped generator sets.

``schottky2_sym``
    A = diag(e^{l/2}, e^{-l/2}) and B = R A R^-1 with R the rotation by pi/4,
    so the axes of A and B in the hyperbolic plane cross at a right angle.
``symm_power_d``
    The same group pushed into SL(d) by the (d-1)-th symmetric power.
``product2``
    A Schottky pair (A, B) in SL(2) with distinct translation lengths, paired
    with its generator-swapped copy (B, A) by direct sum.  The two factors are
    inequivalent representations of the free group, and the swap of letters
    maps the census onto its mirror image under exchanging the factors.
``custom``
    User-supplied matrices.
"""

from __future__ import annotations

from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .lie_sl import GroupElement, direct_sum

DEFAULT_HALF_LENGTH = float(np.log(4.0))
PRODUCT_HALF_LENGTHS = (float(np.log(4.0)), 2.2)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def schottky_pair(half_a: float, half_b: float, angle: float = np.pi / 4) -> list[GroupElement]:
    """Hyperbolics with translation lengths 2*half_a, 2*half_b and axes crossing at 2*angle."""
    a = np.diag([np.exp(half_a), np.exp(-half_a)])
    r = rotation(angle)
    b = r @ np.diag([np.exp(half_b), np.exp(-half_b)]) @ r.T
    # unimodular by construction; a numerical determinant check would fail for long translations
    return [GroupElement([a], check=False), GroupElement([b], check=False)]


def schottky2_sym(half_length: float = DEFAULT_HALF_LENGTH) -> list[GroupElement]:
    """diag(e^{l/2}, e^{-l/2}) and its conjugate by the rotation by pi/4."""
    if half_length <= 0:
        raise ConfigurationError("translation length must be positive")
    return schottky_pair(half_length, half_length)


def symmetric_power(m: np.ndarray, n: int) -> np.ndarray:
    """Sym^n of a 2x2 matrix, in the basis sqrt(C(n,i)) x^{n-i} y^i (orthogonal for rotations)."""
    m = np.asarray(m, dtype=float)
    (a, b), (c, d) = m
    out = np.zeros((n + 1, n + 1))
    # image of x^{n-j} y^j is (a x + c y)^{n-j} (b x + d y)^j
    for j in range(n + 1):
        p1 = np.array([comb(n - j, i) * a ** (n - j - i) * c ** i for i in range(n - j + 1)])
        p2 = np.array([comb(j, i) * b ** (j - i) * d ** i for i in range(j + 1)])
        out[:, j] = np.convolve(p1, p2)
    scale = np.sqrt([comb(n, i) for i in range(n + 1)])
    return out * scale[:, None] / scale[None, :]


def symm_power_d(d: int = 3, half_length: float = DEFAULT_HALF_LENGTH) -> list[GroupElement]:
    if not 2 <= d <= 5:
        raise ConfigurationError(f"symmetric-power preset supports 2 <= d <= 5, got {d}")
    return [GroupElement([symmetric_power(g.blocks[0], d - 1)]) for g in schottky2_sym(half_length)]


def product2(half_lengths: Sequence[float] = PRODUCT_HALF_LENGTHS) -> list[GroupElement]:
    s, t = half_lengths
    if not (0 < s and 0 < t) or np.isclose(s, t):
        raise ConfigurationError("product2 needs two distinct positive half lengths")
    a, b = schottky_pair(s, t)
    return [direct_sum(a, b), direct_sum(b, a)]


def custom(matrices: Sequence[Sequence[np.ndarray]]) -> list[GroupElement]:
    """Generators from explicit blocks; each entry is a list of square blocks."""
    if not matrices:
        raise ConfigurationError("custom preset needs at least one generator")
    out = []
    for i, blocks in enumerate(matrices):
        try:
            out.append(GroupElement(blocks))
        except ConfigurationError as exc:
            raise ConfigurationError(f"generator {i}: {exc}") from exc
    return out


REGISTRY: dict[str, Callable[..., list[GroupElement]]] = {
    "schottky2_sym": schottky2_sym,
    "symm_power_d": symm_power_d,
    "product2": product2,
}


def preset(name: str, **params) -> list[GroupElement]:
    try:
        fn = REGISTRY[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; known: {sorted(REGISTRY)}") from None
    return fn(**params)
