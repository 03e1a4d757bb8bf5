"""Full flag varieties of products of SL(d, R).

A flag is stored per block as an orthogonal matrix whose first k columns span
the k-dimensional subspace V_k.  Exterior powers carry the inner product
induced from R^d (orthonormal wedge basis), which fixes the additive
normalisation of the Gromov product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .errors import ConfigurationError, NotProximalError, TransversalityError
from .lie_sl import (
    ChamberVector,
    GroupElement,
    _check_same_signature,
    _differences,
    busemann_iwasawa,
    compound,
)
from .words import cyclic_reduction, is_reduced, word_element

ORTHO_TOL = 1e-9
FLAG_EQUAL_TOL = 1e-8
TRANSVERSE_TOL = 1e-10
PROXIMAL_GAP_TOL = 1e-6


def _orthonormalize(m: np.ndarray) -> np.ndarray:
    """Q factor of m with the sign convention diag(R) > 0."""
    q, r = np.linalg.qr(m)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


class Flag:
    """Point of the full flag variety, one orthogonal basis per block."""

    __slots__ = ("bases",)

    def __init__(self, bases, *, check: bool = True):
        if isinstance(bases, np.ndarray) and bases.ndim == 2:
            bases = (bases,)
        out = []
        for i, b in enumerate(bases):
            b = np.array(b, dtype=float)
            if check:
                if b.ndim != 2 or b.shape[0] != b.shape[1]:
                    raise ConfigurationError(f"flag block {i} is not square")
                err = np.abs(b.T @ b - np.eye(b.shape[0])).max()
                if err > ORTHO_TOL:
                    raise ConfigurationError(f"flag block {i} is not orthogonal (residual {err:.2e})")
            b.setflags(write=False)
            out.append(b)
        object.__setattr__(self, "bases", tuple(out))

    def __setattr__(self, name, value):
        raise AttributeError("Flag is immutable")

    @classmethod
    def from_spanning(cls, mats) -> "Flag":
        """Flag whose V_k is spanned by the first k columns of each (invertible) matrix."""
        if isinstance(mats, np.ndarray) and mats.ndim == 2:
            mats = (mats,)
        return cls([_orthonormalize(np.asarray(m, dtype=float)) for m in mats], check=False)

    @property
    def signature(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.bases)

    def subspace(self, block: int, k: int) -> np.ndarray:
        return self.bases[block][:, :k]

    def distance(self, other: "Flag") -> float:
        return flag_distance(self, other)

    def equals(self, other: "Flag", tol: float = FLAG_EQUAL_TOL) -> bool:
        return flag_distance(self, other) <= tol

    def __repr__(self) -> str:
        return f"Flag(signature={self.signature})"


@dataclass(frozen=True)
class TransversalityReport:
    transverse: bool
    margin: float

    def __bool__(self) -> bool:
        return self.transverse


def standard_flag(signature: Sequence[int]) -> Flag:
    return Flag([np.eye(d) for d in signature], check=False)


def opposite_standard_flag(signature: Sequence[int]) -> Flag:
    return Flag([np.eye(d)[:, ::-1] for d in signature], check=False)


def random_flag(rng: np.random.Generator, signature: Sequence[int]) -> Flag:
    return Flag.from_spanning([rng.standard_normal((d, d)) for d in signature])


def flag_distance(x: Flag, y: Flag) -> float:
    """Largest principal angle between corresponding nested subspaces, over all k and blocks."""
    _check_same_signature(x.signature, y.signature)
    worst = 0.0
    for bx, by in zip(x.bases, y.bases):
        for k in range(1, bx.shape[0]):
            worst = max(worst, float(subspace_angles(bx[:, :k], by[:, :k]).max()))
    return worst


def act(g: GroupElement, x: Flag) -> Flag:
    """g . x, re-orthonormalised by QR."""
    _check_same_signature(g.signature, x.signature)
    return Flag([_orthonormalize(gb @ xb) for gb, xb in zip(g.blocks, x.bases)], check=False)


def is_transverse(x: Flag, y: Flag, tol: float = TRANSVERSE_TOL) -> TransversalityReport:
    """Check V_k(x) + W_{d-k}(y) = R^d for every k and block.

    The margin is the smallest |det| of the k x k Gram block between x's V_k
    and the orthogonal complement of y's W_{d-k} (the last k columns of y's
    basis).  For orthonormal bases this equals |det [V_k | W_{d-k}]|.
    """
    _check_same_signature(x.signature, y.signature)
    margin = np.inf
    for bx, by in zip(x.bases, y.bases):
        d = bx.shape[0]
        for k in range(1, d):
            gram = by[:, d - k:].T @ bx[:, :k]
            margin = min(margin, abs(float(np.linalg.det(gram))))
    if margin == np.inf:
        margin = 1.0
    return TransversalityReport(bool(margin > tol), float(margin))


def _sorted_eig(b: np.ndarray, gap_tol: float):
    vals, vecs = np.linalg.eig(b)
    order = np.argsort(-np.abs(vals), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    mods = np.abs(vals)
    gaps = (mods[:-1] - mods[1:]) / mods[:-1]
    if np.any(gaps < gap_tol):
        raise NotProximalError(f"eigenvalue moduli {mods} are not separated by relative gap {gap_tol}")
    return vals, vecs


def attracting_flag(g: GroupElement, gap_tol: float = PROXIMAL_GAP_TOL) -> Flag:
    """Attracting fixed flag of a loxodromic element.

    Eigenvectors ordered by decreasing eigenvalue modulus, orthonormalised.
    Every consecutive modulus gap must exceed ``gap_tol`` (relative).
    """
    bases = []
    for b in g.blocks:
        _, vecs = _sorted_eig(b, gap_tol)
        bases.append(_orthonormalize(np.real(vecs)))
    return Flag(bases, check=False)


def repelling_flag(g: GroupElement, gap_tol: float = PROXIMAL_GAP_TOL) -> Flag:
    return attracting_flag(g.inverse(), gap_tol)


def limit_flag(ray: Sequence[int], gens: Sequence[GroupElement], *, gap_tol: float = PROXIMAL_GAP_TOL,
               return_gap: bool = False):
    """Boundary flag of an infinite reduced word, approximated from its prefix ``ray``.

    Uses the attracting flag of the longest cyclically reduced prefix (the
    attractor of a cyclically reduced prefix lies in the cylinder of that
    prefix).  With ``return_gap`` also returns the flag distance to the value
    obtained from one letter less, as a Cauchy diagnostic.
    """
    ray = tuple(int(a) for a in ray)
    if len(ray) < 2 and return_gap:
        raise ConfigurationError("limit_flag needs a prefix of length >= 2")
    if not ray:
        raise ConfigurationError("limit_flag needs a nonempty prefix")
    if not is_reduced(ray):
        raise ConfigurationError("ray prefix is not freely reduced")
    flag = attracting_flag(word_element(_cyclic_prefix(ray), gens), gap_tol)
    if not return_gap:
        return flag
    prev = attracting_flag(word_element(_cyclic_prefix(ray[:-1]), gens), gap_tol)
    return flag, flag_distance(flag, prev)


def _cyclic_prefix(w: tuple[int, ...]) -> tuple[int, ...]:
    n = len(w)
    while n >= 2 and w[n - 1] == (w[0] ^ 1):
        n -= 1
    return w[:n]


# ---------------------------------------------------------------------------
# Exterior powers, weight-formula Busemann cocycle, Gromov product


def exterior_power(g_block: np.ndarray, k: int) -> np.ndarray:
    """Matrix of Lambda^k g on the lexicographic wedge basis (entries are k x k minors)."""
    g_block = np.asarray(g_block, dtype=float)
    d = g_block.shape[0]
    if not 1 <= k <= d - 1:
        raise ConfigurationError(f"exterior power index {k} outside 1..{d - 1}")
    return compound(g_block, k)


def wedge(vectors: np.ndarray) -> np.ndarray:
    """Coordinates of v_1 ^ ... ^ v_k for the columns of a (d, k) matrix."""
    vectors = np.asarray(vectors, dtype=float)
    return compound(vectors, vectors.shape[1])[:, 0]


def busemann_weights(g: GroupElement, x: Flag) -> ChamberVector:
    """Busemann cocycle from wedge-norm growth: omega_k(sigma) = log ||Lambda^k(g) v|| / ||v||.

    ``v`` is the wedge of the first k basis vectors of x.  The coordinates
    follow by first differences of omega_0 = 0, omega_1, ..., omega_{d-1}, omega_d = 0.
    """
    _check_same_signature(g.signature, x.signature)
    parts = []
    for gb, xb in zip(g.blocks, x.bases):
        d = gb.shape[0]
        omegas = []
        for k in range(1, d):
            v = wedge(xb[:, :k])
            omegas.append(np.log(np.linalg.norm(exterior_power(gb, k) @ v) / np.linalg.norm(v)))
        parts.append(_differences(np.array(omegas)))
    return ChamberVector(np.concatenate(parts), g.signature)


def gromov_product(x: Flag, y: Flag, tol: float = TRANSVERSE_TOL) -> ChamberVector:
    """Vector-valued Gromov product of a transverse pair.

    omega_k(G(x, y)) = log |phi(v)| / (||phi|| ||v||), where v is the wedge of
    y's V_k and phi is the wedge functional of x's (d-k)-dimensional subspace,
    phi(v) = x_1 ^ ... ^ x_{d-k} ^ v.  With orthonormal bases both norms are 1.
    """
    rep = is_transverse(x, y, tol)
    if not rep.transverse:
        raise TransversalityError(f"flags are not transverse (margin {rep.margin:.3e})")
    parts = []
    for bx, by in zip(x.bases, y.bases):
        d = bx.shape[0]
        omegas = [np.log(abs(np.linalg.det(np.hstack([bx[:, :d - k], by[:, :k]])))) for k in range(1, d)]
        parts.append(_differences(np.array(omegas)))
    return ChamberVector(np.concatenate(parts), x.signature)


def cocycle_period(w: Sequence[int], gens: Sequence[GroupElement], depth: int = 24,
                   gap_tol: float = PROXIMAL_GAP_TOL) -> ChamberVector:
    """Boundary-cocycle period sigma(rho(w), zeta(w_+)).

    ``w = u c u^-1`` with c cyclically reduced; the attracting boundary point of
    w is u . c_+, and zeta(c_+) is the limit flag of the periodic ray c c c ...
    truncated at ``depth`` letters.
    """
    u, c = cyclic_reduction(w)
    if not c:
        raise NotProximalError("the identity has no attracting point")
    reps = -(-depth // len(c))
    ray = (c * reps)[:max(depth, 1)]
    zeta = limit_flag(ray, gens, gap_tol=gap_tol)
    if u:
        zeta = act(word_element(u, gens), zeta)
    return busemann_iwasawa(word_element(w, gens), zeta)
