"""Cartan/Jordan projections and the Busemann cocycle for products of SL(d, R).

A group element is a tuple of square blocks, one per factor.  Vectors of the
Cartan subspace are stored as the concatenation of the per-block log
coordinates, each block summing to zero.  The Euclidean norm of these
concatenated coordinates is the symmetric-space distance ``d_X(o, g o)``.

Singular values and eigenvalue moduli are never read off the small end of a
spectrum.  Both projections are assembled from the partial sums

    omega_k(a(g)) = log ||Lambda^k g||,   omega_k(lambda(g)) = log rho(Lambda^k g),

which only involve the dominant singular value (resp. eigenvalue) of each
exterior power, and then differenced.  This keeps long products of
well-separated matrices accurate in every coordinate.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericDomainError

Signature = tuple[int, ...]

DET_TOL = 1e-9
DET_RENORMALIZE_TOL = 1e-6
MAX_DIM = 8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class GroupElement:
    """An element of SL(d_1, R) x ... x SL(d_m, R).

    Blocks whose determinant is within ``1e-6`` of one are rescaled by
    ``det**(-1/d)``; anything further away is rejected.  ``check=False`` skips
    validation, which is what products of already-validated elements use (the
    determinant of a long word cannot be evaluated to 1e-9 anyway).
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks: Iterable[np.ndarray] | np.ndarray, *, check: bool = True):
        if isinstance(blocks, np.ndarray) and blocks.ndim == 2:
            blocks = (blocks,)
        out = []
        for i, b in enumerate(blocks):
            b = np.array(b, dtype=float)
            if check:
                b = _validated_block(b, i)
            b.setflags(write=False)
            out.append(b)
        if not out:
            raise ConfigurationError("a group element needs at least one block")
        object.__setattr__(self, "blocks", tuple(out))

    def __setattr__(self, name, value):
        raise AttributeError("GroupElement is immutable")

    @classmethod
    def identity(cls, signature: Sequence[int]) -> "GroupElement":
        return cls([np.eye(d) for d in signature], check=False)

    @property
    def signature(self) -> Signature:
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def dim(self) -> int:
        return sum(self.signature)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        _check_same_signature(self.signature, other.signature)
        return GroupElement([a @ b for a, b in zip(self.blocks, other.blocks)], check=False)

    def inverse(self) -> "GroupElement":
        return GroupElement([_inv_block(b) for b in self.blocks], check=False)

    def power(self, n: int) -> "GroupElement":
        if n < 0:
            return self.inverse().power(-n)
        return GroupElement([np.linalg.matrix_power(b, n) for b in self.blocks], check=False)

    def allclose(self, other: "GroupElement", rtol: float = 1e-10, atol: float = 0.0) -> bool:
        if self.signature != other.signature:
            return False
        return all(_rel_close(a, b, rtol, atol) for a, b in zip(self.blocks, other.blocks))

    def __repr__(self) -> str:
        return f"GroupElement(signature={self.signature})"


def _rel_close(a, b, rtol, atol):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1.0)
    return bool(np.abs(a - b).max() <= rtol * scale + atol)


def _validated_block(b: np.ndarray, index: int) -> np.ndarray:
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ConfigurationError(f"block {index} is not square: shape {b.shape}")
    d = b.shape[0]
    if not 1 <= d <= MAX_DIM:
        raise ConfigurationError(f"block {index}: dimension {d} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(b)):
        raise NumericDomainError(f"block {index} has non-finite entries")
    det = np.linalg.det(b)
    if abs(det - 1.0) <= DET_TOL:
        return b
    if abs(det - 1.0) <= DET_RENORMALIZE_TOL:
        return b * det ** (-1.0 / d)
    raise ConfigurationError(f"block {index} has determinant {det:.6g}, expected 1")


def _inv_block(b: np.ndarray) -> np.ndarray:
    if b.shape == (2, 2):
        # adjugate is exact for unit determinant
        return np.array([[b[1, 1], -b[0, 1]], [-b[1, 0], b[0, 0]]])
    return np.linalg.inv(b)


def _check_same_signature(s1: Signature, s2: Signature) -> None:
    if tuple(s1) != tuple(s2):
        raise ConfigurationError(f"signature mismatch: {tuple(s1)} vs {tuple(s2)}")


def normalize_to_sl(m: np.ndarray) -> np.ndarray:
    """Rescale (and if needed reflect) an invertible matrix into SL(d, R)."""
    m = np.array(m, dtype=float)
    det = np.linalg.det(m)
    if det == 0 or not np.isfinite(det):
        raise NumericDomainError("matrix is singular")
    if det < 0:
        if m.shape[0] % 2 == 1:
            m = -m
            det = -det
        else:
            m = m.copy()
            m[:, [0, 1]] = m[:, [1, 0]]
            det = -det
    return m * det ** (-1.0 / m.shape[0])


def random_sl(rng: np.random.Generator, d: int, bound: float = 3.0, min_det: float = 1.0) -> np.ndarray:
    """Uniform entries in [-bound, bound], rejection on small |det|, then scaled into SL(d).

    ``|det| >= min_det >= 1`` means the rescaling only shrinks entries, so the
    result still has entries in the box.
    """
    while True:
        m = rng.uniform(-bound, bound, size=(d, d))
        if abs(np.linalg.det(m)) >= min_det:
            return normalize_to_sl(m)


def random_element(rng: np.random.Generator, signature: Sequence[int], bound: float = 3.0) -> GroupElement:
    return GroupElement([random_sl(rng, d, bound) for d in signature], check=False)


# ---------------------------------------------------------------------------
# Cartan subspace vectors and linear forms


class ChamberVector:
    """Vector of the Cartan subspace, stored as concatenated zero-sum blocks."""

    __slots__ = ("coords", "signature", "dominant")

    def __init__(self, coords, signature: Sequence[int], dominant: bool = False):
        coords = _readonly(coords)
        signature = tuple(int(d) for d in signature)
        if coords.shape != (sum(signature),):
            raise ConfigurationError(f"coords of shape {coords.shape} do not match signature {signature}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "signature", signature)
        object.__setattr__(self, "dominant", bool(dominant))

    def __setattr__(self, name, value):
        raise AttributeError("ChamberVector is immutable")

    @classmethod
    def zero(cls, signature: Sequence[int]) -> "ChamberVector":
        return cls(np.zeros(sum(signature)), signature, dominant=True)

    def blocks(self) -> list[np.ndarray]:
        return np.split(self.coords, np.cumsum(self.signature)[:-1])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def is_dominant(self, tol: float = 1e-9) -> bool:
        return all(np.all(np.diff(b) <= tol) for b in self.blocks())

    def block_sums(self) -> np.ndarray:
        return np.array([b.sum() for b in self.blocks()])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __len__(self):
        return len(self.coords)

    def __add__(self, other: "ChamberVector") -> "ChamberVector":
        _check_same_signature(self.signature, other.signature)
        return ChamberVector(self.coords + other.coords, self.signature)

    def __sub__(self, other: "ChamberVector") -> "ChamberVector":
        _check_same_signature(self.signature, other.signature)
        return ChamberVector(self.coords - other.coords, self.signature)

    def __neg__(self) -> "ChamberVector":
        return ChamberVector(-self.coords, self.signature)

    def __mul__(self, s: float) -> "ChamberVector":
        return ChamberVector(float(s) * self.coords, self.signature, self.dominant and s >= 0)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChamberVector):
            return NotImplemented
        return self.signature == other.signature and bool(np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash((self.signature, self.coords.tobytes()))

    def __repr__(self) -> str:
        return f"ChamberVector({np.array2string(self.coords, precision=6)}, signature={self.signature})"


class LinearForm:
    """Linear form on the Cartan subspace, given by coefficients in ambient coordinates.

    Coefficients are stored projected onto the zero-sum subspace, so two forms
    that agree on the Cartan subspace have identical coefficients and ``norm``
    is the dual norm.
    """

    __slots__ = ("coeffs", "signature")

    def __init__(self, coeffs, signature: Sequence[int]):
        signature = tuple(int(d) for d in signature)
        c = np.array(coeffs, dtype=float)
        if c.shape != (sum(signature),):
            raise ConfigurationError(f"coefficients of shape {c.shape} do not match signature {signature}")
        object.__setattr__(self, "coeffs", _readonly(project_to_cartan(c, signature)))
        object.__setattr__(self, "signature", signature)

    def __setattr__(self, name, value):
        raise AttributeError("LinearForm is immutable")

    def __call__(self, v) -> float | np.ndarray:
        arr = v.coords if isinstance(v, ChamberVector) else np.asarray(v, dtype=float)
        out = arr @ self.coeffs
        return float(out) if np.ndim(out) == 0 else out

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __mul__(self, s: float) -> "LinearForm":
        return LinearForm(float(s) * self.coeffs, self.signature)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"LinearForm({np.array2string(self.coeffs, precision=6)}, signature={self.signature})"


def project_to_cartan(x: np.ndarray, signature: Sequence[int]) -> np.ndarray:
    """Orthogonal projection of ambient coordinates onto the per-block zero-sum subspace."""
    x = np.array(x, dtype=float)
    start = 0
    for d in signature:
        blk = x[..., start:start + d]
        x[..., start:start + d] = blk - blk.mean(axis=-1, keepdims=True)
        start += d
    return x


def fundamental_weight(signature: Sequence[int], block: int, k: int) -> LinearForm:
    """omega_k of the given factor: v -> v_1 + ... + v_k."""
    signature = tuple(signature)
    d = signature[block]
    if not 1 <= k <= d - 1:
        raise ConfigurationError(f"fundamental weight index {k} outside 1..{d - 1}")
    c = np.zeros(sum(signature))
    start = sum(signature[:block])
    c[start:start + k] = 1.0
    return LinearForm(c, signature)


def rank(signature: Sequence[int]) -> int:
    return sum(d - 1 for d in signature)


def cartan_basis(signature: Sequence[int]) -> np.ndarray:
    """Orthonormal basis of the Cartan subspace, shape (dim, rank).

    Columns for an SL(2) block are (1, -1)/sqrt(2); in general they are the
    Helmert contrasts ordered so that the first column of every block points
    into its positive chamber.
    """
    signature = tuple(signature)
    cols = []
    start = 0
    D = sum(signature)
    for d in signature:
        for j in range(1, d):
            c = np.zeros(D)
            c[start:start + j] = 1.0
            c[start + j] = -j
            cols.append(c / np.linalg.norm(c))
        start += d
    return np.array(cols).T if cols else np.zeros((D, 0))


def extreme_rays(signature: Sequence[int]) -> np.ndarray:
    """Unit extreme rays of the closed positive Weyl chamber, shape (rank, dim).

    For SL(d) the rays are the fundamental coweights
    ((d-k) repeated k times, -k repeated d-k times) / norm.
    """
    signature = tuple(signature)
    D = sum(signature)
    rays = []
    start = 0
    for d in signature:
        for k in range(1, d):
            r = np.zeros(D)
            r[start:start + k] = d - k
            r[start + k:start + d] = -k
            rays.append(r / np.linalg.norm(r))
        start += d
    return np.array(rays)


# ---------------------------------------------------------------------------
# Exterior powers and batch spectral kernels


@lru_cache(maxsize=None)
def wedge_index(d: int, k: int) -> np.ndarray:
    """Lexicographically ordered k-subsets of range(d), shape (C(d,k), k)."""
    return np.array(list(itertools.combinations(range(d), k)), dtype=np.intp).reshape(-1, k)


def compound(m: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix (matrix of k x k minors) of one or a stack of matrices.

    Works on arrays of shape (..., d, d) or (..., d, c) with c >= k; rows and
    columns follow the lexicographic wedge basis.
    """
    m = np.asarray(m, dtype=float)
    d, c = m.shape[-2:]
    if k == 1:
        return m.copy()
    rows = wedge_index(d, k)
    cols = wedge_index(c, k)
    sub = m[..., rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def _entry_scale(m: np.ndarray) -> np.ndarray:
    s = np.abs(m).max(axis=(-1, -2))
    return np.where(s > 0, s, 1.0)


def batch_norm2(m: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack (..., n, p)."""
    if m.shape[-2:] == (2, 2):
        # closed form on the entry-scaled matrix so squares cannot overflow
        s = _entry_scale(m)
        m = m / s[..., None, None]
        a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
        fro = a * a + b * b + c * c + d * d
        det = a * d - b * c
        disc = np.sqrt(np.maximum(fro * fro - 4.0 * det * det, 0.0))
        return s * np.sqrt(0.5 * (fro + disc))
    if m.shape[-1] == 1 or m.shape[-2] == 1:
        return np.sqrt((m * m).sum(axis=(-1, -2)))
    return np.linalg.svd(m, compute_uv=False)[..., 0]


def batch_spectral_radius(m: np.ndarray) -> np.ndarray:
    """Largest eigenvalue modulus of each square matrix in a stack."""
    if m.shape[-2:] == (2, 2):
        s = _entry_scale(m)
        m = m / s[..., None, None]
        tr = m[..., 0, 0] + m[..., 1, 1]
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        disc = tr * tr - 4.0 * det
        real = 0.5 * (np.abs(tr) + np.sqrt(np.maximum(disc, 0.0)))
        cplx = np.sqrt(np.abs(det))
        return s * np.where(disc >= 0, real, cplx)
    if m.shape[-1] == 1:
        return np.abs(m[..., 0, 0])
    return np.abs(np.linalg.eigvals(m)).max(axis=-1)


def _differences(partials: np.ndarray) -> np.ndarray:
    """Coordinates from partial sums omega_1..omega_{d-1} (omega_0 = omega_d = 0)."""
    pad = np.zeros(partials.shape[:-1] + (1,))
    full = np.concatenate([pad, partials, pad], axis=-1)
    return np.diff(full, axis=-1)


def _check_finite(m: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NumericDomainError(f"{what}: non-finite matrix entries")


def block_cartan_from_compounds(channels: Sequence[np.ndarray]) -> np.ndarray:
    """Cartan coordinates of one block from its compounds Lambda^1..Lambda^{d-1}.

    ``channels[k-1]`` holds (a stack of) Lambda^k matrices.  Returns (..., d).
    """
    if not channels:
        raise ConfigurationError("SL(1) factors carry no Cartan data")
    partials = np.stack([np.log(batch_norm2(c)) for c in channels], axis=-1)
    return _differences(partials)


def block_jordan_from_compounds(channels: Sequence[np.ndarray]) -> np.ndarray:
    partials = np.stack([np.log(batch_spectral_radius(c)) for c in channels], axis=-1)
    return _differences(partials)


def _block_compounds(b: np.ndarray) -> list[np.ndarray]:
    d = b.shape[-1]
    return [compound(b, k) for k in range(1, d)]


# ---------------------------------------------------------------------------
# Projections


def cartan_projection(g: GroupElement) -> ChamberVector:
    """Sorted log singular values per block.  Its norm is d_X(o, g o)."""
    parts = []
    for b in g.blocks:
        _check_finite(b, "cartan_projection")
        if b.shape[0] == 1:
            parts.append(np.zeros(1))
            continue
        parts.append(block_cartan_from_compounds(_block_compounds(b)))
    return ChamberVector(np.concatenate(parts), g.signature, dominant=True)


def jordan_projection(g: GroupElement) -> ChamberVector:
    """Sorted log eigenvalue moduli per block (complex pairs contribute their modulus)."""
    parts = []
    for b in g.blocks:
        _check_finite(b, "jordan_projection")
        if b.shape[0] == 1:
            parts.append(np.zeros(1))
            continue
        try:
            parts.append(block_jordan_from_compounds(_block_compounds(b)))
        except np.linalg.LinAlgError as exc:
            raise NumericDomainError(f"eigenvalue solver failed: {exc}") from exc
    return ChamberVector(np.concatenate(parts), g.signature, dominant=True)


def opposition_involution(v: ChamberVector | np.ndarray, signature: Sequence[int] | None = None):
    """Reverse each block and negate.  Accepts a ChamberVector or raw (..., dim) coords."""
    if isinstance(v, ChamberVector):
        return ChamberVector(opposition_involution(v.coords, v.signature), v.signature, v.dominant)
    if signature is None:
        raise ConfigurationError("raw coordinates need a signature")
    x = np.asarray(v, dtype=float)
    out = np.empty_like(x)
    start = 0
    for d in signature:
        out[..., start:start + d] = -x[..., start:start + d][..., ::-1]
        start += d
    return out


def exp_chamber(v: ChamberVector) -> GroupElement:
    """exp(v) as a diagonal group element."""
    return GroupElement([np.diag(np.exp(b)) for b in v.blocks()], check=False)


def _flag_bases(x) -> tuple[np.ndarray, ...]:
    bases = getattr(x, "bases", x)
    if isinstance(bases, np.ndarray) and bases.ndim == 2:
        bases = (bases,)
    return tuple(bases)


def busemann_iwasawa(g: GroupElement, x) -> ChamberVector:
    """Busemann cocycle from the Iwasawa decomposition ``g k = l exp(sigma) n``.

    ``x`` is a Flag (or tuple of orthogonal basis matrices).  QR of g k with a
    positive diagonal in R gives exp(sigma) as that diagonal.  The last
    coordinate of each block is taken from |det| = 1 rather than from R, where
    the smallest pivot of an ill-conditioned product is least accurate.
    """
    bases = _flag_bases(x)
    _check_same_signature(g.signature, tuple(b.shape[0] for b in bases))
    parts = []
    for gb, kb in zip(g.blocks, bases):
        m = gb @ kb
        _check_finite(m, "busemann_iwasawa")
        r = np.linalg.qr(m, mode="r")
        diag = np.abs(np.diag(r))
        if np.any(diag == 0) or not np.all(np.isfinite(diag)):
            raise NumericDomainError("busemann_iwasawa: rank-deficient QR")
        logs = np.log(diag)
        logs[-1] = -logs[:-1].sum()
        parts.append(logs)
    return ChamberVector(np.concatenate(parts), g.signature)


def direct_sum(g: GroupElement, h: GroupElement, signature: Sequence[int] | None = None) -> GroupElement:
    """Element of the product group with the blocks of g followed by those of h.

    ``signature``, when given, is the configured product signature the result
    must match.
    """
    out = GroupElement(g.blocks + h.blocks, check=False)
    if signature is not None:
        _check_same_signature(out.signature, tuple(signature))
    return out


def concat_vectors(vs: Sequence[ChamberVector]) -> ChamberVector:
    return ChamberVector(np.concatenate([v.coords for v in vs]),
                         tuple(itertools.chain.from_iterable(v.signature for v in vs)),
                         all(v.dominant for v in vs))
