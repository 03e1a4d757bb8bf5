"""Transfer-operator oracle on the no-backtracking free-group shift.

Depth-n cylinders are the reduced words of length n, in lexicographic order.
The potential of a cylinder w is the telescoped increment

    F(w) = phi(a(g_w)) - phi(a(g_{w[1:]})),

and the weighted operator is (Q_s v)(w) = exp(-s F(w)) * sum_c v(w[1:] c)
over admissible letters c.  Its spectral radius gives the pressure
P(s) = log rho(Q_s); the entropy h_phi is the root of P.  The positive right
eigenvector at s = h, normalised to total mass 1, is the eigenmeasure on
depth-n cylinders: its defining relation nu[w] = exp(-h F(w)) nu[w[1:]] is the
discrete version of the conformality of the Patterson-Sullivan measure.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigurationError,
    ConvergenceError,
    InsufficientDataError,
    NumericDomainError,
    UnsupportedError,
)
from .group_enum import Census, _reduced_words, build_census
from .lie_sl import GroupElement, LinearForm, cartan_basis, rank
from .words import encode, letter_matrices, word_element

POWER_TOL = 1e-13
MAX_POWER_ITER = 20000


# ---------------------------------------------------------------------------
# The shift


@dataclass(frozen=True)
class Subshift:
    k: int
    transitions: np.ndarray    # (2k, 2k) 0/1, transitions[a, b] = 1 iff b != a^-1

    @property
    def alphabet(self) -> int:
        return 2 * self.k

    @property
    def irreducible(self) -> bool:
        m = self.alphabet
        reach = np.linalg.matrix_power(np.eye(m, dtype=np.int64) + self.transitions, m - 1)
        return bool(np.all(reach > 0))

    def primitive_power(self, max_power: int = 16) -> int | None:
        """Smallest p with transitions^p entrywise positive, or None."""
        p = self.transitions.astype(np.int64)
        q = p.copy()
        for n in range(1, max_power + 1):
            if np.all(q > 0):
                return n
            q = np.minimum(q @ p, 1)
        return None

    def admissible_words(self, n: int) -> np.ndarray:
        return _reduced_words(self.alphabet, n)


def build_subshift(k: int) -> Subshift:
    if k < 1:
        raise ConfigurationError("the shift needs at least one generator")
    m = 2 * k
    a = np.arange(m)
    t = (a[None, :] != (a[:, None] ^ 1)).astype(np.int64)
    return Subshift(k, t)


# ---------------------------------------------------------------------------
# Cylinder potentials


@dataclass
class CylinderPotential:
    """Potential on depth-n cylinders, with the successor table of the shift."""

    depth: int
    alphabet: int
    words: np.ndarray          # (N, depth) int8
    values: np.ndarray         # (N,)
    variation: float = float("nan")
    successors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.successors = successor_table(self.words, self.alphabet)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def codes(self) -> np.ndarray:
        return encode(self.words, self.alphabet)

    def birkhoff_period(self, word: Sequence[int]) -> float:
        """Sum of F along the periodic orbit of a cyclically reduced word."""
        w = tuple(int(a) for a in word)
        if not w:
            return 0.0
        reps = -(-(self.depth + len(w)) // len(w))
        ray = np.array(w * reps, dtype=np.int64)
        windows = np.stack([ray[i:i + self.depth] for i in range(len(w))])
        idx = np.searchsorted(self.codes, encode(windows, self.alphabet))
        return float(self.values[idx].sum())


def successor_table(words: np.ndarray, alphabet: int) -> np.ndarray:
    """Index of every admissible one-step shift w[1:] c, shape (N, alphabet - 1)."""
    n = words.shape[1]
    codes = encode(words, alphabet)
    tail = codes % (alphabet ** (n - 1)) if n > 1 else np.zeros_like(codes)
    last = words[:, -1].astype(np.int64)
    cs = np.arange(alphabet)
    allowed = cs[None, :] != (last[:, None] ^ 1)
    cand = tail[:, None] * alphabet + cs[None, :]
    cand = cand[allowed].reshape(len(words), alphabet - 1)
    idx = np.searchsorted(codes, cand)
    return idx


def constant_potential(k: int, depth: int, r: float) -> CylinderPotential:
    """F identically r on the free-group shift on k generators."""
    words = _reduced_words(2 * k, depth)
    return CylinderPotential(depth, 2 * k, words, np.full(len(words), float(r)), 0.0)


def norm_form(signature: Sequence[int]) -> LinearForm:
    """The form <u, .> with u the unit chamber direction; equals ||.|| on the chamber in rank one."""
    if rank(signature) != 1:
        raise UnsupportedError("the chamber-norm form exists only in rank one")
    return LinearForm(cartan_basis(signature)[:, 0], signature)


def _telescoped(census: Census, phi: LinearForm, n: int) -> tuple[np.ndarray, np.ndarray]:
    top = np.flatnonzero(census.lengths == n)
    below = np.flatnonzero(census.lengths == n - 1)
    words = census.words[top, :n]
    codes_below = encode(census.words[below, :n - 1], census.alphabet)
    parent = below[np.searchsorted(codes_below, encode(words[:, 1:], census.alphabet))]
    vals = phi(census.cartan[top]) - phi(census.cartan[parent])
    return words, vals


def potential_from_cocycle(gens: Sequence[GroupElement], phi: LinearForm, depth: int = 10, *,
                           threads: int = 1) -> CylinderPotential:
    """Telescoped Cartan potential on depth-n cylinders.

    Also records the refinement variation sup_w |F_n(w) - F_{n-1}(w[:n-1])|.
    """
    if depth < 2:
        raise ConfigurationError("potential depth must be at least 2")
    if len(gens) < 2:
        raise UnsupportedError("entropy needs at least two generators (k = 1 grows polynomially)")
    census = build_census(gens, depth, with_jordan=False, threads=threads)
    if census.overflow.any():
        raise NumericDomainError("Cartan projection overflow while building the potential")
    words, vals = _telescoped(census, phi, depth)
    if vals.min() <= 0:
        raise ConfigurationError(f"potential is not positive (min F = {vals.min():.3e}); "
                                 "the generators are not a certified ping-pong set for this form")
    variation = float("nan")
    if depth >= 3:
        pw, pv = _telescoped(census, phi, depth - 1)
        pidx = np.searchsorted(encode(pw, census.alphabet), encode(words[:, :-1], census.alphabet))
        variation = float(np.abs(vals - pv[pidx]).max())
    return CylinderPotential(depth, census.alphabet, words, vals, variation)


# ---------------------------------------------------------------------------
# Pressure and entropy


@dataclass
class PerronResult:
    rho: float
    vector: np.ndarray
    iterations: int


def perron(pot: CylinderPotential, s: float, v0: np.ndarray | None = None,
           tol: float = POWER_TOL, max_iter: int = MAX_POWER_ITER) -> PerronResult:
    """Power iteration for the weighted operator, stopped by Collatz-Wielandt bounds.

    For a primitive nonnegative operator min(Qv/v) <= rho <= max(Qv/v) for
    every positive v, so the bracket width certifies the eigenvalue.
    """
    w = np.exp(-s * pot.values)
    v = np.ones(len(pot)) if v0 is None else np.array(v0, dtype=float)
    v /= v.sum()
    succ = pot.successors
    for it in range(1, max_iter + 1):
        qv = w * v[succ].sum(axis=1)
        ratio = qv / v
        lo, hi = ratio.min(), ratio.max()
        v = qv / qv.sum()
        if hi - lo <= tol * hi:
            return PerronResult(float(np.sqrt(lo * hi)), v, it)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps at s={s}")


def pressure(pot: CylinderPotential, s: float) -> float:
    return float(np.log(perron(pot, s).rho))


@dataclass
class EntropyResult:
    h: float
    bracket: tuple[float, float]
    iterations: int
    refinement_variation: float
    pressure_at_root: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def solve_entropy(pot: CylinderPotential, *, xtol: float = 1e-14) -> EntropyResult:
    """Root of s -> P(s) by a bracketed solver (Brent's method)."""
    if pot.alphabet < 4:
        raise UnsupportedError("entropy is undefined for the elementary one-generator group")
    fmin = float(pot.values.min())
    if fmin <= 0:
        raise ConfigurationError("potential must be positive on every cylinder")
    state = {"v": None, "iters": 0}

    def p(s):
        res = perron(pot, s, state["v"])
        state["v"] = res.vector
        state["iters"] += res.iterations
        return np.log(res.rho)

    lo, hi = 0.0, np.log(pot.alphabet - 1) / fmin + 1.0
    p_hi = p(hi)
    while p_hi > 0:
        lo, hi = hi, 2 * hi
        p_hi = p(hi)
        if hi > 1e6:
            raise ConvergenceError("no sign change of the pressure in the bracket")
    h = brentq(p, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return EntropyResult(float(h), (float(lo), float(hi)), state["iters"], pot.variation, float(p(h)))


# ---------------------------------------------------------------------------
# Eigenmeasure


@dataclass
class CylinderMeasure:
    depth: int
    alphabet: int
    words: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if np.any(self.masses < 0):
            raise NumericDomainError("negative cylinder mass")

    @property
    def codes(self) -> np.ndarray:
        return encode(self.words, self.alphabet)

    def marginal(self, depth: int) -> "CylinderMeasure":
        """Masses of the coarser cylinders (sums over children)."""
        if not 1 <= depth <= self.depth:
            raise ConfigurationError(f"marginal depth {depth} outside 1..{self.depth}")
        if depth == self.depth:
            return self
        prefix = encode(self.words[:, :depth], self.alphabet)
        uniq, first, inv = np.unique(prefix, return_index=True, return_inverse=True)
        masses = np.bincount(inv, weights=self.masses)
        return CylinderMeasure(depth, self.alphabet, self.words[first, :depth], masses)

    def mass(self, word: Sequence[int]) -> float:
        w = tuple(int(a) for a in word)
        if len(w) > self.depth:
            raise ConfigurationError("word deeper than the measure")
        m = self.marginal(len(w)) if w else None
        if m is None:
            return float(self.masses.sum())
        code = encode(np.array([w]), self.alphabet)[0]
        i = np.searchsorted(m.codes, code)
        if i >= len(m.masses) or m.codes[i] != code:
            return 0.0
        return float(m.masses[i])

    def refinement_residual(self) -> float:
        """max |nu(parent) - sum nu(children)| over all coarser depths (zero by construction here)."""
        worst = 0.0
        for d in range(1, self.depth):
            coarse = self.marginal(d)
            fine = self.marginal(d + 1)
            parent = np.searchsorted(coarse.codes, encode(fine.words[:, :d], self.alphabet))
            sums = np.bincount(parent, weights=fine.masses, minlength=len(coarse.masses))
            worst = max(worst, float(np.abs(sums - coarse.masses).max()))
        return worst


def ps_measure(pot: CylinderPotential, h: float, *, pressure_tol: float = 1e-8) -> CylinderMeasure:
    res = perron(pot, h)
    if abs(np.log(res.rho)) > pressure_tol:
        raise ConfigurationError(f"|P(h)| = {abs(np.log(res.rho)):.2e} exceeds {pressure_tol}; h is not the root")
    v = res.vector / res.vector.sum()
    return CylinderMeasure(pot.depth, pot.alphabet, pot.words, v)


# ---------------------------------------------------------------------------
# Quasi-invariance


def _batch_products(words: np.ndarray, gens: Sequence[GroupElement]) -> list[np.ndarray]:
    letters = letter_matrices(gens)
    out = []
    for b, d in enumerate(gens[0].signature):
        stack = np.stack([L.blocks[b] for L in letters])
        m = np.broadcast_to(np.eye(d), (len(words), d, d)).copy()
        for j in range(words.shape[1]):
            m = m @ stack[words[:, j]]
        out.append(m)
    return out


def _orthonormal_stack(m: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(m)
    s = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    s[s == 0] = 1.0
    return q * s[:, None, :]


def _attracting_stack(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(m)
    order = np.argsort(-np.abs(vals), axis=1, kind="stable")
    vecs = np.take_along_axis(vecs, order[:, None, :], axis=2)
    return _orthonormal_stack(np.real(vecs))


def cylinder_points(words: np.ndarray, gens: Sequence[GroupElement]) -> list[np.ndarray]:
    """Representative boundary flag of each cylinder, per block as a stack of bases.

    A cyclically reduced w is continued periodically, whose boundary point is
    the attracting flag of g_w.  Otherwise w is continued by repeating its
    last letter l, whose boundary point is g_w applied to the attracting flag
    of l.
    """
    words = np.asarray(words)
    n = words.shape[1]
    cyc = words[:, -1] != (words[:, 0] ^ 1) if n > 1 else np.ones(len(words), bool)
    prods = _batch_products(words, gens)
    letters = letter_matrices(gens)
    out = []
    for b, mats in enumerate(prods):
        pts = np.empty_like(mats)
        if cyc.any():
            pts[cyc] = _attracting_stack(mats[cyc])
        if (~cyc).any():
            last_att = _attracting_stack(np.stack([L.blocks[b] for L in letters]))
            pts[~cyc] = _orthonormal_stack(mats[~cyc] @ last_att[words[~cyc, -1]])
        out.append(pts)
    return out


def batch_busemann(g: GroupElement, points: list[np.ndarray]) -> np.ndarray:
    """sigma(g, x) for a stack of flags x, shape (N, dim)."""
    parts = []
    for gb, xb in zip(g.blocks, points):
        r = np.linalg.qr(gb[None] @ xb, mode="r")
        parts.append(np.log(np.abs(np.diagonal(r, axis1=-2, axis2=-1))))
    return np.concatenate(parts, axis=1)


@dataclass
class QuasiInvarianceReport:
    max_residual: float
    mean_residual: float
    cylinder_depth: int
    comparisons: int


def quasi_invariance_check(nu: CylinderMeasure, gens: Sequence[GroupElement], phi: LinearForm, h: float,
                           words: Iterable[Sequence[int]] | None = None) -> QuasiInvarianceReport:
    """Compare log nu(u C) / nu(C) with -h phi(sigma(rho(u), x_C)).

    C runs over cylinders of depth ``nu.depth - |u|`` with u C reduced, and
    x_C is the representative flag from :func:`cylinder_points`.  ``words``
    defaults to the single letters; the empty word gives residual 0.
    """
    if words is None:
        words = [(a,) for a in range(nu.alphabet)]
    words = [tuple(int(a) for a in u) for u in words]
    worst, total, count = 0.0, 0.0, 0
    depth_c = None
    for u in words:
        if not u:
            continue
        dc = nu.depth - len(u)
        if dc < 1:
            raise ConfigurationError("word longer than the measure depth")
        depth_c = dc
        coarse = nu.marginal(dc)
        ok = coarse.words[:, 0] != (u[-1] ^ 1)
        cw = coarse.words[ok]
        if np.any(coarse.masses[ok] <= 0):
            raise NumericDomainError("cylinder with zero mass")
        full = np.concatenate([np.broadcast_to(np.array(u, np.int8), (len(cw), len(u))), cw], axis=1)
        num_idx = np.searchsorted(nu.codes, encode(full, nu.alphabet))
        num = nu.masses[num_idx]
        if np.any(num <= 0):
            raise NumericDomainError("cylinder with zero mass")
        lhs = np.log(num / coarse.masses[ok])
        pts = cylinder_points(cw, gens)
        rhs = -h * phi(batch_busemann(word_element(u, gens), pts))
        res = np.abs(lhs - rhs)
        worst = max(worst, float(res.max()))
        total += float(res.sum())
        count += len(res)
    return QuasiInvarianceReport(worst, total / count if count else 0.0,
                                 depth_c if depth_c is not None else nu.depth, count)


# ---------------------------------------------------------------------------
# Equidistribution


def empirical_prefix_measure(census: Census, t: float, depth: int) -> CylinderMeasure:
    """Normalised counts of census words with radius <= t, binned by depth-n prefix."""
    sel = (census.radius <= t) & (census.lengths >= depth) & ~census.overflow
    words = _reduced_words(census.alphabet, depth)
    codes = encode(words, census.alphabet)
    pc = encode(np.maximum(census.words[sel, :depth], 0), census.alphabet)
    counts = np.bincount(np.searchsorted(codes, pc), minlength=len(codes)).astype(float)
    if counts.sum() == 0:
        raise InsufficientDataError(f"no census words of length >= {depth} within radius {t}")
    return CylinderMeasure(depth, census.alphabet, words, counts / counts.sum())


def total_variation(p: CylinderMeasure, q: CylinderMeasure) -> float:
    if p.depth != q.depth or p.alphabet != q.alphabet:
        raise ConfigurationError("measures live on different cylinder sets")
    if not np.array_equal(p.codes, q.codes):
        raise ConfigurationError("measures index different cylinders")
    return float(0.5 * np.abs(p.masses - q.masses).sum())


def equidistribution_compare(census: Census, nu: CylinderMeasure, t: float, depth: int = 4) -> float:
    """Total-variation distance between the radius-t census and nu on depth-n cylinders."""
    if t > census.completeness_radius + 1e-12:
        raise InsufficientDataError(f"census is complete only to {census.completeness_radius:.3f} < t = {t}")
    emp = empirical_prefix_measure(census, t, depth)
    return total_variation(emp, nu.marginal(depth))
