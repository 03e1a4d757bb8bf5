"""Breadth-first enumeration of finitely generated matrix groups by word length.

Free mode walks freely reduced words exactly once.  Dedup mode (for groups
with relations) drops any element within ``round_tol`` (entrywise) of one
already emitted, keeping the lexicographically first shortest word.

The census path never materialises per-element Python objects: each level is
a set of numpy stacks, one per (block, k) holding Lambda^k of the products, so
that Cartan and Jordan coordinates come out of dominant singular values and
eigenvalues only.  Levels are expanded in shards keyed by the leading letter;
shards are independent and concatenated in letter order, which is the
lexicographic order of the words.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, NotProximalError, ResourceError, UnsupportedError
from .flags import attracting_flag, is_transverse, repelling_flag
from .lie_sl import (
    ChamberVector,
    GroupElement,
    block_cartan_from_compounds,
    block_jordan_from_compounds,
    cartan_projection,
    compound,
    jordan_projection,
)
from .words import Word, encode, letter_matrices

log = logging.getLogger(__name__)

OVERFLOW_RADIUS = 700.0


def free_group_count(k: int, n: int) -> int:
    """Number of reduced words of length <= n on k generators."""
    return 1 + sum(2 * k * (2 * k - 1) ** (j - 1) for j in range(1, n + 1))


# ---------------------------------------------------------------------------
# Level expansion


@dataclass
class Level:
    """All elements of one word length (one shard or the merged level)."""

    length: int
    words: np.ndarray                  # (n, length) int8 letters
    channels: list[np.ndarray]         # per (block, k): (n, C(d,k), C(d,k))

    def __len__(self) -> int:
        return self.words.shape[0]


class _Channels:
    """Compound matrices of every letter, arranged per (block, k) channel."""

    def __init__(self, gens: Sequence[GroupElement]):
        if not gens:
            raise ConfigurationError("empty generating set")
        sig = gens[0].signature
        for g in gens:
            if g.signature != sig:
                raise ConfigurationError("generators have different signatures")
        self.signature = sig
        self.alphabet = 2 * len(gens)
        letters = letter_matrices(gens)
        self.layout: list[tuple[int, int]] = []
        self.stacks: list[np.ndarray] = []
        for b, d in enumerate(sig):
            ks = range(1, d) if d > 1 else [1]
            for k in ks:
                self.layout.append((b, k))
                self.stacks.append(np.stack([compound(L.blocks[b], k) for L in letters]))

    def identity(self) -> list[np.ndarray]:
        return [np.eye(s.shape[-1])[None] for s in self.stacks]

    def for_letters(self, letters: np.ndarray) -> list[np.ndarray]:
        return [s[letters] for s in self.stacks]

    def block_channels(self, channels: list[np.ndarray], block: int) -> list[np.ndarray]:
        return [c for (b, _), c in zip(self.layout, channels) if b == block]


def _expand(level: Level, ch: _Channels) -> Level:
    m = ch.alphabet
    n = len(level)
    if n == 0:
        return Level(level.length + 1, np.zeros((0, level.length + 1), np.int8),
                     [np.zeros((0,) + s.shape[1:]) for s in ch.stacks])
    last = level.words[:, -1].astype(np.int64)
    letters = np.arange(m)
    keep = (letters[None, :] != (last[:, None] ^ 1)).ravel()
    words = np.concatenate([np.repeat(level.words, m, axis=0),
                            np.tile(letters, n)[:, None].astype(np.int8)], axis=1)[keep]
    channels = []
    for c, s in zip(level.channels, ch.stacks):
        prod = np.matmul(c[:, None], s[None])
        channels.append(prod.reshape((n * m,) + s.shape[1:])[keep])
    return Level(level.length + 1, words, channels)


def iter_free_levels(gens: Sequence[GroupElement], radius_words: int, *, threads: int = 1) -> Iterator[Level]:
    """Yield levels 0..radius_words of the free-group enumeration, in lexicographic order."""
    ch = _Channels(gens)
    yield Level(0, np.zeros((1, 0), np.int8), ch.identity())
    if radius_words < 1:
        return
    m = ch.alphabet
    shards = [Level(1, np.array([[a]], np.int8), ch.for_letters(np.array([a]))) for a in range(m)]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for length in range(1, radius_words + 1):
            if length > 1:
                if pool is None:
                    shards = [_expand(s, ch) for s in shards]
                else:
                    shards = list(pool.map(lambda s: _expand(s, ch), shards))
            yield _merge(shards, length)
    finally:
        if pool is not None:
            pool.shutdown()


def _merge(shards: list[Level], length: int) -> Level:
    return Level(length,
                 np.concatenate([s.words for s in shards]),
                 [np.concatenate(parts) for parts in zip(*(s.channels for s in shards))])


def _level_elements(level: Level, ch: _Channels) -> list[np.ndarray]:
    """Group-element blocks (Lambda^1 channels) of a level."""
    out = []
    for b, d in enumerate(ch.signature):
        out.append(ch.block_channels(level.channels, b)[0] if d > 1 else
                   ch.block_channels(level.channels, b)[0])
    return out


def enumerate_free(gens: Sequence[GroupElement], radius_words: int, *, threads: int = 1
                   ) -> Iterator[tuple[Word, GroupElement]]:
    """Every freely reduced word of length <= radius_words, once, with its matrix."""
    ch = _Channels(gens)
    for level in iter_free_levels(gens, radius_words, threads=threads):
        blocks = _level_elements(level, ch)
        for i in range(len(level)):
            yield (tuple(int(a) for a in level.words[i]),
                   GroupElement([b[i] for b in blocks], check=False))


def enumerate_dedup(gens: Sequence[GroupElement], radius_words: int, round_tol: float = 1e-9, *,
                    max_elements: int = 5_000_000) -> Iterator[tuple[Word, GroupElement]]:
    """Breadth-first enumeration that identifies elements agreeing entrywise within ``round_tol``.

    Candidates are matched with Chebyshev-ball queries against everything
    emitted so far, so the separation guarantee holds exactly (a plain
    rounding hash misses pairs straddling a grid boundary).
    """
    if not 1e-12 <= round_tol <= 1e-6:
        raise ConfigurationError(f"round_tol {round_tol} outside [1e-12, 1e-6]")
    for level in _dedup_levels(gens, radius_words, round_tol, max_elements):
        words, mats = level
        for w, m in zip(words, mats):
            yield w, m


def _flatten(elems: list[GroupElement]) -> np.ndarray:
    return np.array([np.concatenate([b.ravel() for b in e.blocks]) for e in elems])


def _dedup_levels(gens, radius_words, round_tol, max_elements):
    letters = letter_matrices(gens)
    ident = GroupElement.identity(gens[0].signature)
    seen = _flatten([ident])
    yield [()], [ident]
    frontier_words: list[Word] = [()]
    frontier: list[GroupElement] = [ident]
    for _ in range(radius_words):
        cand_w, cand_e = [], []
        for w, e in zip(frontier_words, frontier):
            for a, L in enumerate(letters):
                if w and a == (w[-1] ^ 1):
                    continue
                cand_w.append(w + (a,))
                cand_e.append(e @ L)
        if not cand_w:
            break
        flat = _flatten(cand_e)
        tree = cKDTree(seen)
        hits = tree.query_ball_point(flat, r=round_tol, p=np.inf, return_length=True)
        fresh = np.flatnonzero(np.asarray(hits) == 0)
        keep: list[int] = []
        if fresh.size:
            local = cKDTree(flat[fresh])
            dropped = set()
            for i, j in sorted(local.query_pairs(r=round_tol, p=np.inf)):
                if i not in dropped:
                    dropped.add(j)
            keep = [int(fresh[i]) for i in range(fresh.size) if i not in dropped]
        if len(seen) + len(keep) > max_elements:
            raise ResourceError(f"dedup capacity {max_elements} exhausted")
        frontier_words = [cand_w[i] for i in keep]
        frontier = [cand_e[i] for i in keep]
        if keep:
            seen = np.concatenate([seen, flat[keep]])
        yield frontier_words, frontier
        if not keep:
            break


# ---------------------------------------------------------------------------
# Orbit records and the columnar census


@dataclass(frozen=True)
class OrbitRecord:
    word: Word
    word_length: int
    cartan: ChamberVector
    jordan: ChamberVector | None
    radius: float


@dataclass
class Census:
    """Columnar store of orbit records (one row per group element).

    ``words`` is padded with -1 past each word's length.  ``approximate`` marks
    dedup-mode censuses of non-free groups.
    """

    signature: tuple[int, ...]
    alphabet: int
    word_radius: int
    words: np.ndarray
    lengths: np.ndarray
    cartan: np.ndarray
    radius: np.ndarray
    jordan: np.ndarray | None = None
    overflow: np.ndarray | None = None
    approximate: bool = False
    monotone: bool | None = None
    radius_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.overflow is None:
            self.overflow = ~np.isfinite(self.radius) | (self.radius > OVERFLOW_RADIUS)

    def __len__(self) -> int:
        return self.radius.shape[0]

    @property
    def growth_constant(self) -> float:
        """min ||a(w)|| / |w| over nontrivial, non-overflowing records."""
        ok = (self.lengths > 0) & ~self.overflow
        if not ok.any():
            return 0.0
        return float((self.radius[ok] / self.lengths[ok]).min())

    @property
    def completeness_radius(self) -> float:
        """Largest t such that every element with radius <= t is in the census.

        Capped at the overflow radius, beyond which records are excluded.
        """
        return min(self.word_radius * self.growth_constant, OVERFLOW_RADIUS)

    def select(self, mask: np.ndarray) -> "Census":
        return Census(self.signature, self.alphabet, self.word_radius, self.words[mask],
                      self.lengths[mask], self.cartan[mask], self.radius[mask],
                      None if self.jordan is None else self.jordan[mask], self.overflow[mask],
                      self.approximate, self.monotone, self.radius_scale, dict(self.meta))

    def rescaled(self, s: float) -> "Census":
        """Same census under the metric scaled by s (radii and Cartan vectors times s)."""
        return Census(self.signature, self.alphabet, self.word_radius, self.words, self.lengths,
                      self.cartan * s, self.radius * s,
                      None if self.jordan is None else self.jordan * s, self.overflow,
                      self.approximate, self.monotone, self.radius_scale * s, dict(self.meta))

    def word(self, i: int) -> Word:
        return tuple(int(a) for a in self.words[i, :self.lengths[i]])

    def records(self) -> Iterator[OrbitRecord]:
        for i in range(len(self)):
            jor = None if self.jordan is None else ChamberVector(self.jordan[i], self.signature, True)
            yield OrbitRecord(self.word(i), int(self.lengths[i]),
                              ChamberVector(self.cartan[i], self.signature, True), jor,
                              float(self.radius[i]))

    def prefix_codes(self, depth: int) -> np.ndarray:
        """Integer code of each word's length-``depth`` prefix (-1 for shorter words)."""
        codes = encode(np.maximum(self.words[:, :depth], 0), self.alphabet)
        return np.where(self.lengths >= depth, codes, -1)


def _level_projections(level: Level, ch: _Channels, with_jordan: bool):
    cart, jord = [], []
    for b, d in enumerate(ch.signature):
        chans = ch.block_channels(level.channels, b)
        if d == 1:
            cart.append(np.zeros((len(level), 1)))
            jord.append(np.zeros((len(level), 1)))
            continue
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            cart.append(block_cartan_from_compounds(chans))
            if with_jordan:
                jord.append(block_jordan_from_compounds(chans))
    cartan = np.concatenate(cart, axis=1)
    jordan = np.concatenate(jord, axis=1) if with_jordan else None
    return cartan, jordan


def build_census(gens: Sequence[GroupElement], radius_words: int, *, mode: str = "free",
                 round_tol: float = 1e-9, with_jordan: bool = True, threads: int = 1) -> Census:
    """Enumerate and project every element of word length <= radius_words."""
    if mode == "free":
        ch = _Channels(gens)
        words, lengths, carts, jords = [], [], [], []
        for level in iter_free_levels(gens, radius_words, threads=threads):
            c, j = _level_projections(level, ch, with_jordan)
            if with_jordan and level.length >= 2:
                _jordan_from_cores(level.words, j, jords, words, ch.alphabet)
            pad = np.full((len(level), radius_words), -1, np.int8)
            pad[:, :level.length] = level.words
            words.append(pad)
            lengths.append(np.full(len(level), level.length, np.int32))
            carts.append(c)
            if with_jordan:
                jords.append(j)
        cartan = np.concatenate(carts)
        census = Census(ch.signature, ch.alphabet, radius_words, np.concatenate(words),
                        np.concatenate(lengths), cartan, np.linalg.norm(cartan, axis=1),
                        np.concatenate(jords) if with_jordan else None)
        census.monotone = _left_extension_monotone(census)
        return census
    if mode == "dedup":
        pairs = list(enumerate_dedup(gens, radius_words, round_tol))
        n = len(pairs)
        words = np.full((n, radius_words), -1, np.int8)
        lengths = np.zeros(n, np.int32)
        sig = gens[0].signature
        cartan = np.zeros((n, sum(sig)))
        jordan = np.zeros((n, sum(sig))) if with_jordan else None
        for i, (w, e) in enumerate(pairs):
            words[i, :len(w)] = w
            lengths[i] = len(w)
            cartan[i] = cartan_projection(e).coords
            if with_jordan:
                jordan[i] = jordan_projection(e).coords
        census = Census(sig, 2 * len(gens), radius_words, words, lengths, cartan,
                        np.linalg.norm(cartan, axis=1), jordan, approximate=True)
        census.meta["marker"] = "APPROXIMATE CENSUS (dedup mode, non-free group)"
        return census
    raise ConfigurationError(f"unknown enumeration mode {mode!r}")


def _jordan_from_cores(words: np.ndarray, jordan: np.ndarray, previous: list[np.ndarray],
                       previous_words: list[np.ndarray], alphabet: int) -> None:
    """Overwrite lambda(u c u^-1) by lambda(c) for words that are not cyclically reduced.

    The product matrix of u c u^-1 has entries of size e^{||a||} while its
    trace stays of size e^{||lambda||}, so its eigenvalues lose all precision
    for long u.  The Jordan projection is a conjugacy invariant and c is a
    shorter word already in the census.
    """
    L = words.shape[1]
    w = words.astype(np.int64)
    start = np.zeros(len(w), dtype=np.int64)
    active = np.ones(len(w), bool)
    for j in range(L // 2):
        cond = active & (w[:, L - 1 - j] == (w[:, j] ^ 1)) & (L - 2 * j >= 2)
        start[cond] = j + 1
        active = cond
    for s in np.unique(start[start > 0]):
        rows = np.flatnonzero(start == s)
        core_len = L - 2 * s
        core_codes = encode(w[rows, s:L - s], alphabet)
        level_codes = encode(previous_words[core_len][:, :core_len], alphabet)
        idx = np.searchsorted(level_codes, core_codes)
        jordan[rows] = previous[core_len][idx]


def _left_extension_monotone(census: Census) -> bool:
    """True when ||a(x w)|| > ||a(w)|| for every emitted reduced word x w.

    Under this property (checked here on the whole census) the census is
    complete up to word_radius * growth_constant.
    """
    codes_by_len = {}
    for L in range(0, census.word_radius + 1):
        idx = np.flatnonzero(census.lengths == L)
        codes_by_len[L] = (encode(census.words[idx, :L], census.alphabet), idx)
    for L in range(1, census.word_radius + 1):
        codes, idx = codes_by_len[L]
        if idx.size == 0:
            continue
        parent_codes, parent_idx = codes_by_len[L - 1]
        suffix = encode(census.words[idx, 1:L], census.alphabet)
        pos = np.searchsorted(parent_codes, suffix)
        parent = parent_idx[pos]
        ok = ~census.overflow[idx]
        if np.any(census.radius[idx][ok] <= census.radius[parent][ok]):
            return False
    return True


# ---------------------------------------------------------------------------
# Binary record log: u32 word length, f64 radius, f64 x dim cartan, f64 x dim jordan


def record_dtype(dim: int) -> np.dtype:
    return np.dtype([("word_length", "<u4"), ("radius", "<f8"),
                     ("cartan", "<f8", (dim,)), ("jordan", "<f8", (dim,))], align=False)


def write_census_log(census: Census, path) -> None:
    dim = sum(census.signature)
    rec = np.zeros(len(census), dtype=record_dtype(dim))
    rec["word_length"] = census.lengths
    rec["radius"] = census.radius
    rec["cartan"] = census.cartan
    rec["jordan"] = census.jordan if census.jordan is not None else np.nan
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


def read_census_log(path, dim: int) -> np.ndarray:
    return np.fromfile(path, dtype=record_dtype(dim))


# ---------------------------------------------------------------------------
# Ping-pong certification


@dataclass
class PingPongReport:
    certified: bool
    failures: list[str]
    min_margin: float
    min_gap: float
    growth_constant: float
    min_increment: float


def certify_ping_pong(gens: Sequence[GroupElement], margin_tol: float = 1e-3, *,
                      contraction: float = 1.0, probe_length: int = 6) -> PingPongReport:
    """Heuristic Schottky certificate.

    Checks that every generator and its inverse are loxodromic, that the 2k
    attracting/repelling flags are pairwise transverse with margin at least
    ``margin_tol`` and that every consecutive Cartan gap of every generator is
    at least ``contraction``.  On success also reports the linear growth
    constant min ||a(w)||/|w| and the smallest left-extension increment over
    words of length <= ``probe_length``.
    """
    failures: list[str] = []
    fixed = []
    for i, g in enumerate(gens):
        for name, fn in (("attracting", attracting_flag), ("repelling", repelling_flag)):
            try:
                fixed.append((i, name, fn(g)))
            except NotProximalError:
                failures.append(f"generator {i} is not proximal ({name} flag undefined)")
    min_margin = np.inf
    for p in range(len(fixed)):
        for q in range(p + 1, len(fixed)):
            i, ni, fi = fixed[p]
            j, nj, fj = fixed[q]
            if i == j:
                continue
            m = min(is_transverse(fi, fj).margin, is_transverse(fj, fi).margin)
            min_margin = min(min_margin, m)
            if m < margin_tol:
                failures.append(f"{ni} flag of generator {i} and {nj} flag of generator {j} "
                                f"not transverse (margin {m:.3e})")
    min_gap = np.inf
    for i, g in enumerate(gens):
        a = cartan_projection(g)
        for blk in a.blocks():
            if blk.size > 1:
                min_gap = min(min_gap, float(np.diff(-blk).min()))
    if min_gap < contraction:
        failures.append(f"smallest Cartan gap {min_gap:.3f} below contraction threshold {contraction}")
    growth = 0.0
    increment = -np.inf
    if not failures:
        probe = build_census(gens, probe_length, with_jordan=False)
        growth = probe.growth_constant
        increment = _min_increment(probe)
        if growth <= 0:
            failures.append("no linear growth of ||a(w)|| in word length")
        if increment <= 0:
            failures.append("left extension does not always increase ||a||")
    return PingPongReport(not failures, failures,
                          float(min_margin if np.isfinite(min_margin) else 0.0),
                          float(min_gap if np.isfinite(min_gap) else 0.0), growth, float(increment))


def _min_increment(census: Census) -> float:
    worst = np.inf
    for L in range(1, census.word_radius + 1):
        idx = np.flatnonzero(census.lengths == L)
        pidx = np.flatnonzero(census.lengths == L - 1)
        pcodes = encode(census.words[pidx, :L - 1], census.alphabet)
        suffix = encode(census.words[idx, 1:L], census.alphabet)
        parent = pidx[np.searchsorted(pcodes, suffix)]
        worst = min(worst, float((census.radius[idx] - census.radius[parent]).min()))
    return worst


# ---------------------------------------------------------------------------
# Primitive conjugacy classes


def _rotation_codes(words: np.ndarray, alphabet: int) -> np.ndarray:
    n = words.shape[1]
    return np.stack([encode(np.roll(words, -s, axis=1), alphabet) for s in range(n)], axis=1)


def primitive_class_words(alphabet: int, length: int, words: np.ndarray | None = None) -> np.ndarray:
    """Canonical representatives (least rotation) of primitive cyclic classes of one length.

    ``words`` may supply the reduced words of that length (e.g. a census
    level); otherwise they are generated.  Returns an index into ``words``
    when given, else the (n, length) letter array.
    """
    if length == 0:
        return np.zeros((0, 0), np.int8) if words is None else np.zeros(0, np.intp)
    if np.log(alphabet) * length > np.log(2.0 ** 62):
        raise ConfigurationError("word codes would overflow int64")
    gen = words is None
    if gen:
        words = _reduced_words(alphabet, length)
    w = np.asarray(words, dtype=np.int64)
    cyc = np.ones(w.shape[0], bool) if length < 2 else (w[:, -1] != (w[:, 0] ^ 1))
    rc = _rotation_codes(w, alphabet)
    own = rc[:, :1]
    canonical = np.all(own <= rc, axis=1)
    primitive = np.all(own[:, 0:1] != rc[:, 1:], axis=1) if length > 1 else np.ones(w.shape[0], bool)
    sel = np.flatnonzero(cyc & canonical & primitive)
    return words[sel] if gen else sel


def _reduced_words(alphabet: int, length: int) -> np.ndarray:
    words = np.arange(alphabet, dtype=np.int8)[:, None]
    for _ in range(length - 1):
        last = words[:, -1].astype(np.int64)
        a = np.arange(alphabet)
        keep = (a[None, :] != (last[:, None] ^ 1)).ravel()
        words = np.concatenate([np.repeat(words, alphabet, axis=0),
                                np.tile(a, len(words))[:, None].astype(np.int8)], axis=1)[keep]
    return words


def primitive_conjugacy_classes(gens: Sequence[GroupElement] | int, max_len: int, *, mode: str = "free"
                                ) -> Iterator[Word]:
    """One cyclically reduced, non-power representative per conjugacy class, by length."""
    if mode != "free":
        raise UnsupportedError("primitive conjugacy classes need free-group mode")
    k = gens if isinstance(gens, int) else len(gens)
    for n in range(1, max_len + 1):
        for row in primitive_class_words(2 * k, n):
            yield tuple(int(a) for a in row)


@dataclass
class PrimitiveClasses:
    words: list[Word]
    lengths: np.ndarray
    jordan: np.ndarray
    signature: tuple[int, ...]


def primitive_class_census(gens: Sequence[GroupElement], max_len: int, *, threads: int = 1) -> PrimitiveClasses:
    """Primitive classes up to ``max_len`` together with their Jordan projections."""
    ch = _Channels(gens)
    words, lengths, jords = [], [], []
    for level in iter_free_levels(gens, max_len, threads=threads):
        if level.length == 0:
            continue
        sel = primitive_class_words(ch.alphabet, level.length, level.words)
        sub = Level(level.length, level.words[sel], [c[sel] for c in level.channels])
        _, j = _level_projections(sub, ch, True)
        words.extend(tuple(int(a) for a in row) for row in sub.words)
        lengths.append(np.full(len(sub), level.length))
        jords.append(j)
    return PrimitiveClasses(words, np.concatenate(lengths), np.concatenate(jords), ch.signature)
