"""Orbital counting, exponent fits, directional growth and the limit cone.

All estimators take a :class:`~orbcount.group_enum.Census` (the columnar
record store); :func:`census_from_records` builds one from any iterable of
orbit records.  Directions are compared by the Euclidean angle inside the
Cartan subspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull
from scipy.stats import linregress

from .errors import ConfigurationError, InsufficientDataError, UnsupportedError
from .group_enum import Census, OrbitRecord, PrimitiveClasses
from .lie_sl import ChamberVector, LinearForm, cartan_basis, extreme_rays, rank

log = logging.getLogger(__name__)

MIN_FIT_BINS = 8
DEFAULT_BIN_WIDTH = 0.25
DEFAULT_HALF_ANGLE = float(np.radians(10.0))
FIT_TOL_SIGMAS = 2.0
NEG_INF = float("-inf")


def census_from_records(records: Iterable[OrbitRecord], signature: Sequence[int], *,
                        alphabet: int = 0, completeness_radius: float = np.inf) -> Census:
    """Columnar census from a stream of records (word letters are dropped)."""
    recs = list(records)
    dim = sum(signature)
    n = len(recs)
    cartan = np.array([r.cartan.coords for r in recs]).reshape(n, dim)
    jordan = None
    if recs and all(r.jordan is not None for r in recs):
        jordan = np.array([r.jordan.coords for r in recs]).reshape(n, dim)
    lengths = np.array([r.word_length for r in recs], dtype=np.int32)
    radius = np.array([r.radius for r in recs], dtype=float)
    c = Census(tuple(signature), alphabet, int(lengths.max()) if n else 0, np.zeros((n, 0), np.int8),
               lengths, cartan, radius, jordan)
    c.meta["completeness_radius"] = completeness_radius
    return c


def _completeness(census: Census) -> float:
    return float(census.meta.get("completeness_radius", census.completeness_radius))


# ---------------------------------------------------------------------------
# Counting tables and exponent fits


@dataclass
class CountingTable:
    """N(t_i) = #{records with radius <= t_i}; ``complete`` marks t_i within the completeness radius."""

    thresholds: np.ndarray
    counts: np.ndarray
    completeness_radius: float

    @property
    def complete(self) -> np.ndarray:
        return self.thresholds <= self.completeness_radius + 1e-12

    def rows(self):
        for t, n, c in zip(self.thresholds, self.counts, self.complete):
            yield float(t), n, bool(c)


def count_by_radius(data: Census | Iterable[OrbitRecord] | np.ndarray, bin_width: float = DEFAULT_BIN_WIDTH, *,
                    t_max: float | None = None, completeness_radius: float | None = None) -> CountingTable:
    """Right-continuous counting function sampled at t_i = i * bin_width, i = 1, 2, ...

    ``data`` is a census, a stream of records or an array of radii.  Records
    flagged as overflowing are skipped.  The completeness radius defaults to
    the census's own; for bare streams and arrays it defaults to +inf.
    """
    if bin_width <= 0:
        raise ConfigurationError("bin_width must be positive")
    if isinstance(data, Census):
        radii = data.radius[~data.overflow]
        if completeness_radius is None:
            completeness_radius = _completeness(data)
    elif isinstance(data, np.ndarray):
        radii = data[np.isfinite(data)]
    else:
        radii = np.array([r.radius for r in data], dtype=float)
    if completeness_radius is None:
        completeness_radius = np.inf
    radii = np.sort(radii)
    if t_max is None:
        t_max = float(radii[-1]) if radii.size else bin_width
        if np.isfinite(completeness_radius):
            t_max = min(t_max, completeness_radius) if radii.size else t_max
    nbins = max(1, int(np.floor(t_max / bin_width + 1e-9)))
    thresholds = bin_width * np.arange(1, nbins + 1)
    counts = np.searchsorted(radii, thresholds, side="right")
    return CountingTable(thresholds, counts, float(completeness_radius))


@dataclass
class ExponentFit:
    h: float
    stderr: float
    intercept: float
    window: tuple[float, float]
    bins: int

    @property
    def empty(self) -> bool:
        return self.h == NEG_INF


def _empty_fit(window) -> ExponentFit:
    return ExponentFit(NEG_INF, float("nan"), float("nan"), window, 0)


def default_window(table: CountingTable) -> tuple[float, float]:
    t = table.completeness_radius
    if not np.isfinite(t):
        t = float(table.thresholds[-1])
    return 0.5 * t, t


def fit_exponent(table: CountingTable, window: tuple[float, float] | None = None) -> ExponentFit:
    """Least-squares slope of log N(t) over the complete bins in the window."""
    if window is None:
        window = default_window(table)
    lo, hi = window
    if hi > table.completeness_radius + 1e-9:
        raise ConfigurationError(f"fit window end {hi} beyond completeness radius {table.completeness_radius}")
    sel = (table.thresholds >= lo - 1e-12) & (table.thresholds <= hi + 1e-12) & table.complete & (table.counts > 0)
    if sel.sum() < MIN_FIT_BINS:
        raise InsufficientDataError(f"only {int(sel.sum())} populated bins in window [{lo}, {hi}]")
    fit = linregress(table.thresholds[sel], np.log(table.counts[sel].astype(float)))
    if not fit.slope > 0:
        raise InsufficientDataError(f"non-positive fitted exponent {fit.slope}")
    return ExponentFit(float(fit.slope), float(fit.stderr), float(fit.intercept), (float(lo), float(hi)), int(sel.sum()))


# ---------------------------------------------------------------------------
# Directions


def unit(v) -> np.ndarray:
    v = np.asarray(v.coords if isinstance(v, ChamberVector) else v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigurationError("zero direction")
    return v / n


def angles_to(vectors: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Angle in radians between each row of ``vectors`` and the unit vector u (nan for zero rows)."""
    norms = np.linalg.norm(vectors, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (vectors @ u) / norms
    return np.arccos(np.clip(c, -1.0, 1.0))


class ConeCounter:
    """Counting tables of the census restricted to cones, sharing one radius binning.

    In rank 2 every chamber direction is an angle in the Cartan plane, so a
    cone is an angular interval: records are sorted by angle once and each
    cone is a contiguous slice.  Higher ranks fall back to masks.
    """

    def __init__(self, census: Census, bin_width: float = DEFAULT_BIN_WIDTH):
        if bin_width <= 0:
            raise ConfigurationError("bin_width must be positive")
        self.census = census
        self.bin_width = bin_width
        self.T = _completeness(census)
        t_max = self.T if np.isfinite(self.T) else float(census.radius[~census.overflow].max(initial=bin_width))
        nb = max(1, int(np.floor(t_max / bin_width + 1e-9)))
        self.thresholds = bin_width * np.arange(1, nb + 1)
        keep = ~census.overflow & (census.radius > 0)
        self._idx = np.flatnonzero(keep)
        rbin = np.searchsorted(self.thresholds, census.radius[self._idx], side="left")
        self._planar = rank(census.signature) == 2
        if self._planar:
            self._basis = cartan_basis(census.signature)
            theta = _plane_angles(census.cartan[self._idx] @ self._basis)
            order = np.argsort(theta, kind="stable")
            self._theta = theta[order]
            self._rbin = rbin[order]
            self._idx = self._idx[order]
        else:
            self._rbin = rbin
        self._total = self._cumulative(self._rbin)

    def _cumulative(self, rbin: np.ndarray) -> np.ndarray:
        nb = len(self.thresholds)
        return np.cumsum(np.bincount(rbin, minlength=nb + 1)[:nb])

    def _table(self, counts) -> CountingTable:
        return CountingTable(self.thresholds, counts, self.T)

    def inside(self, u, half_angle: float) -> CountingTable:
        u = unit(u)
        if self._planar:
            tu = _plane_angles((u @ self._basis)[None])[0]
            lo = np.searchsorted(self._theta, tu - half_angle, side="left")
            hi = np.searchsorted(self._theta, tu + half_angle, side="right")
            return self._table(self._cumulative(self._rbin[lo:hi]))
        mask = angles_to(self.census.cartan[self._idx], u) <= half_angle
        return self._table(self._cumulative(self._rbin[mask]))

    def outside(self, u, half_angle: float) -> CountingTable:
        return self._table(self._total - self.inside(u, half_angle).counts)

    def fit(self, table: CountingTable, window) -> ExponentFit:
        if window is None:
            window = default_window(table)
        try:
            return fit_exponent(table, window)
        except InsufficientDataError:
            return _empty_fit(window)


def directional_growth(census: Census | ConeCounter, u, half_angle: float, *,
                       bin_width: float = DEFAULT_BIN_WIDTH,
                       window: tuple[float, float] | None = None) -> ExponentFit:
    """Exponent of the census inside the cone of the given half angle (radians) about u.

    Cones without enough data in the window report h = -inf.
    """
    cc = census if isinstance(census, ConeCounter) else ConeCounter(census, bin_width)
    return cc.fit(cc.inside(u, half_angle), window)


def cone_tail_rate(census: Census | ConeCounter, u, half_angle: float, *,
                   bin_width: float = DEFAULT_BIN_WIDTH,
                   window: tuple[float, float] | None = None) -> ExponentFit:
    """Exponent of the census outside the cone about u (identity excluded); -inf if empty."""
    cc = census if isinstance(census, ConeCounter) else ConeCounter(census, bin_width)
    return cc.fit(cc.outside(u, half_angle), window)


def direction_grid(signature: Sequence[int], resolution_deg: float = 2.0, points: int = 64) -> np.ndarray:
    """Unit directions covering the closed positive chamber.

    Rank 1: the single chamber ray.  Rank 2: great-circle arc between the two
    extreme rays, with the step closest to ``resolution_deg`` that puts the
    bisector on the grid.  Rank >= 3: normalised simplex lattice over the
    extreme rays with about ``points`` directions.
    """
    rays = extreme_rays(signature)
    r = rays.shape[0]
    if r == 0:
        raise UnsupportedError("the chamber of a compact group is a point")
    if r == 1:
        return rays.copy()
    if r == 2:
        total = float(np.arccos(np.clip(rays[0] @ rays[1], -1, 1)))
        m = max(2, 2 * int(np.ceil(np.degrees(total) / resolution_deg / 2)))
        i = np.arange(m + 1)
        w0 = np.sin((m - i) / m * total) / np.sin(total)
        w1 = np.sin(i / m * total) / np.sin(total)
        return w0[:, None] * rays[0] + w1[:, None] * rays[1]
    level = 1
    while _simplex_size(r, level + 1) <= points:
        level += 1
    pts = np.array([c for c in _compositions(level, r)], dtype=float) / level
    dirs = pts @ rays
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _simplex_size(r: int, level: int) -> int:
    from math import comb
    return comb(level + r - 1, r - 1)


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for i in range(n, -1, -1):
        for rest in _compositions(n - i, parts - 1):
            yield (i,) + rest


@dataclass
class GrowthIndicatorSample:
    """Directional exponents on a grid of unit chamber directions.

    ``values[i]`` is the smallest fitted exponent over the nested cones about
    ``directions[i]`` (half angles in ``ladder``); ``cone_angle[i]`` is the
    half angle that attained it.
    """

    signature: tuple[int, ...]
    directions: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    half_angle: float
    cone_angle: np.ndarray = None
    ladder: tuple[float, ...] = ()
    global_fit: ExponentFit | None = None
    interior: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.interior is None:
            self.interior = _interior_mask(self.signature, self.directions)
        if self.cone_angle is None:
            self.cone_angle = np.full(len(self.values), self.half_angle)
        if not self.ladder:
            self.ladder = (self.half_angle,)

    def concavity_violations(self, tol: float = 0.0) -> int | None:
        """Discrete concavity defects of v -> psi(v) along the rank-2 arc (None otherwise).

        psi is 1-homogeneous, so concavity on the cone is concavity on an
        affine cross-section; the finite grid values are mapped there first.
        """
        if rank(self.signature) != 2:
            return None
        rays = extreme_rays(self.signature)
        b = rays.sum(axis=0)
        s = self.directions @ b
        pts = self.directions / s[:, None]
        x = pts @ (rays[1] - rays[0])
        y = self.values / s
        ok = np.isfinite(y)
        x, y = x[ok], y[ok]
        bad = 0
        for i in range(1, len(x) - 1):
            lam = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1])
            if y[i] < (1 - lam) * y[i - 1] + lam * y[i + 1] - tol:
                bad += 1
        return bad


def _interior_mask(signature, directions) -> np.ndarray:
    rays = extreme_rays(signature)
    if rays.shape[0] == 1:
        return np.ones(len(directions), bool)
    coef = np.linalg.lstsq(rays.T, directions.T, rcond=None)[0].T
    return np.all(coef > 1e-9, axis=1)


def growth_indicator(census: Census, resolution_deg: float = 2.0, half_angle: float = DEFAULT_HALF_ANGLE, *,
                     bin_width: float = DEFAULT_BIN_WIDTH, window: tuple[float, float] | None = None,
                     points: int = 64, ladder: Sequence[float] = (1.0, 0.5, 0.25)) -> GrowthIndicatorSample:
    """Sample the growth indicator on a direction grid.

    The indicator is an infimum over cones containing the direction, so each
    value is the minimum of the fitted exponents over cones of half angle
    ``half_angle * f`` for f in ``ladder``.  A single cone that cuts through
    the bulk of the census overestimates the exponent at desk-scale radii,
    because the share of the census inside it is still changing across the
    fit window; the smaller of nested cones is much less affected.
    """
    if len(census) == 0:
        raise InsufficientDataError("empty census")
    cc = ConeCounter(census, bin_width)
    dirs = direction_grid(census.signature, resolution_deg, points)
    angles = tuple(float(half_angle * f) for f in ladder)
    vals = np.full(len(dirs), NEG_INF)
    errs = np.full(len(dirs), np.nan)
    used = np.full(len(dirs), float(half_angle))
    for i, d in enumerate(dirs):
        best = None
        for a in angles:
            f = cc.fit(cc.inside(d, a), window)
            # too few records in a narrow cone is not evidence of a smaller rate
            if not f.empty and (best is None or f.h < best[0].h):
                best = (f, a)
        if best is not None:
            vals[i], errs[i], used[i] = best[0].h, best[0].stderr, best[1]
    T = _completeness(census)
    table = count_by_radius(census, bin_width, t_max=T, completeness_radius=T)
    try:
        glob = fit_exponent(table, window)
    except InsufficientDataError:
        glob = None
    return GrowthIndicatorSample(tuple(census.signature), dirs, vals, errs, float(half_angle), used, angles, glob)


# ---------------------------------------------------------------------------
# Growth form


@dataclass
class GrowthForm:
    form: LinearForm | None
    u: np.ndarray
    h: float
    stderr: float
    index: int
    boundary: bool

    def orthogonality_residual(self) -> float:
        """max |Theta(w)| over an orthonormal basis w of the complement of u in the Cartan subspace."""
        if self.form is None:
            return float("nan")
        basis = cartan_basis(self.form.signature)
        uc = basis.T @ self.u
        # complement of u inside the Cartan subspace
        q, _ = np.linalg.qr(np.column_stack([uc, np.eye(len(uc))]))
        comp = basis @ q[:, 1:]
        return float(np.abs(self.form(comp.T)).max()) if comp.shape[1] else 0.0


def growth_form(sample: GrowthIndicatorSample, *, tie_tol: float | None = None) -> GrowthForm:
    """u = argmax of the sampled h_C(v), ties broken toward the chamber barycenter; Theta = h <u, .>.

    Values within ``tie_tol`` of the maximum count as tied.  By default the
    tolerance is the fit tolerance (two stderr) at the maximum, so directions
    that the fits cannot tell apart resolve deterministically toward the
    barycenter.  A maximum on the boundary of the chamber is flagged and no form is returned.
    """
    vals = sample.values
    if not np.isfinite(vals).any():
        raise InsufficientDataError("growth-indicator sample has no finite value")
    finite = np.where(np.isfinite(vals), vals, -np.inf)
    imax = int(np.argmax(finite))
    if tie_tol is None:
        tie_tol = FIT_TOL_SIGMAS * float(np.nan_to_num(sample.stderr[imax]))
    cand = np.flatnonzero(finite >= finite[imax] - tie_tol)
    bary = unit(extreme_rays(sample.signature).sum(axis=0))
    i = int(cand[np.argmax(sample.directions[cand] @ bary)])
    u = sample.directions[i]
    h = float(vals[i])
    if not sample.interior[i]:
        log.warning("growth-indicator maximum lies on the chamber boundary; no growth form emitted")
        return GrowthForm(None, u, h, float(sample.stderr[i]), i, True)
    return GrowthForm(LinearForm(h * u, sample.signature), u, h, float(sample.stderr[i]), i, False)


def psi_dominated(sample: GrowthIndicatorSample, gf: GrowthForm, tol: float | np.ndarray) -> np.ndarray:
    """Per direction: h_C(v) <= Theta-bound + tol.

    h_C(v) counts a cone of half angle alpha about v, so it is compared with
    the largest value of Theta on that cone, ||Theta|| cos(max(0, angle(v, u) - alpha)).
    """
    ang = np.arccos(np.clip(sample.directions @ gf.u, -1, 1))
    bound = gf.h * np.cos(np.maximum(0.0, ang - sample.cone_angle))
    return ~(sample.values > bound + tol)


# ---------------------------------------------------------------------------
# Limit cone


@dataclass
class LimitCone:
    signature: tuple[int, ...]
    rays: np.ndarray            # (r, dim) unit extreme rays
    supporting: list            # index (into the input) of a record realising each ray
    angular_interval: tuple[float, float] | None = None   # rank 2: angles in the Cartan plane

    def angle_outside(self, v) -> np.ndarray:
        """Angle (radians) from each direction to the cone; 0 inside."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        if self.angular_interval is not None:
            basis = cartan_basis(self.signature)
            th = _plane_angles(v @ basis)
            lo, hi = self.angular_interval
            return np.maximum(0.0, np.maximum(lo - th, th - hi))
        if len(self.rays) == 1:
            return np.arccos(np.clip(v @ self.rays[0], -1, 1))
        out = np.empty(len(v))
        A = self.rays.T
        for i, x in enumerate(v):
            coef, res = nnls(A, x)
            out[i] = 0.0 if res < 1e-12 else (np.arcsin(min(1.0, res)) if x @ (A @ coef) > 0 else np.pi / 2 + np.arccos(min(1.0, res)))
        return out

    def contains(self, v, dilation: float = 0.0, tol: float = 1e-12) -> np.ndarray:
        return self.angle_outside(v) <= dilation + tol


def _plane_angles(xy: np.ndarray) -> np.ndarray:
    return np.arctan2(xy[:, 1], xy[:, 0])


def limit_cone(vectors: np.ndarray, signature: Sequence[int], *, min_records: int = 100,
               zero_tol: float = 1e-9) -> LimitCone:
    """Smallest closed cone containing the given (Jordan) vectors.

    Rank 1 gives the chamber ray; rank 2 the angular interval in the Cartan
    plane; higher rank the convex hull of the directions on an affine slice.
    """
    signature = tuple(signature)
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=1)
    idx = np.flatnonzero(norms > zero_tol)
    if idx.size < min_records:
        raise InsufficientDataError(f"limit cone needs >= {min_records} nonzero vectors, got {idx.size}")
    dirs = vectors[idx] / norms[idx, None]
    r = rank(signature)
    basis = cartan_basis(signature)
    if r == 1:
        return LimitCone(signature, unit(basis[:, 0])[None], [int(idx[0])])
    coords = dirs @ basis
    if r == 2:
        th = _plane_angles(coords)
        i0, i1 = int(np.argmin(th)), int(np.argmax(th))
        if th[i1] - th[i0] < 1e-12:
            return LimitCone(signature, dirs[i0][None], [int(idx[i0])], (float(th[i0]), float(th[i1])))
        return LimitCone(signature, dirs[[i0, i1]], [int(idx[i0]), int(idx[i1])], (float(th[i0]), float(th[i1])))
    centre = unit(coords.mean(axis=0))
    slab = coords / (coords @ centre)[:, None]
    q, _ = np.linalg.qr(np.column_stack([centre, np.eye(r)]))
    local = slab @ q[:, 1:]
    hull = ConvexHull(local)
    verts = hull.vertices
    return LimitCone(signature, dirs[verts], [int(idx[v]) for v in verts])


# ---------------------------------------------------------------------------
# Primitive classes


@dataclass
class PrimitiveTable:
    thresholds: np.ndarray
    counts: np.ndarray
    completeness: float


def primitive_count(data: PrimitiveClasses | Iterable[tuple[object, float]] | np.ndarray, phi: LinearForm | None = None,
                    bin_width: float = DEFAULT_BIN_WIDTH, *, t_max: float | None = None) -> PrimitiveTable:
    """#{primitive classes with phi(lambda) <= t} at t_i = i * bin_width.

    ``data`` is a :class:`PrimitiveClasses` batch (evaluated with phi), a
    stream of (word, phi(lambda)) pairs or an array of phi(lambda) values.
    For a batch, the completeness level is (max length) * min phi(lambda)/|w|.
    """
    completeness = np.inf
    if isinstance(data, PrimitiveClasses):
        if phi is None:
            raise ConfigurationError("a linear form is required")
        vals = phi(data.jordan)
        if len(vals):
            completeness = float(data.lengths.max() * (vals / data.lengths).min())
    elif isinstance(data, np.ndarray):
        vals = data
    else:
        vals = np.array([v for _, v in data], dtype=float)
    vals = np.sort(np.asarray(vals, dtype=float))
    if t_max is None:
        t_max = min(completeness, float(vals[-1])) if vals.size else bin_width
    nb = max(1, int(np.floor(t_max / bin_width + 1e-9)))
    th = bin_width * np.arange(1, nb + 1)
    return PrimitiveTable(th, np.searchsorted(vals, th, side="right"), completeness)


def fit_primitive_exponent(table: PrimitiveTable, window: tuple[float, float] | None = None) -> ExponentFit:
    """Slope of log(N(t) * t), the exponent in N(t) ~ e^{h t} / (h t)."""
    T = table.completeness if np.isfinite(table.completeness) else float(table.thresholds[-1])
    if window is None:
        window = (0.5 * T, T)
    lo, hi = window
    sel = (table.thresholds >= lo - 1e-12) & (table.thresholds <= min(hi, T) + 1e-12) & (table.counts > 0)
    if sel.sum() < MIN_FIT_BINS:
        raise InsufficientDataError(f"only {int(sel.sum())} populated bins in window [{lo}, {hi}]")
    t = table.thresholds[sel]
    fit = linregress(t, np.log(table.counts[sel] * t))
    return ExponentFit(float(fit.slope), float(fit.stderr), float(fit.intercept), (float(lo), float(hi)), int(sel.sum()))
