"""Acceptance suite shared by ``orbcount verify`` and the test suite.

Each criterion returns a :class:`CheckResult` whose ``passed`` flag includes
its wall-clock budget.  Censuses are cached per process and their build time
is charged to every check that uses them, so each reported runtime is what
the check would cost on its own.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .flags import act, busemann_weights, cocycle_period, gromov_product, is_transverse, random_flag
from .group_enum import Census, build_census, free_group_count, primitive_conjugacy_classes
from .growth import (
    DEFAULT_HALF_ANGLE,
    ConeCounter,
    count_by_radius,
    fit_exponent,
    growth_form,
    growth_indicator,
    limit_cone,
    psi_dominated,
    unit,
)
from .lie_sl import (
    LinearForm,
    busemann_iwasawa,
    cartan_projection,
    jordan_projection,
    opposition_involution,
    random_element,
)
from .presets import product2, schottky2_sym, symm_power_d
from .thermo import (
    constant_potential,
    equidistribution_compare,
    norm_form,
    potential_from_cocycle,
    pressure,
    ps_measure,
    quasi_invariance_check,
    solve_entropy,
)
from .words import cyclic_canonical, free_reduce, is_cyclically_reduced, is_primitive, word_element

ACCEPT_RADIUS = 13
SEED = 20240611


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    elapsed: float
    limit: float
    summary: str
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.key:>3} {self.title}: {self.summary} ({self.elapsed:.1f} s of {self.limit:.0f} s)"


# ---------------------------------------------------------------------------
# Shared data


_CENSUS: dict[tuple, tuple[Census, float]] = {}


def cached_census(name: str, radius: int = ACCEPT_RADIUS, with_jordan: bool = False) -> tuple[Census, float]:
    """Census of a preset with its build time; a Jordan-bearing entry also serves Jordan-free requests."""
    for jordan in ((True,) if with_jordan else (False, True)):
        hit = _CENSUS.get((name, radius, jordan))
        if hit is not None:
            return hit
    gens = {"schottky2_sym": schottky2_sym, "product2": product2}[name]()
    t0 = time.perf_counter()
    census = build_census(gens, radius, with_jordan=with_jordan)
    entry = (census, time.perf_counter() - t0)
    _CENSUS[(name, radius, with_jordan)] = entry
    return entry


def clear_cache() -> None:
    _CENSUS.clear()


def _result(key, title, limit, t0, extra_time, ok, summary, **details) -> CheckResult:
    elapsed = time.perf_counter() - t0 + extra_time
    return CheckResult(key, title, bool(ok) and elapsed <= limit, elapsed, limit, summary, details)


def _random_reduced_word(rng: np.random.Generator, k: int, max_len: int) -> tuple[int, ...]:
    n = int(rng.integers(1, max_len + 1))
    w = [int(rng.integers(2 * k))]
    while len(w) < n:
        a = int(rng.integers(2 * k))
        if a != (w[-1] ^ 1):
            w.append(a)
    return tuple(w)


# ---------------------------------------------------------------------------
# Criteria


def criterion_1(samples: int = 1000, power: int = 3) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    sigs = [(2,), (3,), (4,), (5,), (2, 3)]
    e_inv = e_coc = e_hom = 0.0
    slack = np.inf
    for i in range(samples):
        sig = sigs[i % len(sigs)]
        g, h = random_element(rng, sig), random_element(rng, sig)
        x = random_flag(rng, sig)
        a = cartan_projection(g)
        e_inv = max(e_inv, np.abs(opposition_involution(a).coords - cartan_projection(g.inverse()).coords).max())
        lhs = busemann_iwasawa(g @ h, x).coords
        rhs = busemann_iwasawa(g, act(h, x)).coords + busemann_iwasawa(h, x).coords
        e_coc = max(e_coc, np.abs(lhs - rhs).max())
        lam = jordan_projection(g)
        lam_n = jordan_projection(g.power(power)).coords
        scale = max(np.linalg.norm(power * lam.coords), 1.0)
        e_hom = max(e_hom, np.linalg.norm(lam_n - power * lam.coords) / scale)
        for la, aa in zip(lam.blocks(), a.blocks()):
            gap = np.cumsum(aa)[:-1] - np.cumsum(la)[:-1]
            if gap.size:
                slack = min(slack, float(gap.min()))
    ok = e_inv <= 1e-9 and e_coc <= 1e-8 and e_hom <= 1e-8 and slack >= -1e-9
    return _result("1", "Lie identities", 10.0, t0, 0.0, ok,
                   f"iota {e_inv:.1e}, cocycle {e_coc:.1e}, homogeneity {e_hom:.1e}, majorization slack {slack:.1e}",
                   samples=samples, involution=e_inv, cocycle=e_coc, homogeneity=e_hom, slack=slack)


def criterion_2(samples: int = 500) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 2)
    sigs = [(2,), (3,), (4,), (5,), (2, 3)]
    worst = 0.0
    for i in range(samples):
        sig = sigs[i % len(sigs)]
        g, x = random_element(rng, sig), random_flag(rng, sig)
        worst = max(worst, np.abs(busemann_iwasawa(g, x).coords - busemann_weights(g, x).coords).max())
    return _result("2", "Busemann dual path", 10.0, t0, 0.0, worst <= 1e-8,
                   f"max |iwasawa - weights| {worst:.1e}", samples=samples, residual=worst)


def criterion_3(samples: int = 200, margin: float = 1e-3) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 3)
    sigs = [(2,), (3,), (4,), (5,), (2, 3)]
    worst, used, tries = 0.0, 0, 0
    while used < samples:
        tries += 1
        sig = sigs[tries % len(sigs)]
        g, x, y = random_element(rng, sig), random_flag(rng, sig), random_flag(rng, sig)
        gx, gy = act(g, x), act(g, y)
        if min(is_transverse(x, y).margin, is_transverse(gx, gy).margin) < margin:
            continue
        lhs = gromov_product(gx, gy).coords - gromov_product(x, y).coords
        rhs = -(opposition_involution(busemann_iwasawa(g, x)).coords + busemann_iwasawa(g, y).coords)
        worst = max(worst, np.abs(lhs - rhs).max())
        used += 1
    return _result("3", "Gromov transformation law", 10.0, t0, 0.0, worst <= 1e-8,
                   f"max residual {worst:.1e} over {used} triples", samples=used, residual=worst)


def criterion_4(samples: int = 200, max_len: int = 8, depth: int = 24) -> CheckResult:
    t0 = time.perf_counter()
    gens = schottky2_sym()
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for _ in range(samples):
        w = _random_reduced_word(rng, 2, max_len)
        lam = jordan_projection(word_element(w, gens)).coords
        per = cocycle_period(w, gens, depth=depth).coords
        worst = max(worst, np.linalg.norm(per - lam) / np.linalg.norm(lam))
    return _result("4", "Period identity", 30.0, t0, 0.0, worst <= 1e-6,
                   f"max relative error {worst:.1e} at depth {depth}", samples=samples, residual=worst)


def criterion_5(radius: int = ACCEPT_RADIUS) -> CheckResult:
    t0 = time.perf_counter()
    census, build = cached_census("schottky2_sym", radius)
    gens = schottky2_sym()
    fit = fit_exponent(count_by_radius(census))
    ent = solve_entropy(potential_from_cocycle(gens, norm_form(census.signature), 10))
    rel = abs(fit.h - ent.h) / ent.h
    closed = 0.0
    for r in (0.5, 1.0, 2.7):
        pot = constant_potential(2, 6, r)
        closed = max(closed, abs(pressure(pot, 0.0) - np.log(3)), abs(solve_entropy(pot).h - np.log(3) / r))
    ok = rel <= 0.05 and closed <= 1e-10
    return _result("5", "Counting vs pressure oracle", 120.0, t0, build, ok,
                   f"h_fit {fit.h:.5f} +- {fit.stderr:.5f}, h_pressure {ent.h:.5f} (rel {rel:.2%}), "
                   f"closed forms {closed:.1e}, {len(census)} elements",
                   h_fit=fit.h, stderr=fit.stderr, h_pressure=ent.h, relative=rel, closed_form=closed,
                   elements=len(census), completeness_radius=census.completeness_radius)


def criterion_6(depths=(6, 8, 10)) -> CheckResult:
    t0 = time.perf_counter()
    gens = schottky2_sym()
    phi = norm_form((2,))
    res, refine = [], 0.0
    for n in depths:
        pot = potential_from_cocycle(gens, phi, n)
        h = solve_entropy(pot).h
        nu = ps_measure(pot, h)
        refine = max(refine, nu.refinement_residual())
        res.append(quasi_invariance_check(nu, gens, phi, h).max_residual)
    at8 = res[list(depths).index(8)]
    decreasing = all(b < a for a, b in zip(res, res[1:]))
    ok = at8 <= 0.05 and decreasing and refine <= 1e-8
    return _result("6", "Patterson-Sullivan quasi-invariance", 60.0, t0, 0.0, ok,
                   "residuals " + ", ".join(f"n={n}: {r:.1e}" for n, r in zip(depths, res)),
                   residuals=dict(zip(map(str, depths), res)), refinement=refine)


def criterion_7(ts=(8.0, 10.0, 12.0), radius: int = ACCEPT_RADIUS) -> CheckResult:
    t0 = time.perf_counter()
    census, build = cached_census("schottky2_sym", radius)
    gens = schottky2_sym()
    phi = norm_form(census.signature)
    pot = potential_from_cocycle(gens, phi, 10)
    nu = ps_measure(pot, solve_entropy(pot).h)
    tv = [equidistribution_compare(census, nu, t, depth=4) for t in ts]
    ok = all(b < a for a, b in zip(tv, tv[1:]))
    return _result("7", "Equidistribution", 120.0, t0, build, ok,
                   "TV " + ", ".join(f"t={t:g}: {d:.3f}" for t, d in zip(ts, tv)),
                   distances=dict(zip(map(str, ts), tv)))


def _product_growth(radius: int):
    census, build = cached_census("product2", radius, with_jordan=True)
    t0 = time.perf_counter()
    fit = fit_exponent(count_by_radius(census))
    counter = ConeCounter(census)
    sample = growth_indicator(census)
    gf = growth_form(sample)
    return census, counter, fit, sample, gf, build + time.perf_counter() - t0


def criterion_8(radius: int = ACCEPT_RADIUS, dilation_deg: float = 5.0) -> CheckResult:
    t0 = time.perf_counter()
    census, _, fit, sample, gf, build = _product_growth(radius)
    lam = census.jordan[np.linalg.norm(census.jordan, axis=1) > 1e-9]
    cone = limit_cone(lam, census.signature)
    jordan_in = bool(cone.contains(lam).all())
    long = census.cartan[(census.lengths > radius / 2) & ~census.overflow]
    cartan_out = float(np.degrees(cone.angle_outside(long).max()))
    if gf.form is None:
        return _result("8", "Rank-2 geometry", 180.0, t0, build, False,
                       "growth-indicator maximum on the sampled boundary; no growth form", boundary=True)
    norm_gap = abs(gf.h - fit.h)
    orth = gf.orthogonality_residual()
    dominated = bool(psi_dominated(sample, gf, 2.0 * np.nan_to_num(sample.stderr)).all())
    ok = jordan_in and cartan_out <= dilation_deg and norm_gap <= fit.stderr and orth <= 1e-9 and dominated
    return _result("8", "Rank-2 geometry", 180.0, t0, build, ok,
                   f"Jordan inside {jordan_in}, Cartan outside {cartan_out:.2f} deg, "
                   f"|Theta| {gf.h:.4f} vs h_fit {fit.h:.4f} +- {fit.stderr:.4f}, "
                   f"orthogonality {orth:.1e}, psi <= Theta {dominated}",
                   jordan_inside=jordan_in, cartan_outside_deg=cartan_out, theta_norm=gf.h, h_fit=fit.h,
                   stderr=fit.stderr, orthogonality=orth, dominated=dominated, u=gf.u.tolist())


def criterion_9(radius: int = ACCEPT_RADIUS, half_angle: float = DEFAULT_HALF_ANGLE) -> CheckResult:
    t0 = time.perf_counter()
    census, counter, fit, _, gf, build = _product_growth(radius)
    u = gf.u if gf.form is not None else unit(np.nanmean(census.cartan, axis=0))
    tail = counter.fit(counter.outside(u, half_angle), (0.5 * census.completeness_radius,
                                                        census.completeness_radius))
    gap = 1.0 - tail.h / fit.h
    ok = gf.form is not None and gap >= 0.10
    return _result("9", "Cone concentration", 60.0, t0, build, ok,
                   f"outside {np.degrees(half_angle):.0f} deg cone {tail.h:.4f} vs h {fit.h:.4f} (gap {gap:.1%})",
                   tail=tail.h, h_fit=fit.h, gap=gap)


def brute_primitive_count(k: int, length: int) -> int:
    """Primitive cyclic classes of cyclically reduced words, by direct canonicalisation."""
    seen = set()
    for code in range((2 * k) ** length):
        w, c = [], code
        for _ in range(length):
            c, a = divmod(c, 2 * k)
            w.append(a)
        w = tuple(w)
        if free_reduce(w) != w or not is_cyclically_reduced(w) or not is_primitive(w):
            continue
        seen.add(cyclic_canonical(w))
    return len(seen)


def criterion_10(radius: int = ACCEPT_RADIUS, prim_len: int = 6) -> CheckResult:
    t0 = time.perf_counter()
    census, build = cached_census("schottky2_sym", radius)
    per_level = np.bincount(census.lengths, minlength=radius + 1)
    cumulative = np.cumsum(per_level)
    expected = [1 + sum(4 * 3 ** (j - 1) for j in range(1, n + 1)) for n in range(radius + 1)]
    counts_ok = cumulative.tolist() == expected and all(free_group_count(2, n) == expected[n] for n in range(radius + 1))
    lengths = np.array([len(w) for w in primitive_conjugacy_classes(2, prim_len)])
    got = [int((lengths == n).sum()) for n in range(1, prim_len + 1)]
    brute = [brute_primitive_count(2, n) for n in range(1, prim_len + 1)]
    ok = counts_ok and got == brute
    return _result("10", "Combinatorial exactness", 30.0, t0, build, ok,
                   f"ball sizes match through radius {radius}: {counts_ok}; primitive classes {got} vs brute {brute}",
                   ball=cumulative.tolist(), expected=expected, primitive=got, brute=brute)


CRITERIA: dict[str, Callable[[], CheckResult]] = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9, "10": criterion_10,
}


# ---------------------------------------------------------------------------
# Module invariants run by ``verify`` in addition to the criteria


def invariant_pressure_convexity() -> CheckResult:
    t0 = time.perf_counter()
    gens = schottky2_sym()
    pot = potential_from_cocycle(gens, norm_form((2,)), 8)
    ss = np.linspace(0.0, 2.0, 9)
    ps = np.array([pressure(pot, s) for s in ss])
    slack = float((0.5 * (ps[:-2] + ps[2:]) - ps[1:-1]).min())
    decreasing = bool(np.all(np.diff(ps) < 0))
    ok = slack >= -1e-9 and decreasing and abs(ps[0] - np.log(3)) <= 1e-10
    return _result("M1", "Pressure convex and decreasing", 60.0, t0, 0.0, ok,
                   f"midpoint slack {slack:.1e}, P(0) - log 3 = {ps[0] - np.log(3):.1e}", slack=slack)


def invariant_period_reproduction(samples: int = 50, depth: int = 12) -> CheckResult:
    t0 = time.perf_counter()
    gens = schottky2_sym()
    phi = norm_form((2,))
    pot = potential_from_cocycle(gens, phi, depth)
    rng = np.random.default_rng(SEED + 11)
    worst, used = 0.0, 0
    while used < samples:
        w = _random_reduced_word(rng, 2, depth // 2)
        if not is_cyclically_reduced(w):
            continue
        lam = float(phi(jordan_projection(word_element(w, gens)).coords))
        worst = max(worst, abs(pot.birkhoff_period(w) - lam) / abs(lam))
        used += 1
    variations = [potential_from_cocycle(gens, phi, n).variation for n in range(8, 13)]
    monotone = all(b < a for a, b in zip(variations, variations[1:]))
    return _result("M2", "Potential period reproduction", 60.0, t0, 0.0, worst <= 1e-3 and monotone,
                   f"max relative error {worst:.1e} at depth {depth}, refinement variation decreasing {monotone}",
                   residual=worst, variations=variations)


def invariant_symmetric_power_oracle(d: int = 3, radius: int = 12) -> CheckResult:
    """Counting versus pressure on the symmetric-power preset, where the census lies on one ray."""
    t0 = time.perf_counter()
    gens = symm_power_d(d)
    census = build_census(gens, radius, with_jordan=False)
    ray = unit(cartan_projection(gens[0]).coords)
    phi = LinearForm(ray, census.signature)
    fit = fit_exponent(count_by_radius(census))
    h = solve_entropy(potential_from_cocycle(gens, phi, 10)).h
    rel = abs(fit.h - h) / h
    return _result("M3", f"Counting vs pressure on symm_power_d (d={d})", 120.0, t0, 0.0, rel <= 0.05,
                   f"h_fit {fit.h:.5f}, h_pressure {h:.5f} (rel {rel:.2%})", h_fit=fit.h, h_pressure=h)


def invariant_ps_symmetry() -> CheckResult:
    t0 = time.perf_counter()
    gens = schottky2_sym()
    phi = norm_form((2,))
    pot = potential_from_cocycle(gens, phi, 8)
    nu = ps_measure(pot, solve_entropy(pot).h)
    first = nu.marginal(1).masses
    dev = float(np.abs(first - 0.25).max())
    positive = bool((nu.masses > 0).all())
    ok = dev <= 1e-9 and positive and abs(nu.masses.sum() - 1) <= 1e-12
    return _result("M4", "Patterson-Sullivan symmetry and positivity", 30.0, t0, 0.0, ok,
                   f"depth-1 masses {np.round(first, 12).tolist()}, all positive {positive}")


INVARIANTS: dict[str, Callable[[], CheckResult]] = {
    "M1": invariant_pressure_convexity, "M2": invariant_period_reproduction,
    "M3": invariant_symmetric_power_oracle, "M4": invariant_ps_symmetry,
}


def run_all(keys=None, *, invariants: bool = True, echo: Callable[[str], None] | None = None) -> list[CheckResult]:
    checks = dict(CRITERIA)
    if invariants:
        checks.update(INVARIANTS)
    out = []
    for key in (keys or checks):
        r = checks[key]()
        if echo is not None:
            echo(r.line())
        out.append(r)
    return out


__all__ = ["CheckResult", "CRITERIA", "INVARIANTS", "cached_census", "clear_cache", "run_all",
           "brute_primitive_count"]
