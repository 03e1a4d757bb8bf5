"""Command-line driver: ``orbcount <subcommand> [--config FILE] [overrides]``.

Subcommands run the pipeline stages and write their tables into the output
directory.  Exit status is 0 on success, 1 when a requested check fails, 2 on
configuration errors and 3 on other numerical or resource errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .acceptance import run_all
from .config import RunConfig, clamp_window, config_hash, override, parse_config
from .errors import ConfigurationError, OrbcountError, UnsupportedError
from .group_enum import build_census, certify_ping_pong, record_dtype, write_census_log
from .growth import (
    count_by_radius,
    fit_exponent,
    growth_form,
    growth_indicator,
    limit_cone,
    psi_dominated,
)
from .io import header_lines, write_csv, write_json
from .lie_sl import LinearForm, rank
from .thermo import (
    constant_potential,
    norm_form,
    potential_from_cocycle,
    ps_measure,
    quasi_invariance_check,
    solve_entropy,
)
from .words import format_word

SUBCOMMANDS = ("enumerate", "count", "indicator", "cone", "form", "entropy", "psmeasure", "verify", "all")
APPROXIMATE_MARKER = "APPROXIMATE CENSUS (dedup mode, non-free group)"


class Pipeline:
    """Lazily computed stages for one configuration; each stage runs at most once."""

    def __init__(self, cfg: RunConfig, echo: Callable[[str], None] = print):
        self.cfg = cfg
        self.echo = echo
        self.out = Path(cfg.out)
        self.failures: list[str] = []
        self.hash = config_hash(cfg)

    # -- stages ------------------------------------------------------------

    @cached_property
    def gens(self):
        return self.cfg.build_generators()

    @cached_property
    def census(self):
        c = build_census(self.gens, self.cfg.radius, mode=self.cfg.mode, round_tol=self.cfg.round_tol,
                         with_jordan=True, threads=self.cfg.threads)
        if c.approximate:
            self.echo(APPROXIMATE_MARKER)
        return c

    @property
    def completeness(self) -> float:
        return float(self.census.completeness_radius)

    @cached_property
    def window(self) -> tuple[float, float]:
        # clamp_window logs a warning for every adjustment
        return clamp_window(self.cfg.window, self.completeness)[0]

    @cached_property
    def sample(self):
        return growth_indicator(self.census, self.cfg.resolution, np.radians(self.cfg.half_angle),
                                bin_width=self.cfg.bin_width, window=self.window)

    @cached_property
    def form(self):
        return growth_form(self.sample)

    @cached_property
    def phi(self) -> LinearForm:
        choice = self.cfg.phi
        sig = self.gens[0].signature
        if not isinstance(choice, str):
            return LinearForm(np.array(choice), sig)
        if choice == "norm" or (choice == "auto" and rank(sig) == 1):
            return norm_form(sig)
        if self.form.form is None:
            raise UnsupportedError("growth-indicator maximum on the chamber boundary; set phi explicitly")
        return self.form.form

    @cached_property
    def potential(self):
        if self.cfg.mode != "free":
            raise UnsupportedError("entropy and eigenmeasure need the free-group coding (mode = free)")
        if self.cfg.roof is not None:
            return constant_potential(len(self.gens), self.cfg.depth, self.cfg.roof)
        return potential_from_cocycle(self.gens, self.phi, self.cfg.depth, threads=self.cfg.threads)

    @cached_property
    def entropy(self):
        return solve_entropy(self.potential)

    # -- helpers -----------------------------------------------------------

    def header(self, completeness: float | None = None, **extra) -> list[str]:
        if completeness is None and self.cfg.roof is None:
            completeness = self.completeness
        if "census" in self.__dict__ and self.census.approximate:
            extra = {"census": APPROXIMATE_MARKER, **extra}
        return header_lines(self.hash, completeness, extra)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.echo(f"{'ok' if ok else 'FAILED'}: {name}" + (f" ({detail})" if detail else ""))
        if not ok:
            self.failures.append(name)

    def coords(self) -> list[str]:
        return [f"x_{i + 1}" for i in range(sum(self.gens[0].signature))]

    # -- subcommands -------------------------------------------------------

    def enumerate(self) -> None:
        c = self.census
        dim = sum(c.signature)
        self.out.mkdir(parents=True, exist_ok=True)
        write_census_log(c, self.out / "census.bin")
        summary = {"elements": len(c), "word_radius": c.word_radius, "completeness_radius": self.completeness,
                   "growth_constant": c.growth_constant, "monotone": c.monotone, "approximate": c.approximate,
                   "overflow": int(c.overflow.sum()), "signature": list(c.signature),
                   "record_layout": [[n, str(record_dtype(dim).fields[n][0])] for n in record_dtype(dim).names]}
        if self.cfg.mode == "free":
            pp = certify_ping_pong(self.gens, self.cfg.margin_tol)
            summary["ping_pong"] = {"certified": pp.certified, "failures": pp.failures,
                                    "min_margin": pp.min_margin, "min_gap": pp.min_gap}
            self.check("ping-pong certificate", pp.certified, "; ".join(pp.failures))
            self.check("left-extension monotonicity", bool(c.monotone))
        write_json(self.out / "census.json", summary, self.header())
        self.echo(f"census: {len(c)} elements, complete to radius {self.completeness:.6g}")

    def count(self) -> None:
        table = count_by_radius(self.census, self.cfg.bin_width, t_max=self.completeness,
                                completeness_radius=self.completeness)
        write_csv(self.out / "counting.csv", ["t", "N", "complete"], table.rows(), self.header())
        fit = fit_exponent(table, self.window)
        write_json(self.out / "count_fit.json",
                   {"h": fit.h, "stderr": fit.stderr, "intercept": fit.intercept,
                    "window": list(fit.window), "bins": fit.bins}, self.header())
        self.echo(f"h_fit = {fit.h:.6f} +- {fit.stderr:.6f} on [{fit.window[0]:.4g}, {fit.window[1]:.4g}]")

    def indicator(self) -> None:
        s = self.sample
        rows = (list(d) + [v, e, np.degrees(a)] for d, v, e, a in
                zip(s.directions, s.values, s.stderr, s.cone_angle))
        write_csv(self.out / "psi_sample.csv", self.coords() + ["value", "stderr", "cone_half_angle"], rows,
                  self.header())
        g = s.global_fit
        write_json(self.out / "indicator.json",
                   {"global_h": None if g is None else g.h, "global_stderr": None if g is None else g.stderr,
                    "half_angle_deg": self.cfg.half_angle, "ladder_deg": [np.degrees(a) for a in s.ladder],
                    "concavity_violations": s.concavity_violations(), "points": len(s.values)}, self.header())
        self.echo(f"growth indicator: {int(np.isfinite(s.values).sum())} finite of {len(s.values)} directions")

    def cone(self) -> None:
        c = self.census
        cone = limit_cone(c.jordan, c.signature)
        rows = (list(r) + [format_word(c.word(i))] for r, i in zip(cone.rays, cone.supporting))
        write_csv(self.out / "cone.csv", self.coords() + ["supporting_word"], rows, self.header())
        lam = c.jordan[np.linalg.norm(c.jordan, axis=1) > 1e-9]
        inside = bool(cone.contains(lam).all())
        long = c.cartan[(c.lengths > c.word_radius / 2) & ~c.overflow]
        outside = float(np.degrees(cone.angle_outside(long).max())) if len(long) else 0.0
        write_json(self.out / "cone.json",
                   {"rays": cone.rays, "angular_interval": cone.angular_interval,
                    "jordan_inside": inside, "long_cartan_outside_deg": outside}, self.header())
        self.check("Jordan directions inside the limit cone", inside)
        self.echo(f"long-word Cartan directions reach {outside:.3f} deg outside the cone")

    def form_cmd(self) -> None:
        gf = self.form
        fit = self.sample.global_fit
        rows = []
        if gf.form is not None:
            rows.append(["coeffs"] + list(gf.form.coeffs))
        rows.append(["u"] + list(gf.u))
        write_csv(self.out / "growth_form.csv", ["kind"] + self.coords(), rows, self.header())
        orth = gf.orthogonality_residual()
        dominated = bool(psi_dominated(self.sample, gf, 2.0 * np.nan_to_num(self.sample.stderr)).all())
        write_json(self.out / "growth_form.json",
                   {"u": gf.u, "theta_norm": gf.h, "stderr": gf.stderr, "boundary": gf.boundary,
                    "h_fit": None if fit is None else fit.h, "orthogonality": orth, "psi_dominated": dominated},
                   self.header())
        self.check("growth maximum interior to the chamber", not gf.boundary)
        if gf.form is not None:
            self.check("Theta vanishes on the complement of u", orth <= 1e-9, f"{orth:.1e}")
            self.check("psi sample below Theta", dominated)

    def entropy_cmd(self) -> None:
        e = self.entropy
        payload = {"h": e.h, "bracket": list(e.bracket), "iterations": e.iterations,
                   "refinement_variation": e.refinement_variation, "pressure_at_root": e.pressure_at_root,
                   "depth": self.potential.depth}
        if self.cfg.roof is not None:
            payload["roof"] = self.cfg.roof
            payload["closed_form"] = float(np.log(self.potential.alphabet - 1) / self.cfg.roof)
        else:
            payload["phi"] = self.phi.coeffs
        write_json(self.out / "entropy.json", payload, self.header())
        self.echo(f"h = {e.h:.12g} (|P(h)| = {abs(e.pressure_at_root):.1e})")
        self.check("pressure root", abs(e.pressure_at_root) <= 1e-10, f"{abs(e.pressure_at_root):.1e}")

    def psmeasure(self) -> None:
        nu = ps_measure(self.potential, self.entropy.h)
        rows = ((format_word(w), m) for w, m in zip(nu.words, nu.masses))
        write_csv(self.out / "cylinder_masses.csv", ["word", "mass"], rows, self.header())
        refine = nu.refinement_residual()
        payload = {"h": self.entropy.h, "depth": nu.depth, "refinement_residual": refine}
        if self.cfg.roof is None:
            qi = quasi_invariance_check(nu, self.gens, self.phi, self.entropy.h)
            payload["quasi_invariance"] = {"max_residual": qi.max_residual, "mean_residual": qi.mean_residual,
                                           "cylinder_depth": qi.cylinder_depth, "comparisons": qi.comparisons}
            self.echo(f"quasi-invariance residual {qi.max_residual:.3e} at cylinder depth {qi.cylinder_depth}")
        write_json(self.out / "psmeasure.json", payload, self.header())
        self.check("eigenmeasure refinement consistency", refine <= 1e-8, f"{refine:.1e}")

    def verify(self) -> None:
        results = run_all(echo=self.echo)
        write_json(self.out / "verify.json",
                   {r.key: {"title": r.title, "passed": r.passed, "elapsed": r.elapsed, "limit": r.limit,
                            "summary": r.summary} for r in results},
                   header_lines(self.hash, None))
        for r in results:
            if not r.passed:
                self.failures.append(f"criterion {r.key}")

    def run(self, command: str) -> int:
        stages = {"enumerate": self.enumerate, "count": self.count, "indicator": self.indicator,
                  "cone": self.cone, "form": self.form_cmd, "entropy": self.entropy_cmd,
                  "psmeasure": self.psmeasure, "verify": self.verify}
        todo = [c for c in SUBCOMMANDS if c not in ("verify", "all")] if command == "all" else [command]
        if command == "all" and self.cfg.mode != "free":
            todo = [c for c in todo if c not in ("entropy", "psmeasure")]
        for c in todo:
            if self.cfg.roof is not None and c not in ("entropy", "psmeasure", "verify"):
                continue
            stages[c]()
        return 1 if self.failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbcount", description="Orbit counting for matrix groups in products of SL(d, R).")
    p.add_argument("--version", action="version", version=f"orbcount {__version__}")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="configuration file (key = value lines)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--radius", type=int, help="word radius of the census")
    p.add_argument("--depth", type=int, help="cylinder depth of the transfer operator")
    p.add_argument("--preset", help="generator preset")
    p.add_argument("-q", "--quiet", action="store_true", help="print only failures and errors")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
    return override(cfg, out=args.out, threads=args.threads, radius=args.radius, depth=args.depth,
                    preset=args.preset)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")

    def echo(line: str) -> None:
        if not args.quiet or line.startswith(("FAILED", "[FAIL]", "warning", "APPROXIMATE")):
            print(line, flush=True)

    try:
        cfg = load_config(args)
    except (OSError, ConfigurationError) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    try:
        return Pipeline(cfg, echo).run(args.command)
    except ConfigurationError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OrbcountError, ArithmeticError, MemoryError) as exc:
        print(f"error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
