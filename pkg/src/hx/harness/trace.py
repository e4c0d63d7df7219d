"""Trace characterizations: half-space functionals against boundary norms.

Each characterization computes a functional of the extension of ``f`` and the
boundary quantity it is equivalent to (or bounded by), over a family of
random ``f``.  The ratio interval ``[min, max]`` must have a spread below
``cfg.ratio_ceiling`` and its maximum must move by less than
``cfg.stability_tol`` when the grid is refined.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from hx.extension import TGrid, cone_maximal, extend, poisson_vs_ball_mean, reflected_extension
from hx.harness.config import TRACE_CHARACTERIZATIONS, TrialConfig
from hx.harness.estimates import DEGENERATE_TOL
from hx.harness.generators import generate_test_function, trial_seed
from hx.harness.report import EstimateReport, IdentityRecord
from hx.norms import (
    bmo_block_seminorm,
    bmo_seminorm,
    carleson_sup,
    gagliardo_seminorm,
    holder_seminorm,
    lp_norm,
    maximal_function,
    square_function,
    trace_holder_functional,
    trace_sobolev_functional,
)
from hx.operators import fractional_laplacian
from hx.spectral import GridFunction

__all__ = ["run_trace_equivalence", "characterization"]

Pair = Callable[[GridFunction, TGrid], tuple[float, float]]


def _sobolev(selector: str, s: float, nu: float, p: float) -> Pair:
    def ev(f, tg):
        return trace_sobolev_functional(extend(f, s, tg), nu, p, selector), gagliardo_seminorm(f, nu, p)

    return ev


def _square(selector: str, s: float, nu: float, p: float) -> Pair:
    def ev(f, tg):
        S = square_function(extend(f, s, tg), selector, nu)
        return lp_norm(S, p), lp_norm(fractional_laplacian(f, nu), p)

    return ev


def _carleson(s: float) -> Pair:
    def ev(f, tg):
        return carleson_sup(extend(f, s, tg)), bmo_seminorm(f)

    return ev


def _reflected(f, tg):
    return bmo_block_seminorm(reflected_extension(f, tg)), bmo_seminorm(f)


def _ball_mean(f, tg):
    return poisson_vs_ball_mean(f, f.spec.L / 16), bmo_seminorm(f)


def _holder(s: float, nu: float) -> Pair:
    def ev(f, tg):
        return trace_holder_functional(extend(f, s, tg), nu), holder_seminorm(f, nu)

    return ev


def _maximal(s: float) -> Pair:
    """Both sides at the point where ``N F / M f`` is largest."""

    def ev(f, tg):
        cone = cone_maximal(extend(f, s, tg)).values.ravel()
        mf = maximal_function(f).values.ravel()
        pos = mf > 0
        if not np.any(pos):
            return 0.0, 0.0
        k = np.flatnonzero(pos)[np.argmax(cone[pos] / mf[pos])]
        return float(cone[k]), float(mf[k])

    return ev


def characterization(name: str, params: dict[str, float] | None = None) -> Pair:
    """``(f, tg) -> (half-space side, boundary side)`` for a named characterization."""
    e = {**TRACE_CHARACTERIZATIONS[name], **(params or {})}
    if name.startswith("sobolev_"):
        return _sobolev(name.split("_", 1)[1], e["s"], e["nu"], e["p"])
    if name.startswith("square_"):
        return _square(name.split("_", 1)[1], e["s"], e["nu"], e["p"])
    if name == "carleson":
        return _carleson(e["s"])
    if name == "reflected_bmo":
        return _reflected
    if name == "ball_mean":
        return _ball_mean
    if name == "holder":
        return _holder(e["s"], e["nu"])
    if name == "maximal":
        return _maximal(e["s"])
    raise KeyError(name)


def _rows(cfg: TrialConfig, names: list[str], workers: int):
    spec, tg = cfg.spec, cfg.tgrid()
    pairs = {name: characterization(name, cfg.exponents.get(name)) for name in names}

    def job(t):
        f = generate_test_function(cfg, 0, t, spec)
        scale = float(np.abs(f.values).max(initial=0.0))
        return t, scale, {name: pairs[name](f, tg) for name in names}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(cfg.trials)))
    return [job(t) for t in range(cfg.trials)]


def run_trace_equivalence(cfg: TrialConfig, workers: int = 1, refine: bool = True) -> EstimateReport:
    names = cfg.variant.split(",")
    base = cfg.replace(t_min=cfg.tgrid().t_min, t_max=cfg.tgrid().t_max)
    rows = _rows(base, names, workers)
    fine_rows = _rows(cfg.refined(), names, workers) if refine else None

    sections, checks = [], []
    for name in names:
        trials, excluded = [], 0
        for t, scale, vals in rows:
            lhs, rhs = vals[name]
            if not rhs > DEGENERATE_TOL * scale:
                excluded += 1
                continue
            trials.append({"trial": t, "seed": trial_seed(cfg, t), "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
        ratios = np.array([x["ratio"] for x in trials])
        sec = {"name": name, "params": {**TRACE_CHARACTERIZATIONS[name], **cfg.exponents.get(name, {})},
               "trials": trials, "excluded": excluded}
        if ratios.size:
            lo, hi = float(ratios.min()), float(ratios.max())
            spread = hi / lo if lo > 0 else float("inf")
            sec.update(min=lo, max=hi, spread=spread)
            checks.append(IdentityRecord(f"{name}:spread", spread, cfg.ratio_ceiling, spread <= cfg.ratio_ceiling))
            if fine_rows is not None:
                kept = {x["trial"] for x in trials}
                fine = [r[name][0] / r[name][1] for r in (fr[2] for fr in fine_rows if fr[0] in kept)
                        if r[name][1] > 0]
                fine_max = float(max(fine))
                delta = abs(fine_max - hi) / hi
                sec.update(refined_max=fine_max, stability=delta)
                checks.append(IdentityRecord(f"{name}:stability", delta, cfg.stability_tol,
                                             delta < cfg.stability_tol))
        sections.append(sec)

    agg = {}
    for sec in sections:
        if "max" in sec:
            agg[sec["name"]] = {"min": sec["min"], "max": sec["max"], "stability": sec.get("stability", 0.0)}
    return EstimateReport(
        suite="trace",
        config=cfg.to_dict(),
        aggregate=agg,
        identities=checks,
        sections=sections,
    )
