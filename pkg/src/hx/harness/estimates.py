"""Inequality (ratio) suites.

Each suite evaluates the left-hand side of one estimate and the product of
norms on its right-hand side for random inputs, and reports ``lhs / rhs``.
Constants are unknown, so a suite passes when every ratio is finite, the
largest ratio moves by less than ``stability_tol`` when the grid is refined,
and the ratio is invariant under a common rescaling of the inputs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from hx.commutators import (
    chanillo_commutator,
    cmcim_commutator,
    crw_commutator,
    dalio_pairing,
    div_curl_pairing,
    double_commutator_minus,
    double_commutator_plus,
    jacobian_pairing,
    leibniz_defect,
)
from hx.harness.config import TrialConfig
from hx.harness.generators import generate_test_function, trial_seed
from hx.harness.report import EstimateReport, IdentityRecord, TrialRecord
from hx.norms import bmo_seminorm, gagliardo_seminorm, holder_seminorm, lorentz_norm, lp_norm
from hx.operators import fractional_laplacian, riesz_potential
from hx.spectral import GridFunction, GridSpec, gradient

__all__ = ["EstimateSuite", "get_suite", "run_estimate", "trial_ratio", "DEGENERATE_TOL", "HOMOGENEITY_TOL"]

DEGENERATE_TOL = 1e-12
HOMOGENEITY_TOL = 1e-10
# rescalings used for the homogeneity check, applied to a few trials
_LAMBDAS = (0.37, 2.5)
_HOMOGENEITY_TRIALS = 3

Evaluator = Callable[[Sequence[GridFunction]], tuple[float, float]]


@dataclass(frozen=True)
class EstimateSuite:
    """One estimate: its input roles, homogeneity degrees and evaluator."""

    name: str
    variant: str
    roles: tuple[str, ...]
    mean_free: tuple[bool, ...]
    lhs_degree: int
    rhs_degree: int
    evaluate: Evaluator

    def inputs(self, cfg: TrialConfig, trial: int, spec: GridSpec | None = None) -> list[GridFunction]:
        return [
            generate_test_function(cfg, role, trial, spec, zero_mean=zm)
            for role, zm in enumerate(self.mean_free)
        ]


# -- norm helpers -----------------------------------------------------------------


def _lap(f: GridFunction, s: float) -> GridFunction:
    return f if s == 0 else fractional_laplacian(f, s)


def _ipot(f: GridFunction, sigma: float) -> GridFunction:
    return f.zero_mean() if sigma == 0 else riesz_potential(f, sigma)


def _magnitude(fs: Sequence[GridFunction]) -> GridFunction:
    return GridFunction(fs[0].spec, np.sqrt(sum(g.values**2 for g in fs)))


def _lorentz(f: GridFunction, p: float, q: float) -> float:
    return lp_norm(f, p) if p == q else lorentz_norm(f, p, q)


def _sup_grad(g: GridFunction) -> float:
    return float(_magnitude(gradient(g)).values.max())


# -- suites -----------------------------------------------------------------------


def _crw(e, n):
    i, p = e["i"], e["p"]

    def ev(x):
        phi, g = x
        return lp_norm(crw_commutator(i, phi, g), p), bmo_seminorm(phi) * lp_norm(g, p)

    return ("phi", "g"), (False, False), 2, 2, ev


def _chanillo(e, n):
    sigma, p, q = e["sigma"], e["p"], e["q"]

    def ev(x):
        phi, f = x
        return lp_norm(chanillo_commutator(sigma, phi, f), q), bmo_seminorm(phi) * lp_norm(f, p)

    return ("phi", "f"), (False, True), 2, 2, ev


def _cmcim(e, n, variant):
    p = e["p"]
    if variant in ("riesz", "riesz_intermediate"):
        sigma, i = e["sigma"], e.get("i", 0)

        def lhs(g, f):
            return lp_norm(crw_commutator(i, g, f), p)

        if variant == "riesz":
            def rhs(g, f):
                return bmo_seminorm(_lap(g, sigma)) * lp_norm(_ipot(f, sigma), p)
        else:
            def rhs(g, f):
                return lp_norm(_lap(g, sigma), e["q1"]) * lp_norm(_ipot(f, sigma), e["q2"])
    else:
        s = e["s"]

        def lhs(g, f):
            return lp_norm(cmcim_commutator(s, g, f), p)

        if variant == "lip":
            def rhs(g, f):
                return _sup_grad(g) * lp_norm(_ipot(f, 1 - s), p)
        elif variant == "holder":
            sigma = e["sigma"]

            def rhs(g, f):
                return (bmo_seminorm(_lap(g, sigma)) + holder_seminorm(g, sigma)) * lp_norm(_ipot(f, sigma - s), p)
        else:
            sigma = e["sigma"]

            def rhs(g, f):
                return lp_norm(_lap(g, sigma), e["q1"]) * lp_norm(_ipot(f, sigma - s), e["q2"])

    def ev(x):
        g, f = x
        return lhs(g, f), rhs(g, f)

    return ("g", "f"), (False, True), 2, 2, ev


def _leibniz(e, n, variant):
    s, p = e["s"], e["p"]
    if variant == "limit":
        def ev(x):
            f, phi = x
            return lp_norm(leibniz_defect(s, f, phi), p), lp_norm(_lap(f, s), p) * bmo_seminorm(phi)
    else:
        tau = e["tau"]

        def ev(x):
            f, phi = x
            lhs = _lorentz(leibniz_defect(s, f, phi), p, e["q"])
            rhs = _lorentz(_lap(f, s - tau), e["p1"], e["q1"]) * _lorentz(_lap(phi, tau), e["p2"], e["q2"])
            return lhs, rhs

    return ("f", "phi"), (False, False), 2, 2, ev


def _dalio(e, n):
    s = e["s"]

    def ev(x):
        a, b, phi = x
        lhs = abs(dalio_pairing(s, a, b, phi))
        rhs = bmo_seminorm(phi) * _lorentz(_lap(a, s), e["p"], e["q"]) * _lorentz(_lap(b, s), e["p_conj"], e["q_conj"])
        return lhs, rhs

    return ("a", "b", "phi"), (False, False, False), 3, 3, ev


def _jacobian(e, n, variant):
    if variant == "bmo":
        def ev(x):
            phi, u1, u2 = x
            lhs = abs(jacobian_pairing(phi, (u1, u2)))
            grad_u = _magnitude(gradient(u1) + gradient(u2))
            return lhs, bmo_seminorm(phi) * lp_norm(grad_u, n) ** n
    else:
        s, p = e["s"], e["p"]

        def ev(x):
            lhs = abs(jacobian_pairing(x[0], (x[1], x[2])))
            rhs = math.prod(gagliardo_seminorm(f, si, pi) for f, si, pi in zip(x, s, p))
            return lhs, rhs

    return ("phi", "u1", "u2"), (False, False, False), 3, 3, ev


def _divcurl(e, n, variant):
    if variant == "bmo":
        def ev(x):
            phi, f, h = x
            lhs = abs(div_curl_pairing(phi, f, h))
            rhs = (bmo_seminorm(phi) * _lorentz(_magnitude(gradient(f)), e["p1"], e["q1"])
                   * _lorentz(_magnitude(gradient(h)), e["p2"], e["q2"]))
            return lhs, rhs
    else:
        s, p, q = e["s"], e["p"], e["q"]

        def ev(x):
            lhs = abs(div_curl_pairing(*x))
            rhs = math.prod(_lorentz(_lap(f, si), pi, qi) for f, si, pi, qi in zip(x, s, p, q))
            return lhs, rhs

    return ("phi", "f", "h"), (False, False, False), 3, 3, ev


def _double(e, n, variant):
    op = double_commutator_minus if variant == "minus" else double_commutator_plus

    def ev(x):
        f, g = x
        lhs = lp_norm(op(f, g), 1.0)
        rhs = _lorentz(_lap(f, e["s1"]), e["p"], e["q"]) * _lorentz(_lap(g, e["s2"]), e["p_conj"], e["q_conj"])
        return lhs, rhs

    return ("f", "g"), (True, True), 2, 2, ev


_BUILDERS = {
    "crw": lambda e, n, v: _crw(e, n),
    "chanillo": lambda e, n, v: _chanillo(e, n),
    "cmcim": _cmcim,
    "leibniz": _leibniz,
    "dalio": lambda e, n, v: _dalio(e, n),
    "jacobian": _jacobian,
    "divcurl": _divcurl,
    "double": _double,
}


def get_suite(cfg: TrialConfig) -> EstimateSuite:
    roles, mean_free, dl, dr, ev = _BUILDERS[cfg.suite](cfg.derived, cfg.n, cfg.variant)
    return EstimateSuite(cfg.suite, cfg.variant, roles, mean_free, dl, dr, ev)


# -- running ----------------------------------------------------------------------


def _scale(inputs: Sequence[GridFunction]) -> float:
    return math.prod(float(np.abs(f.values).max(initial=0.0)) for f in inputs)


def trial_ratio(lhs: float, rhs: float, scale: float) -> float | None:
    """``lhs / rhs``; 0 for a vanishing left side, ``None`` for a degenerate right side."""
    if abs(lhs) <= DEGENERATE_TOL * scale:
        return 0.0
    if not rhs > DEGENERATE_TOL * scale:
        return None
    return lhs / rhs


def _evaluate_trial(suite: EstimateSuite, cfg: TrialConfig, spec: GridSpec, trial: int):
    x = suite.inputs(cfg, trial, spec)
    lhs, rhs = suite.evaluate(x)
    return trial, float(lhs), float(rhs), _scale(x)


def _run_grid(suite: EstimateSuite, cfg: TrialConfig, spec: GridSpec, workers: int):
    def job(t):
        return _evaluate_trial(suite, cfg, spec, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(cfg.trials)))
    return [job(t) for t in range(cfg.trials)]


def _homogeneity(suite: EstimateSuite, cfg: TrialConfig, trials: list[int]) -> float:
    """Largest relative change of ``lhs/rhs`` when all inputs are scaled by a common factor."""
    worst = 0.0
    if suite.lhs_degree != suite.rhs_degree:
        return math.inf
    for t in trials:
        x = suite.inputs(cfg, t)
        l0, r0 = suite.evaluate(x)
        base = l0 / r0
        for lam in _LAMBDAS:
            l1, r1 = suite.evaluate([f * lam for f in x])
            worst = max(worst, abs(l1 / r1 - base) / abs(base))
            # each side separately scales by its declared degree
            worst = max(worst, abs(l1 - lam**suite.lhs_degree * l0) / abs(lam**suite.lhs_degree * l0))
            worst = max(worst, abs(r1 - lam**suite.rhs_degree * r0) / abs(lam**suite.rhs_degree * r0))
    return worst


def run_estimate(cfg: TrialConfig, workers: int = 1, refine: bool = True) -> EstimateReport:
    """Run ``cfg.trials`` trials on the configured grid and, with ``refine``, on ``N -> 2N``."""
    suite = get_suite(cfg)
    base_cfg = cfg.replace(t_min=cfg.tgrid().t_min, t_max=cfg.tgrid().t_max)
    rows = _run_grid(suite, base_cfg, cfg.spec, workers)

    records, excluded, ratios = [], 0, {}
    for t, lhs, rhs, scale in rows:
        r = trial_ratio(lhs, rhs, scale)
        if r is None or not rhs > DEGENERATE_TOL * scale:
            excluded += 1
            continue
        ratios[t] = r
        records.append(TrialRecord(t, trial_seed(cfg, t), lhs, rhs, r))

    values = np.array([rec.ratio for rec in records])
    finite = bool(np.all(np.isfinite(values)) and np.all(values >= 0))
    agg = {
        "max": float(values.max()) if values.size else 0.0,
        "median": float(np.median(values)) if values.size else 0.0,
        "min": float(values.min()) if values.size else 0.0,
        "count": int(values.size),
        "lhs_degree": suite.lhs_degree,
        "rhs_degree": suite.rhs_degree,
    }
    checks = [IdentityRecord("ratios_finite", 0.0 if finite else 1.0, 0.0, finite)]

    if refine and values.size:
        fine = cfg.refined()
        fine_rows = _run_grid(suite, fine, fine.spec, workers)
        fine_ratios = [trial_ratio(l, r, s) for t, l, r, s in fine_rows if t in ratios]
        fine_ratios = [x for x in fine_ratios if x is not None]
        fine_max = float(max(fine_ratios)) if fine_ratios else 0.0
        delta = abs(fine_max - agg["max"]) / agg["max"] if agg["max"] > 0 else 0.0
        agg["refined_max"] = fine_max
        agg["stability"] = delta
        checks.append(IdentityRecord("refinement_stability", delta, cfg.stability_tol, delta < cfg.stability_tol))
    else:
        agg["stability"] = 0.0

    sample = [rec.trial for rec in records if rec.ratio > 0][:_HOMOGENEITY_TRIALS]
    if sample:
        h = _homogeneity(suite, base_cfg, sample)
        checks.append(IdentityRecord("homogeneity", h, HOMOGENEITY_TOL, h <= HOMOGENEITY_TOL))

    return EstimateReport(
        suite=f"{cfg.suite}/{cfg.variant}",
        config=cfg.to_dict(),
        trials=records,
        aggregate=agg,
        identities=checks,
        excluded=excluded,
    )
