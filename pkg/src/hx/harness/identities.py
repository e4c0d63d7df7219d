"""The exact-identity suite.

Every check compares two independently computed sides of an identity that
holds exactly for trigonometric polynomials (up to quadrature in ``t`` for
half-space integrals).  Random inputs come from the configured generator;
the analytic checks use fixed functions scaled by zero when the generator
kind is ``"zero"``, so that the all-zero run has every residual exactly 0.
"""

from __future__ import annotations

import math

import numpy as np

from hx.commutators import (
    IdentityCheck,
    calderon_form,
    chanillo_duality,
    cmcim_commutator,
    crw_jacobian_rhs,
    div_curl_pairing,
    double_minus_identity,
    double_plus_identity,
    extension_riesz_rules_check,
    jacobian_pairing,
    leibniz_defect,
    stokes_identity,
)
from hx.extension import TGrid, extend, neumann_trace, pde_residual, profile_for
from hx.harness.config import TrialConfig
from hx.harness.generators import generate_test_function
from hx.harness.report import EstimateReport, IdentityRecord
from hx.operators import fractional_laplacian, riesz_transform
from hx.spectral import GridFunction, GridSpec, dealiased_product, gradient

__all__ = [
    "run_identity_suite",
    "bessel_identity",
    "neumann_trace_errors",
    "h2_identity_error",
    "SPECTRAL_TOL",
    "H2_TOL",
    "BULK_TOL",
    "RULES_TOL",
    "BESSEL_TOL",
    "NEUMANN_TOL",
]

SPECTRAL_TOL = 1e-12
H2_TOL = 1e-10
PAIRING_TOL = 1e-10
BULK_TOL = 1e-3
RULES_TOL = 1e-10
PDE_TOL = 1e-8
PROFILE_TOL = 1e-10
BESSEL_TOL = 5e-2
NEUMANN_TOL = 1e-2


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def _record(name: str, residual: float, tol: float, **details) -> IdentityRecord:
    return IdentityRecord(name, float(residual), tol, bool(residual <= tol), details)


def _from_check(c: IdentityCheck, **details) -> IdentityRecord:
    return _record(c.name, c.residual, c.tolerance, lhs=c.lhs, rhs=c.rhs, **details)


# -- single identities ------------------------------------------------------------


def h2_identity_error(f: GridFunction, g: GridFunction) -> float:
    """Relative L2 error of ``H_2(f, g) = -2 grad f . grad g``.

    The symbol of ``Lap^{2/2}`` is ``|xi|^2``, i.e. minus the Laplacian, which
    fixes the sign.
    """
    lhs = leibniz_defect(2.0, f, g).values
    rhs = -2.0 * sum(dealiased_product(a, b).values for a, b in zip(gradient(f), gradient(g)))
    return _rel(lhs, rhs)


def bessel_identity(gamma: float, N: int = 4096, L: float = 80.0, amplitude: float = 1.0) -> tuple[float, float]:
    """Fit ``Lap^{gamma/2} w = c (x^2 + 1)^{(-gamma-1)/2}`` for ``w = (x^2 + 1)^{(gamma-1)/2}``.

    ``w`` is centred in the period and cut off smoothly near its ends.  The
    constant ``c`` is fitted by least squares on ``|x| <= L/8``; returns
    ``(c, relative sup error of the fit)``.
    """
    spec = GridSpec(1, N, L)
    x = spec.coordinates()[0] - L / 2
    w = amplitude * (x * x + 1) ** ((gamma - 1) / 2) * np.exp(-((x / (L / 4)) ** 8))
    lw = fractional_laplacian(GridFunction(spec, w), gamma).values
    model = amplitude * (x * x + 1) ** ((-gamma - 1) / 2)
    win = np.abs(x) <= L / 8
    denom = float(model[win] @ model[win])
    if denom == 0:
        return 0.0, 0.0
    c = float(lw[win] @ model[win]) / denom
    fit = c * model[win]
    return c, float(np.abs(lw[win] - fit).max() / np.abs(fit).max())


def neumann_trace_errors(f: GridFunction, s: float, halvings: int = 3, t1: float | None = None) -> list[float]:
    """Relative L2 error of the first-level Neumann trace for ``t_1 2^-k``, ``k = 0..halvings``.

    ``t1`` defaults to half a grid cell, ``L/(2N)``.
    """
    spec = f.spec
    ref = fractional_laplacian(f, s).values
    base = TGrid.default(spec)
    t1 = base.t_min if t1 is None else t1
    out = []
    for k in range(halvings + 1):
        tg = TGrid(t1 / 2**k, base.t_max, base.M)
        out.append(_rel(neumann_trace(extend(f, s, tg)).values, ref))
    return out


def _low_band(spec: GridSpec, amp: float) -> GridFunction:
    def func(*x):
        k = 2 * math.pi / spec.L
        v = np.cos(k * x[0]) + 0.5 * np.sin(2 * k * x[0] + 0.3)
        if spec.n == 2:
            v = v + 0.4 * np.cos(k * (x[0] + 2 * x[1])) + 0.3 * np.sin(3 * k * x[1])
        return amp * v

    return GridFunction.from_callable(spec, func)


# -- the suite --------------------------------------------------------------------


def _spectral_checks(cfg: TrialConfig, amp: float) -> list[IdentityRecord]:
    spec = cfg.spec
    out = []
    x = spec.coordinates()
    worst = 0.0
    for k in (1, 3, cfg.band):
        xi = 2 * math.pi * k / spec.L
        # input rounding is amplified by (N / 2k)^s, which limits s at large N
        for s in (0.3, 0.5, 1.0):
            f = GridFunction(spec, amp * np.cos(xi * x[0]) * np.ones(spec.shape))
            lhs = fractional_laplacian(f, s).values
            worst = max(worst, _rel(lhs, xi**s * f.values))
    out.append(_record("laplacian_cosine", worst, SPECTRAL_TOL))

    plan = rz = 0.0
    for t in range(min(cfg.trials, 10)):
        f = generate_test_function(cfg, 0, t)
        c = np.fft.fftn(f.values)
        a = float(np.sum(f.values**2) * spec.cell_volume)
        b = float(np.sum(np.abs(c) ** 2) * spec.cell_volume / spec.size)
        plan = max(plan, 0.0 if a == b == 0 else abs(a - b) / max(a, b))
        rr = sum(riesz_transform(riesz_transform(f, i), i).values for i in range(spec.n))
        rz = max(rz, _rel(rr, -f.zero_mean().values))
    out.append(_record("plancherel", plan, SPECTRAL_TOL))
    out.append(_record("riesz_square_sum", rz, SPECTRAL_TOL))
    return out


def _pair_checks(cfg: TrialConfig) -> list[IdentityRecord]:
    spec = cfg.spec
    # a product of two band-N/4 functions reaches the Nyquist mode, where
    # |xi| != 0 but the odd symbols of H and d vanish
    below = cfg.replace(band=min(cfg.band, max(cfg.N // 4 - 1, 1)))
    h2 = cal = chan = cj = dc = 0.0
    for t in range(cfg.trials):
        f = generate_test_function(cfg, 0, t)
        g = generate_test_function(cfg, 1, t)
        h2 = max(h2, h2_identity_error(f, g))
        if t < 10:
            phi = generate_test_function(cfg, 2, t)
            chan = max(chan, IdentityCheck("c", *chanillo_duality(0.3 * spec.n, phi, f, g), 0).residual)
            if spec.n == 1:
                fb, gb = generate_test_function(below, 0, t), generate_test_function(below, 1, t)
                cal = max(cal, _rel(cmcim_commutator(1.0, gb, fb).values, calderon_form(gb, fb).values))
            else:
                u1 = f.zero_mean()
                cj = max(cj, IdentityCheck("j", jacobian_pairing(phi, (u1, g)), crw_jacobian_rhs(phi, u1, g), 0).residual)
                dc = max(dc, IdentityCheck("d", div_curl_pairing(phi, f, g), jacobian_pairing(phi, (f, g)), 0).residual)
    out = [_record("h2_leibniz", h2, H2_TOL, pairs=cfg.trials),
           _record("chanillo_duality", chan, PAIRING_TOL)]
    if spec.n == 1:
        out.append(_record("calderon_commutator", cal, PAIRING_TOL))
    else:
        out.append(_record("crw_jacobian_link", cj, PAIRING_TOL))
        out.append(_record("div_curl_jacobian", dc, PAIRING_TOL))
    return out


def _extension_checks(cfg: TrialConfig, amp: float) -> list[IdentityRecord]:
    spec = cfg.spec
    tg = cfg.tgrid()
    f = generate_test_function(cfg, 0, 0)
    out = [_record("extension_riesz_rules", extension_riesz_rules_check(f, tg), RULES_TOL)]
    pde = max(pde_residual(extend(f, s, tg)) for s in (0.5, 1.0, 1.5))
    out.append(_record("pde_residual", pde, PDE_TOL))
    low = _low_band(spec, amp)
    # the first-level error is O(t_1 |xi|); a coarse two-dimensional grid
    # starts from the band-resolving height instead of half a cell
    t1 = None if spec.n == 1 else tg.t_min
    for s in (0.5, 1.0):
        errs = neumann_trace_errors(low, s, halvings=2, t1=t1)
        decreasing = all(b < a for a, b in zip(errs, errs[1:])) or errs[0] == 0
        out.append(IdentityRecord(f"neumann_trace_s{s:g}", errs[0], NEUMANN_TOL,
                                  errs[0] <= NEUMANN_TOL and decreasing,
                                  {"errors": errs, "decreasing": decreasing}))
    return out


def _profile_checks() -> list[IdentityRecord]:
    p1 = profile_for(1.0)
    r = np.linspace(0, 20, 401)
    out = [_record("profile_s1_exponential", float(np.abs(p1(r) - np.exp(-r)).max()), PROFILE_TOL),
           _record("neumann_constant_s1", abs(p1.neumann_constant - 1.0), 1e-8)]
    rr = np.geomspace(1e-2, 20, 200)
    ode = max(float(np.abs(profile_for(s).ode_residual(rr)).max()) for s in (0.3, 0.5, 1.5))
    out.append(_record("profile_ode", ode, 1e-8))
    return out


def _bulk_refined(check, M: int, require_decrease: bool) -> IdentityRecord:
    """Evaluate a bulk identity with ``M`` and ``2M`` levels."""
    first = check(M)
    second = check(2 * M)
    decreasing = second.residual < first.residual or first.residual == 0
    rec = _from_check(first, refined_residual=second.residual, decreasing=decreasing, levels=[M, 2 * M])
    if require_decrease and not decreasing:
        rec = IdentityRecord(rec.name, rec.residual, rec.tolerance, False, rec.details)
    return rec


def run_identity_suite(cfg: TrialConfig, refine: bool = True) -> EstimateReport:
    """Run every exact identity for ``cfg.n`` at the configured size.

    Bulk (half-space) identities are also evaluated with twice the number of
    t-levels; the Stokes mismatch must strictly decrease.  The one-dimensional
    bulk identities sit at the floor of the left-segment fit already at the
    default size, so only their refined residual is recorded.
    """
    zero = cfg.kind == "zero"
    amp = 0.0 if zero else 1.0
    spec = cfg.spec
    records = _spectral_checks(cfg, amp) + _pair_checks(cfg) + _extension_checks(cfg, amp)
    tg = cfg.tgrid()

    if spec.n == 1:
        f, g, phi = (generate_test_function(cfg, r, 0) for r in range(3))
        for fn in (double_minus_identity, double_plus_identity):
            def check(M, fn=fn):
                return fn(f, g, phi, tg.with_levels(M), BULK_TOL)

            if refine:
                records.append(_bulk_refined(check, cfg.M, require_decrease=False))
            else:
                records.append(_from_check(check(cfg.M)))
        for gamma in (0.3, 0.5):
            c, err = bessel_identity(gamma, amplitude=amp)
            records.append(_record(f"bessel_gamma{gamma:g}", err, BESSEL_TOL, fitted_constant=c))
    else:
        phi, u1, u2 = (generate_test_function(cfg, r, 0) for r in range(3))

        def check(M):
            return stokes_identity(phi, u1, u2, tg.with_levels(M), BULK_TOL)

        records.append(_bulk_refined(check, cfg.M, require_decrease=True) if refine else _from_check(check(cfg.M)))

    if not zero:
        records += _profile_checks()

    return EstimateReport(suite="identities", config=cfg.to_dict(), identities=records)
