"""Commutators, Leibniz defects and the half-space identities behind them.

All products go through :func:`hx.spectral.dealiased_product`.  Half-space
identities are evaluated twice, once on the boundary with spectral
operators and once as a bulk integral over harmonic extensions, and
returned as :class:`IdentityCheck` records.

Orientation: with columns ordered ``(grad Phi, grad U^1, ..., grad U^n)``
and the gradient ordered ``(d_1, ..., d_n, d_t)``, the outward normal of
``{t = 0}`` is ``-e_t`` and

    int_{R^{n+1}_+} det(grad Phi, grad U^1, grad U^2) = -int phi det(grad u).

``STOKES_ORIENTATION`` records that sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hx.errors import ExponentRangeError, SpecMismatchError
from hx.extension import ExtensionField, TGrid, bulk_integral, extend
from hx.operators import (
    fractional_laplacian,
    hilbert_transform,
    riesz_potential,
    riesz_transform,
)
from hx.spectral import (
    GridFunction,
    dealiased_product,
    differentiate,
    gradient,
    inner,
    integrate,
)

__all__ = [
    "STOKES_ORIENTATION",
    "IdentityCheck",
    "jacobian_pairing",
    "stokes_jacobian_bulk",
    "stokes_identity",
    "div_curl_pairing",
    "crw_commutator",
    "crw_jacobian_rhs",
    "chanillo_commutator",
    "chanillo_duality",
    "cmcim_commutator",
    "calderon_form",
    "leibniz_defect",
    "dalio_pairing",
    "hilbert_commutator",
    "double_commutator_minus",
    "double_commutator_plus",
    "double_minus_identity",
    "double_plus_identity",
    "extension_riesz_rules_check",
]

STOKES_ORIENTATION = -1.0


@dataclass(frozen=True)
class IdentityCheck:
    """Two independently computed sides of an exact identity."""

    name: str
    lhs: float
    rhs: float
    tolerance: float

    @property
    def residual(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return 0.0 if scale == 0 else abs(self.lhs - self.rhs) / scale

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def _same_spec(*fs: GridFunction):
    spec = fs[0].spec
    for f in fs[1:]:
        if f.spec != spec:
            raise SpecMismatchError(f"{f.spec} != {spec}")
    return spec


def _require_n(f: GridFunction, n: int, what: str):
    if f.spec.n != n:
        raise ValueError(f"{what} is defined for n={n}, got n={f.spec.n}")


# -- Jacobians ----------------------------------------------------------------------


def _det2(a: Sequence[GridFunction], b: Sequence[GridFunction]) -> GridFunction:
    return dealiased_product(a[0], b[1]) - dealiased_product(a[1], b[0])


def jacobian_pairing(phi: GridFunction, u: Sequence[GridFunction]) -> float:
    """``int phi det(grad u)`` for ``u = (u^1, u^2)`` on a two-dimensional grid."""
    _same_spec(phi, *u)
    _require_n(phi, 2, "jacobian_pairing")
    if len(u) != 2:
        raise ValueError("jacobian_pairing needs exactly two components")
    det = _det2(gradient(u[0]), gradient(u[1]))
    return inner(phi, det)


def _cross_dot(A: list[GridFunction], B: list[GridFunction], C: list[GridFunction]) -> float:
    """``int A . (B x C)`` with dealiased pair products."""
    cross = [
        dealiased_product(B[1], C[2]) - dealiased_product(B[2], C[1]),
        dealiased_product(B[2], C[0]) - dealiased_product(B[0], C[2]),
        dealiased_product(B[0], C[1]) - dealiased_product(B[1], C[0]),
    ]
    return sum(inner(a, c) for a, c in zip(A, cross))


def stokes_jacobian_bulk(Phi: ExtensionField, U1: ExtensionField, U2: ExtensionField):
    """``int_{R^3_+} det(grad Phi, grad U^1, grad U^2)`` as a :class:`BulkIntegral`."""
    for E in (Phi, U1, U2):
        _require_n(E.source, 2, "stokes_jacobian_bulk")
    tg = Phi.tgrid
    return bulk_integral(lambda j: _cross_dot(Phi.grad(j), U1.grad(j), U2.grad(j)), tg)


def stokes_identity(phi: GridFunction, u1: GridFunction, u2: GridFunction,
                    tg: TGrid | None = None, tolerance: float = 1e-3) -> IdentityCheck:
    """Bulk determinant integral against ``STOKES_ORIENTATION * jacobian_pairing``."""
    u1, u2 = u1.zero_mean(), u2.zero_mean()
    tg = tg or TGrid.default(phi.spec)
    bulk = stokes_jacobian_bulk(extend(phi, 1.0, tg), extend(u1, 1.0, tg), extend(u2, 1.0, tg))
    boundary = STOKES_ORIENTATION * jacobian_pairing(phi, (u1, u2))
    return IdentityCheck("stokes_jacobian", bulk.value, boundary, tolerance)


def div_curl_pairing(phi: GridFunction, f: GridFunction, h: GridFunction) -> float:
    """``int (d_1 f g_1 + d_2 f g_2) phi`` with the divergence-free ``g = (d_2 h, -d_1 h)``."""
    _same_spec(phi, f, h)
    _require_n(phi, 2, "div_curl_pairing")
    df = gradient(f)
    dh = gradient(h)
    g = (dh[1], -dh[0])
    return inner(phi, dealiased_product(df[0], g[0]) + dealiased_product(df[1], g[1]))


# -- Riesz transform and Riesz potential commutators ---------------------------------


def crw_commutator(i: int, phi: GridFunction, g: GridFunction) -> GridFunction:
    """``[R_i, phi](g) = R_i(phi g) - phi R_i g``."""
    _same_spec(phi, g)
    return riesz_transform(dealiased_product(phi, g), i) - dealiased_product(phi, riesz_transform(g, i))


def crw_jacobian_rhs(phi: GridFunction, u1: GridFunction, u2: GridFunction) -> float:
    """``-int Lap^{1/2} u^1 ([R_1, phi](d_2 u^2) - [R_2, phi](d_1 u^2))``.

    Equals ``jacobian_pairing(phi, (u1, u2))`` for mean-free ``u1``.
    """
    _require_n(phi, 2, "crw_jacobian_rhs")
    d = gradient(u2)
    comm = crw_commutator(0, phi, d[1]) - crw_commutator(1, phi, d[0])
    return -inner(fractional_laplacian(u1, 1.0), comm)


def chanillo_commutator(sigma: float, phi: GridFunction, f: GridFunction) -> GridFunction:
    """``I_sigma(phi f) - phi I_sigma f`` with the mean-killing Riesz potential."""
    _same_spec(phi, f)
    if not 0 < sigma < f.spec.n:
        raise ExponentRangeError(f"sigma={sigma} not in (0, {f.spec.n})")
    return riesz_potential(dealiased_product(phi, f), sigma) - dealiased_product(phi, riesz_potential(f, sigma))


def chanillo_duality(sigma: float, phi: GridFunction, f: GridFunction, g: GridFunction) -> tuple[float, float]:
    """Both sides of ``<[I_s, phi] f, g> = int (Lap^{s/2} u v - u Lap^{s/2} v) phi``.

    ``u = I_s f`` and ``v = I_s g``; ``f`` and ``g`` are made mean-free first.
    """
    f, g = f.zero_mean(), g.zero_mean()
    lhs = inner(chanillo_commutator(sigma, phi, f), g)
    u, v = riesz_potential(f, sigma), riesz_potential(g, sigma)
    lu, lv = fractional_laplacian(u, sigma), fractional_laplacian(v, sigma)
    rhs = inner(phi, dealiased_product(lu, v) - dealiased_product(u, lv))
    return lhs, rhs


# -- fractional Laplacian commutators and Leibniz defects ---------------------------


def cmcim_commutator(s: float, g: GridFunction, f: GridFunction) -> GridFunction:
    """``[Lap^{s/2}, g](f) = Lap^{s/2}(g f) - g Lap^{s/2} f`` for ``s`` in ``(0, 1]``."""
    _same_spec(g, f)
    if not 0 < s <= 1:
        raise ExponentRangeError(f"s={s} not in (0, 1]")
    return fractional_laplacian(dealiased_product(g, f), s) - dealiased_product(g, fractional_laplacian(f, s))


def calderon_form(g: GridFunction, f: GridFunction) -> GridFunction:
    """First Calderon commutator through ``Lap^{1/2} = -H d``: ``-H d(g f) + g H d f``."""
    _require_n(g, 1, "calderon_form")
    return -hilbert_transform(differentiate(dealiased_product(g, f), 0)) + dealiased_product(
        g, hilbert_transform(differentiate(f, 0))
    )


def leibniz_defect(s: float, f: GridFunction, g: GridFunction) -> GridFunction:
    """``H_s(f, g) = Lap^{s/2}(f g) - Lap^{s/2} f g - f Lap^{s/2} g``."""
    _same_spec(f, g)
    if not 0 < s <= 2:
        raise ExponentRangeError(f"s={s} not in (0, 2]")
    lf, lg = fractional_laplacian(f, s), fractional_laplacian(g, s)
    return fractional_laplacian(dealiased_product(f, g), s) - dealiased_product(lf, g) - dealiased_product(f, lg)


def dalio_pairing(s: float, a: GridFunction, b: GridFunction, phi: GridFunction) -> float:
    """``int H_s(a, b) Lap^{s/2} phi``."""
    if not 0 < s <= 1:
        raise ExponentRangeError(f"s={s} not in (0, 1]")
    return inner(leibniz_defect(s, a, b), fractional_laplacian(phi, s))


# -- one-dimensional double commutators ---------------------------------------------


def hilbert_commutator(f: GridFunction, w: GridFunction) -> GridFunction:
    """``[f, H](w) = f H w - H(f w)``."""
    return dealiased_product(f, hilbert_transform(w)) - hilbert_transform(dealiased_product(f, w))


def _double_parts(f: GridFunction, g: GridFunction):
    _same_spec(f, g)
    _require_n(f, 1, "double commutators")
    f, g = f.zero_mean(), g.zero_mean()
    a = hilbert_commutator(f, fractional_laplacian(g, 1.0))
    b = hilbert_commutator(g, fractional_laplacian(f, 1.0))
    return a, b


def double_commutator_minus(f: GridFunction, g: GridFunction) -> GridFunction:
    """``[f, H](Lap^{1/2} g) - [g, H](Lap^{1/2} f)``; antisymmetric in ``(f, g)``."""
    a, b = _double_parts(f, g)
    return a - b


def double_commutator_plus(f: GridFunction, g: GridFunction) -> GridFunction:
    """``H([f, H](Lap^{1/2} g) + [g, H](Lap^{1/2} f))``."""
    a, b = _double_parts(f, g)
    return hilbert_transform(a + b)


def _bulk_pair(f, g, phi, tg, integrand):
    tg = tg or TGrid.default(f.spec)
    F, G, P = extend(f.zero_mean(), 1.0, tg), extend(g.zero_mean(), 1.0, tg), extend(phi, 1.0, tg)
    return bulk_integral(lambda j: integrand(F, G, P, j), tg)


def double_minus_identity(f: GridFunction, g: GridFunction, phi: GridFunction,
                          tg: TGrid | None = None, tolerance: float = 1e-3) -> IdentityCheck:
    """``int minus(f, g) phi = 2 int_{R^2_+} (F_x G_t - F_t G_x) Phi``."""

    def integrand(F, G, P, j):
        det = dealiased_product(F.dx(j, 0), G.dt(j)) - dealiased_product(F.dt(j), G.dx(j, 0))
        return inner(det, P.value(j))

    bulk = _bulk_pair(f, g, phi, tg, integrand)
    boundary = inner(double_commutator_minus(f, g), phi)
    return IdentityCheck("double_minus_bulk", boundary, 2.0 * bulk.value, tolerance)


def double_plus_identity(f: GridFunction, g: GridFunction, phi: GridFunction,
                         tg: TGrid | None = None, tolerance: float = 1e-3) -> IdentityCheck:
    """``int plus(f, g) phi = 2 int_{R^2_+} grad F . grad G Phi`` for mean-free ``phi``.

    The constant mode of ``phi`` does not decay in ``t``, so ``phi`` is
    made mean-free on both sides.
    """
    phi = phi.zero_mean()

    def integrand(F, G, P, j):
        dot = dealiased_product(F.dx(j, 0), G.dx(j, 0)) + dealiased_product(F.dt(j), G.dt(j))
        return inner(dot, P.value(j))

    bulk = _bulk_pair(f, g, phi, tg, integrand)
    boundary = inner(double_commutator_plus(f, g), phi)
    return IdentityCheck("double_plus_bulk", boundary, 2.0 * bulk.value, tolerance)


def _rel(a: np.ndarray, scale: float) -> float:
    return float(np.linalg.norm(a) / scale) if scale > 0 else float(np.linalg.norm(a))


def extension_riesz_rules_check(f: GridFunction, tg: TGrid | None = None) -> float:
    """Largest relative L2 residual of the extension rules for Riesz transforms.

    Checks ``d_t (R_i F) + d_i F = 0`` on every level, and for ``n = 1`` also
    ``H F_t + F_x = 0`` and ``F_t - H F_x = 0``, where ``R_i F`` is the
    extension of ``R_i f``.
    """
    tg = tg or TGrid.default(f.spec)
    F = extend(f, 1.0, tg)
    worst = 0.0
    for i in range(f.spec.n):
        RF = extend(riesz_transform(f, i), 1.0, tg)
        for j in range(tg.M):
            dx = F.dx(j, i).values
            scale = max(np.linalg.norm(dx), np.linalg.norm(F.dt(j).values))
            worst = max(worst, _rel(RF.dt(j).values + dx, scale))
    if f.spec.n == 1:
        for j in range(tg.M):
            Ft, Fx = F.dt(j), F.dx(j, 0)
            scale = max(np.linalg.norm(Ft.values), np.linalg.norm(Fx.values))
            worst = max(worst, _rel((hilbert_transform(Ft) + Fx).values, scale))
            worst = max(worst, _rel((Ft - hilbert_transform(Fx)).values, scale))
    return worst
