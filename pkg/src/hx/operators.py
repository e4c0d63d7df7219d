"""Singular integrals as Fourier multipliers, and the radial Poisson profile.

Conventions (chosen so that the extension rules used throughout hold with
unit constants):

* ``fractional_laplacian(f, s)`` has symbol ``|xi|^s`` (constant 1).
* ``riesz_potential(f, sigma)`` has symbol ``|xi|^-sigma`` and kills the mean.
* ``riesz_transform(f, i)`` has symbol ``i xi_i / |xi|`` so that
  ``d_i = R_i o Lap^{1/2}`` exactly.  In one dimension this makes
  ``H cos = -sin``, the opposite of the principal-value convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hx.errors import ExponentRangeError, QuadratureError
from hx.spectral import GridFunction, Multiplier, apply_multiplier

__all__ = [
    "fractional_laplacian_multiplier",
    "riesz_potential_multiplier",
    "riesz_multiplier",
    "fractional_laplacian",
    "riesz_potential",
    "riesz_transform",
    "hilbert_transform",
    "fractional_gradient",
    "mean_free",
    "PoissonProfile",
    "build_poisson_profile",
]


def fractional_laplacian_multiplier(s: float) -> Multiplier:
    return Multiplier(lambda xi, r: r**s, at_zero=0.0, name=f"lap^{s}/2")


def riesz_potential_multiplier(sigma: float) -> Multiplier:
    return Multiplier(lambda xi, r: r ** (-sigma), at_zero=0.0, name=f"I_{sigma}")


def riesz_multiplier(i: int) -> Multiplier:
    return Multiplier(lambda xi, r: 1j * xi[i] / r, at_zero=0.0, odd=True, name=f"R_{i}")


def fractional_laplacian(f: GridFunction, s: float) -> GridFunction:
    """``Lap^{s/2} f`` for ``s`` in ``(0, 2]``; constants are annihilated."""
    if not 0 < s <= 2:
        raise ExponentRangeError(f"fractional Laplacian order s={s} not in (0, 2]")
    return apply_multiplier(f, fractional_laplacian_multiplier(s))


def riesz_potential(f: GridFunction, sigma: float) -> GridFunction:
    """``I_sigma f = Lap^{-sigma/2} f`` for ``sigma`` in ``(0, n)``.

    The zero mode is mapped to zero, so ``I_sigma`` is the inverse of
    ``Lap^{sigma/2}`` on mean-free functions.
    """
    if not 0 < sigma < f.spec.n:
        raise ExponentRangeError(f"Riesz potential order {sigma} not in (0, {f.spec.n})")
    return apply_multiplier(f, riesz_potential_multiplier(sigma))


def riesz_transform(f: GridFunction, i: int) -> GridFunction:
    if not 0 <= i < f.spec.n:
        raise IndexError(f"Riesz transform index {i} out of range for n={f.spec.n}")
    return apply_multiplier(f, riesz_multiplier(i))


def hilbert_transform(f: GridFunction) -> GridFunction:
    if f.spec.n != 1:
        raise ValueError("the Hilbert transform is the n = 1 Riesz transform")
    return apply_multiplier(f, riesz_multiplier(0))


def fractional_gradient(f: GridFunction, s: float) -> list[GridFunction]:
    """``nabla^s f = R Lap^{s/2} f``, one component per axis."""
    lap = fractional_laplacian(f, s)
    return [riesz_transform(lap, i) for i in range(f.spec.n)]


def mean_free(f: GridFunction) -> GridFunction:
    return f.zero_mean()


# -- Poisson profile -------------------------------------------------------------
#
# The multiplier of P_t^s is phi_s(t|xi|) with
#
#     phi_s(r) = c_s * int_0^inf lam^{s/2} exp(-lam - r^2/(4 lam)) dlam/lam,
#
# c_s = 1/Gamma(s/2) normalising phi_s(0) = 1.  The constant 4 in the exponent
# is the one for which phi_s solves phi'' + (1-s)/r phi' = phi.  Substituting
# lam = (r/2) e^v turns the integral into
#
#     phi_s(r) = c_s (r/2)^{s/2} int_R exp(s v/2 - r cosh v) dv,
#
# whose integrand is analytic in the strip |Im v| < pi/2, so the trapezoid
# rule converges geometrically.  Differentiating under the integral gives
#
#     phi_s'(r) = -c_s (r/2)^{s/2} int_R exp((s/2 - 1) v - r cosh v) dv.

_NODES = 512
_CHUNK = 4096
_UNDERFLOW = 746.0


def _cosh_integral(a: float, r: np.ndarray) -> np.ndarray:
    """``int_R exp(a v - r cosh v) dv = 2 int_0^inf cosh(a v) exp(-r cosh v) dv``.

    The folded integrand is even in ``v``, so the trapezoid rule on
    ``[0, V]`` converges geometrically.  ``V`` is chosen so that the
    integrand has dropped by ``exp(-80)`` past its maximum.
    """
    r = np.asarray(r, dtype=np.float64)
    flat = r.ravel()
    out = np.empty_like(flat)
    b = abs(a)
    x = np.linspace(0.0, 1.0, _NODES)
    w = np.full(_NODES, 1.0 / (_NODES - 1))
    w[0] = w[-1] = 0.5 / (_NODES - 1)
    # exp(-r) underflows past ~745; those entries are exactly zero in float64
    out[flat > _UNDERFLOW] = 0.0
    live = np.flatnonzero(flat <= _UNDERFLOW)
    for start in range(0, live.size, _CHUNK):
        sel = live[start : start + _CHUNK]
        rr = flat[sel]
        top = np.arccosh(1.0 + 80.0 / rr)
        for _ in range(3):
            top = np.arccosh(1.0 + (80.0 + b * top) / rr)
        v = top[:, None] * x[None, :]
        # factor exp(-r) out so that large r does not underflow early
        vals = np.exp(b * v - rr[:, None] * (np.cosh(v) - 1.0))
        vals += np.exp(-b * v - rr[:, None] * (np.cosh(v) - 1.0))
        out[sel] = (vals @ w) * top * np.exp(-rr)
    return out.reshape(r.shape)


@dataclass(frozen=True)
class PoissonProfile:
    """Radial Fourier profile ``phi_s`` of the generalised Poisson operator.

    ``P_t^s f`` has the multiplier ``phi_s(t |xi|)``.  ``neumann_constant`` is
    ``d_s = lim_{r->0} -r^{1-s} phi_s'(r)``, so that
    ``-t^{1-s} d_t P_t^s f -> d_s Lap^{s/2} f`` as ``t -> 0``.
    """

    order: float
    neumann_constant: float
    tolerance: float = 1e-8
    _norm: float = field(default=1.0, repr=False)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        out = np.ones_like(r)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            a = self.order / 2
            out[pos] = self._norm * (rp / 2) ** a * _cosh_integral(a, rp)
        return out

    def derivative(self, r) -> np.ndarray:
        """``phi_s'(r)``; at ``r = 0`` the one-sided limit (``-inf`` for ``s < 1``)."""
        r = np.asarray(r, dtype=np.float64)
        out = np.empty_like(r)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            a = self.order / 2
            out[pos] = -self._norm * (rp / 2) ** a * _cosh_integral(a - 1.0, rp)
        s = self.order
        out[~pos] = -np.inf if s < 1 else (-1.0 if s == 1 else 0.0)
        return out

    def flux(self, r) -> np.ndarray:
        """``-r^{1-s} phi_s'(r)``, which tends to ``d_s`` as ``r -> 0``."""
        r = np.asarray(r, dtype=np.float64)
        out = np.full_like(r, self.neumann_constant)
        pos = r > 0
        out[pos] = -(r[pos] ** (1 - self.order)) * self.derivative(r[pos])
        return out

    def ode_residual(self, r) -> np.ndarray:
        """``phi'' + (1-s)/r phi' - phi``, evaluated with the same quadrature.

        Used as a self-check: the profile solves this ODE exactly.
        """
        r = np.asarray(r, dtype=np.float64)
        a = self.order / 2
        c = self._norm * (r / 2) ** a
        k0 = _cosh_integral(a, r)
        k1 = _cosh_integral(a - 1.0, r)
        k2 = _cosh_integral(a - 2.0, r)
        phi = c * k0
        dphi = -c * k1
        # K'(b) = -(K(b-1) + K(b+1)) / 2 for the cosh integral
        d2phi = -(a / r) * c * k1 + c * 0.5 * (k0 + k2)
        return d2phi + (1 - self.order) / r * dphi - phi


def _richardson(values: np.ndarray, ratio: float, exponents: list[float]) -> float:
    """Eliminate the listed power-law error terms from a geometric sequence."""
    v = np.array(values, dtype=np.float64)
    for p in exponents:
        if v.size < 2:
            break
        fac = ratio**p
        v = (fac * v[1:] - v[:-1]) / (fac - 1)
    return float(v[-1])


def build_poisson_profile(s: float, tolerance: float = 1e-8) -> PoissonProfile:
    """Construct ``phi_s`` for ``s`` in ``(0, 2)``.

    The Neumann constant is extrapolated from the small-``r`` behaviour of
    ``-r^{1-s} phi_s'(r) = d_s (1 + O(r^{2-s}) + O(r^2))``.
    """
    if not 0 < s < 2:
        raise ExponentRangeError(f"Poisson profile order s={s} not in (0, 2)")
    norm = 1.0 / math.gamma(s / 2)
    proto = PoissonProfile(order=s, neumann_constant=float("nan"), tolerance=tolerance, _norm=norm)

    mu = 1 - s / 2
    exps = sorted({round(2 * mu + 2 * j, 12) for j in range(3)} | {2.0, 4.0})
    ratio = 2.0
    r = 2e-2 / ratio ** np.arange(len(exps) + 1)
    seq = -(r ** (1 - s)) * proto.derivative(r)
    d_s = _richardson(seq, ratio, exps)
    check = _richardson(seq[:-1], ratio, exps[:-1])
    if not math.isfinite(d_s) or abs(d_s - check) > 1e-6 * abs(d_s):
        raise QuadratureError(f"Neumann constant for s={s} did not converge ({d_s} vs {check})")
    profile = PoissonProfile(order=s, neumann_constant=d_s, tolerance=tolerance, _norm=norm)

    probe = np.array([0.1, 1.0, 5.0])
    resid = np.abs(profile.ode_residual(probe))
    if not np.all(resid < tolerance):
        raise QuadratureError(f"profile ODE residual {resid.max():.3e} above {tolerance}")
    return profile
