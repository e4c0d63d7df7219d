"""Generalised Poisson extensions ``F(x, t) = P_t^s f(x)`` on a truncated half-space.

The extension is sampled on a geometric grid of heights ``t_1 < ... < t_M``.
Every slice, and every derivative of a slice, is produced spectrally from
the profile ``phi_s``: ``x``-derivatives multiply by ``i xi``, the
``t``-derivative multiplies by ``|xi| phi_s'(t |xi|)``.  Nothing is finite
differenced.

Half-space integrals ``int_0^inf int g(x, t) dx dt`` are split into

* the body ``[t_1, t_M]``, integrated by product quadrature in ``log t``,
* the left segment ``[0, t_1]``, integrated from a three-level fit
  ``g(t) ~ a t^beta exp(c t)`` of the ``x``-integrated integrand,
* the right tail beyond ``t_M``, which is only estimated and checked
  against a tolerance.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.ndimage import maximum_filter1d

from hx.errors import ExponentRangeError, TailToleranceError
from hx.operators import PoissonProfile, build_poisson_profile
from hx.spectral import GridFunction, GridSpec, write_gridfunction

__all__ = [
    "TGrid",
    "ExtensionField",
    "BulkIntegral",
    "ReflectedBlock",
    "extend",
    "pde_residual",
    "neumann_trace",
    "bulk_integral",
    "reflected_extension",
    "poisson_vs_ball_mean",
    "ball_mean",
    "cone_maximal",
    "dump_extension",
    "profile_for",
]

# slowest mode must have decayed to this fraction of its amplitude at t_max
EXTENSION_TAIL_TOL = 1e-6
# last t-cell contribution relative to the integral's magnitude
BULK_TAIL_TOL = 1e-6

_LAGRANGE_DEGREE = 5
_GAUSS_POINTS = 12


@lru_cache(maxsize=16)
def profile_for(s: float) -> PoissonProfile:
    """Shared, immutable profile per order."""
    return build_poisson_profile(float(s))


# -- t-grid -----------------------------------------------------------------------


@dataclass(frozen=True)
class TGrid:
    """Geometric heights ``t_min = t_1 < ... < t_M = t_max`` with quadrature weights."""

    t_min: float
    t_max: float
    M: int = 96

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise ValueError(f"need 0 < t_min < t_max, got {self.t_min}, {self.t_max}")
        if self.M < _LAGRANGE_DEGREE + 2:
            raise ValueError(f"need at least {_LAGRANGE_DEGREE + 2} levels, got {self.M}")
        object.__setattr__(self, "t_min", float(self.t_min))
        object.__setattr__(self, "t_max", float(self.t_max))

    @classmethod
    def default(cls, spec: GridSpec, M: int = 96) -> "TGrid":
        """Half a grid cell up to the height where the slowest mode has decayed by 1e-8."""
        return cls(spec.L / (2 * spec.N), spec.L * math.log(1e8) / (2 * math.pi), M)

    @classmethod
    def resolving(cls, spec: GridSpec, band: int, M: int = 96, fraction: float = 0.02) -> "TGrid":
        """Default grid with ``t_min`` lowered so that ``t_min |xi| <= fraction`` on the band.

        Bulk identities for data with many active modes need the first level
        well inside the regime where every live mode is still close to its trace.
        """
        base = cls.default(spec, M)
        xi_band = 2 * math.pi * max(band, 1) / spec.L
        return cls(min(base.t_min, fraction / xi_band), base.t_max, M)

    def with_levels(self, M: int) -> "TGrid":
        return TGrid(self.t_min, self.t_max, M)

    @cached_property
    def levels(self) -> np.ndarray:
        t = np.geomspace(self.t_min, self.t_max, self.M)
        t.setflags(write=False)
        return t

    @property
    def ratio(self) -> float:
        return (self.t_max / self.t_min) ** (1.0 / (self.M - 1))

    @cached_property
    def weights(self) -> np.ndarray:
        """Weights for ``int_{t_1}^{t_M} g(t) dt``.

        Product integration in ``u = log t``: ``g`` is interpolated by local
        Lagrange polynomials in ``u`` and ``int l_k(u) e^u du`` is computed by
        Gauss-Legendre on each cell, so constants are integrated exactly.
        """
        u = np.log(self.levels)
        M, deg = self.M, _LAGRANGE_DEGREE
        gx, gw = np.polynomial.legendre.leggauss(_GAUSS_POINTS)
        w = np.zeros(M)
        for i in range(M - 1):
            a, b = u[i], u[i + 1]
            lo = min(max(i - (deg - 1) // 2, 0), M - deg - 1)
            idx = np.arange(lo, lo + deg + 1)
            uu = 0.5 * (b - a) * gx + 0.5 * (a + b)
            ww = 0.5 * (b - a) * gw * np.exp(uu)
            for k, j in enumerate(idx):
                others = np.delete(idx, k)
                basis = np.prod((uu[:, None] - u[others]) / (u[j] - u[others]), axis=1)
                w[j] += basis @ ww
        w.setflags(write=False)
        return w

    @cached_property
    def cell_edges(self) -> np.ndarray:
        """Geometric-midpoint cell boundaries, from 0 to ``t_M sqrt(q)``."""
        t = self.levels
        mid = np.sqrt(t[1:] * t[:-1])
        edges = np.concatenate([[0.0], mid, [t[-1] * math.sqrt(self.ratio)]])
        edges.setflags(write=False)
        return edges

    def left_segment(self, g: np.ndarray) -> float:
        """``int_0^{t_1} g`` from the first three levels.

        Fits ``log|g| = A + beta log t + c t`` exactly through the three values
        and integrates ``e^A t^beta e^{c t}`` by its power series.  Integrands
        that change sign there fall back to the quadratic through the points.
        """
        t = self.levels[:3]
        g = np.asarray(g[:3], dtype=np.float64)
        if np.all(g == 0):
            return 0.0
        if np.all(g > 0) or np.all(g < 0):
            A = np.column_stack([np.ones(3), np.log(t), t])
            a0, beta, c = np.linalg.solve(A, np.log(np.abs(g)))
            if beta > -1 and abs(c * t[0]) < 1:
                t1 = t[0]
                total, term = 0.0, 1.0
                for k in range(40):
                    total += term * t1 ** (beta + k + 1) / (beta + k + 1)
                    term *= c / (k + 1)
                return float(np.sign(g[0]) * math.exp(a0) * total)
        coef = np.polyfit(t, g, 2)
        anti = np.polyint(coef)
        return float(np.polyval(anti, t[0]) - np.polyval(anti, 0.0))

    def integrate(self, g: np.ndarray) -> "BulkIntegral":
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.M,):
            raise ValueError(f"expected {self.M} level values, got shape {g.shape}")
        body = float(self.weights @ g)
        left = self.left_segment(g)
        t = self.levels
        right = float(abs(g[-1]) * (t[-1] - t[-2]))
        return BulkIntegral(body + left, body, left, right, g)


@dataclass(frozen=True)
class BulkIntegral:
    """A half-space integral with its quadrature pieces kept apart."""

    value: float
    body: float
    left: float
    right_estimate: float
    per_level: np.ndarray

    def __float__(self) -> float:
        return self.value


# -- symbol tables ------------------------------------------------------------------


@lru_cache(maxsize=8)
def _profile_tables(spec: GridSpec, tg: TGrid, s: float) -> tuple[np.ndarray, np.ndarray]:
    """``phi_s(t_j |xi|)`` and ``|xi| phi_s'(t_j |xi|)`` on the lattice, per level."""
    profile = profile_for(s)
    radii, inverse = np.unique(spec.xi_norm().ravel(), return_inverse=True)
    arg = tg.levels[:, None] * radii[None, :]
    phi = profile(arg)
    with np.errstate(invalid="ignore"):
        dphi = radii[None, :] * profile.derivative(arg)
    dphi[:, radii == 0] = 0.0
    shape = (tg.M,) + spec.shape
    phi = phi[:, inverse].reshape(shape)
    dphi = dphi[:, inverse].reshape(shape)
    phi.setflags(write=False)
    dphi.setflags(write=False)
    return phi, dphi


def _odd_symbols(spec: GridSpec) -> tuple[np.ndarray, ...]:
    """``i xi_k`` per axis with the Nyquist plane of that axis zeroed."""
    out = []
    for k, xi in zip(spec.integer_wavenumbers(), spec.frequencies()):
        out.append(np.where(k == -spec.N // 2, 0.0, 1j * xi) * np.ones(spec.shape))
    return tuple(out)


# -- extension field ----------------------------------------------------------------


class ExtensionField:
    """``F(x, t_j) = P_{t_j}^s f(x)`` with lazily computed, cached derivative slices.

    Slices are cached behind a lock, so one field can be shared between
    threads; every slice is a pure function of ``(f, s, t_j)``.
    """

    def __init__(self, source: GridFunction, order: float, tgrid: TGrid):
        self.source = source
        self.order = float(order)
        self.tgrid = tgrid
        self.spec = source.spec
        self.profile = profile_for(self.order)
        self._coeffs = np.fft.fftn(source.values)
        self._coeffs.setflags(write=False)
        self._phi, self._dphi = _profile_tables(self.spec, tgrid, self.order)
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def levels(self) -> np.ndarray:
        return self.tgrid.levels

    @property
    def M(self) -> int:
        return self.tgrid.M

    def __repr__(self):
        return f"ExtensionField(s={self.order:g}, {self.spec}, M={self.M})"

    def _slice(self, key, symbol_fn: Callable[[], np.ndarray]) -> GridFunction:
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        vals = np.fft.ifftn(self._coeffs * symbol_fn()).real
        out = GridFunction(self.spec, vals)
        with self._lock:
            self._cache.setdefault(key, out)
        return out

    def value(self, j: int) -> GridFunction:
        return self._slice(("F", j), lambda: self._phi[j])

    def dt(self, j: int) -> GridFunction:
        return self._slice(("t", j), lambda: self._dphi[j])

    def dx(self, j: int, axis: int) -> GridFunction:
        if not 0 <= axis < self.spec.n:
            raise IndexError(f"axis {axis} out of range for n={self.spec.n}")
        return self._slice(("x", axis, j), lambda: _odd_symbols(self.spec)[axis] * self._phi[j])

    def dxx(self, j: int, a: int, b: int) -> GridFunction:
        a, b = sorted((a, b))
        sym = _odd_symbols(self.spec)
        if a == b:
            # -xi_a^2 is even, the Nyquist plane may stay
            fn = lambda: -(self.spec.frequencies()[a] ** 2) * self._phi[j]  # noqa: E731
        else:
            fn = lambda: sym[a] * sym[b] * self._phi[j]  # noqa: E731
        return self._slice(("xx", a, b, j), fn)

    def dtx(self, j: int, axis: int) -> GridFunction:
        return self._slice(("tx", axis, j), lambda: _odd_symbols(self.spec)[axis] * self._dphi[j])

    def dtt(self, j: int) -> GridFunction:
        """``d_t^2 F`` from the profile ODE: ``F_tt = -(1-s)/t F_t - Lap_x F``."""
        t = self.levels[j]
        r2 = self.spec.xi_norm() ** 2
        return self._slice(
            ("tt", j), lambda: r2 * self._phi[j] - (1 - self.order) / t * self._dphi[j]
        )

    def grad(self, j: int) -> list[GridFunction]:
        """``(d_1 F, ..., d_n F, d_t F)`` at level ``j``."""
        return [self.dx(j, i) for i in range(self.spec.n)] + [self.dt(j)]

    def grad_x(self, j: int) -> list[GridFunction]:
        return [self.dx(j, i) for i in range(self.spec.n)]

    def hessian_entries(self, j: int) -> list[GridFunction]:
        """All second derivatives ``d_a d_b F`` with ``b`` ranging over x and t."""
        out = []
        for a in range(self.spec.n):
            out.extend(self.dxx(j, a, b) for b in range(self.spec.n))
            out.append(self.dtx(j, a))
        return out

    def symbol_table(self, j: int) -> np.ndarray:
        return self._phi[j]


def extend(f: GridFunction, s: float, tg: TGrid | None = None) -> ExtensionField:
    """Build ``P_t^s f`` on ``tg`` (default grid when omitted).

    Raises TailToleranceError when a mode present in ``f`` has not decayed
    below ``EXTENSION_TAIL_TOL`` of its amplitude at ``t_max``.
    """
    if not 0 < s < 2:
        raise ExponentRangeError(f"extension order s={s} not in (0, 2)")
    tg = tg or TGrid.default(f.spec)
    field = ExtensionField(f, s, tg)
    c = np.abs(field._coeffs)
    scale = c.max()
    if scale > 0:
        live = (c > 1e-14 * scale) & (f.spec.xi_norm() > 0)
        if np.any(live):
            r_min = float(f.spec.xi_norm()[live].min())
            remaining = float(field.profile(np.array([tg.t_max * r_min]))[0])
            if remaining > EXTENSION_TAIL_TOL:
                raise TailToleranceError(
                    f"slowest mode retains {remaining:.2e} of its amplitude at t_max={tg.t_max:g}"
                )
    return field


def pde_residual(E: ExtensionField) -> float:
    """Relative residual of ``div(t^{1-s} grad F) = 0``, mode by mode.

    Per mode the equation reads ``|xi|^2 f_hat [phi'' + (1-s)/r phi' - phi](t|xi|)``.
    The profile ODE residual is weighted by ``|xi|^2 |f_hat|`` and the
    maximum over modes and levels is divided by ``max_j ||Lap_x F(., t_j)||``
    in the same coefficient norm.  Zero input gives exactly 0.
    """
    spec = E.spec
    c = np.abs(E._coeffs).ravel()
    if not np.any(c):
        return 0.0
    r = spec.xi_norm().ravel()
    live = (r > 0) & (c > 0)
    if not np.any(live):
        return 0.0
    radii, inverse = np.unique(r[live], return_inverse=True)
    arg = E.levels[:, None] * radii[None, :]
    resid = np.abs(E.profile.ode_residual(arg))
    phi = np.abs(E.profile(arg))
    weight = r[live] ** 2 * c[live]
    num = np.max(resid[:, inverse] * weight[None, :])
    den = np.max(phi[:, inverse] * weight[None, :])
    return float(num / den)


def neumann_trace(E: ExtensionField) -> GridFunction:
    """``-t_1^{1-s} d_t F(., t_1) / d_s``, the first-level proxy for ``Lap^{s/2} f``."""
    if not 0 < E.order <= 1:
        raise ExponentRangeError(f"Neumann trace implemented for s in (0, 1], got {E.order}")
    t1 = E.levels[0]
    return E.dt(0) * (-(t1 ** (1 - E.order)) / E.profile.neumann_constant)


# -- bulk integrals -----------------------------------------------------------------

LevelIntegrand = Callable[[int], Union[GridFunction, np.ndarray, float]]


def bulk_integral(integrand: LevelIntegrand, tg: TGrid, tail_tol: float = BULK_TAIL_TOL) -> BulkIntegral:
    """``int_0^inf int g(x, t) dx dt`` for ``g`` supplied level by level.

    ``integrand(j)`` returns the slice ``g(., t_j)`` as a GridFunction (summed
    with the cell volume) or an already ``x``-integrated scalar.
    """
    g = np.empty(tg.M)
    for j in range(tg.M):
        item = integrand(j)
        if isinstance(item, GridFunction):
            g[j] = float(np.sum(item.values) * item.spec.cell_volume)
        else:
            g[j] = float(item)
    result = tg.integrate(g)
    scale = float(np.abs(tg.weights) @ np.abs(g)) + abs(result.left)
    if scale > 0 and result.right_estimate > tail_tol * scale:
        raise TailToleranceError(
            f"integrand at t_max contributes {result.right_estimate:.2e} (scale {scale:.2e})"
        )
    return result


# -- reflection, ball means, cones --------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReflectedBlock:
    """Samples of the even reflection ``F^e(x, t) = P_|t| f(x)`` on ``+-t_j``.

    ``values[k]`` is the slice at height ``heights[k]``, representing the
    t-cell ``[edges[k], edges[k+1]]``.
    """

    spec: GridSpec
    heights: np.ndarray
    edges: np.ndarray
    values: np.ndarray


def reflected_extension(f: GridFunction, tg: TGrid | None = None) -> ReflectedBlock:
    tg = tg or TGrid.default(f.spec)
    E = extend(f, 1.0, tg)
    upper = np.stack([E.value(j).values for j in range(tg.M)])
    values = np.concatenate([upper[::-1], upper])
    heights = np.concatenate([-tg.levels[::-1], tg.levels])
    edges = np.concatenate([-tg.cell_edges[::-1], tg.cell_edges[1:]])
    for a in (values, heights, edges):
        a.setflags(write=False)
    return ReflectedBlock(f.spec, heights, edges, values)


def _torus_offsets(spec: GridSpec, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets ``d`` with ``|d h| < radius`` (origin always included)."""
    m = int(math.floor(radius / spec.h)) + 1
    rng = np.arange(-m, m + 1)
    if spec.n == 1:
        d = rng[:, None]
    else:
        d = np.stack(np.meshgrid(rng, rng, indexing="ij"), axis=-1).reshape(-1, 2)
    dist = np.sqrt(np.sum((d * spec.h) ** 2, axis=1))
    keep = (dist < radius) | (dist == 0)
    return d[keep], dist[keep]


def ball_indicator(spec: GridSpec, radius: float) -> np.ndarray:
    """Periodic indicator of the discrete ball ``|y| < radius`` centred at the origin."""
    ind = np.zeros(spec.shape)
    d, _ = _torus_offsets(spec, radius)
    ind[tuple((d % spec.N).T)] = 1.0
    return ind


def ball_mean(f: GridFunction | np.ndarray, spec: GridSpec, radius: float) -> np.ndarray:
    """Mean of ``f`` over the discrete ball of the given radius at every grid point."""
    vals = f.values if isinstance(f, GridFunction) else np.asarray(f)
    ind = ball_indicator(spec, radius)
    kern = np.fft.fftn(ind)
    # the ball is symmetric, so correlation and convolution agree
    sums = np.fft.ifftn(np.fft.fftn(vals) * kern).real
    return sums / ind.sum()


def poisson_vs_ball_mean(f: GridFunction, t: float) -> float:
    """``sup_x |P_t f(x) - mean of f over B(x, t)|`` for the harmonic extension."""
    spec = f.spec
    if not 0 < t <= spec.L / 4:
        raise ValueError(f"ball radius t={t} must lie in (0, L/4]")
    sym = np.exp(-t * spec.xi_norm())
    pf = np.fft.ifftn(np.fft.fftn(f.values) * sym).real
    return float(np.max(np.abs(pf - ball_mean(f, spec, t))))


def _half_width(radius: float, h: float) -> int:
    """Largest integer ``d >= 0`` with ``d h < radius`` (0 if none)."""
    return max(int(math.ceil(radius / h)) - 1, 0)


def _disk_max(vals: np.ndarray, spec: GridSpec, radius: float) -> np.ndarray:
    """Periodic max filter over the discrete disk ``|d h| < radius``."""
    if spec.n == 1:
        return maximum_filter1d(vals, size=2 * _half_width(radius, spec.h) + 1, mode="wrap")
    out = vals.copy()
    m = _half_width(radius, spec.h)
    for dy in range(-m, m + 1):
        rem = radius * radius - (dy * spec.h) ** 2
        if rem <= 0:
            continue
        half = _half_width(math.sqrt(rem), spec.h)
        row = maximum_filter1d(np.roll(vals, -dy, axis=0), size=2 * half + 1, axis=1, mode="wrap")
        np.maximum(out, row, out=out)
    return out


def cone_maximal(E: ExtensionField, slices: Callable[[int], GridFunction] | None = None,
                 t_cap: float | None = None) -> GridFunction:
    """Nontangential maximal function ``sup_{|y - x| < t_j, t_j <= t_cap} |G(y, t_j)|``.

    ``slices`` selects the quantity (default ``F`` itself); ``t_cap`` defaults
    to ``L/4``.
    """
    spec = E.spec
    t_cap = spec.L / 4 if t_cap is None else t_cap
    pick = slices or E.value
    out = np.zeros(spec.shape)
    for j, t in enumerate(E.levels):
        if t > t_cap:
            break
        np.maximum(out, _disk_max(np.abs(pick(j).values), spec, t), out=out)
    return GridFunction(spec, out)


def dump_extension(E: ExtensionField, out_dir: str | Path) -> Path:
    """One GridFunction file per level plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for j in range(E.M):
        name = f"level_{j:04d}"
        write_gridfunction(E.value(j), out / name)
        files.append(f"{name}.bin")
    manifest = {
        "s": E.order,
        "tgrid": {
            "t_min": E.tgrid.t_min,
            "t_max": E.tgrid.t_max,
            "M": E.M,
            "levels": [float(t) for t in E.levels],
        },
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
