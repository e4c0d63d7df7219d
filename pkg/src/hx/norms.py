"""Norms, seminorms and half-space functionals on periodic grids.

Conventions:

* Balls and cubes are discrete: a ball of radius ``r`` about a grid point
  is the set of grid points at torus distance ``< r`` (the centre always
  belongs to it).  Radii and cube sides are capped at ``L/4`` and ``L/2``
  so that no ball wraps onto itself.
* Half-space functionals use the t-quadrature of :class:`hx.extension.TGrid`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.special import gamma

from hx.errors import AdmissibilityError, ExponentRangeError, SizeGuardError
from hx.extension import (
    ExtensionField,
    ReflectedBlock,
    _torus_offsets,
    ball_indicator,
    bulk_integral,
)
from hx.operators import fractional_laplacian
from hx.spectral import GridFunction, GridSpec

__all__ = [
    "NormSpec",
    "NormReport",
    "Tent",
    "lp_norm",
    "decreasing_rearrangement",
    "lorentz_norm",
    "bmo_seminorm",
    "bmo_exhaustive_1d",
    "bmo_block_seminorm",
    "holder_seminorm",
    "gagliardo_seminorm",
    "gagliardo_mode_weights",
    "gagliardo_spectral",
    "gagliardo_rn_constant",
    "maximal_function",
    "square_function",
    "carleson_sup",
    "tent_energy",
    "trace_sobolev_functional",
    "trace_holder_functional",
    "GAGLIARDO_MAX_N",
]

GAGLIARDO_MAX_N = {1: 4096, 2: 64}


# -- Lebesgue and Lorentz -----------------------------------------------------------


def lp_norm(f: GridFunction, p: float) -> float:
    if not p >= 1:
        raise ExponentRangeError(f"p={p} must be >= 1")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * f.spec.cell_volume) ** (1.0 / p))


def decreasing_rearrangement(f: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """``f*`` as a step function: value ``v[k]`` on ``(t[k], t[k+1]]``.

    Returns the ``size + 1`` breakpoints ``t`` and the ``size`` step values.
    """
    v = np.sort(np.abs(f.values).ravel())[::-1]
    t = np.arange(v.size + 1) * f.spec.cell_volume
    return t, v


def lorentz_norm(f: GridFunction, p: float, q: float) -> float:
    """``||f||_{L^(p,q)}`` evaluated exactly on the rearranged step function."""
    if not 1 <= p < math.inf:
        raise ExponentRangeError(f"Lorentz p={p} must lie in [1, inf)")
    if not q >= 1:
        raise ExponentRangeError(f"Lorentz q={q} must be >= 1")
    t, v = decreasing_rearrangement(f)
    if math.isinf(q):
        return float(np.max(t[1:] ** (1.0 / p) * v))
    # int t^{q/p - 1} v^q dt over each step, in closed form
    e = q / p
    return float((np.sum(v**q * (t[1:] ** e - t[:-1] ** e)) / e) ** (1.0 / q))


# -- BMO ----------------------------------------------------------------------------


def _cube_levels(N: int) -> list[int]:
    """Dyadic cube sides in cells, ``N/2`` down to 4."""
    out, m = [], N // 2
    while m >= 4:
        out.append(m)
        m //= 2
    return out


def _block_view(vals: np.ndarray, m: int, n: int) -> np.ndarray:
    """Reshape an ``N^n`` array into ``(blocks..., cells...)`` with side ``m``."""
    N = vals.shape[-1]
    b = N // m
    if n == 1:
        return vals.reshape(vals.shape[:-1] + (b, m))
    lead = vals.shape[:-2]
    v = vals.reshape(lead + (b, m, b, m))
    k = len(lead)
    v = np.moveaxis(v, k + 2, k + 1)
    return v.reshape(lead + (b, b, m * m))


_OFFSETS = (0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0)


def bmo_seminorm(f: GridFunction, return_cube: bool = False):
    """Mean oscillation maximised over shifted dyadic cubes.

    Cubes have side ``L/2^j`` (``j = 1 .. log2 N - 2``) and are translated
    along the diagonal by ``0, 1/3, 1/2, 2/3`` of their side.
    """
    spec = f.spec
    best, where = 0.0, None
    for m in _cube_levels(spec.N):
        for off in _OFFSETS:
            shift = int(round(off * m))
            vals = f.values
            for ax in range(spec.n):
                vals = np.roll(vals, -shift, axis=ax)
            blocks = _block_view(vals, m, spec.n)
            # centring on one sample makes a constant block exactly zero
            blocks = blocks - blocks[..., :1]
            mean = blocks.mean(axis=-1, keepdims=True)
            osc = np.abs(blocks - mean).mean(axis=-1)
            k = int(np.argmax(osc))
            if osc.flat[k] > best:
                best, where = float(osc.flat[k]), (m, shift, k)
    return (best, where) if return_cube else best


def bmo_exhaustive_1d(f: GridFunction, max_cells: int | None = None) -> float:
    """Mean oscillation maximised over every periodic interval of ``1..max_cells`` cells.

    ``O(N^3)`` work; an oracle for small grids.
    """
    if f.spec.n != 1:
        raise ValueError("exhaustive BMO is implemented for n = 1")
    N = f.spec.N
    max_cells = max_cells or N // 2
    ext = np.concatenate([f.values, f.values[:max_cells]])
    best = 0.0
    for m in range(2, max_cells + 1):
        win = np.lib.stride_tricks.sliding_window_view(ext, m)[:N]
        win = win - win[:, :1]
        mean = win.mean(axis=1, keepdims=True)
        best = max(best, float(np.abs(win - mean).mean(axis=1).max()))
    return best


def bmo_block_seminorm(block: ReflectedBlock, t_extent: float | None = None) -> float:
    """Mean oscillation of an ``(n+1)``-dimensional reflected block.

    Cubes are ``x``-cubes from the dyadic family times ``t``-intervals of the
    same side whose centres step by half a side within ``|t| <= t_extent``
    (default ``L/2``).  Slices are weighted by their overlap with the
    interval, so the nonuniform t-cells are integrated correctly.
    """
    spec = block.spec
    t_extent = spec.L / 2 if t_extent is None else t_extent
    lo_edge, hi_edge = block.edges[:-1], block.edges[1:]
    best = 0.0
    for m in _cube_levels(spec.N):
        side = m * spec.h
        centres = np.arange(-t_extent, t_extent + 1e-12, side / 2)
        for off in _OFFSETS:
            shift = int(round(off * m))
            vals = block.values
            for ax in range(spec.n):
                vals = np.roll(vals, -shift, axis=1 + ax)
            blocks = _block_view(vals, m, spec.n)
            blocks = blocks.reshape(blocks.shape[0], -1, blocks.shape[-1])  # (levels, blocks, cells)
            bmeans = blocks.mean(axis=-1)
            for c in centres:
                a, b = c - side / 2, c + side / 2
                w = np.clip(np.minimum(hi_edge, b) - np.maximum(lo_edge, a), 0.0, None)
                sel = np.flatnonzero(w > 0)
                if sel.size == 0:
                    continue
                ws = w[sel] / w[sel].sum()
                mean = np.tensordot(ws, bmeans[sel], axes=1)
                dev = np.abs(blocks[sel] - mean[None, :, None]).mean(axis=-1)
                osc = np.tensordot(ws, dev, axes=1)
                best = max(best, float(osc.max()))
    return best


# -- Holder and Gagliardo -------------------------------------------------------------


def _shifts(spec: GridSpec, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero integer shifts with ``0 < |d h| <= radius`` and their lengths."""
    d, dist = _torus_offsets(spec, radius + 1e-12 * spec.h)
    keep = dist > 0
    return d[keep], dist[keep]


def holder_seminorm(f: GridFunction, nu: float, window: np.ndarray | None = None,
                    max_distance: float | None = None) -> float:
    """``sup |f(x) - f(y)| / |x - y|^nu`` over grid pairs at distance ``<= L/4``.

    ``window`` (boolean mask) restricts both points of each pair.
    """
    if not 0 < nu <= 1:
        raise ExponentRangeError(f"Holder exponent {nu} not in (0, 1]")
    spec = f.spec
    radius = spec.L / 4 if max_distance is None else max_distance
    d, dist = _shifts(spec, radius)
    v = f.values
    mask = None if window is None else np.asarray(window, dtype=bool)
    best = 0.0
    for dd, r in zip(d, dist):
        if dd[np.flatnonzero(dd)[0]] < 0:
            continue  # the opposite shift covers the same pairs
        moved = np.roll(v, tuple(-dd), axis=tuple(range(spec.n)))
        diff = np.abs(moved - v)
        if mask is not None:
            both = mask & np.roll(mask, tuple(-dd), axis=tuple(range(spec.n)))
            if spec.n == 1:
                # a pair must not wrap around the period inside the window
                idx = np.arange(spec.N)
                both &= idx + dd[0] < spec.N
            diff = np.where(both, diff, 0.0)
        best = max(best, float(diff.max()) / r**nu)
    return best


def _check_gagliardo_size(spec: GridSpec):
    if spec.N > GAGLIARDO_MAX_N[spec.n]:
        raise SizeGuardError(
            f"Gagliardo double sum refused for n={spec.n}, N={spec.N} "
            f"(limit {GAGLIARDO_MAX_N[spec.n]})"
        )


@lru_cache(maxsize=32)
def _gagliardo_kernel(spec: GridSpec, exponent: float) -> np.ndarray:
    """``|d h|^{-exponent}`` on the torus offsets (min-image), 0 at the origin."""
    k = spec.integer_wavenumbers()  # signed offsets in FFT order
    r2 = sum((kk * spec.h) ** 2 for kk in k) * np.ones(spec.shape)
    out = np.zeros(spec.shape)
    nz = r2 > 0
    out[nz] = r2[nz] ** (-exponent / 2)
    out.setflags(write=False)
    return out


def gagliardo_seminorm(f: GridFunction, nu: float, p: float) -> float:
    """Periodic double sum ``(sum_x sum_{y != x} |f(x)-f(y)|^p / |x-y|^{n + nu p} h^{2n})^{1/p}``."""
    if not 0 < nu < 1:
        raise ExponentRangeError(f"Gagliardo order {nu} not in (0, 1)")
    if not p >= 1:
        raise ExponentRangeError(f"p={p} must be >= 1")
    spec = f.spec
    _check_gagliardo_size(spec)
    kern = _gagliardo_kernel(spec, spec.n + nu * p)
    v = f.values
    total = 0.0
    if spec.n == 1:
        N = spec.N
        idx = np.arange(N)
        for start in range(1, N, 256):
            ds = np.arange(start, min(start + 256, N))
            diff = np.abs(v[(idx[None, :] + ds[:, None]) % N] - v[None, :]) ** p
            total += float(kern[ds] @ diff.sum(axis=1))
    else:
        for a in range(spec.N):
            va = np.roll(v, -a, axis=0)
            for b in range(spec.N):
                if a == 0 and b == 0:
                    continue
                diff = np.abs(np.roll(va, -b, axis=1) - v) ** p
                total += kern[a, b] * float(diff.sum())
    return float((total * spec.cell_volume**2) ** (1.0 / p))


def gagliardo_mode_weights(spec: GridSpec, nu: float) -> np.ndarray:
    """``W(k)`` such that ``[f]^2 = h^n N^{-n} sum_k W(k) |c_k|^2`` for ``p = 2``.

    ``W`` is the same double sum applied to the single mode ``e^{i xi_k x}``.
    """
    kern = _gagliardo_kernel(spec, spec.n + 2 * nu)
    # sum_d K(d) |e^{i xi d h} - 1|^2 = 2 sum_d K(d) (1 - cos(xi d h))
    return 2.0 * spec.cell_volume * (kern.sum() - np.fft.fftn(kern).real)


def gagliardo_spectral(f: GridFunction, nu: float) -> float:
    """``p = 2`` Gagliardo seminorm through the single-mode weights."""
    spec = f.spec
    c = np.fft.fftn(f.values)
    w = gagliardo_mode_weights(spec, nu)
    return float(math.sqrt(spec.cell_volume / spec.size * np.sum(w * np.abs(c) ** 2)))


def gagliardo_rn_constant(n: int, nu: float) -> float:
    """``C`` with ``int |e^{i xi y} - 1|^2 |y|^{-n-2 nu} dy = C |xi|^{2 nu}`` on ``R^n``."""
    return float(2 * math.pi ** (n / 2) * gamma(1 - nu) / (nu * 4**nu * gamma(n / 2 + nu)))


# -- maximal function -------------------------------------------------------------


def _disk_radii_sq(N: int) -> list[int]:
    """Distinct squared radii (in cells) of discrete disks up to ``N/4``."""
    lim = (N // 4) ** 2
    vals = {a * a + b * b for a in range(N // 4 + 1) for b in range(a, N // 4 + 1) if a * a + b * b <= lim}
    return sorted(vals)


def maximal_function(f: GridFunction) -> GridFunction:
    """Centred Hardy-Littlewood maximal function over discrete balls of radius ``<= L/4``."""
    spec = f.spec
    a = np.abs(f.values)
    if spec.n == 1:
        N, R = spec.N, spec.N // 4
        ext = np.concatenate([a[-R:], a, a[:R]])
        cs = np.concatenate([[0.0], np.cumsum(ext)])
        best = a.copy()
        centre = np.arange(N) + R
        for m in range(1, R + 1):
            mean = (cs[centre + m + 1] - cs[centre - m]) / (2 * m + 1)
            np.maximum(best, mean, out=best)
        return GridFunction(spec, best)
    fa = np.fft.fftn(a)
    best = a.copy()
    k = spec.integer_wavenumbers()
    r2 = (k[0] ** 2 + k[1] ** 2) * np.ones(spec.shape)
    for q in _disk_radii_sq(spec.N)[1:]:
        ind = (r2 <= q).astype(float)
        mean = np.fft.ifftn(fa * np.fft.fftn(ind)).real / ind.sum()
        np.maximum(best, mean, out=best)
    return GridFunction(spec, best)


# -- half-space functionals ---------------------------------------------------------

_SQUARE_RANGES = {
    # selector: (power, admissible nu range as a predicate of (nu, s))
    "dt": (1, lambda nu, s: 0 <= nu < s and s <= 1),
    "dx": (1, lambda nu, s: 0 <= nu < 1 and s <= 1),
    "dxx": (3, lambda nu, s: 0 < nu < 1 + s and s <= 1),
}


def _selector_sq(E: ExtensionField, selector: str, j: int) -> np.ndarray:
    """``|D F(., t_j)|^2`` for the selected derivative."""
    if selector == "dt":
        return E.dt(j).values ** 2
    if selector == "dx":
        return sum(g.values**2 for g in E.grad_x(j))
    if selector == "dxx":
        return sum(g.values**2 for g in E.hessian_entries(j))
    raise AdmissibilityError(f"unknown derivative selector {selector!r}")


def square_function(E: ExtensionField, selector: str, nu: float) -> GridFunction:
    """Nontangential square function over the cone ``|y - x| < t``, ``t_1 <= t <= L/4``.

    ``S(x)^2 = int t^{k - 2 nu - n} int_{|y - x| < t} |D F(y, t)|^2 dy dt`` with
    ``k`` the selector's power.  The inner integral is taken as the mean over
    the discrete ball times the exact ball volume, so balls smaller than a
    cell are not overweighted.
    """
    if selector not in _SQUARE_RANGES:
        raise AdmissibilityError(f"unknown derivative selector {selector!r}")
    power, ok = _SQUARE_RANGES[selector]
    if not ok(nu, E.order):
        raise AdmissibilityError(f"nu={nu} inadmissible for selector {selector!r} at s={E.order}")
    spec = E.spec
    w = E.tgrid.weights
    # |B_t| t^{-n} is the unit-ball volume; the discrete ball only supplies the average
    omega = math.pi ** (spec.n / 2) / math.gamma(spec.n / 2 + 1)
    acc = np.zeros(spec.shape)
    for j, t in enumerate(E.levels):
        if t > spec.L / 4:
            break
        ind = ball_indicator(spec, t)
        dens = _selector_sq(E, selector, j)
        avg = np.fft.ifftn(np.fft.fftn(dens) * np.fft.fftn(ind)).real / ind.sum()
        acc += w[j] * omega * t ** (power - 2 * nu) * avg
    return GridFunction(spec, np.sqrt(np.clip(acc, 0.0, None)))


@dataclass(frozen=True)
class Tent:
    """Discrete tent ``{(x, t_j): |x - x0| < r - t_j}`` over a grid ball."""

    center: tuple[int, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("tent radius must be positive")

    def ball_measure(self, spec: GridSpec) -> float:
        return float(ball_indicator(spec, self.radius).sum() * spec.cell_volume)


def _tent_density(E: ExtensionField, j: int) -> np.ndarray:
    t = E.levels[j]
    return t * sum(g.values**2 for g in E.grad(j)) * E.spec.cell_volume


def tent_energy(E: ExtensionField, tent: Tent) -> float:
    """``(|B|^{-1} int_{T(B)} t |grad F|^2)^{1/2}`` for one tent."""
    spec = E.spec
    w = E.tgrid.weights
    total = 0.0
    for j, t in enumerate(E.levels):
        if t >= tent.radius:
            break
        ind = np.roll(ball_indicator(spec, tent.radius - t), tent.center, axis=tuple(range(spec.n)))
        total += w[j] * float(np.sum(_tent_density(E, j) * ind))
    return math.sqrt(max(total, 0.0) / tent.ball_measure(spec))


def carleson_sup(E: ExtensionField, radii: list[float] | None = None) -> float:
    """Sup of :func:`tent_energy` over all grid centres and dyadic radii ``L/4, L/8, ...``."""
    spec = E.spec
    if radii is None:
        radii, r = [], spec.L / 4
        while r >= 2 * spec.h:
            radii.append(r)
            r /= 2
    w = E.tgrid.weights
    dens = {}
    best = 0.0
    for r in radii:
        acc = np.zeros(spec.shape)
        for j, t in enumerate(E.levels):
            if t >= r:
                break
            if j not in dens:
                dens[j] = np.fft.fftn(_tent_density(E, j))
            acc += w[j] * np.fft.ifftn(dens[j] * np.fft.fftn(ball_indicator(spec, r - t))).real
        measure = ball_indicator(spec, r).sum() * spec.cell_volume
        best = max(best, math.sqrt(max(float(acc.max()), 0.0) / measure))
    return best


_TRACE_RANGES = {
    "dx": (1, lambda nu, s: 0 < nu < 1),
    "dxx": (2, lambda nu, s: 0 < nu < 2),
    "dt": (1, lambda nu, s: 0 < nu < 1 and nu < s),
}


def trace_sobolev_functional(E: ExtensionField, nu: float, p: float, selector: str) -> float:
    """``(int_0^inf int |t^{k - 1/p - nu} D F|^p dx dt)^{1/p}`` with ``k`` the derivative order."""
    if selector not in _TRACE_RANGES:
        raise AdmissibilityError(f"unknown derivative selector {selector!r}")
    power, ok = _TRACE_RANGES[selector]
    if not ok(nu, E.order):
        raise AdmissibilityError(f"nu={nu} inadmissible for selector {selector!r} at s={E.order}")
    a = power - 1.0 / p - nu
    sq = "dxx" if selector == "dxx" else selector

    def level(j: int) -> float:
        if sq == "dxx":
            mag2 = sum(g.values**2 for g in (E.dxx(j, i, k) for i in range(E.spec.n) for k in range(E.spec.n)))
        else:
            mag2 = _selector_sq(E, sq, j)
        return float(np.sum((E.levels[j] ** a * np.sqrt(mag2)) ** p) * E.spec.cell_volume)

    res = bulk_integral(level, E.tgrid)
    return float(max(res.value, 0.0) ** (1.0 / p))


def trace_holder_functional(E: ExtensionField, nu: float) -> float:
    """``sup_j t_j^{1 - nu} ||d_t F(., t_j)||_inf``."""
    if not 0 < nu < E.order:
        raise AdmissibilityError(f"nu={nu} must lie in (0, s={E.order})")
    return max(float(E.levels[j] ** (1 - nu) * np.abs(E.dt(j).values).max()) for j in range(E.M))


# -- specs and reports --------------------------------------------------------------

_KINDS = ("Lp", "Lorentz", "BMO", "Holder", "Gagliardo", "SpectralSobolev")


@dataclass(frozen=True)
class NormSpec:
    """A norm choice with validated parameters."""

    kind: str
    p: float | None = None
    q: float | None = None
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {_KINDS}")
        need = {
            "Lp": ("p",),
            "Lorentz": ("p", "q"),
            "BMO": (),
            "Holder": ("nu",),
            "Gagliardo": ("nu", "p"),
            "SpectralSobolev": ("nu", "p"),
        }[self.kind]
        for name in need:
            if getattr(self, name) is None:
                raise ExponentRangeError(f"{self.kind} needs parameter {name}")
        if self.kind == "Lp" and not self.p >= 1:
            raise ExponentRangeError(f"p={self.p} must be >= 1")
        if self.kind == "Lorentz" and not (1 < self.p < math.inf and self.q >= 1):
            raise ExponentRangeError(f"Lorentz needs p in (1, inf), q >= 1; got {self.p}, {self.q}")
        if self.kind == "Holder" and not 0 < self.nu <= 1:
            raise ExponentRangeError(f"Holder nu={self.nu} not in (0, 1]")
        if self.kind in ("Gagliardo", "SpectralSobolev"):
            if not 0 < self.nu < 1:
                raise ExponentRangeError(f"nu={self.nu} not in (0, 1)")
            if not 1 < self.p < math.inf:
                raise ExponentRangeError(f"p={self.p} not in (1, inf)")

    def params(self) -> dict[str, float]:
        return {k: v for k, v in (("p", self.p), ("q", self.q), ("nu", self.nu)) if v is not None}

    def evaluate(self, f: GridFunction) -> "NormReport":
        meta: dict[str, Any] = {"n": f.spec.n, "N": f.spec.N, "L": f.spec.L}
        if self.kind == "Lp":
            value = lp_norm(f, self.p)
        elif self.kind == "Lorentz":
            value = lorentz_norm(f, self.p, self.q)
        elif self.kind == "BMO":
            value = bmo_seminorm(f)
            meta["cubes"] = "dyadic sides L/2..4h, diagonal offsets 0,1/3,1/2,2/3"
        elif self.kind == "Holder":
            value = holder_seminorm(f, self.nu)
            meta["pairs"] = "all pairs at torus distance <= L/4"
        elif self.kind == "Gagliardo":
            value = gagliardo_seminorm(f, self.nu, self.p)
            meta["pairs"] = "all torus pairs, min-image distance"
        else:
            value = lp_norm(fractional_laplacian(f, self.nu), self.p)
        return NormReport(self, value, meta)


@dataclass(frozen=True)
class NormReport:
    spec: NormSpec
    value: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError(f"norm value must be finite and nonnegative, got {self.value}")

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.spec.kind, "params": self.spec.params(), "value": self.value, "metadata": self.metadata},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        d = json.loads(text)
        return cls(NormSpec(d["kind"], **d["params"]), d["value"], d["metadata"])

