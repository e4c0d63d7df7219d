"""Deterministic band-limited test functions.

Every function is a fixed trigonometric polynomial on the torus: its
coefficients depend on ``(seed, suite, role, trial)`` and on the absolute band
only, never on ``N``.  The same trial therefore yields the same function on a
grid and on its refinement, which is what the ``N -> 2N`` stability check needs.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from hx.harness.config import TrialConfig
from hx.spectral import GridFunction, GridSpec

__all__ = ["trial_seed", "role_rng", "generate_test_function", "band_mask"]

# oversampling used to evaluate bumps before projecting onto the band
_BUMP_SAMPLES = 4096


def trial_seed(cfg: TrialConfig, trial: int) -> int:
    """64-bit seed of one trial, a hash of (base seed, suite, trial)."""
    ss = np.random.SeedSequence([cfg.seed, zlib.crc32(cfg.suite.encode()), trial])
    return int(ss.generate_state(1, np.uint64)[0])


def role_rng(cfg: TrialConfig, role: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([trial_seed(cfg, trial), role]))


def band_mask(spec: GridSpec, band: int) -> np.ndarray:
    mask = np.ones(spec.shape, dtype=bool)
    for k in spec.integer_wavenumbers():
        mask &= np.abs(k) <= band
    return mask


def _embed(coeffs: np.ndarray, band: int, spec: GridSpec) -> np.ndarray:
    """Place a ``(2 band + 1)^n`` block of coefficients into the grid's DFT layout."""
    full = np.zeros(spec.shape, dtype=np.complex128)
    idx = np.arange(-band, band + 1) % spec.N
    full[np.ix_(*([idx] * spec.n))] = coeffs
    return full


def _trig_block(rng: np.random.Generator, band: int, n: int) -> np.ndarray:
    k = np.arange(-band, band + 1)
    grids = np.meshgrid(*([k] * n), indexing="ij")
    kk = np.sqrt(sum(g.astype(float) ** 2 for g in grids))
    decay = rng.uniform(1.0, 2.0)
    shape = (2 * band + 1,) * n
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return c * (1.0 + kk) ** (-decay)


def _bump_values(rng: np.random.Generator, n: int, L: float, x: tuple[np.ndarray, ...],
                 modulated: bool, band: int) -> np.ndarray:
    """One to three C^inf bumps with centres and radii inside the central half-window."""
    total = np.zeros(np.broadcast_shapes(*(a.shape for a in x)))
    for _ in range(int(rng.integers(1, 4))):
        radius = L * rng.uniform(0.06, 0.2)
        centre = rng.uniform(L / 4 + radius, 3 * L / 4 - radius, size=n)
        amp = rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        rho2 = sum((xi - c) ** 2 for xi, c in zip(x, centre)) / radius**2
        inside = rho2 < 1
        b = np.zeros_like(rho2)
        b[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        if modulated:
            K = rng.integers(-max(band // 2, 1), max(band // 2, 1) + 1, size=n)
            phase = rng.uniform(0, 2 * math.pi)
            b = b * np.cos(sum(2 * math.pi * k * (xi - c) / L for k, xi, c in zip(K, x, centre)) + phase)
        total = total + amp * b
    return total


def _bump_block(rng: np.random.Generator, cfg: TrialConfig, modulated: bool) -> np.ndarray:
    """Band coefficients of a bump sum, computed on a fixed fine grid."""
    n, band = cfg.n, cfg.band
    samples = _BUMP_SAMPLES if n == 1 else 256
    samples = max(samples, 4 * band)
    fine = GridSpec(n, samples, cfg.L)
    vals = _bump_values(rng, n, cfg.L, fine.coordinates(), modulated, band)
    c = np.fft.fftn(vals) / fine.size
    idx = np.arange(-band, band + 1) % samples
    return c[np.ix_(*([idx] * n))]


def generate_test_function(cfg: TrialConfig, role: int, trial: int,
                           spec: GridSpec | None = None, zero_mean: bool = False) -> GridFunction:
    """Test function number ``trial`` for input slot ``role``.

    The coefficients live on ``|k_i| <= band`` and do not depend on the grid,
    so ``spec`` may be any grid of ``cfg``'s dimension and length with
    ``N/2 > band``.  Values are scaled so the trig polynomial's coefficient
    block has a fixed norm, which keeps sup norms of order one.
    """
    spec = spec or cfg.spec
    if spec.n != cfg.n or spec.L != cfg.L:
        raise ValueError("grid does not match the configuration")
    if 2 * cfg.band >= spec.N:
        raise ValueError(f"band {cfg.band} not resolved on N={spec.N}")
    if cfg.kind == "zero":
        return GridFunction.zeros(spec)
    rng = role_rng(cfg, role, trial)
    if cfg.kind == "trig":
        block = _trig_block(rng, cfg.band, cfg.n)
    else:
        block = _bump_block(rng, cfg, cfg.kind == "modulated")
    if zero_mean or cfg.zero_mean:
        block[(cfg.band,) * cfg.n] = 0.0
    # sum of |c_k| bounds the sup norm of Re sum c_k e^{ikx}
    scale = float(np.abs(block).sum())
    if scale > 0:
        block = block / scale
    vals = np.fft.ifftn(_embed(block, cfg.band, spec)).real * spec.size
    f = GridFunction(spec, vals)
    return f.zero_mean() if (zero_mean or cfg.zero_mean) else f
