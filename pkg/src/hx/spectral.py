"""Periodic-grid discretisation and the discrete Fourier machinery.

The torus ``[0, L)^n`` stands in for ``R^n``.  Every function lives on a
uniform grid of ``N`` points per axis; the Fourier lattice is
``xi_k = 2*pi*k/L`` with ``-N/2 <= k < N/2`` per axis.

Transform normalisation (used by every module in the package)::

    c_k  = sum_x f(x) exp(-i xi_k . x)                 (forward, unnormalised)
    f(x) = N^{-n} sum_k c_k exp(i xi_k . x)             (inverse)

so that Plancherel reads ``h^n sum_x |f|^2 = h^n N^{-n} sum_k |c_k|^2``.

Odd symbols (derivatives, Riesz transforms) are set to zero on every
Nyquist mode ``k_j = -N/2`` so that their outputs stay real.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from hx.errors import SpecMismatchError, SymbolError

__all__ = [
    "GridSpec",
    "GridFunction",
    "SpectralField",
    "Multiplier",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "dealiased_product",
    "differentiate",
    "gradient",
    "integrate",
    "inner",
    "write_gridfunction",
    "read_gridfunction",
    "write_csv",
]

# relative size of the imaginary residue tolerated after an inverse transform
IMAG_RESIDUE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``N`` points per axis on ``[0, L)^n``."""

    n: int
    N: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"period must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @classmethod
    def default(cls, n: int) -> "GridSpec":
        return cls(n, 1024 if n == 1 else 128, 2 * math.pi)

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.n, self.N * factor, self.L)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Sample positions ``x_j = j*h``, one broadcastable array per axis."""
        return _coordinates(self)

    def integer_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer ``k`` per axis in FFT order, broadcastable."""
        return _wavenumbers(self)

    def frequencies(self) -> tuple[np.ndarray, ...]:
        """Angular frequencies ``xi = 2*pi*k/L`` per axis, broadcastable."""
        return tuple(2 * np.pi * k / self.L for k in _wavenumbers(self))

    def xi_norm(self) -> np.ndarray:
        """``|xi|`` on the full lattice."""
        return _xi_norm(self)

    def nyquist_mask(self) -> np.ndarray:
        """True on every lattice point with some ``k_j == -N/2``."""
        return _nyquist_mask(self)


@lru_cache(maxsize=64)
def _coordinates(spec: GridSpec) -> tuple[np.ndarray, ...]:
    x = np.arange(spec.N) * spec.h
    if spec.n == 1:
        return (x,)
    return (x[:, None], x[None, :])


@lru_cache(maxsize=64)
def _wavenumbers(spec: GridSpec) -> tuple[np.ndarray, ...]:
    k = np.fft.fftfreq(spec.N, d=1.0 / spec.N)
    if spec.n == 1:
        return (k,)
    return (k[:, None], k[None, :])


@lru_cache(maxsize=64)
def _xi_norm(spec: GridSpec) -> np.ndarray:
    xi = spec.frequencies()
    r = np.sqrt(sum(x * x for x in xi)) * np.ones(spec.shape)
    r.setflags(write=False)
    return r


@lru_cache(maxsize=64)
def _nyquist_mask(spec: GridSpec) -> np.ndarray:
    mask = np.zeros(spec.shape, dtype=bool)
    for k in _wavenumbers(spec):
        mask |= np.broadcast_to(k == -spec.N // 2, spec.shape)
    mask.setflags(write=False)
    return mask


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a periodic function, row-major on ``spec``."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != self.spec.shape:
            raise ValueError(f"values of shape {v.shape} do not match grid {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite samples")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_callable(cls, spec: GridSpec, func: Callable[..., np.ndarray]) -> "GridFunction":
        vals = func(*spec.coordinates()) * np.ones(spec.shape)
        return cls(spec, vals)

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "GridFunction":
        return cls(spec, np.full(spec.shape, float(c)))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.shape))

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def zero_mean(self) -> "GridFunction":
        return GridFunction(self.spec, self.values - self.values.mean())

    def _check(self, other: "GridFunction"):
        if other.spec != self.spec:
            raise SpecMismatchError(f"{self.spec} != {other.spec}")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.spec, self.values + other.values)
        return GridFunction(self.spec, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.spec, self.values - other.values)
        return GridFunction(self.spec, self.values - other)

    def __rsub__(self, other):
        return GridFunction(self.spec, other - self.values)

    def __neg__(self):
        return GridFunction(self.spec, -self.values)

    def __mul__(self, other):
        # pointwise sample product; use dealiased_product for the band-limited product
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.spec, self.values * other.values)
        return GridFunction(self.spec, self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return GridFunction(self.spec, self.values / other)

    def __repr__(self):
        return f"GridFunction(n={self.spec.n}, N={self.spec.N}, L={self.spec.L:g}, mean={self.mean:.3g})"


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Unnormalised DFT coefficients of a real grid function (FFT order)."""

    spec: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape != self.spec.shape:
            raise ValueError(f"coefficients of shape {c.shape} do not match grid {self.spec.shape}")
        object.__setattr__(self, "coefficients", _frozen(c.copy()))

    def mirrored(self) -> np.ndarray:
        """Coefficients re-indexed at ``-k`` (for conjugate-symmetry checks)."""
        c = self.coefficients
        for ax in range(c.ndim):
            c = np.roll(np.flip(c, axis=ax), 1, axis=ax)
        return c


@dataclass(frozen=True)
class Multiplier:
    """A Fourier multiplier ``m(xi)`` with an explicit value at ``xi = 0``.

    ``symbol`` receives the tuple of per-axis frequency arrays and ``|xi|``
    (with the origin already masked to 1 to avoid division by zero).
    """

    symbol: Callable[[tuple[np.ndarray, ...], np.ndarray], np.ndarray]
    at_zero: complex = 0.0
    odd: bool = False
    name: str = "multiplier"

    def on_lattice(self, spec: GridSpec) -> np.ndarray:
        xi = spec.frequencies()
        r = spec.xi_norm()
        origin = r == 0
        safe_r = np.where(origin, 1.0, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.asarray(self.symbol(xi, safe_r), dtype=np.complex128) * np.ones(spec.shape)
        m = np.where(origin, complex(self.at_zero), m)
        if self.odd:
            m = np.where(spec.nyquist_mask(), 0.0, m)
        if not np.all(np.isfinite(m)):
            raise SymbolError(f"{self.name} produced a non-finite value on the lattice")
        return m

    def __matmul__(self, other: "Multiplier") -> "Multiplier":
        """Composition, i.e. the pointwise product of symbols."""
        a, b = self, other
        return Multiplier(
            lambda xi, r: a.symbol(xi, r) * b.symbol(xi, r),
            at_zero=complex(a.at_zero) * complex(b.at_zero),
            odd=a.odd or b.odd,
            name=f"{a.name}*{b.name}",
        )


def forward_transform(f: GridFunction) -> SpectralField:
    return SpectralField(f.spec, np.fft.fftn(f.values))


def inverse_transform(c: SpectralField) -> GridFunction:
    """Inverse DFT; the imaginary residue must be negligible and is dropped."""
    return GridFunction(c.spec, _real_ifft(c.coefficients, c.spec))


def _real_ifft(coeffs: np.ndarray, spec: GridSpec, ref: float | None = None) -> np.ndarray:
    out = np.fft.ifftn(coeffs)
    if ref is None:
        ref = np.linalg.norm(coeffs)
    ref = ref / math.sqrt(spec.size)
    resid = np.linalg.norm(out.imag)
    if resid > IMAG_RESIDUE_TOL * ref + 1e-300:
        raise SymbolError(f"imaginary residue {resid:.3e} exceeds tolerance (reference {ref:.3e})")
    return out.real


def apply_multiplier(f: GridFunction, m: Multiplier) -> GridFunction:
    return apply_symbol_array(f, m.on_lattice(f.spec))


def apply_symbol_array(f: GridFunction, symbol: np.ndarray) -> GridFunction:
    """Apply a precomputed lattice symbol (already Nyquist-masked if odd).

    Rounding in the forward transform is amplified by up to ``max |m|``, so
    the imaginary-residue check is scaled by that bound.
    """
    fh = np.fft.fftn(f.values)
    c = fh * symbol
    bound = np.linalg.norm(fh) * float(np.abs(symbol).max(initial=0.0))
    return GridFunction(f.spec, _real_ifft(c, f.spec, max(bound, np.linalg.norm(c))))


def _padded_size(N: int) -> int:
    # 3N/2 leaves the k = +-N products aliasing onto the retained Nyquist mode
    return 3 * N // 2 + 2


def _pad_axis(c: np.ndarray, axis: int, N: int, M: int) -> np.ndarray:
    shape = list(c.shape)
    shape[axis] = M
    out = np.zeros(shape, dtype=np.complex128)
    h = N // 2
    take = lambda sl: tuple(sl if a == axis else slice(None) for a in range(c.ndim))  # noqa: E731
    out[take(slice(0, h))] = c[take(slice(0, h))]
    out[take(slice(M - h + 1, M))] = c[take(slice(h + 1, N))]
    nyq = c[take(slice(h, h + 1))]
    out[take(slice(h, h + 1))] = 0.5 * nyq
    out[take(slice(M - h, M - h + 1))] = 0.5 * nyq
    return out


def _truncate_axis(c: np.ndarray, axis: int, N: int, M: int) -> np.ndarray:
    h = N // 2
    take = lambda sl: tuple(sl if a == axis else slice(None) for a in range(c.ndim))  # noqa: E731
    shape = list(c.shape)
    shape[axis] = N
    out = np.zeros(shape, dtype=np.complex128)
    out[take(slice(0, h))] = c[take(slice(0, h))]
    out[take(slice(h + 1, N))] = c[take(slice(M - h + 1, M))]
    out[take(slice(h, h + 1))] = c[take(slice(h, h + 1))] + c[take(slice(M - h, M - h + 1))]
    return out


def dealiased_product(f: GridFunction, g: GridFunction) -> GridFunction:
    """Band-limited product of the trigonometric interpolants of ``f`` and ``g``.

    Both spectra are zero padded to ``3N/2 + 2`` points per axis, multiplied
    in physical space and truncated back, so the retained modes carry no
    aliasing error.
    """
    if f.spec != g.spec:
        raise SpecMismatchError(f"{f.spec} != {g.spec}")
    spec = f.spec
    N, M = spec.N, _padded_size(spec.N)
    cf, cg = np.fft.fftn(f.values), np.fft.fftn(g.values)
    for ax in range(spec.n):
        cf = _pad_axis(cf, ax, N, M)
        cg = _pad_axis(cg, ax, N, M)
    scale = (M / N) ** spec.n
    prod = np.fft.ifftn(cf).real * np.fft.ifftn(cg).real * scale * scale
    cp = np.fft.fftn(prod)
    for ax in range(spec.n):
        cp = _truncate_axis(cp, ax, N, M)
    return GridFunction(spec, np.fft.ifftn(cp / scale).real)


def _derivative_multiplier(axis: int) -> Multiplier:
    return Multiplier(lambda xi, r: 1j * xi[axis], at_zero=0.0, odd=True, name=f"d{axis}")


def differentiate(f: GridFunction, axis: int) -> GridFunction:
    if not 0 <= axis < f.spec.n:
        raise IndexError(f"axis {axis} out of range for n={f.spec.n}")
    return apply_multiplier(f, _derivative_multiplier(axis))


def gradient(f: GridFunction) -> list[GridFunction]:
    c = np.fft.fftn(f.values)
    out = []
    nyq = f.spec.nyquist_mask()
    for xi in f.spec.frequencies():
        sym = np.where(nyq, 0.0, 1j * xi * np.ones(f.spec.shape))
        out.append(GridFunction(f.spec, _real_ifft(c * sym, f.spec)))
    return out


def integrate(f: GridFunction) -> float:
    """``h^n * sum f`` (the torus integral of the sampled function)."""
    return float(f.values.sum() * f.spec.cell_volume)


def inner(f: GridFunction, g: GridFunction) -> float:
    if f.spec != g.spec:
        raise SpecMismatchError(f"{f.spec} != {g.spec}")
    return float(np.sum(f.values * g.values) * f.spec.cell_volume)


# -- dump format --------------------------------------------------------------


def _checksum(values: np.ndarray) -> str:
    return hashlib.sha256(values.astype("<f8").tobytes(order="C")).hexdigest()


def write_gridfunction(f: GridFunction, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian float64, row-major) plus a JSON sidecar."""
    base = Path(path)
    if base.suffix in (".bin", ".json"):
        base = base.with_suffix("")
    bin_path, json_path = base.with_suffix(".bin"), base.with_suffix(".json")
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(f.values.astype("<f8").tobytes(order="C"))
    meta = {
        "n": f.spec.n,
        "N": f.spec.N,
        "L": f.spec.L,
        "mean": f.mean,
        "checksum": _checksum(f.values),
    }
    json_path.write_text(json.dumps(meta, indent=2))
    return bin_path, json_path


def read_gridfunction(path: str | Path) -> GridFunction:
    base = Path(path)
    if base.suffix in (".bin", ".json"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    spec = GridSpec(int(meta["n"]), int(meta["N"]), float(meta["L"]))
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    values = raw.reshape(spec.shape)
    if _checksum(values) != meta["checksum"]:
        raise ValueError(f"checksum mismatch reading {base}")
    return GridFunction(spec, values)


def write_csv(f: GridFunction, path: str | Path) -> Path:
    """Two-column CSV ``x,value`` with 17 significant digits (n = 1 only)."""
    if f.spec.n != 1:
        raise ValueError("CSV dump is only defined for n = 1")
    path = Path(path)
    x = f.spec.coordinates()[0]
    lines = ["x,value"] + [f"{a:.17g},{b:.17g}" for a, b in zip(x, f.values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path, L: float) -> GridFunction:
    rows = Path(path).read_text().strip().splitlines()[1:]
    vals = np.array([float(r.split(",")[1]) for r in rows])
    return GridFunction(GridSpec(1, len(vals), L), vals)
