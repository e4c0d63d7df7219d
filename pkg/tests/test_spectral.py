"""Grids, transforms, multipliers, dealiased products and the dump formats."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_trig
from hx.errors import SpecMismatchError, SymbolError
from hx.spectral import (
    GridFunction,
    GridSpec,
    Multiplier,
    SpectralField,
    apply_multiplier,
    dealiased_product,
    differentiate,
    forward_transform,
    gradient,
    inner,
    integrate,
    inverse_transform,
    read_csv,
    read_gridfunction,
    write_csv,
    write_gridfunction,
)


class TestGridSpec:
    @pytest.mark.parametrize("n,N,L", [(3, 64, 1.0), (1, 100, 1.0), (1, 4, 1.0), (1, 64, 0.0), (2, 64, -1.0),
                                       (1, 64, math.inf)])
    def test_rejects_invalid(self, n, N, L):
        with pytest.raises(ValueError):
            GridSpec(n, N, L)

    def test_defaults(self):
        assert GridSpec.default(1) == GridSpec(1, 1024, 2 * math.pi)
        assert GridSpec.default(2) == GridSpec(2, 128, 2 * math.pi)

    def test_geometry(self):
        spec = GridSpec(2, 16, 4.0)
        assert spec.h == 0.25
        assert spec.shape == (16, 16)
        assert spec.size == 256
        assert spec.cell_volume == 0.0625
        assert spec.refined() == GridSpec(2, 32, 4.0)

    def test_frequencies(self):
        spec = GridSpec(1, 8, 2 * math.pi)
        (k,) = spec.integer_wavenumbers()
        np.testing.assert_array_equal(k, [0, 1, 2, 3, -4, -3, -2, -1])
        np.testing.assert_allclose(spec.xi_norm(), np.abs(k))
        assert spec.nyquist_mask().sum() == 1

    def test_nyquist_mask_2d(self):
        spec = GridSpec(2, 8)
        # every mode with a Nyquist index on either axis
        assert spec.nyquist_mask().sum() == 2 * 8 - 1


class TestGridFunction:
    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            GridFunction(GridSpec(1, 16), np.zeros(8))

    def test_rejects_nonfinite(self):
        v = np.zeros(16)
        v[3] = np.nan
        with pytest.raises(ValueError):
            GridFunction(GridSpec(1, 16), v)

    def test_values_are_frozen(self):
        f = GridFunction.constant(GridSpec(1, 16), 2.0)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_arithmetic(self):
        spec = GridSpec(1, 16)
        f = GridFunction.constant(spec, 2.0)
        g = GridFunction.constant(spec, 3.0)
        np.testing.assert_array_equal((f + g).values, 5.0)
        np.testing.assert_array_equal((f - g).values, -1.0)
        np.testing.assert_array_equal((f * 4.0).values, 8.0)
        np.testing.assert_array_equal((g / 3.0).values, 1.0)
        np.testing.assert_array_equal((-f).values, -2.0)

    def test_mismatched_specs(self):
        f = GridFunction.zeros(GridSpec(1, 16))
        g = GridFunction.zeros(GridSpec(1, 32))
        with pytest.raises(SpecMismatchError):
            f + g
        with pytest.raises(SpecMismatchError):
            dealiased_product(f, g)
        with pytest.raises(SpecMismatchError):
            inner(f, g)

    def test_zero_mean(self, spec2):
        f = random_trig(spec2, 6, 1) + 3.0
        assert abs(f.zero_mean().mean) < 1e-15

    def test_integrate_constant(self):
        spec = GridSpec(2, 16, 3.0)
        assert integrate(GridFunction.constant(spec, 2.0)) == pytest.approx(18.0, rel=1e-15)


class TestTransforms:
    @pytest.mark.parametrize("n,N", [(1, 256), (2, 32)])
    def test_plancherel(self, n, N):
        spec = GridSpec(n, N)
        for seed in range(100):
            f = random_trig(spec, N // 2, seed)
            a = np.sum(f.values**2) * spec.cell_volume
            c = forward_transform(f).coefficients
            b = np.sum(np.abs(c) ** 2) * spec.cell_volume / spec.size
            assert abs(a - b) <= 1e-12 * a

    @pytest.mark.parametrize("n,N", [(1, 64), (2, 16)])
    def test_roundtrip(self, n, N):
        f = random_trig(GridSpec(n, N), N // 2, 0)
        back = inverse_transform(forward_transform(f))
        np.testing.assert_allclose(back.values, f.values, atol=1e-14)

    def test_mirrored_is_conjugate_for_real_input(self, spec2):
        c = forward_transform(random_trig(spec2, 8, 3))
        np.testing.assert_allclose(c.mirrored(), np.conj(c.coefficients), atol=1e-12)

    def test_imaginary_residue_detected(self):
        spec = GridSpec(1, 16)
        c = np.zeros(16, dtype=complex)
        c[1] = 1.0  # no conjugate partner
        with pytest.raises(SymbolError):
            inverse_transform(SpectralField(spec, c))

    def test_forward_is_unnormalized(self):
        spec = GridSpec(1, 32)
        c = forward_transform(GridFunction.constant(spec, 1.0)).coefficients
        assert c[0] == pytest.approx(32.0)


def _cos_symbol(xi, r):
    return np.cos(r) + 2.0


def _pow_symbol(xi, r):
    return r**0.7


class TestMultipliers:
    @pytest.mark.parametrize("n,N", [(1, 128), (2, 32)])
    def test_composition_is_pointwise_product(self, n, N):
        spec = GridSpec(n, N)
        a = Multiplier(_cos_symbol, at_zero=3.0, name="a")
        b = Multiplier(_pow_symbol, at_zero=0.0, name="b")
        for seed in range(10):
            f = random_trig(spec, N // 2, seed)
            twice = apply_multiplier(apply_multiplier(f, a), b).values
            once = apply_multiplier(f, a @ b).values
            assert np.linalg.norm(twice - once) <= 1e-12 * np.linalg.norm(once)

    def test_at_zero_is_used(self):
        spec = GridSpec(1, 16)
        m = Multiplier(lambda xi, r: 1.0 / r, at_zero=5.0)
        out = apply_multiplier(GridFunction.constant(spec, 1.0), m)
        np.testing.assert_allclose(out.values, 5.0)

    def test_nonfinite_symbol_rejected(self):
        m = Multiplier(lambda xi, r: np.where(r > 2, np.inf, 1.0))
        with pytest.raises(SymbolError):
            m.on_lattice(GridSpec(1, 16))

    def test_odd_symbol_zeroes_nyquist(self):
        spec = GridSpec(1, 16)
        m = Multiplier(lambda xi, r: 1j * xi[0], odd=True)
        assert m.on_lattice(spec)[8] == 0

    def test_derivative_of_sine(self):
        spec = GridSpec(1, 64, 2 * math.pi)
        (x,) = spec.coordinates()
        f = GridFunction(spec, np.sin(3 * x))
        np.testing.assert_allclose(differentiate(f, 0).values, 3 * np.cos(3 * x), atol=1e-12)

    def test_gradient_matches_differentiate(self, spec2):
        f = random_trig(spec2, 8, 5)
        for axis, g in enumerate(gradient(f)):
            np.testing.assert_allclose(g.values, differentiate(f, axis).values, atol=1e-13)

    def test_deterministic(self, spec2):
        f = random_trig(spec2, 8, 6)
        m = Multiplier(_pow_symbol)
        assert apply_multiplier(f, m).values.tobytes() == apply_multiplier(f, m).values.tobytes()


class TestDealiasedProduct:
    @pytest.mark.parametrize("n,N,bf,bg", [(1, 64, 10, 22), (1, 256, 64, 64), (2, 32, 8, 8), (2, 16, 3, 5)])
    def test_exact_without_aliasing(self, n, N, bf, bg):
        spec = GridSpec(n, N)
        f, g = random_trig(spec, bf, 1), random_trig(spec, bg, 2)
        out = dealiased_product(f, g).values
        np.testing.assert_allclose(out, f.values * g.values, atol=1e-13)

    def test_drops_aliased_modes(self):
        spec = GridSpec(1, 16, 2 * math.pi)
        (x,) = spec.coordinates()
        f = GridFunction(spec, np.cos(6 * x))
        # cos^2(6x) = (1 + cos 12x)/2 and mode 12 is beyond the grid
        np.testing.assert_allclose(dealiased_product(f, f).values, 0.5, atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_bilinear(self, seed, a, b):
        spec = GridSpec(1, 64)
        f, g, h = (random_trig(spec, 30, seed + k) for k in range(3))
        lhs = dealiased_product(f * a + g * b, h).values
        rhs = a * dealiased_product(f, h).values + b * dealiased_product(g, h).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


class TestDumpFormat:
    @pytest.mark.parametrize("n,N", [(1, 64), (2, 16)])
    def test_binary_roundtrip(self, tmp_path, n, N):
        f = random_trig(GridSpec(n, N, 3.5), N // 2, 4)
        bin_path, json_path = write_gridfunction(f, tmp_path / "f")
        assert bin_path.stat().st_size == 8 * N**n
        assert set(__import__("json").loads(json_path.read_text())) == {"n", "N", "L", "mean", "checksum"}
        g = read_gridfunction(bin_path)
        assert g.spec == f.spec
        assert g.values.tobytes() == f.values.tobytes()

    def test_little_endian_row_major(self, tmp_path):
        spec = GridSpec(2, 8)
        v = np.arange(64, dtype=float).reshape(8, 8)
        write_gridfunction(GridFunction(spec, v), tmp_path / "f.bin")
        raw = np.frombuffer((tmp_path / "f.bin").read_bytes(), dtype="<f8")
        np.testing.assert_array_equal(raw, np.arange(64))

    def test_checksum_detects_corruption(self, tmp_path):
        f = random_trig(GridSpec(1, 32), 8, 0)
        bin_path, _ = write_gridfunction(f, tmp_path / "f")
        raw = bytearray(bin_path.read_bytes())
        raw[5] ^= 0xFF
        bin_path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="checksum"):
            read_gridfunction(bin_path)

    def test_csv_roundtrip(self, tmp_path):
        f = random_trig(GridSpec(1, 32, 2.0), 10, 0)
        path = write_csv(f, tmp_path / "f.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "x,value"
        assert len(lines) == 33
        g = read_csv(path, 2.0)
        assert g.values.tobytes() == f.values.tobytes()

    def test_csv_only_1d(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(GridFunction.zeros(GridSpec(2, 8)), tmp_path / "f.csv")
