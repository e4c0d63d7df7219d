"""Poisson extensions, t-grid quadrature, cones, balls and the dump format."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_trig
from hx.errors import ExponentRangeError, TailToleranceError
from hx.extension import (
    TGrid,
    ball_mean,
    bulk_integral,
    cone_maximal,
    dump_extension,
    extend,
    neumann_trace,
    pde_residual,
    poisson_vs_ball_mean,
    profile_for,
    reflected_extension,
)
from hx.norms import maximal_function
from hx.operators import fractional_laplacian
from hx.spectral import GridFunction, GridSpec, differentiate, read_gridfunction


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b))


class TestTGrid:
    def test_default(self):
        spec = GridSpec(1, 1024)
        tg = TGrid.default(spec)
        assert tg.t_min == pytest.approx(spec.L / 2048)
        assert tg.t_max == pytest.approx(math.log(1e8))
        assert tg.M == 96

    def test_resolving_lowers_t_min(self):
        spec = GridSpec(2, 128)
        tg = TGrid.resolving(spec, band=32)
        assert tg.t_min == pytest.approx(0.02 / 32)
        assert TGrid.resolving(spec, band=1).t_min <= TGrid.default(spec).t_min
        assert TGrid.resolving(spec, band=1, fraction=1.0).t_min == TGrid.default(spec).t_min

    @pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, 0.5), (0.1, 1.0, 3)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            TGrid(*args)

    def test_levels_geometric(self):
        tg = TGrid(1e-3, 10.0, 40)
        t = tg.levels
        assert t[0] == pytest.approx(1e-3) and t[-1] == pytest.approx(10.0)
        np.testing.assert_allclose(t[1:] / t[:-1], tg.ratio)

    def test_weights_exact_for_constants(self):
        tg = TGrid(1e-3, 20.0, 50)
        assert tg.weights.sum() == pytest.approx(20.0 - 1e-3, rel=1e-13)

    @pytest.mark.parametrize("M,tol", [(48, 1e-5), (96, 1e-7), (192, 1e-9)])
    def test_exponential_integral(self, M, tol):
        tg = TGrid(1e-4, 40.0, M)
        got = tg.integrate(np.exp(-tg.levels)).value
        assert abs(got - (1 - math.exp(-40.0))) < tol

    def test_quadrature_order(self):
        errs = []
        for M in (96, 192, 384):
            tg = TGrid(1e-4, 40.0, M)
            errs.append(abs(tg.integrate(np.exp(-tg.levels)).value - 1))
        rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(rates) > 5

    @pytest.mark.parametrize("beta", [-0.5, 0.0, 0.7, 2.0])
    def test_left_segment_power(self, beta):
        tg = TGrid(1e-3, 10.0, 40)
        g = tg.levels**beta
        expected = 1e-3 ** (beta + 1) / (beta + 1)
        assert tg.left_segment(g) == pytest.approx(expected, rel=1e-10)

    def test_left_segment_zero(self):
        tg = TGrid(1e-3, 10.0, 40)
        assert tg.left_segment(np.zeros(40)) == 0.0

    def test_cell_edges(self):
        tg = TGrid(1e-2, 1.0, 10)
        e = tg.cell_edges
        assert e[0] == 0.0 and len(e) == 11
        assert np.all((e[:-1] < tg.levels) & (tg.levels < e[1:]))

    def test_integrate_shape_check(self):
        with pytest.raises(ValueError):
            TGrid(1e-2, 1.0, 10).integrate(np.ones(9))


class TestExtend:
    @pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
    def test_trace_approach_rate(self, spec1, s):
        # F(., t) - f is O(t^s) for s < 2
        f = random_trig(spec1, 8, 0, zero_mean=True)
        base = TGrid.default(spec1)
        errs = [_rel(extend(f, s, TGrid(base.t_min / 4**k, base.t_max)).value(0).values, f.values)
                for k in range(3)]
        for a, b in zip(errs, errs[1:]):
            assert a / b == pytest.approx(4**s, rel=0.15)

    def test_s1_is_exponential_multiplier(self, spec2):
        f = random_trig(spec2, 8, 1)
        E = extend(f, 1.0)
        for j in (0, 30, 60):
            t = E.levels[j]
            expected = np.fft.ifftn(np.fft.fftn(f.values) * np.exp(-t * spec2.xi_norm())).real
            np.testing.assert_allclose(E.value(j).values, expected, atol=1e-12)

    def test_semigroup_s1(self, spec1):
        # ratio-2 grid, so t_0 + t_0 = t_1
        tg = TGrid(0.05, 0.05 * 2**14, 15)
        f = random_trig(spec1, 20, 2)
        E = extend(f, 1.0, tg)
        twice = extend(E.value(0), 1.0, tg).value(0)
        assert _rel(twice.values, E.value(1).values) <= 1e-12

    def test_constant_is_preserved(self, spec1):
        E = extend(GridFunction.constant(spec1, 2.5), 0.7)
        for j in (0, E.M - 1):
            np.testing.assert_allclose(E.value(j).values, 2.5, rtol=1e-14)

    @pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
    def test_pde_residual(self, spec2, s):
        assert pde_residual(extend(random_trig(spec2, 8, 3), s)) < 1e-8

    def test_pde_residual_zero(self, spec1):
        assert pde_residual(extend(GridFunction.zeros(spec1), 0.5)) == 0.0

    def test_dt_matches_profile_difference(self, spec1):
        f = random_trig(spec1, 8, 4)
        E = extend(f, 0.6)
        j, t = 40, E.levels[40]
        h = 1e-6 * t
        p = profile_for(0.6)
        c = np.fft.fftn(f.values)
        r = spec1.xi_norm()
        fd = np.fft.ifftn(c * (p(r * (t + h)) - p(r * (t - h))) / (2 * h)).real
        np.testing.assert_allclose(E.dt(j).values, fd, atol=1e-6)

    def test_x_derivatives_are_spectral(self, spec2):
        f = random_trig(spec2, 8, 5)
        E = extend(f, 1.0)
        j = 10
        np.testing.assert_allclose(E.dx(j, 1).values, differentiate(E.value(j), 1).values, atol=1e-12)
        np.testing.assert_allclose(E.dxx(j, 0, 1).values,
                                   differentiate(differentiate(E.value(j), 0), 1).values, atol=1e-12)
        assert len(E.grad(j)) == 3
        assert len(E.hessian_entries(j)) == 6

    def test_dtt_solves_pde(self, spec1):
        E = extend(random_trig(spec1, 8, 6), 1.0)
        j = 20
        lap = fractional_laplacian(E.value(j), 2.0).values
        np.testing.assert_allclose(E.dtt(j).values, lap, atol=1e-12)

    @pytest.mark.parametrize("s", [0.0, 2.0])
    def test_order_range(self, spec1, s):
        with pytest.raises(ExponentRangeError):
            extend(GridFunction.zeros(spec1), s)

    def test_tail_guard(self, spec1):
        f = random_trig(spec1, 8, 0)
        with pytest.raises(TailToleranceError):
            extend(f, 1.0, TGrid(1e-3, 1.0, 20))

    def test_tail_below_tolerance_at_t_max(self, spec2):
        # decay to t_max: zero-mean data has gradients below the tail tolerance there
        E = extend(random_trig(spec2, 8, 7, zero_mean=True), 1.0)
        top = max(np.abs(g.values).max() for g in E.grad(E.M - 1))
        assert top < 1e-6

    def test_thread_shared_cache(self, spec1):
        from concurrent.futures import ThreadPoolExecutor

        E = extend(random_trig(spec1, 8, 8), 0.5)
        with ThreadPoolExecutor(4) as pool:
            out = list(pool.map(lambda j: E.dt(j).values.tobytes(), [5] * 8))
        assert len(set(out)) == 1


class TestNeumannTrace:
    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_recovers_fractional_laplacian(self, s):
        spec = GridSpec(1, 1024)
        (x,) = spec.coordinates()
        f = GridFunction(spec, np.cos(x) + 0.3 * np.sin(4 * x))
        E = extend(f, s)
        assert _rel(neumann_trace(E).values, fractional_laplacian(f, s).values) < 1e-2

    def test_rejects_s_above_one(self, spec1):
        with pytest.raises(ExponentRangeError):
            neumann_trace(extend(random_trig(spec1, 4, 0), 1.5))


class TestBulkIntegral:
    def test_scalar_and_slice_agree(self, spec1):
        tg = TGrid.default(spec1)
        E = extend(random_trig(spec1, 8, 1, zero_mean=True), 1.0)
        a = bulk_integral(lambda j: E.dt(j) * E.dt(j), tg)
        b = bulk_integral(lambda j: float(np.sum(E.dt(j).values ** 2) * spec1.cell_volume), tg)
        assert a.value == b.value
        assert a.value == pytest.approx(a.body + a.left)

    def test_dirichlet_energy(self):
        # int int |grad F|^2 = int f Lap^{1/2} f for s = 1, single mode
        spec = GridSpec(1, 256)
        (x,) = spec.coordinates()
        f = GridFunction(spec, np.cos(3 * x))
        tg = TGrid.default(spec)
        E = extend(f, 1.0, tg)
        got = bulk_integral(lambda j: E.dt(j) * E.dt(j) + E.dx(j, 0) * E.dx(j, 0), tg).value
        assert got == pytest.approx(3 * math.pi, rel=1e-6)

    def test_tail_guard(self, spec1):
        tg = TGrid(1e-3, 1.0, 20)
        with pytest.raises(TailToleranceError):
            bulk_integral(lambda j: 1.0, tg)


class TestBallsAndCones:
    def test_ball_mean_constant(self, spec2):
        out = ball_mean(GridFunction.constant(spec2, 1.5), spec2, 0.8)
        np.testing.assert_allclose(out, 1.5, rtol=1e-14)

    def test_poisson_vs_ball_mean_bounds(self, spec1):
        f = random_trig(spec1, 16, 0)
        d = poisson_vs_ball_mean(f, spec1.L / 16)
        assert 0 < d <= 2 * np.abs(f.values).max()
        with pytest.raises(ValueError):
            poisson_vs_ball_mean(f, spec1.L)

    @pytest.mark.parametrize("n,N", [(1, 256), (2, 32)])
    def test_cone_maximal_bounded_by_maximal_function(self, n, N):
        spec = GridSpec(n, N)
        worst = 0.0
        for seed in range(20):
            f = random_trig(spec, N // 8, seed)
            cone = cone_maximal(extend(f, 1.0)).values
            mf = maximal_function(f).values
            assert np.all(cone >= np.abs(extend(f, 1.0).value(0).values) - 1e-14)
            worst = max(worst, float((cone / mf).max()))
        assert np.isfinite(worst) and worst < 20

    def test_reflected_even(self, spec1):
        tg = TGrid.default(spec1, 24)
        R = reflected_extension(random_trig(spec1, 8, 0), tg)
        np.testing.assert_array_equal(R.values, R.values[::-1])
        np.testing.assert_allclose(R.heights, -R.heights[::-1])
        assert len(R.edges) == len(R.heights) + 1


class TestDump:
    def test_manifest(self, tmp_path, spec1):
        f = random_trig(spec1, 8, 0)
        E = extend(f, 0.5, TGrid.default(spec1, 8))
        path = dump_extension(E, tmp_path / "ext")
        manifest = json.loads(path.read_text())
        assert set(manifest) == {"s", "tgrid", "files"}
        assert manifest["s"] == 0.5 and len(manifest["files"]) == 8
        level = read_gridfunction(tmp_path / "ext" / manifest["files"][3])
        assert level.values.tobytes() == E.value(3).values.tobytes()


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 1.9), st.integers(0, 1000))
def test_extension_is_linear(s, seed):
    spec = GridSpec(1, 64)
    f, g = random_trig(spec, 8, seed), random_trig(spec, 8, seed + 1)
    tg = TGrid.default(spec, 12)
    a = extend(f + g * 2.0, s, tg).value(5).values
    b = extend(f, s, tg).value(5).values + 2.0 * extend(g, s, tg).value(5).values
    np.testing.assert_allclose(a, b, atol=1e-12)
