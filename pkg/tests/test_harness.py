"""Configs, generators, ratio suites, reports and the command line."""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hx.errors import ConfigError
from hx.harness import (
    ESTIMATE_SUITES,
    EstimateReport,
    TrialConfig,
    default_config,
    emit_report,
    generate_test_function,
    get_suite,
    load_report,
    run_estimate,
    run_identity_suite,
    run_trace_equivalence,
    trial_seed,
)
from hx.harness.cli import main
from hx.harness.config import GENERATOR_KINDS, TRACE_CHARACTERIZATIONS, derived_exponents
from hx.harness.estimates import trial_ratio
from hx.harness.generators import band_mask
from hx.harness.report import IdentityRecord, TrialRecord
from hx.harness.trace import characterization
from hx.spectral import GridFunction, GridSpec, write_gridfunction


class TestConfig:
    def test_defaults(self):
        cfg = default_config("crw")
        assert (cfg.n, cfg.N, cfg.trials, cfg.variant, cfg.band) == (1, 512, 100, "bmo", 128)
        assert default_config("jacobian").n == 2
        assert default_config("jacobian").trials == 20
        assert default_config("trace", n=2).N == 32
        assert default_config("identities", n=2).N == 128

    @pytest.mark.parametrize("kwargs", [
        {"suite": "nope"},
        {"suite": "crw", "variant": "holder"},
        {"suite": "crw", "exponents": {"p": 1.0}},
        {"suite": "crw", "n": 3},
        {"suite": "crw", "N": 7},
        {"suite": "crw", "kind": "noise"},
        {"suite": "crw", "band": 0},
        {"suite": "crw", "N": 64, "band": 32},
        {"suite": "crw", "exponents": {"i": 1}},
        {"suite": "chanillo", "exponents": {"sigma": 0.5, "p": 2.5}},
        {"suite": "chanillo", "exponents": {"q": 3.0}},
        {"suite": "cmcim", "variant": "holder", "exponents": {"sigma": 0.2}},
        {"suite": "cmcim", "variant": "intermediate", "exponents": {"q1": 3.0}},
        {"suite": "leibniz", "variant": "intermediate", "exponents": {"tau": 0.6}},
        {"suite": "leibniz", "variant": "intermediate", "exponents": {"p1": 3.0}},
        {"suite": "dalio", "exponents": {"s": 1.2}},
        {"suite": "jacobian", "n": 1},
        {"suite": "jacobian", "n": 2, "variant": "intermediate", "exponents": {"s": [0.5, 0.5, 0.5]}},
        {"suite": "jacobian", "n": 2, "variant": "intermediate", "exponents": {"p": [2.0, 3.0, 3.0]}},
        {"suite": "divcurl", "n": 2, "exponents": {"p1": 3.0}},
        {"suite": "double", "exponents": {"s1": 0.3, "s2": 0.3}},
        {"suite": "double", "n": 2},
        {"suite": "trace", "variant": "sobolev_dx,bogus"},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            TrialConfig(**kwargs)

    def test_derived_exponents(self):
        assert default_config("chanillo").derived["q"] == pytest.approx(1 / (0.5 - 0.3))
        d = default_config("double", exponents={"s1": 0.25, "p": 4.0, "q": "inf"}).derived
        assert d["s2"] == 0.75 and d["p_conj"] == pytest.approx(4 / 3) and d["q_conj"] == 1.0
        assert derived_exponents("dalio", "bmo", {"s": 0.5, "p": 2.0, "q": 1.0}, 1)["q_conj"] == math.inf

    def test_json_roundtrip(self, tmp_path):
        cfg = default_config("leibniz", variant="intermediate", trials=7, seed=3)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert TrialConfig.from_json(path) == cfg

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="unknown"):
            TrialConfig.from_dict({"suite": "crw", "colour": "red"})
        with pytest.raises(ConfigError):
            TrialConfig.from_dict({"n": 1})

    def test_unreadable_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(ConfigError):
            TrialConfig.from_json(bad)

    def test_refined(self):
        cfg = default_config("crw", N=128)
        fine = cfg.refined()
        assert fine.N == 256 and fine.band == cfg.band
        assert fine.tgrid() == cfg.tgrid()

    def test_trace_variants(self):
        cfg = default_config("trace")
        assert cfg.variant.split(",") == list(TRACE_CHARACTERIZATIONS)


class TestGenerators:
    @pytest.mark.parametrize("kind", [k for k in GENERATOR_KINDS if k != "zero"])
    @pytest.mark.parametrize("n,N", [(1, 256), (2, 32)])
    def test_deterministic(self, kind, n, N):
        cfg = TrialConfig("crw", n=n, N=N, kind=kind, band=N // 8)
        a = generate_test_function(cfg, 0, 5)
        b = generate_test_function(cfg, 0, 5)
        assert a.values.tobytes() == b.values.tobytes()
        assert a.values.tobytes() != generate_test_function(cfg, 1, 5).values.tobytes()
        assert a.values.tobytes() != generate_test_function(cfg, 0, 6).values.tobytes()
        assert a.values.tobytes() != generate_test_function(cfg.replace(seed=1), 0, 5).values.tobytes()

    @pytest.mark.parametrize("kind", ["trig", "bump", "modulated"])
    def test_band_limited(self, kind):
        cfg = TrialConfig("crw", N=256, kind=kind, band=20)
        f = generate_test_function(cfg, 0, 0)
        c = np.abs(np.fft.fftn(f.values))
        outside = c[~band_mask(f.spec, 20)]
        # exactly zero up to the rounding of the inverse transform
        assert outside.max() <= 1e-13 * c.max()

    @pytest.mark.parametrize("kind", ["trig", "bump", "modulated"])
    @pytest.mark.parametrize("n,N", [(1, 128), (2, 32)])
    def test_zero_mean(self, kind, n, N):
        cfg = TrialConfig("crw", n=n, N=N, kind=kind)
        assert abs(generate_test_function(cfg, 0, 3, zero_mean=True).mean) < 1e-14

    def test_independent_of_grid(self):
        cfg = TrialConfig("crw", N=64, band=8)
        coarse = generate_test_function(cfg, 0, 2)
        fine = generate_test_function(cfg, 0, 2, GridSpec(1, 128))
        np.testing.assert_allclose(fine.values[::2], coarse.values, atol=1e-14)

    def test_zero_kind(self):
        f = generate_test_function(TrialConfig("crw", N=64, kind="zero"), 0, 0)
        assert not np.any(f.values)

    def test_sup_bounded(self):
        cfg = TrialConfig("crw", N=128)
        for t in range(10):
            assert np.abs(generate_test_function(cfg, 0, t).values).max() <= 1 + 1e-12

    def test_grid_checks(self):
        cfg = TrialConfig("crw", N=64, band=16)
        with pytest.raises(ValueError):
            generate_test_function(cfg, 0, 0, GridSpec(1, 32))
        with pytest.raises(ValueError):
            generate_test_function(cfg, 0, 0, GridSpec(2, 64))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32), st.integers(0, 10**6))
    def test_trial_seed_is_64_bit(self, seed, trial):
        s = trial_seed(TrialConfig("crw", N=16, seed=seed), trial)
        assert 0 <= s < 2**64


class TestEstimates:
    def test_trial_ratio(self):
        assert trial_ratio(0.0, 0.0, 1.0) == 0.0
        assert trial_ratio(1.0, 0.0, 1.0) is None
        assert trial_ratio(1.0, 4.0, 1.0) == 0.25

    def test_crw_constant_phi(self):
        cfg = default_config("crw", N=128, trials=1)
        suite = get_suite(cfg)
        phi, g = suite.inputs(cfg, 0)
        lhs, rhs = suite.evaluate([GridFunction.constant(cfg.spec, 1.7), g])
        assert lhs <= 1e-12 and rhs == 0.0
        assert trial_ratio(lhs, rhs, 1.7 * np.abs(g.values).max()) == 0.0

    @pytest.mark.parametrize("suite,variant", [(s, v) for s, vs in ESTIMATE_SUITES.items() for v in vs])
    def test_degrees_match(self, suite, variant):
        s = get_suite(default_config(suite, variant=variant))
        assert s.lhs_degree == s.rhs_degree
        assert len(s.roles) == len(s.mean_free)

    def test_zero_kind_excludes_everything(self):
        report = run_estimate(default_config("crw", N=64, trials=4, kind="zero"))
        assert report.aggregate["count"] == 0
        assert report.passed

    def test_report_contents(self):
        cfg = default_config("cmcim", N=64, trials=8)
        report = run_estimate(cfg)
        assert report.suite == "cmcim/lip"
        assert [r.name for r in report.identities] == ["ratios_finite", "refinement_stability", "homogeneity"]
        assert report.aggregate["count"] + report.excluded == 8
        assert all(t.seed == trial_seed(cfg, t.trial) for t in report.trials)

    def test_no_refine(self):
        report = run_estimate(default_config("crw", N=64, trials=4), refine=False)
        assert "refinement_stability" not in [r.name for r in report.identities]

    @pytest.mark.parametrize("kind", ["bump", "modulated"])
    def test_other_kinds_run(self, kind):
        report = run_estimate(default_config("leibniz", N=128, trials=10, kind=kind))
        assert report.passed

    def test_parallel_matches_serial(self):
        cfg = default_config("dalio", N=128, trials=12)
        assert run_estimate(cfg, workers=1).to_json() == run_estimate(cfg, workers=3).to_json()


class TestTraceAndIdentities:
    def test_characterization_lookup(self):
        with pytest.raises(KeyError):
            characterization("nope")

    def test_small_trace_run(self):
        cfg = default_config("trace", N=128, band=16, trials=5, variant="sobolev_dx,carleson,maximal")
        report = run_trace_equivalence(cfg)
        assert [s["name"] for s in report.sections] == ["sobolev_dx", "carleson", "maximal"]
        assert len(report.identities) == 6
        assert report.passed

    @pytest.mark.parametrize("kind", ["bump", "modulated"])
    def test_trace_other_kinds(self, kind):
        cfg = default_config("trace", N=256, trials=6, kind=kind, variant="sobolev_dt,square_dx,holder")
        assert run_trace_equivalence(cfg).passed

    def test_identities_zero_kind(self):
        report = run_identity_suite(default_config("identities", N=128, trials=3, kind="zero"))
        assert report.passed
        assert all(r.residual == 0.0 for r in report.identities)

    def test_identities_small(self):
        report = run_identity_suite(default_config("identities", N=1024, trials=5), refine=False)
        names = {r.name for r in report.identities}
        assert {"laplacian_cosine", "h2_leibniz", "double_minus_bulk", "profile_ode"} <= names
        assert report.passed, [(r.name, r.residual) for r in report.identities if not r.passed]


class TestReport:
    def test_empty_report(self):
        report = EstimateReport("crw/bmo")
        data = json.loads(report.to_json())
        assert data["trials"] == [] and data["identities"] == [] and data["passed"] is True
        assert set(data) >= {"suite", "config", "trials", "aggregate", "identities"}

    def test_nonfinite_encoding(self, tmp_path):
        report = EstimateReport("x", aggregate={"max": math.inf, "m": math.nan},
                                trials=[TrialRecord(0, 1, 1.0, 0.0, math.inf)],
                                identities=[IdentityRecord("a", math.inf, 1.0, False)])
        text = report.to_json()
        assert "Infinity" not in text and "NaN" not in text
        back = EstimateReport.from_dict(json.loads(text))
        assert back.aggregate["max"] == math.inf and math.isnan(back.aggregate["m"])
        assert back.trials[0].ratio == math.inf
        assert not back.passed

    def test_roundtrip_and_csv(self, tmp_path):
        report = run_estimate(default_config("crw", N=64, trials=5), refine=False)
        path = emit_report(report, tmp_path / "out" / "r.json", tmp_path / "r.csv")
        back = load_report(path)
        assert back.to_json() == report.to_json()
        with open(tmp_path / "r.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["trial", "seed", "lhs", "rhs", "ratio"]
        assert len(rows) == 1 + len(report.trials)
        assert float(rows[1][4]) == report.trials[0].ratio

    def test_schema(self):
        data = json.loads(run_estimate(default_config("crw", N=64, trials=3)).to_json())
        assert {"seed", "lhs", "rhs", "ratio"} <= set(data["trials"][0])
        assert {"max", "median", "stability"} <= set(data["aggregate"])
        assert {"name", "residual", "tolerance", "pass"} <= set(data["identities"][0])
        assert set(data["metadata"]) == {"hx", "python", "numpy", "scipy"}


class TestCLI:
    def test_estimate(self, tmp_path, capsys):
        params = tmp_path / "p.json"
        params.write_text(json.dumps({"N": 64, "exponents": {"p": 3.0}}))
        out = tmp_path / "r.json"
        code = main(["estimate", "crw", "--params", str(params), "--trials", "4", "--seed", "2",
                     "--out", str(out), "--csv", str(tmp_path / "r.csv")])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["config"]["exponents"]["p"] == 3.0 and data["config"]["seed"] == 2
        assert "crw/bmo" in capsys.readouterr().out

    def test_estimate_bad_params(self, tmp_path, capsys):
        params = tmp_path / "p.json"
        params.write_text(json.dumps({"n": 2, "variant": "intermediate", "exponents": {"s": [0.1, 0.1, 0.1]}}))
        code = main(["estimate", "jacobian", "--params", str(params), "--out", str(tmp_path / "r.json")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_estimate_missing_params(self, tmp_path):
        assert main(["estimate", "crw", "--params", str(tmp_path / "none.json"), "--out", "x.json"]) == 2

    def test_failing_check_exits_1(self, tmp_path):
        params = tmp_path / "p.json"
        params.write_text(json.dumps({"N": 64, "stability_tol": 0.0}))
        assert main(["estimate", "crw", "--params", str(params), "--trials", "4",
                     "--out", str(tmp_path / "r.json")]) == 1

    def test_verify_identities(self, tmp_path):
        out = tmp_path / "v.json"
        code = main(["verify", "--suite", "identities", "--n", "1", "--grid", "1024", "--trials", "3",
                     "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["suite"] == "identities"

    def test_verify_bad_grid(self, tmp_path):
        assert main(["verify", "--suite", "trace", "--grid", "100", "--out", str(tmp_path / "v.json")]) == 2

    def test_extend(self, tmp_path):
        spec = GridSpec(1, 64)
        (x,) = spec.coordinates()
        write_gridfunction(GridFunction(spec, np.cos(x)), tmp_path / "f")
        code = main(["extend", "--in", str(tmp_path / "f.bin"), "--s", "0.5", "--M", "8",
                     "--out", str(tmp_path / "ext")])
        assert code == 0
        manifest = json.loads((tmp_path / "ext" / "manifest.json").read_text())
        assert len(manifest["files"]) == 8

    def test_extend_bad_order(self, tmp_path):
        write_gridfunction(GridFunction.zeros(GridSpec(1, 16)), tmp_path / "f")
        assert main(["extend", "--in", str(tmp_path / "f.bin"), "--s", "3", "--out", str(tmp_path / "e")]) == 2

    def test_console_script(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run([sys.executable, "-m", "hx.harness.cli", "estimate", "chanillo", "--trials", "3",
                               "--no-refine", "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.exists()

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "unknown"])
        assert exc.value.code == 2
