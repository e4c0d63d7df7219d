"""Test-function generation, identity, ratio and trace suites, and the CLI."""

from hx.harness.config import ESTIMATE_SUITES, TrialConfig, default_config
from hx.harness.estimates import EstimateSuite, get_suite, run_estimate
from hx.harness.generators import generate_test_function, trial_seed
from hx.harness.identities import run_identity_suite
from hx.harness.report import EstimateReport, emit_report, load_report
from hx.harness.trace import run_trace_equivalence

__all__ = [
    "ESTIMATE_SUITES",
    "TrialConfig",
    "default_config",
    "EstimateSuite",
    "get_suite",
    "run_estimate",
    "run_identity_suite",
    "run_trace_equivalence",
    "generate_test_function",
    "trial_seed",
    "EstimateReport",
    "emit_report",
    "load_report",
]
