"""Command line entry point ``hx``.

Exit status is 0 when every asserted tolerance passes, 1 when a check
fails, and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from hx.errors import HxError
from hx.extension import TGrid, dump_extension, extend
from hx.harness.config import ESTIMATE_SUITES, TrialConfig, default_config
from hx.harness.estimates import run_estimate
from hx.harness.identities import run_identity_suite
from hx.harness.report import emit_report
from hx.harness.trace import run_trace_equivalence
from hx.spectral import read_gridfunction


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hx", description="Extension-method commutator estimates on the torus.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the identity or trace-equivalence suite")
    v.add_argument("--suite", choices=("identities", "trace"), required=True)
    v.add_argument("--n", type=int, choices=(1, 2), default=1)
    v.add_argument("--grid", type=int, default=None, help="points per axis")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--kind", default=None, help="generator kind")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out", required=True)
    v.add_argument("--csv", default=None, help="optional ratio table")

    e = sub.add_parser("estimate", help="run one inequality suite")
    e.add_argument("suite", choices=sorted(ESTIMATE_SUITES))
    e.add_argument("--params", default=None, help="JSON file with TrialConfig fields")
    e.add_argument("--variant", default=None)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--no-refine", action="store_true", help="skip the N -> 2N run")
    e.add_argument("--out", required=True)
    e.add_argument("--csv", default=None)

    x = sub.add_parser("extend", help="write the extension of a stored grid function")
    x.add_argument("--in", dest="source", required=True)
    x.add_argument("--s", type=float, required=True)
    x.add_argument("--M", type=int, default=96)
    x.add_argument("--out", required=True)
    return p


def _overrides(**kw):
    return {k: v for k, v in kw.items() if v is not None}


def _verify(args) -> int:
    cfg = default_config(args.suite, n=args.n,
                         **_overrides(N=args.grid, seed=args.seed, trials=args.trials, kind=args.kind))
    if args.suite == "identities":
        report = run_identity_suite(cfg)
    else:
        report = run_trace_equivalence(cfg, workers=args.workers)
    emit_report(report, args.out, args.csv)
    for rec in report.identities:
        print(f"{'PASS' if rec.passed else 'FAIL'}  {rec.name}  residual={rec.residual:.3e}  tol={rec.tolerance:g}")
    return 0 if report.passed else 1


def _estimate(args) -> int:
    data = {}
    if args.params:
        try:
            data = json.loads(Path(args.params).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise HxError(f"cannot read parameters {args.params}: {exc}") from exc
    data.pop("suite", None)
    data.update(_overrides(variant=args.variant, trials=args.trials, seed=args.seed))
    n = data.pop("n", None)
    cfg = default_config(args.suite, n=n, **data)
    report = run_estimate(cfg, workers=args.workers, refine=not args.no_refine)
    emit_report(report, args.out, args.csv)
    agg = report.aggregate
    print(f"{report.suite}: {agg['count']} trials, max ratio {agg['max']:.4g}, "
          f"median {agg['median']:.4g}, stability {agg['stability']:.3g}, excluded {report.excluded}")
    for rec in report.identities:
        print(f"{'PASS' if rec.passed else 'FAIL'}  {rec.name}  residual={rec.residual:.3e}  tol={rec.tolerance:g}")
    return 0 if report.passed else 1


def _extend(args) -> int:
    f = read_gridfunction(args.source)
    E = extend(f, args.s, TGrid.default(f.spec, args.M))
    manifest = dump_extension(E, args.out)
    print(f"wrote {E.M} levels to {manifest.parent}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _verify(args)
        if args.command == "estimate":
            return _estimate(args)
        return _extend(args)
    except (HxError, ValueError, OSError) as exc:
        print(f"hx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
