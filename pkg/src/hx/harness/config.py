"""Trial configurations and exponent bookkeeping.

A :class:`TrialConfig` names a suite (and for multi-estimate suites a
variant), the grid, the t-grid, the exponent tuple and the test-function
family.  Exponent constraints are checked when the config is built, so a
config that exists is one that the suite can run.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from hx.errors import ConfigError
from hx.extension import TGrid
from hx.spectral import GridSpec

__all__ = [
    "TrialConfig",
    "ESTIMATE_SUITES",
    "GENERATOR_KINDS",
    "default_config",
    "derived_exponents",
]

GENERATOR_KINDS = ("trig", "bump", "modulated", "zero")

# suite -> variant -> default exponents; the first variant is the default one
ESTIMATE_SUITES: dict[str, dict[str, dict[str, Any]]] = {
    "crw": {"bmo": {"p": 2.0, "i": 0}},
    "chanillo": {"bmo": {"sigma": 0.3, "p": 2.0}},
    "cmcim": {
        "lip": {"s": 0.5, "p": 2.0},
        "holder": {"s": 0.5, "sigma": 0.7, "p": 2.0},
        "intermediate": {"s": 0.5, "sigma": 0.7, "p": 2.0, "q1": 4.0, "q2": 4.0},
        "riesz": {"sigma": 0.5, "p": 2.0, "i": 0},
        "riesz_intermediate": {"sigma": 0.5, "p": 2.0, "q1": 4.0, "q2": 4.0, "i": 0},
    },
    "leibniz": {
        "limit": {"s": 0.5, "p": 2.0},
        "intermediate": {"s": 0.5, "tau": 0.25, "p": 2.0, "q": 2.0,
                         "p1": 4.0, "p2": 4.0, "q1": 4.0, "q2": 4.0},
    },
    "dalio": {"bmo": {"s": 0.5, "p": 2.0, "q": 2.0}},
    "jacobian": {
        "bmo": {},
        "intermediate": {"s": [2 / 3, 2 / 3, 2 / 3], "p": [3.0, 3.0, 3.0]},
    },
    "divcurl": {
        "bmo": {"p1": 2.0, "p2": 2.0, "q1": 2.0, "q2": 2.0},
        "intermediate": {"s": [2 / 3, 2 / 3, 2 / 3], "p": [3.0, 3.0, 3.0], "q": [3.0, 3.0, 3.0]},
    },
    "double": {
        "minus": {"s1": 0.5, "p": 2.0, "q": 2.0},
        "plus": {"s1": 0.5, "p": 2.0, "q": 2.0},
    },
}

_DIMENSION = {"jacobian": (2,), "divcurl": (2,), "double": (1,), "crw": (1, 2), "chanillo": (1, 2),
              "cmcim": (1, 2), "leibniz": (1, 2), "dalio": (1, 2)}

# characterization -> (extension order s, exponents)
TRACE_CHARACTERIZATIONS: dict[str, dict[str, float]] = {
    "sobolev_dx": {"s": 1.0, "nu": 0.4, "p": 2.0},
    "sobolev_dt": {"s": 1.0, "nu": 0.4, "p": 2.0},
    "sobolev_dxx": {"s": 1.0, "nu": 0.4, "p": 2.0},
    "square_dt": {"s": 1.0, "nu": 0.3, "p": 2.0},
    "square_dx": {"s": 1.0, "nu": 0.3, "p": 2.0},
    "square_dxx": {"s": 1.0, "nu": 0.3, "p": 2.0},
    "carleson": {"s": 1.0},
    "reflected_bmo": {},
    "ball_mean": {},
    "holder": {"s": 1.0, "nu": 0.5},
    "maximal": {"s": 0.5},
}

_SPECIAL = ("identities", "trace")

_REL_TOL = 1e-9


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _REL_TOL * max(1.0, abs(a), abs(b))


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def _conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    return 1.0 if math.isinf(p) else p / (p - 1)


def _as_float(x) -> float:
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return math.inf
    return float(x)


def _need(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _p_open(name: str, p: float):
    _need(1 < p < math.inf, f"{name}={p} must lie in (1, inf)")


def _q_closed(name: str, q: float):
    _need(q >= 1, f"{name}={q} must lie in [1, inf]")


def derived_exponents(suite: str, variant: str, ex: dict[str, Any], n: int) -> dict[str, Any]:
    """Validate the exponent tuple of ``suite/variant`` and fill in dependent exponents.

    Raises ConfigError on any violated constraint.
    """
    e = {k: ([_as_float(v) for v in val] if isinstance(val, list) else
             (int(val) if k == "i" else _as_float(val))) for k, val in ex.items()}
    if "i" in e:
        _need(0 <= e["i"] < n, f"Riesz index i={e['i']} out of range for n={n}")

    if suite == "crw":
        _p_open("p", e["p"])
    elif suite == "chanillo":
        sigma, p = e["sigma"], e["p"]
        _need(0 < sigma < n, f"sigma={sigma} not in (0, {n})")
        _need(1 < p < n / sigma, f"p={p} must satisfy 1 < p < n/sigma = {n / sigma}")
        q = 1.0 / (1.0 / p - sigma / n)
        if "q" in e:
            _need(_close(_inv(e["q"]), 1.0 / p - sigma / n), f"q={e['q']} violates 1/q = 1/p - sigma/n")
        e["q"] = q
    elif suite == "cmcim":
        _p_open("p", e["p"])
        if variant in ("lip", "holder", "intermediate"):
            _need(0 < e["s"] <= 1, f"s={e['s']} not in (0, 1]")
        if variant == "holder":
            _need(e["s"] <= e["sigma"] < 1, f"sigma={e['sigma']} not in [s, 1)")
        if variant == "intermediate":
            _need(e["s"] <= e["sigma"] < 1, f"sigma={e['sigma']} not in [s, 1)")
        if variant == "riesz":
            _need(0 < e["sigma"] < 1, f"sigma={e['sigma']} not in (0, 1)")
        if variant == "riesz_intermediate":
            _need(0 <= e["sigma"] < 1, f"sigma={e['sigma']} not in [0, 1)")
        if variant in ("intermediate", "riesz_intermediate"):
            _p_open("q1", e["q1"])
            _p_open("q2", e["q2"])
            _need(_close(1 / e["q1"] + 1 / e["q2"], 1 / e["p"]), "need 1/q1 + 1/q2 = 1/p")
        if variant in ("lip", "holder", "intermediate", "riesz", "riesz_intermediate"):
            order = {"lip": 1 - e.get("s", 0.0), "riesz": e.get("sigma", 0.0),
                     "riesz_intermediate": e.get("sigma", 0.0)}.get(variant, e.get("sigma", 0.0) - e.get("s", 0.0))
            _need(0 <= order < n, f"Riesz potential order {order} not in [0, {n})")
    elif suite == "leibniz":
        _need(0 < e["s"] <= 1, f"s={e['s']} not in (0, 1]")
        _p_open("p", e["p"])
        if variant == "intermediate":
            _need(0 < e["tau"] < e["s"], f"tau={e['tau']} not in (0, s)")
            for k in ("p1", "p2"):
                _p_open(k, e[k])
            for k in ("q", "q1", "q2"):
                _q_closed(k, e[k])
            _need(_close(1 / e["p"], 1 / e["p1"] + 1 / e["p2"]), "need 1/p = 1/p1 + 1/p2")
            _need(_close(_inv(e["q"]), _inv(e["q1"]) + _inv(e["q2"])), "need 1/q = 1/q1 + 1/q2")
    elif suite == "dalio":
        _need(0 < e["s"] <= 1, f"s={e['s']} not in (0, 1]")
        _p_open("p", e["p"])
        _q_closed("q", e["q"])
        e["p_conj"] = _conjugate(e["p"])
        e["q_conj"] = _conjugate(e["q"])
    elif suite == "jacobian":
        if variant == "intermediate":
            s, p = e["s"], e["p"]
            _need(len(s) == n + 1 and len(p) == n + 1, f"need {n + 1} orders and exponents")
            _need(all(0 < x < 1 for x in s), f"orders {s} must lie in (0, 1)")
            _need(all(1 < x < math.inf for x in p), f"exponents {p} must lie in (1, inf)")
            _need(_close(sum(s), n), f"orders must sum to n={n}, got {sum(s)}")
            _need(_close(sum(1 / x for x in p), 1.0), "reciprocal exponents must sum to 1")
    elif suite == "divcurl":
        if variant == "bmo":
            for k in ("p1", "p2"):
                _p_open(k, e[k])
            for k in ("q1", "q2"):
                _q_closed(k, e[k])
            _need(_close(1 / e["p1"] + 1 / e["p2"], 1.0), "need 1/p1 + 1/p2 = 1")
            _need(_close(_inv(e["q1"]) + _inv(e["q2"]), 1.0), "need 1/q1 + 1/q2 = 1")
        else:
            s, p, q = e["s"], e["p"], e["q"]
            _need(len(s) == len(p) == len(q) == 3, "need three orders, p and q exponents")
            _need(all(0 < x < 1 for x in s), f"orders {s} must lie in (0, 1)")
            _need(_close(sum(s), 2.0), f"orders must sum to 2, got {sum(s)}")
            _need(all(1 < x < math.inf for x in p), f"exponents {p} must lie in (1, inf)")
            _need(all(x >= 1 for x in q), f"exponents {q} must lie in [1, inf]")
            _need(_close(sum(1 / x for x in p), 1.0), "reciprocal p exponents must sum to 1")
            _need(_close(sum(_inv(x) for x in q), 1.0), "reciprocal q exponents must sum to 1")
    elif suite == "double":
        s1 = e["s1"]
        _need(0 < s1 < 1, f"s1={s1} not in (0, 1)")
        if "s2" in e:
            _need(_close(s1 + e["s2"], 1.0), "need s1 + s2 = 1")
        e["s2"] = 1.0 - s1
        _p_open("p", e["p"])
        _q_closed("q", e["q"])
        e["p_conj"] = _conjugate(e["p"])
        e["q_conj"] = _conjugate(e["q"])
    return e


@dataclass(frozen=True)
class TrialConfig:
    """Everything needed to reproduce one suite run.

    ``t_min``/``t_max`` of ``None`` select the band-resolving default t-grid.
    ``band`` of ``None`` means ``N // 4``; the band is an absolute wavenumber,
    so the refined grid carries the same test functions.
    """

    suite: str
    n: int = 1
    N: int = 512
    L: float = 2 * math.pi
    variant: str = ""
    exponents: dict[str, Any] = field(default_factory=dict)
    t_min: float | None = None
    t_max: float | None = None
    M: int = 96
    trials: int = 100
    seed: int = 0
    kind: str = "trig"
    band: int | None = None
    zero_mean: bool = False
    stability_tol: float = 0.3
    ratio_ceiling: float = 50.0

    def __post_init__(self):
        _need(self.n in (1, 2), f"dimension n={self.n} not supported")
        _need(self.N >= 8 and self.N % 2 == 0, f"N={self.N} must be even and at least 8")
        _need(self.L > 0, "L must be positive")
        _need(self.trials >= 0, "trial count must be nonnegative")
        _need(self.kind in GENERATOR_KINDS, f"unknown generator kind {self.kind!r}")
        band = self.N // 4 if self.band is None else int(self.band)
        _need(1 <= band <= self.N // 4, f"band {band} must lie in [1, N/4]")
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "L", float(self.L))
        if self.suite in ESTIMATE_SUITES:
            variants = ESTIMATE_SUITES[self.suite]
            variant = self.variant or next(iter(variants))
            _need(variant in variants, f"suite {self.suite!r} has no variant {variant!r}")
            _need(self.n in _DIMENSION[self.suite], f"suite {self.suite!r} needs n in {_DIMENSION[self.suite]}")
            object.__setattr__(self, "variant", variant)
            merged = {**variants[variant], **self.exponents}
            derived_exponents(self.suite, variant, merged, self.n)
            object.__setattr__(self, "exponents", merged)
        elif self.suite == "trace":
            names = self.variant.split(",") if self.variant else list(TRACE_CHARACTERIZATIONS)
            bad = [x for x in names if x not in TRACE_CHARACTERIZATIONS]
            _need(not bad, f"unknown trace characterizations {bad}")
            object.__setattr__(self, "variant", ",".join(names))
        elif self.suite != "identities":
            raise ConfigError(f"unknown suite {self.suite!r}")

    # -- derived objects --------------------------------------------------------

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.n, self.N, self.L)

    @property
    def derived(self) -> dict[str, Any]:
        return derived_exponents(self.suite, self.variant, self.exponents, self.n)

    def tgrid(self, spec: GridSpec | None = None) -> TGrid:
        spec = spec or self.spec
        base = TGrid.resolving(spec, self.band, self.M)
        return TGrid(self.t_min or base.t_min, self.t_max or base.t_max, self.M)

    def refined(self) -> "TrialConfig":
        """Same functions and t-grid on a grid with twice the points per axis."""
        return dataclasses.replace(self, N=2 * self.N, band=self.band,
                                   t_min=self.tgrid().t_min, t_max=self.tgrid().t_max)

    def replace(self, **changes) -> "TrialConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrialConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        if "suite" not in data:
            raise ConfigError("config needs a 'suite' field")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrialConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def default_config(suite: str, n: int | None = None, **overrides) -> TrialConfig:
    """Desk-scale defaults: 100 trials in one dimension, 20 in two."""
    if n is None:
        n = _DIMENSION.get(suite, (1,))[0]
    if suite in ESTIMATE_SUITES:
        base = {"N": 512 if n == 1 else 64, "trials": 100 if n == 1 else 20}
        if suite == "jacobian" and overrides.get("variant") == "intermediate":
            base["N"] = 32
    elif suite == "trace":
        base = {"N": 512 if n == 1 else 32, "trials": 20}
    else:
        base = {"N": 1024 if n == 1 else 128, "trials": 50 if n == 1 else 10}
    base.update(overrides)
    return TrialConfig(suite=suite, n=n, **base)
