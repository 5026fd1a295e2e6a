"""Run configuration: JSON documents validated against the shipped schema."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import calculus as cal
from .background import RiemannBackground, make_background
from .errors import ConfigError, UnicornLabError
from .metric import FinslerMetric

SCHEMA_VERSION = "1"

# Upper bounds are multiplied by ``tol_scale``; lower bounds (negative
# controls, non-Berwald detection) are not.
TOLERANCES = {
    "sign_rel": 1e-10,
    "pole_value": 1e-12,
    "regularity_final": 1e-3,
    "third_growth": 1e2,
    "eq4": 1e-7,
    "landsberg": 1e-6,
    "landsberg_control": 1e-3,
    "berwald_zero": 1e-8,
    "berwald_nonzero": 1e-2,
    "ode": 1e-9,
    "transport": 1e-7,
    "variant_drift": 1e-4,
    "torsion": 1e-10,
    "metricity": 1e-8,
    "gamma_metricity": 1e-4,
    "curvature_constancy": 1e-4,
    "curvature_base_point": 1e-5,
    "charge_variation": 1e-3,
}
LOWER_BOUNDS = frozenset({"third_growth", "landsberg_control", "berwald_nonzero", "variant_drift",
                          "charge_variation"})

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "background": {"key": "radial", "dim": 3, "params": {}},
    "metric": {"kind": "finsleroid", "charge": 1.0, "charge_gradient": None, "randers_scale": 0.5},
    "suites": ["all"],
    "seed": 0,
    "tol_scale": 1.0,
    "tolerances": {},
    "samples": {
        "points": 6,
        "directions": 4,
        "curves": 6,
        "vectors": 10,
        "base_points": 2,
        "curvature": 50,
        "quadrature": [32, 64],
        "gamma_grid": 2,
        "grid_spacing": 0.2,
        "angles": [1e-2, 1e-3, 1e-4],
    },
    "output": {"report": None, "timings": False},
}


def load_schema(name: str) -> dict:
    text = resources.files("unicorn_lab").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    background: RiemannBackground
    metric: FinslerMetric

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def samples(self) -> dict:
        return self.raw["samples"]

    @property
    def suites(self) -> list:
        return list(self.raw["suites"])

    def tol(self, key: str) -> float:
        value = float(self.raw["tolerances"].get(key, TOLERANCES[key]))
        if key in LOWER_BOUNDS:
            return value
        return value * float(self.raw["tol_scale"])


def _charge(spec: dict, n: int):
    K = spec.get("charge", 0.0)
    grad = spec.get("charge_gradient")
    if grad is None:
        return float(K)
    if len(grad) != n:
        raise ConfigError(f"charge_gradient needs {n} entries")
    grad = [float(v) for v in grad]
    K = float(K)

    def charge(x):
        return K + sum(gk * xk for gk, xk in zip(grad, x) if gk != 0.0)

    return charge


def build(doc: dict) -> RunConfig:
    """Validate a config document, fill defaults, and build the geometry."""
    try:
        jsonschema.validate(doc, load_schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    raw = _merge(DEFAULTS, doc)
    unknown = set(raw["tolerances"]) - set(TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
    bspec = raw["background"]
    try:
        bg = make_background(bspec["key"], int(bspec["dim"]), **bspec.get("params", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"background: {exc}") from None
    mspec = raw["metric"]
    kind = mspec["kind"]
    try:
        if kind == "finsleroid":
            m = FinslerMetric(bg, "finsleroid", charge=_charge(mspec, bg.dim))
        elif kind == "randers":
            m = FinslerMetric.randers(bg, float(mspec.get("randers_scale", 0.5)))
        elif kind == "riemannian":
            m = FinslerMetric.riemannian(bg)
        else:
            raise ConfigError(f"metric kind {kind!r} is not configurable from JSON")
        if callable(m.charge):
            corners = np.array(np.meshgrid(*[[-bg.box, bg.box]] * bg.dim)).reshape(bg.dim, -1).T
            for c in corners:
                m.charge_at(list(c))
    except ConfigError:
        raise
    except UnicornLabError as exc:
        raise ConfigError(f"metric: {exc}") from None
    if raw["suites"] == ["all"] or "all" in raw["suites"]:
        from .verify import SUITES

        raw["suites"] = list(SUITES)
    return RunConfig(raw, bg, m)


def load(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    return build(doc)


def anchor_point(bg: RiemannBackground) -> np.ndarray:
    """A fixed generic point of the chart used as the default base point."""
    n = bg.dim
    if bg.r_min is not None:
        p = np.array([0.15, 0.2, 0.1, -0.1][: n - 1] + [1.0])
        return 2.0 * p / np.linalg.norm(p)
    p = np.array([0.3, -0.15, 0.2, 0.1, -0.2][:n])
    return p * min(1.0, bg.box / 2.0)


def charge_value(m: FinslerMetric, x) -> float:
    return float(cal.value_of(m.charge_at(list(x))))
