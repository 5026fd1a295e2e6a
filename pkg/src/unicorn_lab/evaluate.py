"""Single point-direction evaluation emitted as a JSON record."""
from __future__ import annotations

import math

import numpy as np

from .config import SCHEMA_VERSION, RunConfig, charge_value
from .errors import DomainError, PoleError, UnicornLabError
from .metric import (
    energy,
    frame_to_coordinates,
    hessian,
    hessian_at_pole,
    pole_angle,
)
from .spray import _core, landsberg_from_core
from .verify import clean


def _policy(m) -> dict:
    return {
        "second_order_cone": m.pole_cone,
        "third_order_cone": m.spray_cone,
        "on_axis": "the fundamental tensor takes its continuous limit; spray and Landsberg "
                   "quantities are not evaluated inside the third-order cone",
    }


def run_eval(cfg: RunConfig, x, y) -> tuple[dict, bool]:
    """Evaluate the geometry at ``(x, y)``; returns ``(record, ok)``."""
    m = cfg.metric
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rec = {
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "x": x,
        "y": y,
        "metric": {"kind": m.kind, "background": cfg.background.key},
        "pole_angle": None,
    }
    try:
        if x.shape != (m.dim,) or y.shape != (m.dim,):
            raise DomainError(f"point and direction need {m.dim} components")
        if m.kind == "finsleroid":
            rec["metric"]["charge"] = charge_value(m, x)
            rec["pole_angle"] = pole_angle(m, x, y)
        E = energy(m, x, y)
        rec["E"] = E
        rec["F"] = math.sqrt(2.0 * E)
        try:
            h = hessian(m, x, y)
        except PoleError:
            sign = 1 if np.asarray(cfg.background.axis_expr(list(x)), dtype=float) @ y > 0 else -1
            rec["g"] = frame_to_coordinates(cfg.background, x, hessian_at_pole(m, x, sign))
            raise
        rec["g"] = h.g
        rec["C"] = h.C
        core = _core(m, x, y)
        L = landsberg_from_core(core)
        rec["G"] = core.spray.G
        rec["P"] = L.P
        rec["residuals"] = {
            "euler": abs(float(y @ h.g @ y) - 2.0 * E) / (2.0 * E),
            "cartan_contraction": float(np.max(np.abs(np.einsum("ijk,k->ij", h.C, y)))),
            "landsberg_identity": L.identity_residual,
            "landsberg_norm": L.norm_P,
            "mixed_curvature_norm": L.norm_mixed,
        }
    except UnicornLabError as exc:
        rec["status"] = "error"
        err = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, PoleError):
            err.update(angle=exc.angle, cone=exc.cone, policy=_policy(m))
        rec["error"] = err
    return clean(rec), rec["status"] == "ok"

