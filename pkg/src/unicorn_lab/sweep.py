"""One-parameter sweeps producing plot-ready tables."""
from __future__ import annotations

import csv
import io
import math

import numpy as np

from .averaged import averaged_metric, indicatrix_curvature, sphere_rule
from .config import RunConfig, anchor_point, charge_value
from .errors import ConfigError, ConvexityError
from .metric import FinslerMetric, adapted_frame, hessian_batch, phi, regularity_probe, sign_property_a
from .verify import quadrature_resolution

QUANTITIES = {
    "s": ("a", "phi", "dphi", "two_A"),
    "pole-angle": ("hessian_error", "hessian_abs_error", "third_norm", "fourth_norm"),
    "K": ("min_eig_g", "min_eig_gamma", "phi_pole", "curvature"),
}


def _grid(param, lo, hi, steps, log):
    if steps < 1:
        raise ConfigError("steps must be positive")
    if lo > hi:
        raise ConfigError("range must be increasing")
    if param == "s" and (lo < -1 or hi > 1):
        raise ConfigError("s must lie in [-1, 1]")
    if param == "K" and (lo <= -4 or hi >= 4):
        raise ConfigError("K must lie in (-4, 4)")
    if param == "pole-angle" and (lo <= 0 or hi > math.pi / 2):
        raise ConfigError("pole angles must lie in (0, pi/2]")
    if log is None:
        log = param == "pole-angle"
    if steps == 1:
        return np.array([lo])
    if log:
        if lo <= 0:
            raise ConfigError("a logarithmic grid needs a positive range")
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def _s_columns(K, s, wanted):
    cols = {}
    p = phi(K, s)
    if "a" in wanted:
        cols["a"] = sign_property_a(K, s)
    cols["phi"] = p.value
    cols["dphi"] = p.derivative
    cols["two_A"] = p.exponent
    return cols


def _angle_columns(m, x, angles, wanted):
    cols = {}
    # probe from the largest angle down, as the approach is reported
    order = np.argsort(-angles)
    back = np.argsort(order)
    a = angles[order]
    r2 = regularity_probe(m, x, 2, a)
    cols["hessian_error"] = r2.errors[back]
    cols["hessian_abs_error"] = r2.abs_errors[back]
    if "third_norm" in wanted:
        cols["third_norm"] = regularity_probe(m, x, 3, a).norms[back]
    if "fourth_norm" in wanted:
        cols["fourth_norm"] = regularity_probe(m, x, 4, a).norms[back]
    return cols


def _charge_columns(cfg, x, Ks, wanted, rng):
    bg = cfg.background
    n = bg.dim
    U, _, _ = sphere_rule(n, 16 if n != 3 else (8, 16), rng)
    res = quadrature_resolution(n, [16, 32])
    cols = {k: [] for k in QUANTITIES["K"]}
    for K in Ks:
        m = FinslerMetric(bg, "finsleroid", charge=float(K))
        Y = adapted_frame(bg, x) @ U
        cols["min_eig_g"].append(float(np.linalg.eigvalsh(hessian_batch(m, x, Y))[:, 0].min()))
        if "min_eig_gamma" in wanted:
            try:
                g = averaged_metric(m, x, res, estimate_error=False).gamma
                cols["min_eig_gamma"].append(float(np.linalg.eigvalsh(g)[0]))
            except ConvexityError:
                # not strongly convex: left blank in the table
                cols["min_eig_gamma"].append(math.nan)
        else:
            cols["min_eig_gamma"].append(math.nan)
        cols["phi_pole"].append(phi(float(K), 1.0).value)
        if "curvature" in wanted and n == 3:
            cols["curvature"].append(indicatrix_curvature(m, x, 20, rng).mean)
        else:
            cols["curvature"].append(math.nan)
    return cols


def run_sweep(cfg: RunConfig, param: str, lo: float, hi: float, steps: int,
              quantities=None, log: bool | None = None):
    """Return ``(header, rows)`` for a sweep over ``param``."""
    if param not in QUANTITIES:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {sorted(QUANTITIES)}")
    wanted = list(quantities or QUANTITIES[param])
    bad = [q for q in wanted if q not in QUANTITIES[param]]
    if bad:
        raise ConfigError(f"quantities {bad} are not available for {param}")
    m = cfg.metric
    if m.kind != "finsleroid":
        raise ConfigError("sweeps need a Finsleroid metric")
    grid = _grid(param, lo, hi, steps, log)
    x = anchor_point(cfg.background)
    rng = np.random.default_rng(cfg.seed)
    if param == "s":
        cols = _s_columns(charge_value(m, x), grid, wanted)
    elif param == "pole-angle":
        cols = _angle_columns(m, x, grid, wanted)
    else:
        cols = _charge_columns(cfg, x, grid, wanted, rng)
    header = [param] + wanted
    rows = [[float(v)] + [float(cols[q][i]) for q in wanted] for i, v in enumerate(grid)]
    return header, rows


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow(["" if not math.isfinite(v) else repr(v) for v in row])
    return buf.getvalue()
