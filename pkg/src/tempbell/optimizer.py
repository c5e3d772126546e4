"""Search over direction triples for the largest quantum violation.

Objectives depend on a configuration only through ``(a.b, a.c, b.c)``, so the
search fixes ``a`` on +z. The grid additionally pins ``b`` to the xz-plane
(three angles); refinement keeps both angles of ``b`` and ``c`` (four).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .geometry import (
    Config,
    Direction,
    reference_config_16,
    reference_config_18,
    random_direction,
    rotation_to_z,
)
from .inequalities import quantum_lhs_16, quantum_lhs_18
from .records import substream

DotObjective = Callable[[float, float, float], float]
Objective = Union[str, DotObjective]

OBJECTIVES: dict[str, DotObjective] = {
    "ineq16": lambda ab, ac, bc: ab - ac + bc,
    "ineq18": lambda ab, ac, bc: ab + bc - 2.0 * ac + ab * bc,
}
_KERNEL_IDS = {"ineq16": kernels.OBJ_INEQ16, "ineq18": kernels.OBJ_INEQ18}

NM_COEFFICIENTS = {"reflection": 1.0, "expansion": 2.0, "contraction": 0.5, "shrink": 0.5}


@dataclass
class OptimizationResult:
    best_config: Config
    best_value: float
    objective: str
    trace: list[tuple[int, float]] = field(default_factory=list)
    method_params: dict = field(default_factory=dict)
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "best_value": self.best_value,
            "best_config": self.best_config.to_dict(),
            "converged": self.converged,
            "method_params": self.method_params,
            "trace": [[int(i), float(v)] for i, v in self.trace],
        }


def _resolve(objective: Objective) -> tuple[str, DotObjective]:
    if callable(objective):
        return getattr(objective, "__name__", "custom"), objective
    try:
        return objective, OBJECTIVES[objective]
    except KeyError:
        raise ValueError(f"unknown objective {objective!r}; expected one of {sorted(OBJECTIVES)}") from None


def evaluate(objective: Objective, config: Config) -> float:
    _, fn = _resolve(objective)
    return float(fn(*config.dots()))


def gauge_config(theta_b: float, phi_b: float, theta_c: float, phi_c: float) -> Config:
    return Config(Direction(0.0, 0.0, 1.0), Direction.from_angles(theta_b, phi_b),
                  Direction.from_angles(theta_c, phi_c))


def _angle_dots(x: np.ndarray) -> tuple[float, float, float]:
    tb, pb, tc, pc = x
    sb, cb, sc, cc = math.sin(tb), math.cos(tb), math.sin(tc), math.cos(tc)
    bc = sb * sc * math.cos(pb - pc) + cb * cc
    return cb, cc, min(1.0, max(-1.0, bc))


def _to_angles(config: Config) -> tuple[np.ndarray, np.ndarray]:
    """Rotate ``a`` onto +z; return the four angles of b, c and the rotation."""
    rot = rotation_to_z(config.a)
    g = config.rotated(rot)
    ang = []
    for d in (g.b, g.c):
        ang.append(math.acos(min(1.0, max(-1.0, d.z))))
        ang.append(math.atan2(d.y, d.x))
    return np.array(ang), rot


def grid_search(objective: Objective = "ineq16", resolution: float = 1.0,
                use_numba=None) -> OptimizationResult:
    """Exhaustive scan at ``resolution`` degrees.

    b spans polar angles [0, 180] in the xz-plane, c spans polar [0, 180] and
    azimuth [0, 360). The first maximum in scan order wins. The trace holds
    ``(flat grid index, value)`` for each strict improvement, then for every
    later point tying the final best.
    """
    if not 0 < resolution <= 10.0:
        raise ValueError("grid resolution must lie in (0, 10] degrees")
    name, fn = _resolve(objective)
    polar = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, resolution))
    azimuth = np.deg2rad(np.arange(0.0, 360.0 - 1e-9, resolution))
    kobj = _KERNEL_IDS.get(objective) if isinstance(objective, str) else fn
    best, idx, t_idx, t_val, ties = kernels.grid_scan(kobj, polar, polar, azimuth, use_numba=use_numba)
    ib, rest = divmod(idx, polar.size * azimuth.size)
    ic, ip = divmod(rest, azimuth.size)
    config = gauge_config(polar[ib], 0.0, polar[ic], azimuth[ip])
    return OptimizationResult(
        best_config=config,
        best_value=evaluate(fn, config),
        objective=name,
        trace=list(zip(t_idx.tolist(), t_val.tolist())),
        method_params={
            "method": "grid",
            "resolution_deg": resolution,
            "grid_shape": [int(polar.size), int(polar.size), int(azimuth.size)],
            "best_angles_deg": [float(np.rad2deg(polar[ib])), float(np.rad2deg(polar[ic])),
                                float(np.rad2deg(azimuth[ip]))],
            "grid_value": best,
            "ties_at_best": ties,
            "trace_truncated": ties >= kernels.TRACE_CAP,
        },
    )


def local_refine(objective: Objective, start: Config, tolerance: float = 1e-10,
                 max_iter: int = 10_000, step: float = 0.05) -> OptimizationResult:
    """Nelder-Mead ascent over the four angles of b and c with a fixed on +z.

    Stops once the simplex values agree to ``tolerance``. The returned
    configuration is rotated back into the frame of ``start``.
    """
    name, fn = _resolve(objective)
    x0, rot = _to_angles(start)
    start_value = evaluate(fn, start)

    def neg(x):
        return -float(fn(*_angle_dots(x)))

    simplex = np.vstack([x0] + [x0 + step * np.eye(4)[i] for i in range(4)])
    trace: list[tuple[int, float]] = [(0, -neg(x0))]

    def record(intermediate_result):
        trace.append((len(trace), -float(intermediate_result.fun)))

    res = minimize(neg, x0, method="Nelder-Mead", callback=record,
                   options={"initial_simplex": simplex, "fatol": tolerance,
                            "xatol": max(tolerance, 1e-8), "maxiter": max_iter,
                            "maxfev": 4 * max_iter, "adaptive": False})
    best = gauge_config(*res.x).rotated(rot.T)
    value = evaluate(fn, best)
    if value < start_value:
        best, value = start, start_value
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"local_refine stopped before converging: {res.message}", RuntimeWarning,
                      stacklevel=2)
    return OptimizationResult(
        best_config=best,
        best_value=value,
        objective=name,
        trace=trace,
        method_params={"method": "nelder-mead", "tolerance": tolerance, "max_iter": max_iter,
                       "initial_step": step, "iterations": int(res.nit),
                       "evaluations": int(res.nfev), **NM_COEFFICIENTS},
        converged=converged,
    )


def random_config(rng: np.random.Generator) -> Config:
    return Config(random_direction(rng), random_direction(rng), random_direction(rng))


def multi_start(objective: Objective, starts: int = 32, seed: int = 0,
                tolerance: float = 1e-10) -> tuple[OptimizationResult, list[float]]:
    """Refine from ``starts`` random configurations; return the best and all final values.

    Ties go to the lexicographically smallest gauge angles.
    """
    results = []
    for k in range(starts):
        rng = substream(seed, 7, k)
        results.append(local_refine(objective, random_config(rng), tolerance))
    best = max(results, key=lambda r: (r.best_value, tuple(-_to_angles(r.best_config)[0])))
    best.method_params = {**best.method_params, "starts": starts, "seed": seed}
    return best, [r.best_value for r in results]


def optimize(objective: Objective = "ineq16", grid_deg: float = 1.0, starts: int = 32,
             seed: int = 0, tolerance: float = 1e-10) -> dict:
    """Grid, refine the grid winner, and cross-check with random multi-starts."""
    grid = grid_search(objective, grid_deg)
    refined = local_refine(objective, grid.best_config, tolerance)
    multi, values = multi_start(objective, starts, seed, tolerance) if starts > 0 else (None, [])
    name, _ = _resolve(objective)
    out = {
        "objective": name,
        "grid": grid.to_dict(),
        "refined": refined.to_dict(),
        "best_value": refined.best_value,
    }
    if multi is not None:
        out["multi_start"] = {**multi.to_dict(), "final_values": values}
        out["agreement"] = abs(multi.best_value - refined.best_value)
    reference = {"ineq16": (reference_config_16(), math.sqrt(2.0)),
                 "ineq18": (reference_config_18(), math.sqrt(2.0) + 0.5)}.get(name)
    if reference is not None:
        out["reference_config_value"] = reference[1]
        out["exceeds_reference_config_by"] = refined.best_value - reference[1]
    return out


def verify_reference_configs(tol: float = 1e-12) -> dict:
    """Closed forms at the two reference configurations; raises on mismatch."""
    v16 = quantum_lhs_16(reference_config_16())
    v18 = quantum_lhs_18(reference_config_18())
    want16, want18 = math.sqrt(2.0), math.sqrt(2.0) + 0.5
    if abs(v16 - want16) > tol:
        raise AssertionError(f"ineq16 at reference config = {v16!r}, expected {want16!r}")
    if abs(v18 - want18) > tol:
        raise AssertionError(f"ineq18 at reference config = {v18!r}, expected {want18!r}")
    return {
        "ineq16": {"config": reference_config_16().to_dict(), "value": v16, "expected": want16},
        "ineq18": {"config": reference_config_18().to_dict(), "value": v18, "expected": want18},
    }
