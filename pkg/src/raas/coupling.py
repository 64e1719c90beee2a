"""Optimise-simulate fixed point on replacement-vehicle arrival times.

The optimiser prices candidates with free-flow arrival times scaled by a
per-mode factor; the simulator returns congested arrival times; the factor
moves halfway toward the observed ratio and the loop repeats until both
agree within tolerance.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

from . import simulator
from .network import apply_disruption, candidate_vehicles, stranded_volumes
from .optimizer import solve

FACTOR_MIN = 0.1
FACTOR_MAX = 10.0
DAMPING = 0.5


@dataclass(frozen=True)
class IterationRecord:
    i: int
    ta_opt: dict  # mode -> mean optimiser arrival time, s
    ta_sim: dict  # mode -> mean simulated arrival time, s
    speed_factors: dict
    objective: float
    gap: float
    converged: bool


def relative_gap(ta_opt: dict, ta_sim: dict) -> float:
    gap = 0.0
    for m, t in ta_opt.items():
        s = ta_sim.get(m, t)
        gap = max(gap, abs(s - t) / max(t, 60.0))
    return gap


def _mean_ta(selected) -> dict:
    sums: dict = {}
    for c in selected:
        acc = sums.setdefault(c.mode.value, [0.0, 0])
        acc[0] += c.ta
        acc[1] += 1
    return {m: s / n for m, (s, n) in sorted(sums.items())}


def fixed_point(model, disruption=None, params=None, tol: float = 0.05, max_iter: int = 20,
                seed: int = 0, candidates=None, volumes=None, serve_all: bool = False):
    """Run the coupling loop.

    Returns ``(plan, report, records)`` for the lowest-objective iterate;
    non-convergence shows as ``records[-1].converged == False``.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    disruption = disruption or model.disruption
    params = params or model.cost_params
    part = apply_disruption(model, disruption)
    if candidates is None:
        candidates = candidate_vehicles(model, part, params)
    if volumes is None:
        volumes = stranded_volumes(model, part)
    modes = model.mode_by_kind
    factors = {m.value: 1.0 for m in sorted({c.mode for c in candidates}, key=lambda k: k.value)}
    records = []
    best = None
    for i in range(max_iter):
        scaled = [c if factors[c.mode.value] == 1.0 else replace(c, ta=c.ta * factors[c.mode.value])
                  for c in candidates]
        plan, _ = solve(scaled, volumes, disruption.duration, params, modes, serve_all=serve_all)
        report = simulator.run(model.replace(cost_params=params), disruption, plan, seed)
        ta_opt = _mean_ta(plan.selected)
        ta_sim = simulator.measure_ta(report)["per_mode"]
        gap = relative_gap(ta_opt, ta_sim)
        converged = gap <= tol
        records.append(IterationRecord(i, ta_opt, ta_sim, dict(factors), plan.objective, gap,
                                       converged))
        if best is None or plan.objective < best[0].objective:
            best = (plan, report)
        if converged:
            break
        for m, t in ta_opt.items():
            if m in ta_sim and t > 0:
                f = factors[m] * ((1.0 - DAMPING) + DAMPING * ta_sim[m] / t)
                factors[m] = min(FACTOR_MAX, max(FACTOR_MIN, f))
    return best[0], best[1], records


def iteration_log_csv(records) -> str:
    modes = sorted({m for r in records for m in (*r.ta_opt, *r.ta_sim, *r.speed_factors)})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i"] + [f"TA_opt[{m}]" for m in modes] + [f"TA_sim[{m}]" for m in modes]
               + [f"factor[{m}]" for m in modes] + ["gap", "objective", "converged"])
    for r in records:
        w.writerow([r.i] + [repr(r.ta_opt.get(m, math.nan)) for m in modes]
                   + [repr(r.ta_sim.get(m, math.nan)) for m in modes]
                   + [repr(r.speed_factors.get(m, math.nan)) for m in modes]
                   + [repr(r.gap), repr(r.objective), int(r.converged)])
    return buf.getvalue()
