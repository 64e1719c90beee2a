"""Plan checks written against the constraint definitions, not the solver code."""
from __future__ import annotations

from itertools import combinations

from raas.optimizer import cost_breakdown


def violations(plan, candidates, volumes, td, params, pi=frozenset()) -> list:
    """Names of violated constraints for ``plan`` (empty when feasible)."""
    bad = []
    by_id = {c.vehicle_id: c for c in candidates}
    sel = [by_id[v] for v in plan.gamma]
    if len(set(plan.gamma)) != len(plan.gamma) or any(v not in by_id for v in plan.gamma):
        bad.append("gamma")
    if any(c.source is not None and c.source in pi for c in sel):
        bad.append("c1")
    xi = {c.source for c in sel if c.kind == "line" and c.source is not None}
    if set(map(tuple, plan.xi)) != xi:
        bad.append("c2")
    if any(c.headway is not None and c.headway > params.h_max for c in sel):
        bad.append("c4")
    groups: dict = {}
    for c in sel:
        groups.setdefault((c.pair, c.mode), []).append(c.ta)
    if any(sum(t) / len(t) > td for t in groups.values()):
        bad.append("c5")
    return bad


def brute_force(candidates, volumes, td, params, modes):
    """Best objective over every feasible subset using the scalar formulas."""
    best = None
    for k in range(len(candidates) + 1):
        for sub in combinations(candidates, k):
            groups: dict = {}
            for c in sub:
                groups.setdefault((c.pair, c.mode), []).append(c.ta)
            if any(sum(t) / len(t) > td for t in groups.values()):
                continue
            total = cost_breakdown(list(sub), volumes, td, params, modes).total
            if best is None or total < best:
                best = total
    return best
