"""End-to-end acceptance checks, one verdict line per criterion."""
import math
import time
from fractions import Fraction

import pytest

from raas import simulator
from raas.bench import Context, StrategyConfig, SweepSpec, run_strategy, sweep
from raas.costs import (arrangement_cost, do_nothing_split, leaving_rate, loyalty_cost,
                        passenger_split, payment_phase, price_vehicle, service_rate)
from raas.coupling import fixed_point
from raas.model import CostParams, Mode, ModeKind
from raas.optimizer import solve
from raas.simulator import Simulator
from raas.synth import synth_corridor

from instances import MODES, random_instance
from tiny import corridor
from validator import violations
from verdicts import verdict

pytestmark = pytest.mark.acceptance

P = CostParams()
BUS = Mode(ModeKind.BUS, 0.454, 0.0, 70, 20.0)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture(scope="module")
def ctx():
    return Context(synth_corridor(1))


def test_ac1_cost_formulas():
    from raas.costs import CandidateVehicle
    t0 = time.perf_counter()
    c = CandidateVehicle("b", ModeKind.BUS, ("I", "J"), 2.0, 12.0, 600.0, 70, 20.0, "o")
    checks = {
        "y(130,120)": rel(payment_phase(7800, 7200, 0.3, 1.0), float(Fraction(-3, 7))),
        "y(30,120)": rel(payment_phase(1800, 7200, 0.3, 1.0), 1.0),
        "y(90,120)": abs(payment_phase(5400, 7200, 0.3, 1.0)),
        "CS_bus(y=1)": rel(service_rate(BUS, 14, 1.0, 0.3, 1.0), 0.454),
        "CS_bus(y=0)": rel(service_rate(BUS, 14, 0.0, 0.3, 1.0), 0.1362),
        "transfer": rel(price_vehicle(c, BUS, 7200, P).transfer, 444.92),
        "arrangement": rel(arrangement_cost(c.__class__(**{**c.__dict__, "ta": 4.27 * 60}), 444.92, 0.2),
                           88.984 / 4.27),
        "L(256)": rel(leaving_rate(256, 7200, 0.1, 0.1), 0.1 + 0.8 * 256 / 7200),
        "L(256) digits": rel(round(leaving_rate(256, 7200, 0.1, 0.1), 5), 0.12844),
        "split(900)": rel(passenger_split(900, 0.1, 280).waiting, 530.0),
        "Z2 do-nothing": rel(loyalty_cost({("I", "J"): do_nothing_split(300, P)}, {}, P, 7200).total,
                             7395.0),
        "Z2 deliberate": rel(loyalty_cost({}, {("R", "S"): (passenger_split(30, 1 / 3, 0), 15.0)},
                                          P, 7200).total, 109.0),
    }
    elapsed = time.perf_counter() - t0
    worst = max(checks, key=checks.get)
    ok = all(v <= 1e-9 for v in checks.values()) and elapsed < 1.0
    assert verdict("AC1 cost formulas", ok,
                   f"{len(checks)} oracles, worst {worst} rel err {checks[worst]:.1e}, {elapsed:.3f} s")


def test_ac2_optimizer_exact():
    t0 = time.perf_counter()
    mismatches, infeasible = [], []
    for seed in range(1000):
        cands, vols, td, params = random_instance(seed, max_n=12)
        serve_all = seed % 2 == 1
        a, _ = solve(cands, vols, td, params, MODES, serve_all=serve_all)
        b, _ = solve(cands, vols, td, params, MODES, method="enumerate", serve_all=serve_all)
        if a.objective != b.objective:
            mismatches.append(seed)
        if violations(a, cands, vols, td, params) or violations(b, cands, vols, td, params):
            infeasible.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and not infeasible and elapsed < 60
    assert verdict("AC2 optimizer exactness", ok,
                   f"1000 instances, {len(mismatches)} objective mismatches, "
                   f"{len(infeasible)} constraint violations, {elapsed:.1f} s")


def test_ac3_scenario_orderings(ctx):
    t0 = time.perf_counter()
    rows = {k: run_strategy(None, k, seed=1, context=ctx)
            for k in ("Normal", "DoNothing", "RaaS", "BusBridging", "TaxiBridging", "VanBridging")}
    elapsed = time.perf_counter() - t0
    tot = {k: r["total"] for k, r in rows.items()}
    tt = {k: r["avg_travel_s"] for k, r in rows.items()}
    n = {k: r["vehicles"] for k, r in rows.items()}
    parts = {
        "a": tot["RaaS"] < tot["VanBridging"] < tot["BusBridging"] < tot["TaxiBridging"],
        "b": tt["DoNothing"] >= 1.2 * tt["Normal"],
        "c": tt["RaaS"] < tt["DoNothing"],
        "d": n["TaxiBridging"] > n["VanBridging"] > n["RaaS"],
    }
    detail = {
        "a": "totals " + ", ".join(f"{k} {tot[k]:.1f}" for k in
                                   ("RaaS", "VanBridging", "BusBridging", "TaxiBridging")),
        "b": f"DoNothing {tt['DoNothing']:.0f} s vs Normal {tt['Normal']:.0f} s "
             f"(+{100 * (tt['DoNothing'] / tt['Normal'] - 1):.0f}%)",
        "c": f"RaaS {tt['RaaS']:.0f} s vs DoNothing {tt['DoNothing']:.0f} s",
        "d": f"vehicles Taxi {n['TaxiBridging']}, Van {n['VanBridging']}, RaaS {n['RaaS']}",
    }
    for k in "abcd":
        verdict(f"AC3({k}) scenario ordering", parts[k], detail[k])
    timed = verdict("AC3 runtime", elapsed < 120, f"{elapsed:.1f} s")
    assert all(parts.values()) and timed


def _by(rows, strategy, key):
    return [r[key] for r in rows if r["strategy"] == strategy]


def test_ac4_sensitivity(ctx):
    t0 = time.perf_counter()
    model = ctx.model
    vol = sweep(model, SweepSpec("volume", (100, 300, 500, 700, 900)))
    alpha = sweep(model, SweepSpec("alpha", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)))
    rates = tuple(round(0.1 * k, 1) for k in range(1, 11))
    ca = sweep(model, SweepSpec("ca_rate", rates, volume=100))
    elapsed = time.perf_counter() - t0
    strategies = ("DoNothing", "RaaS", "BusBridging", "TaxiBridging", "VanBridging")

    # (a)
    vols = (100, 300, 500, 700, 900)
    taxi = _by(vol, "TaxiBridging", "Z1")
    inc = all(x < y for x, y in zip(taxi, taxi[1:]))
    largest = all(r["Z1"] <= taxi[k] for k, v in enumerate(vols) if v >= 300
                  for r in vol if r["value"] == v and r["strategy"] != "TaxiBridging")
    raas_low = all(min(r["objective"] for r in vol if r["value"] == v and r["strategy"] != "RaaS")
                   > next(r["objective"] for r in vol if r["value"] == v and r["strategy"] == "RaaS")
                   for v in vols if v >= 500)
    ok_a = inc and largest and raas_low
    verdict("AC4(a) volume sweep", ok_a,
            f"Taxi Z1 {[round(x) for x in taxi]}, strictly increasing {inc}, largest {largest}, "
            f"RaaS lowest at V>=500 {raas_low}")

    # (b)
    bad = []
    for s in strategies:
        z1 = _by(alpha, s, "Z1")
        leave = _by(alpha, s, "leaving")
        if any(y > x + 1e-9 for x, y in zip(z1, z1[1:])):
            bad.append(f"{s} Z1")
        if any(y < x - 1e-9 for x, y in zip(leave, leave[1:])):
            bad.append(f"{s} leaving")
    ok_b = not bad
    verdict("AC4(b) alpha sweep", ok_b,
            "Z1 nonincreasing and leaving cost nondecreasing for all strategies" if ok_b
            else "violations: " + ", ".join(bad))

    # (c)
    thr = _by(ca, "DoNothing", "objective")[0]
    bus = _by(ca, "BusBridging", "objective")
    raas = _by(ca, "RaaS", "objective")
    crosses = any(x <= thr < y for x, y in zip(bus, bus[1:]))
    raas_below = all(x < thr for x in raas)
    ok_c = crosses and raas_below
    verdict("AC4(c) arrangement-rate sweep at V=100", ok_c,
            f"DoNothing {thr:.1f}, BusBridging {bus[0]:.1f}..{bus[-1]:.1f} "
            f"(crossing {crosses}), RaaS max {max(raas):.1f} (below {raas_below})")
    timed = verdict("AC4 runtime", elapsed < 300, f"{elapsed:.1f} s")
    assert ok_a and ok_b and ok_c and timed


def test_ac5_simulator_properties(ctx):
    m = ctx.model
    plan, _ = ctx.plan(StrategyConfig("RaaS"))
    reps = [simulator.run(m, m.disruption, plan, seed=5, trace=True) for _ in range(3)]
    blobs = {r.to_bytes() for r in reps}
    det = len(blobs) == 1
    boards = [e for e in reps[0].trace if e["event"] == "board"]
    cap_ok = bool(boards) and all(e["onboard"] <= e["capacity"] for e in boards)
    tt_ok = all(a.tt == a.it + a.wt for a in reps[0].agents)

    big = corridor(rail_rate=5400.0)
    L = 0.3
    rep = Simulator(big, big.disruption, None, seed=11, leave_rates={("A", "B"): L}).run()
    stranded = [a for a in rep.agents if a.stranded]
    frac = sum(a.left for a in stranded) / len(stranded)
    lln = len(stranded) >= 10_000 and abs(frac - L) <= 0.02
    ok = det and cap_ok and tt_ok and lln
    assert verdict("AC5 simulator properties", ok,
                   f"deterministic {det}, capacity respected over {len(boards)} boardings {cap_ok}, "
                   f"TT=IT+WT {tt_ok}, leave fraction {frac:.4f} vs {L} over {len(stranded)} agents")


def test_ac6_fixed_point(ctx):
    _, _, free = fixed_point(corridor(road_cap=1e9))
    exact = len(free) == 1 and free[0].gap == 0.0 and free[0].converged
    plan, _, recs = fixed_point(ctx.model, tol=0.05, max_iter=20, candidates=ctx.candidates,
                                volumes=ctx.volumes)
    gaps = [r.gap for r in recs]
    conv = recs[-1].converged and gaps[-1] <= 0.05 and len(recs) <= 20
    best = plan.objective == min(r.objective for r in recs)
    ok = exact and conv and best
    assert verdict("AC6 fixed-point loop", ok,
                   f"uncongested gap {free[0].gap} in {len(free)} iteration; corridor gaps "
                   f"{[round(g, 4) for g in gaps]}, min-objective plan returned {best}")
