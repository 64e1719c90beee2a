"""Strategy runs, parameter sweeps and table output."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import simulator
from .model import ModeKind, ScenarioModel, load_scenario
from .network import apply_disruption, candidate_vehicles, stranded_volumes
from .optimizer import ReallocationPlan, cost_breakdown, solve

STRATEGIES = ("Normal", "DoNothing", "RaaS", "BusBridging", "TaxiBridging", "VanBridging")
SWEEP_PARAMS = ("volume", "alpha", "ca_rate")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {', '.join(STRATEGIES)}")

    @property
    def bridging(self) -> bool:
        return self.kind.endswith("Bridging")

    def admits(self, c) -> bool:
        if self.kind == "RaaS":
            return True
        if self.kind == "BusBridging":
            return c.mode == ModeKind.BUS and c.kind == "depot"
        if self.kind == "TaxiBridging":
            return c.mode == ModeKind.TAXI
        if self.kind == "VanBridging":
            return c.mode == ModeKind.VAN
        return False


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    strategies: tuple = STRATEGIES[1:]
    volume: float | None = None  # fixed blocked volume for alpha / ca_rate sweeps

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        for v in self.values:
            if v != v or v in (float("inf"), float("-inf")):
                raise ValueError("sweep values must be finite")


def _as_model(scenario) -> ScenarioModel:
    return scenario if isinstance(scenario, ScenarioModel) else load_scenario(scenario)


class Context:
    """Disruption partition, candidates and volumes shared by strategy runs."""

    def __init__(self, model: ScenarioModel, params=None):
        if model.disruption is None:
            raise ValueError("scenario has no disruption")
        self.model = model
        self.params = params or model.cost_params
        self.partition = apply_disruption(model, model.disruption)
        self.skipped: list = []
        self.candidates = candidate_vehicles(model, self.partition, self.params, self.skipped)
        self.volumes = stranded_volumes(model, self.partition)

    def plan(self, strategy: StrategyConfig, params=None, volumes=None):
        params = params or self.params
        volumes = volumes or self.volumes
        cands = [c for c in self.candidates if strategy.admits(c)]
        if strategy.kind == "DoNothing":
            cands = []
        return solve(cands, volumes, self.partition.td, params, self.model.mode_by_kind,
                     serve_all=strategy.bridging)


def run_strategy(scenario, strategy: str, seed: int = 0, out_dir=None, trace: bool = False,
                 context: Context | None = None) -> dict:
    """Plan and simulate one strategy; returns a metrics row."""
    model = context.model if context else _as_model(scenario)
    cfg = StrategyConfig(strategy)
    plan = None
    solve_report = None
    if cfg.kind == "Normal":
        report = simulator.run(model, None, None, seed, trace)
        z1 = z2 = 0.0
    else:
        ctx = context or Context(model)
        plan, solve_report = ctx.plan(cfg)
        report = simulator.run(model, model.disruption, plan, seed, trace)
        z1, z2 = plan.cost.z1, plan.cost.z2
    agg = report.aggregates()
    row = {
        "strategy": cfg.kind,
        "avg_travel_s": agg["avg_tt"],
        "avg_wait_s": agg["avg_wait"],
        "avg_distance_km": agg["avg_distance_km"],
        "avg_ta_s": plan.avg_ta() if plan else 0.0,
        "avg_ta_sim_s": agg["avg_ta_sim"],
        "vehicles": plan.count if plan else 0,
        "Z1": z1,
        "Z2": z2,
        "total": z1 + z2,
        "leavers": agg["leavers"],
        "stranded": agg["stranded"],
    }
    if out_dir is not None:
        out = Path(out_dir)
        report.write(out, prefix=f"{cfg.kind}_")
        if plan is not None:
            _atomic_write(out / f"{cfg.kind}_plan.json", plan.to_json(solve_report))
        _atomic_write(out / f"{cfg.kind}_row.csv", rows_csv([row]))
    return row


def _sweep_point(args):
    scenario, parameter, value, strategies, volume = args
    ctx = Context(_as_model(scenario))
    params = ctx.params
    volumes = ctx.volumes
    if volume is not None:
        volumes = {p: float(volume) for p in ctx.volumes}
    if parameter == "volume":
        volumes = {p: float(value) for p in ctx.volumes}
    elif parameter == "alpha":
        params = replace(params, alpha=float(value))
    else:
        params = replace(params, ca_rate=float(value))
    params.validate()
    out = []
    results = {}
    for kind in ("DoNothing",) + tuple(s for s in strategies if s != "DoNothing"):
        cfg = StrategyConfig(kind)
        if kind == "Normal":
            results[kind] = None
            continue
        plan, _ = ctx.plan(cfg, params, volumes)
        results[kind] = plan
    threshold = results["DoNothing"].objective
    for kind in strategies:
        plan = results[kind]
        if plan is None:
            row = {"parameter": parameter, "value": value, "strategy": kind, "Z1": 0.0, "Z2": 0.0,
                   "leaving": 0.0, "waiting": 0.0, "objective": 0.0, "vehicles": 0}
        else:
            c = plan.cost
            row = {"parameter": parameter, "value": value, "strategy": kind, "Z1": c.z1, "Z2": c.z2,
                   "leaving": c.leaving_main + c.leaving_deliberate,
                   "waiting": c.waiting_main + c.waiting_deliberate,
                   "objective": plan.objective, "vehicles": plan.count}
        row["donothing_threshold"] = threshold
        out.append(row)
    return out


def sweep(scenario, spec: SweepSpec, seed: int = 0, out_dir=None, workers: int = 1) -> list:
    """Optimiser-only sweep; one row per (value, strategy).

    Points run in worker processes when ``workers > 1``; output files are
    written once, after every point has finished.
    """
    del seed  # sweeps do not simulate; kept for a uniform interface
    jobs = [(scenario, spec.parameter, v, tuple(spec.strategies), spec.volume)
            for v in spec.values]
    if workers > 1 and not isinstance(scenario, ScenarioModel):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_point, jobs))
    else:
        parts = [_sweep_point(j) for j in jobs]
    rows = [r for part in parts for r in part]
    if out_dir is not None:
        write_sweep(rows, spec, Path(out_dir), scenario)
    return rows


def figure_files(spec: SweepSpec, scenario) -> dict:
    """Plot-data file names for a sweep, keyed by the column they chart."""
    if spec.parameter == "volume":
        return {"fig5a.csv": "Z1", "fig5b.csv": "Z2"}
    if spec.parameter == "alpha":
        return {"fig6.csv": None}
    v = spec.volume
    if v is None:
        v = sum(Context(_as_model(scenario)).volumes.values())
    return {f"fig7_v{v:g}.csv": None}


def write_sweep(rows, spec: SweepSpec, out: Path, scenario) -> list:
    out.mkdir(parents=True, exist_ok=True)
    names = figure_files(spec, scenario)
    written = []
    for name, column in names.items():
        _atomic_write(out / name, rows_csv(rows, column))
        written.append(out / name)
    _atomic_write(out / f"sweep_{spec.parameter}.csv", rows_csv(rows))
    return written


def rows_csv(rows, column: str | None = None) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    keys = list(rows[0])
    if column is not None:
        keys = [k for k in ("parameter", "value", "strategy") if k in rows[0]] + \
               [column, "donothing_threshold"]
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


_TABLE_ROWS = (
    ("Average travel duration", "avg_travel_s", "hms"),
    ("Average wait duration", "avg_wait_s", "hms"),
    ("Average distance (km)", "avg_distance_km", "f2"),
    ("Average arrival of replacement vehicles", "avg_ta_s", "hms"),
    ("Replacement vehicles", "vehicles", "int"),
    ("Monetary cost Z1 (EUR)", "Z1", "f1"),
    ("Loyalty cost Z2 (EUR)", "Z2", "f1"),
    ("Total cost (EUR)", "total", "f1"),
)


def _fmt(v, kind):
    if kind == "hms":
        s = int(round(v))
        return f"{s // 3600}:{s % 3600 // 60:02d}:{s % 60:02d}"
    if kind == "int":
        return str(int(v))
    return f"{v:.{kind[1]}f}"


def report(rows) -> tuple:
    """Markdown table (metrics down, strategies across) and CSV for strategy rows."""
    if not rows:
        raise ValueError("report needs at least one strategy row")
    head = "| Measure | " + " | ".join(r["strategy"] for r in rows) + " |"
    sep = "|" + "---|" * (len(rows) + 1)
    lines = [head, sep]
    for label, key, kind in _TABLE_ROWS:
        lines.append(f"| {label} | " + " | ".join(_fmt(r[key], kind) for r in rows) + " |")
    return "\n".join(lines) + "\n", rows_csv(rows)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cost_drift(plan: ReallocationPlan, ctx: Context, params=None, volumes=None) -> float:
    """Largest gap between the solver's cost pieces and a fresh re-evaluation."""
    params = params or ctx.params
    volumes = volumes or ctx.volumes
    again = cost_breakdown(list(plan.selected), volumes, ctx.partition.td, params,
                           ctx.model.mode_by_kind)
    return max(abs(again.z1 - plan.cost.z1), abs(again.z2 - plan.cost.z2),
               abs(again.total - plan.objective))
