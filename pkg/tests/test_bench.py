import pytest

from raas import bench
from raas.bench import Context, StrategyConfig, SweepSpec, cost_drift, report, run_strategy, sweep
from raas.model import ModeKind
from raas.synth import synth_corridor

from tiny import corridor


@pytest.fixture(scope="module")
def ctx():
    return Context(synth_corridor(1))


def test_strategy_filters(ctx):
    for kind in ("BusBridging", "TaxiBridging", "VanBridging"):
        cfg = StrategyConfig(kind)
        picked = [c for c in ctx.candidates if cfg.admits(c)]
        assert picked
        if kind == "BusBridging":
            assert all(c.mode == ModeKind.BUS and c.kind == "depot" for c in picked)
    with pytest.raises(ValueError):
        StrategyConfig("Teleport")


def test_cost_drift_small(ctx):
    for kind in bench.STRATEGIES[1:]:
        plan, _ = ctx.plan(StrategyConfig(kind))
        assert cost_drift(plan, ctx) < 1e-6


def test_report_table():
    rows = [run_strategy(corridor(), k) for k in ("Normal", "DoNothing", "RaaS")]
    md, csv_text = report(rows)
    lines = md.splitlines()
    assert lines[0] == "| Measure | Normal | DoNothing | RaaS |"
    assert all(line.count("|") == 5 for line in lines)
    assert csv_text.splitlines()[0].startswith("strategy,")
    assert rows[0]["Z2"] == 0.0 and rows[0]["total"] == 0.0
    with pytest.raises(ValueError):
        report([])


def test_run_strategy_outputs(tmp_path):
    run_strategy(corridor(), "RaaS", out_dir=tmp_path, trace=True)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"RaaS_agents.csv", "RaaS_kpis.json", "RaaS_trace.ndjson", "RaaS_plan.json",
            "RaaS_row.csv"} <= names


@pytest.mark.parametrize("param,values,files", [
    ("volume", (100, 300), {"fig5a.csv", "fig5b.csv"}),
    ("alpha", (0.1, 0.5), {"fig6.csv"}),
    ("ca_rate", (0.2, 1.0), {"fig7_v100.csv"}),
])
def test_sweep_files(tmp_path, param, values, files):
    spec = SweepSpec(param, values, volume=100 if param == "ca_rate" else None)
    rows = sweep(corridor(), spec, out_dir=tmp_path)
    assert len(rows) == len(values) * len(spec.strategies)
    assert {p.name for p in tmp_path.iterdir()} == files | {f"sweep_{param}.csv"}
    assert all(r["donothing_threshold"] > 0 for r in rows)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("speed", (1,))
    with pytest.raises(ValueError):
        SweepSpec("alpha", ())
    with pytest.raises(ValueError):
        SweepSpec("alpha", (float("nan"),))


def test_parallel_sweep_matches_serial(tmp_path):
    from raas.model import dump_scenario
    path = tmp_path / "c.json"
    dump_scenario(corridor(), path)
    spec = SweepSpec("volume", (50, 150, 250))
    assert sweep(str(path), spec, workers=2) == sweep(str(path), spec)
