import json

import pytest

from raas.cli import main
from raas.model import dump_scenario

from tiny import corridor


@pytest.fixture()
def scenario(tmp_path):
    path = tmp_path / "tiny.json"
    dump_scenario(corridor(), path)
    return path


def test_validate_ok(scenario, capsys):
    assert main(["validate", str(scenario)]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_bad(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    doc = json.loads(json.dumps({"schema_version": 1}))
    bad.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["validate", str(bad)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_synth_roundtrip(tmp_path):
    out = tmp_path / "c.json"
    assert main(["synth", "--seed", "3", "--out", str(out)]) == 0
    assert main(["validate", str(out)]) == 0


def test_run_writes_table(scenario, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--scenario", str(scenario), "--strategy", "Normal,DoNothing,RaaS",
                 "--out", str(out)]) == 0
    md = capsys.readouterr().out
    assert md.startswith("| Measure | Normal | DoNothing | RaaS |")
    assert (out / "table.md").read_text(encoding="utf-8") == md
    assert (out / "table.csv").exists()


def test_run_usage_errors(scenario):
    assert main(["run", "--scenario", str(scenario), "--strategy", ""]) == 2
    assert main(["run", "--scenario", str(scenario), "--strategy", "Teleport"]) == 2
    assert main(["run", "--scenario", str(scenario)]) == 2
    assert main([]) == 2


def test_sweep_and_couple(scenario, tmp_path, capsys):
    assert main(["sweep", "--scenario", str(scenario), "--param", "ca_rate", "--values", "0.1,1",
                 "--volume", "100", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "fig7_v100.csv").exists()
    assert main(["sweep", "--scenario", str(scenario), "--param", "alpha", "--values", "x"]) == 2
    capsys.readouterr()
    assert main(["couple", "--scenario", str(scenario), "--out", str(tmp_path / "c")]) == 0
    last = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert last["converged"] is True
    assert (tmp_path / "c" / "iterations.csv").exists()


def test_internal_error_exit_code(scenario, monkeypatch):
    import raas.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "load_scenario", boom)
    assert main(["validate", str(scenario)]) == 3
