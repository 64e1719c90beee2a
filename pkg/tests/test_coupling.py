import pytest

from raas.coupling import FACTOR_MAX, FACTOR_MIN, fixed_point, iteration_log_csv, relative_gap

from tiny import corridor


def test_uncongested_converges_immediately():
    m = corridor(road_cap=1e9)
    plan, _, records = fixed_point(m)
    assert plan.count > 0
    assert len(records) == 1
    assert records[0].gap == 0.0 and records[0].converged


def test_max_iter_one_on_congested_network():
    m = corridor(bg=1100.0)
    _, _, records = fixed_point(m, max_iter=1)
    assert len(records) == 1
    assert not records[0].converged and records[0].gap > 0.05


def test_congested_loop_properties():
    m = corridor(bg=1100.0)
    plan, _, records = fixed_point(m, tol=0.05, max_iter=20)
    assert records[-1].converged
    assert plan.objective == min(r.objective for r in records)
    for r in records:
        assert all(FACTOR_MIN <= f <= FACTOR_MAX for f in r.speed_factors.values())
    log = iteration_log_csv(records).splitlines()
    assert log[0].startswith("i,") and len(log) == len(records) + 1


def test_relative_gap():
    assert relative_gap({"Bus": 600.0}, {"Bus": 660.0}) == pytest.approx(0.1)
    assert relative_gap({"Taxi": 10.0}, {"Taxi": 16.0}) == pytest.approx(0.1)
    assert relative_gap({}, {}) == 0.0


def test_bad_arguments():
    m = corridor()
    with pytest.raises(ValueError):
        fixed_point(m, tol=0)
    with pytest.raises(ValueError):
        fixed_point(m, max_iter=0)
