import pytest

from raas.model import DisruptionSpec, ModeKind, UnknownLink
from raas.network import apply_disruption, candidate_vehicles, stranded_volumes
from raas.synth import synth_corridor

from tiny import corridor


def test_single_affected_link():
    m = corridor()
    p = apply_disruption(m, m.disruption)
    s = p.sets[ModeKind.RAIL]
    assert s.disrupted == {"A"} and s.destinations == {"B"}
    assert p.pi_flag("A", "B") == 1 and p.pi_flag("B", "C") == 0


def test_empty_affected_set():
    m = corridor()
    p = apply_disruption(m, DisruptionSpec(ModeKind.RAIL, (), 25200, 7200))
    assert p.pi == frozenset()
    assert all(not s.disrupted for s in p.sets.values())


def test_consecutive_links():
    m = corridor()
    p = apply_disruption(m, DisruptionSpec(ModeKind.RAIL, (("A", "B"), ("B", "C")), 25200, 7200))
    s = p.sets[ModeKind.RAIL]
    assert s.disrupted == {"A", "B"} and s.destinations == {"B", "C"}


def test_partition_disjoint_and_covering():
    m = synth_corridor(1)
    p = apply_disruption(m, m.disruption)
    for kind, s in p.sets.items():
        serving = {x for l in m.links if kind in l.modes for x in l.pair}
        assert not (s.disrupted & s.undisrupted)
        assert s.disrupted | s.undisrupted == serving


def test_unknown_link():
    m = corridor()
    with pytest.raises(UnknownLink):
        apply_disruption(m, DisruptionSpec(ModeKind.RAIL, (("A", "D"),), 25200, 7200))


def _ids(m):
    skipped = []
    cands = candidate_vehicles(m, apply_disruption(m, m.disruption), skipped=skipped)
    return {c.vehicle_id for c in cands}, dict(skipped)


def test_headway_above_threshold_excluded():
    ids, skipped = _ids(corridor(bus_headway=20))
    assert "BX-0" not in ids and "headway" in skipped["BX-0"]


def test_headway_at_threshold_included():
    ids, _ = _ids(corridor(bus_headway=15))
    assert {"BX-0", "TX-0", "DEP-0"} <= ids


def test_own_line_excluded():
    m = synth_corridor(1)
    p = apply_disruption(m, m.disruption)
    cands = candidate_vehicles(m, p)
    assert not any(c.line in ("RER", "RER-r") for c in cands)
    for c in cands:
        assert c.source is None or p.pi_flag(*c.source) == 0
        assert c.headway is None or c.headway <= m.cost_params.h_max


def test_candidate_geometry():
    m = corridor()
    cands = {c.vehicle_id: c for c in candidate_vehicles(m, apply_disruption(m, m.disruption))}
    dep = cands["DEP-0"]
    assert (dep.d_ri, dep.d_ij, dep.pair) == (3.0, 10.0, ("A", "B"))
    assert dep.ta == pytest.approx(3600 * 3.0 / 20.0)
    tx = cands["TX-0"]
    assert tx.d_ri == 5.0 and tx.source is None
    bus = cands["BX-0"]
    assert bus.source == ("D", "A") and bus.line == "BX"


def test_stranded_volume():
    m = corridor(rail_rate=150.0)
    v = stranded_volumes(m, apply_disruption(m, m.disruption))
    assert v == {("A", "B"): 300.0}


def test_synth_volume_300():
    m = synth_corridor(1)
    v = stranded_volumes(m, apply_disruption(m, m.disruption))
    assert sum(v.values()) == pytest.approx(300.0)
