"""Random reallocation instances shared by optimizer tests."""
from __future__ import annotations

import random

from raas.costs import CandidateVehicle
from raas.model import CostParams, Mode, ModeKind

MODES = {
    ModeKind.BUS: Mode(ModeKind.BUS, 0.454, 0.0, 70, 20.0),
    ModeKind.TAXI: Mode(ModeKind.TAXI, 2.2, 1.72, 4, 30.0),
    ModeKind.VAN: Mode(ModeKind.VAN, 0.36, 0.0, 8, 25.0),
}


def random_instance(seed: int, max_n: int = 12, dup: float = 0.3):
    """Mixed-mode candidates with random distances, arrival times and sources.

    ``dup`` is the chance a candidate copies the previous one's attributes, so
    the symmetric-group path of the search is exercised.
    """
    rng = random.Random(seed)
    n_pairs = rng.choice([1, 1, 2])
    pairs = [("I%d" % k, "J%d" % k) for k in range(n_pairs)]
    td = rng.choice([3600, 5400, 7200])
    volumes = {p: float(rng.choice([0, 20, 60, 100, 300, 500])) for p in pairs}
    n = rng.randint(0, max_n)
    # headway and boarding volume belong to the line link, not the vehicle
    links = [("L%d" % k, ("R%d" % k, "S%d" % k), float(rng.choice([5, 10, 15])),
              float(rng.randint(0, 40))) for k in range(3)]
    cands = []
    prev = None
    for k in range(n):
        if prev is not None and rng.random() < dup:
            c = CandidateVehicle(**{**prev.__dict__, "vehicle_id": "v%02d" % k})
        else:
            mode = rng.choice(list(MODES))
            m = MODES[mode]
            d_ri = round(rng.uniform(0, 40), 3)
            kind, line, source, headway, v_rs = "free", None, None, None, 0.0
            if mode == ModeKind.BUS:
                kind = rng.choice(["line", "line", "depot"])
                if kind == "line":
                    line, source, headway, v_rs = rng.choice(links)
            c = CandidateVehicle(
                vehicle_id="v%02d" % k, mode=mode, pair=rng.choice(pairs), d_ri=d_ri,
                d_ij=round(rng.uniform(1, 15), 3), ta=3600.0 * d_ri / m.speed,
                capacity=m.capacity, speed=m.speed, origin="o", kind=kind, source=source,
                line=line, headway=headway, v_rs=v_rs)
        cands.append(c)
        prev = c
    rng.shuffle(cands)
    params = CostParams(alpha=rng.choice([0.1, 0.3]), ca_rate=rng.choice([0.2, 0.6]))
    return cands, volumes, float(td), params
