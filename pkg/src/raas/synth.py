"""Seeded synthetic rail corridor with crossing bus lines and free fleets."""
from __future__ import annotations

import random
from dataclasses import dataclass

import networkx as nx

from .model import (Assignment, CostParams, DemandBin, DemandEntry, DisruptionSpec, Link, Mode,
                    ModeKind, ScenarioModel, Station, TransitLine, Vehicle, validate)

ROAD = frozenset({ModeKind.BUS, ModeKind.TAXI, ModeKind.VAN})
RAIL = frozenset({ModeKind.RAIL})
HEADWAYS = (5, 10, 15, 20)

DEFAULT_MODES = (
    Mode(ModeKind.RAIL, 0.12, 0.0, 400, 60.0),
    Mode(ModeKind.BUS, 0.454, 0.0, 70, 20.0),
    Mode(ModeKind.TAXI, 2.2, 1.72, 4, 30.0),
    Mode(ModeKind.VAN, 0.36, 0.0, 8, 25.0),
)


@dataclass(frozen=True)
class CorridorSpec:
    n_stations: int = 47
    trunk_m: int = 80_000
    gap_m: int = 12_000  # the long middle link that gets disrupted
    n_crossings: int = 4
    crossing_stops: int = 4  # per side of the trunk
    n_taxis: int = 240
    n_vans: int = 120
    n_hubs: int = 2
    hub_m: int = 6_000
    n_depot_buses: int = 16
    depot_m: int = 22_000
    through_rate: float = 150.0  # passengers/h over the gap during the peak
    rail_headway: float = 10.0
    disruption_start: int = 7 * 3600
    disruption_duration: int = 7200
    congestion: float = 0.9  # background v/c on roads around the gap origin


def _spacings(rng: random.Random, count: int, total: int, lo: int, hi: int) -> list:
    """``count`` integer spacings in [lo, hi]-ish summing exactly to ``total``."""
    w = [rng.uniform(lo, hi) for _ in range(count)]
    scale = total / sum(w)
    out = [int(x * scale) for x in w]
    for k in range(total - sum(out)):
        out[k % count] += 1
    return out


def _bins(peak: float, shoulder: float) -> tuple:
    h = 3600
    return (DemandBin(6 * h, 7 * h, shoulder), DemandBin(7 * h, 9 * h, peak),
            DemandBin(9 * h, 10 * h, shoulder))


def synth_corridor(seed: int = 1, spec: CorridorSpec | None = None) -> ScenarioModel:
    spec = spec or CorridorSpec()
    if spec.n_stations < 4:
        raise ValueError("corridor needs at least 4 stations")
    rng = random.Random(seed)
    n = spec.n_stations
    gap = n // 2  # link T[gap] -> T[gap+1]
    spacing = _spacings(rng, n - 2, spec.trunk_m - spec.gap_m, 800, 2600)
    spacing.insert(gap, spec.gap_m)
    ids = [f"T{k:02d}" for k in range(n)]
    xs = [0]
    for s in spacing:
        xs.append(xs[-1] + s)
    stations = [Station(ids[k], f"Trunk {k}", float(xs[k]), 0.0) for k in range(n)]
    i_id, j_id = ids[gap], ids[gap + 1]
    links: list = []
    lengths: dict = {}

    def add_link(a, b, metres, modes, ffs, cap, bg=0.0):
        km = round(metres / 1000.0, 3)
        links.append(Link(f"{'R' if modes == RAIL else 'W'}:{a}-{b}", a, b, km, ffs, cap,
                          modes, bg))
        lengths[(a, b)] = km

    near_i = set()
    for k in range(n - 1):
        a, b = ids[k], ids[k + 1]
        add_link(a, b, spacing[k], RAIL, 90.0, 30.0)
        add_link(b, a, spacing[k], RAIL, 90.0, 30.0)
    # crossing bus corridors around both ends of the gap
    cross_at = [gap - 2, gap, gap + 1, gap + 3][:spec.n_crossings]
    while len(cross_at) < spec.n_crossings:
        cross_at.append(min(n - 1, cross_at[-1] + 2))
    lines: list = []
    corridors = []
    for c, k in enumerate(cross_at):
        north = _spacings(rng, spec.crossing_stops, spec.crossing_stops * 1400, 1000, 1800)
        south = _spacings(rng, spec.crossing_stops, spec.crossing_stops * 1400, 1000, 1800)
        x = xs[k]
        nids, sids = [], []
        y = 0
        for q, d in enumerate(north):
            y += d
            sid = f"C{c}N{q + 1}"
            stations.append(Station(sid, f"Crossing {c} north {q + 1}", float(x), float(y)))
            nids.append((sid, d))
        y = 0
        for q, d in enumerate(south):
            y -= d
            sid = f"C{c}S{q + 1}"
            stations.append(Station(sid, f"Crossing {c} south {q + 1}", float(x), float(y)))
            sids.append((sid, d))
        chain = [s for s, _ in reversed(nids)] + [ids[k]] + [s for s, _ in sids]
        gaps = [d for _, d in reversed(nids)] + [d for _, d in sids]
        corridors.append((chain, gaps))
        headway = float(rng.choice(HEADWAYS))
        lines.append(TransitLine(f"B{c}a", ModeKind.BUS, tuple(chain), headway, (5 * 3600, 23 * 3600)))
        lines.append(TransitLine(f"B{c}b", ModeKind.BUS, tuple(reversed(chain)), headway,
                                 (5 * 3600, 23 * 3600)))
        if k == gap:
            near_i.update(chain[len(nids) - 1:len(nids) + 2])
    near_i.update({ids[gap - 1], ids[gap]})
    # roads: parallel to the trunk and along every crossing
    road_pairs = []
    for k in range(n - 1):
        road_pairs.append((ids[k], ids[k + 1], spacing[k]))
    for chain, gaps in corridors:
        for a, b, d in zip(chain, chain[1:], gaps):
            road_pairs.append((a, b, d))
    # depot and van hubs hang off the gap origin's neighbourhood
    depot = "DEPOT"
    stations.append(Station(depot, "Bus depot", float(xs[gap]), float(-spec.depot_m)))
    road_pairs.append((depot, i_id, spec.depot_m))
    hub_ids = []
    hub_anchor = [ids[gap - 1], corridors[cross_at.index(gap)][0][spec.crossing_stops - 1]] \
        if gap in cross_at else [ids[gap - 1]] * spec.n_hubs
    for h in range(spec.n_hubs):
        anchor = hub_anchor[h % len(hub_anchor)]
        hid = f"HUB{h + 1}"
        hub_ids.append(hid)
        a = next(s for s in stations if s.id == anchor)
        stations.append(Station(hid, f"Van hub {h + 1}", a.x - 3000.0 * (h + 1), a.y + 2000.0))
        road_pairs.append((hid, anchor, 0))  # length fixed below
    g_tmp = nx.Graph()
    for a, b, d in road_pairs:
        if d:
            g_tmp.add_edge(a, b, length=d)
    for h, hid in enumerate(hub_ids):
        anchor = hub_anchor[h % len(hub_anchor)]
        rest = nx.shortest_path_length(g_tmp, anchor, i_id, weight="length")
        road_pairs = [(a, b, d if (a, b) != (hid, anchor) else max(500, spec.hub_m - rest))
                      for a, b, d in road_pairs]
    for a, b, d in road_pairs:
        busy = a in near_i or b in near_i or depot in (a, b)
        cap = 1200.0
        bg = spec.congestion * cap if busy else 0.15 * cap
        ffs = 50.0 if (a, b) != (i_id, j_id) else 70.0
        add_link(a, b, d, ROAD, ffs, cap, bg)
        add_link(b, a, d, ROAD, ffs, cap, bg)
    rail_line = TransitLine("RER", ModeKind.RAIL, tuple(ids), spec.rail_headway, (5 * 3600, 23 * 3600))
    rail_back = TransitLine("RER-r", ModeKind.RAIL, tuple(reversed(ids)), spec.rail_headway,
                            (5 * 3600, 23 * 3600))
    lines = [rail_line, rail_back] + lines

    # vehicles
    bus_mode = DEFAULT_MODES[1]
    vehicles = []
    for line in lines:
        if line.mode != ModeKind.BUS:
            continue
        seg_t = [lengths[(a, b)] / bus_mode.speed * 60.0 for a, b in zip(line.stops, line.stops[1:])]
        run = sum(seg_t)
        count = max(1, round(run / line.headway))
        for b in range(count):
            offset = b * line.headway
            acc = 0.0
            seg = 0
            while seg < len(seg_t) - 1 and acc + seg_t[seg] <= offset:
                acc += seg_t[seg]
                seg += 1
            link = (line.stops[seg], line.stops[seg + 1])
            vehicles.append(Vehicle(f"{line.id}-{b}", ModeKind.BUS, Assignment("line", line.id, link)))
    for b in range(spec.n_depot_buses):
        vehicles.append(Vehicle(f"DEP-{b:02d}", ModeKind.BUS, Assignment("depot", station=depot)))
    road = nx.DiGraph()
    for l in links:
        if ModeKind.TAXI in l.modes:
            road.add_edge(l.source, l.target, length=l.length)
    dist_to_i = nx.single_source_dijkstra_path_length(road.reverse(copy=False), i_id, weight="length")
    ranks = sorted(s for s, d in dist_to_i.items() if 1.0 <= d <= 4.0 and s not in hub_ids
                   and s != depot)
    weights = [rng.uniform(0.5, 1.5) for _ in ranks]
    per = [int(spec.n_taxis * w / sum(weights)) for w in weights]
    for k in range(spec.n_taxis - sum(per)):
        per[k % len(per)] += 1
    for rank, cnt in zip(ranks, per):
        for t in range(cnt):
            vehicles.append(Vehicle(f"TX-{rank}-{t:02d}", ModeKind.TAXI, Assignment("free", station=rank)))
    for h, hid in enumerate(hub_ids):
        cnt = spec.n_vans // spec.n_hubs + (1 if h < spec.n_vans % spec.n_hubs else 0)
        for t in range(cnt):
            vehicles.append(Vehicle(f"AV-{hid}-{t:02d}", ModeKind.VAN, Assignment("free", station=hid)))

    # demand: through trips over the gap plus modest background
    demand = []
    origins = ids[max(0, gap - 4):gap + 1]
    dests = ids[gap + 1:min(n, gap + 6)]
    pairs = [(o, d) for o in origins for d in dests]
    w = [rng.uniform(0.5, 1.5) for _ in pairs]
    rates = [round(spec.through_rate * x / sum(w), 3) for x in w]
    rates[-1] = round(spec.through_rate - sum(rates[:-1]), 3)
    for (o, d), r in zip(pairs, rates):
        demand.append(DemandEntry(o, d, ModeKind.RAIL, _bins(r, round(0.4 * r, 3))))
    for _ in range(6):
        if rng.random() < 0.5:
            a, b = sorted(rng.sample(range(0, gap), 2))
        else:
            a, b = sorted(rng.sample(range(gap + 1, n), 2))
        r = round(rng.uniform(5, 15), 3)
        demand.append(DemandEntry(ids[a], ids[b], ModeKind.RAIL, _bins(r, round(0.4 * r, 3))))
    for line in lines:
        if line.mode != ModeKind.BUS:
            continue
        for _ in range(2):
            a, b = sorted(rng.sample(range(len(line.stops)), 2))
            r = round(rng.uniform(10, 30), 3)
            demand.append(DemandEntry(line.stops[a], line.stops[b], ModeKind.BUS,
                                      _bins(r, round(0.4 * r, 3))))
    merged: dict = {}
    for e in demand:
        key = (e.origin, e.destination, e.mode)
        if key in merged:
            old = merged[key]
            merged[key] = DemandEntry(e.origin, e.destination, e.mode, tuple(
                DemandBin(x.start, x.end, round(x.rate + y.rate, 3)) for x, y in zip(old.bins, e.bins)))
        else:
            merged[key] = e
    disruption = DisruptionSpec(ModeKind.RAIL, ((i_id, j_id),), spec.disruption_start,
                                spec.disruption_duration)
    model = ScenarioModel(tuple(stations), tuple(links), DEFAULT_MODES, tuple(lines),
                          tuple(vehicles), tuple(merged.values()), CostParams(), disruption)
    validate(model)
    return model
