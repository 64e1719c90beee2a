"""Deterministic discrete-event mesoscopic simulator.

Agents walk to their origin station, ride one transit line and walk out.
Transit runs leave the first stop on their headway and move stop to stop;
link traversal times come from a volume-delay function fed by background
flow plus the vehicles entering the link in the current 300 s slice.

During a disruption, runs of the disrupted mode end at the origin of an
affected link and their riders are stranded there, as is anyone arriving at
that station to ride through it.  Each stranded agent draws once against the
leaving rate: leavers reroute over the remaining network, the rest queue for
the replacement vehicles of the plan, and whoever is still queued when the
disruption ends waits for the restored trains.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field

import networkx as nx

from .costs import leaving_rate
from .model import DisruptionSpec, ModeKind, ScenarioModel

WALK_SPEED = 4.8  # km/h
ACCESS_KM = 0.4
SLICE = 300  # s
VDF_A = 0.15
VDF_B = 4
# pedestrians use the road network
_WALKABLE = frozenset({ModeKind.BUS, ModeKind.TAXI, ModeKind.VAN})


class UnroutableAgent(Exception):
    pass


def vdf_factor(volume: float, capacity: float) -> float:
    return 1.0 + VDF_A * (volume / capacity) ** VDF_B


def link_travel_time(link, entering_volume: float) -> float:
    """Congested traversal time in seconds at the link's free-flow speed."""
    return 3600.0 * link.length / link.free_flow_speed * vdf_factor(
        entering_volume, link.capacity)


@dataclass
class AgentRecord:
    id: int
    origin: str
    destination: str
    mode: ModeKind
    depart: float
    end: float = math.nan
    state: str = "pending"  # arrived | rerouted | unserved once finished
    stranded: bool = False
    left: bool = False
    it: float = 0.0  # in system: waiting plus riding
    wt: float = 0.0  # walking
    wait: float = 0.0
    distance: float = 0.0
    # working state
    t_last: float = 0.0
    phase: str = "walk"
    leg: tuple | None = None  # (line id, board, alight)

    @property
    def tt(self) -> float:
        return self.it + self.wt


@dataclass
class VehicleTrack:
    id: str
    mode: ModeKind
    dispatch: float
    ta_sim: float = math.nan
    arrival: float = math.nan
    served: int = 0


@dataclass
class KpiReport:
    agents: list
    vehicles: dict
    trace: list | None = None
    meta: dict = field(default_factory=dict)

    def completed(self) -> list:
        return [a for a in self.agents if a.state in ("arrived", "rerouted")]

    def aggregates(self) -> dict:
        done = self.completed()
        n = len(done)

        def mean(f):
            return sum(f(a) for a in done) / n if n else 0.0

        states = {}
        for a in self.agents:
            states[a.state] = states.get(a.state, 0) + 1
        ta = measure_ta(self)
        return {
            "n_agents": len(self.agents),
            "completed": n,
            "states": dict(sorted(states.items())),
            "stranded": sum(a.stranded for a in self.agents),
            "leavers": sum(a.left for a in self.agents),
            "avg_tt": mean(lambda a: a.tt),
            "avg_it": mean(lambda a: a.it),
            "avg_wt": mean(lambda a: a.wt),
            "avg_wait": mean(lambda a: a.wait),
            "avg_distance_km": mean(lambda a: a.distance),
            "ta_sim_per_mode": ta["per_mode"],
            "avg_ta_sim": ta["mean"],
            **self.meta,
        }

    def agents_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "origin", "destination", "mode", "depart", "end", "state", "stranded",
                    "left", "tt", "it", "wt", "wait", "distance_km"])
        for a in self.agents:
            w.writerow([a.id, a.origin, a.destination, a.mode.value, repr(a.depart), repr(a.end),
                        a.state, int(a.stranded), int(a.left), repr(a.tt), repr(a.it),
                        repr(a.wt), repr(a.wait), repr(a.distance)])
        return buf.getvalue()

    def aggregates_json(self) -> str:
        agg = self.aggregates()
        agg["vehicles"] = {
            v.id: {"mode": v.mode.value, "dispatch": v.dispatch, "ta_sim": v.ta_sim,
                   "arrival": v.arrival, "served": v.served}
            for v in sorted(self.vehicles.values(), key=lambda v: v.id)
        }
        return json.dumps(agg, indent=2, sort_keys=True, allow_nan=True)

    def trace_ndjson(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in (self.trace or []))

    def to_bytes(self) -> bytes:
        return (self.agents_csv() + self.aggregates_json() + self.trace_ndjson()).encode("utf-8")

    def write(self, out_dir, prefix: str = "") -> None:
        from pathlib import Path
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{prefix}agents.csv").write_text(self.agents_csv(), encoding="utf-8")
        (out / f"{prefix}kpis.json").write_text(self.aggregates_json(), encoding="utf-8")
        if self.trace is not None:
            (out / f"{prefix}trace.ndjson").write_text(self.trace_ndjson(), encoding="utf-8")


def measure_ta(report: KpiReport) -> dict:
    """Per-vehicle and per-mode simulated arrival durations at the disrupted station."""
    per_vehicle = {v.id: v.ta_sim for v in report.vehicles.values() if not math.isnan(v.ta_sim)}
    sums: dict = {}
    for v in report.vehicles.values():
        if math.isnan(v.ta_sim):
            continue
        s = sums.setdefault(v.mode.value, [0.0, 0])
        s[0] += v.ta_sim
        s[1] += 1
    per_mode = {m: s[0] / s[1] for m, s in sorted(sums.items())}
    mean = sum(per_vehicle.values()) / len(per_vehicle) if per_vehicle else 0.0
    return {"per_vehicle": per_vehicle, "per_mode": per_mode, "mean": mean}


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------

_START, _AT_STATION, _RUN, _VEH, _DONE, _END = range(6)


class _Run:
    __slots__ = ("name", "line", "k", "onboard", "cap", "speed", "cut_at")

    def __init__(self, name, line, cap, speed, cut_at=None):
        self.name = name
        self.line = line
        self.k = 0
        self.onboard: list = []
        self.cap = cap
        self.speed = speed
        self.cut_at = cut_at


class _Replacement:
    __slots__ = ("cand", "track", "path", "k", "eff", "phase", "onboard", "t0")

    def __init__(self, cand, track):
        self.cand = cand
        self.track = track
        self.path = cand.access_path
        self.k = 0
        self.eff = 0.0
        self.phase = "access"
        self.onboard: list = []
        self.t0 = 0.0


class Simulator:
    def __init__(self, model: ScenarioModel, disruption: DisruptionSpec | None, plan=None,
                 seed: int = 0, trace: bool = False, leave_rates: dict | None = None):
        self.m = model
        self.d = disruption
        self.plan = plan
        self.rng = random.Random(seed)
        self.trace = [] if trace else None
        self.heap: list = []
        self.seq = 0
        self.counts: dict = {}
        self.queues: dict = {}  # (station, line id) -> deque of agents
        self.pair_queue: dict = {}
        self.dwelling: dict = {}
        self.agents: list = []
        self.tracks: dict = {}
        self.affected = frozenset(tuple(p) for p in disruption.affected_links) if disruption else frozenset()
        self.leave = leave_rates if leave_rates is not None else self._leave_rates()
        self._reroute_graph = None
        self._reroute_cache: dict = {}
        self._cut: dict = {}  # (line id, r) -> pending truncation
        self._line_links: dict = {}

    # ---- setup -------------------------------------------------------

    def _leave_rates(self) -> dict:
        if self.d is None:
            return {}
        p = self.m.cost_params
        sel = list(self.plan.selected) if self.plan is not None else []
        out = {}
        for pair in self.affected:
            mine = [c.ta for c in sel if c.pair == pair]
            if mine:
                out[pair] = leaving_rate(min(mine), self.d.duration, p.alpha, p.beta)
            else:
                out[pair] = 1.0 - p.beta
        return out

    def push(self, t, kind, payload):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, payload))

    def _seg_link(self, a, b, mode):
        key = (a, b, mode)
        if key not in self._line_links:
            cands = self.m.links_between(a, b, mode)
            if not cands:
                raise UnroutableAgent(f"no {mode.value} link {a}->{b}")
            self._line_links[key] = min(cands, key=lambda l: (l.length, l.id))
        return self._line_links[key]

    def _enter_link(self, link, t) -> float:
        key = (link.id, int(t // SLICE))
        n = self.counts.get(key, 0) + 1
        self.counts[key] = n
        return vdf_factor(link.background_flow + n * (3600.0 / SLICE), link.capacity)

    def _setup(self):
        m = self.m
        if self.d is not None:
            self.push(self.d.end, _END, None)
        aid = 0
        for e in m.demand:
            for b in e.bins:
                dur = b.end - b.start
                count = int(math.floor(b.rate * dur / 3600.0 + 0.5))
                for k in range(count):
                    t = b.start + (k + 0.5) * dur / count
                    a = AgentRecord(aid, e.origin, e.destination, e.mode, t, t_last=t)
                    self.agents.append(a)
                    self.push(t, _START, a)
                    aid += 1
        if self.plan is not None and self.d is not None:
            for key in {(c.line, c.source[0]) for c in self.plan.selected
                        if c.kind == "line" and c.source is not None}:
                self._cut[key] = True
            for c in self.plan.selected:
                tr = VehicleTrack(c.vehicle_id, c.mode, float(self.d.start))
                self.tracks[c.vehicle_id] = tr
                r = _Replacement(c, tr)
                r.t0 = float(self.d.start)
                self.push(float(self.d.start), _VEH, r)
        for line in m.lines:
            mode = m.mode_by_kind[line.mode]
            t = float(line.service_window[0])
            k = 0
            while t <= line.service_window[1]:
                run = _Run(f"{line.id}#{k}", line, mode.capacity, mode.speed)
                self.push(t, _RUN, run)
                k += 1
                t = line.service_window[0] + k * line.headway * 60.0

    # ---- agent bookkeeping --------------------------------------------

    def _advance(self, a, t):
        dt = t - a.t_last
        if a.phase == "walk":
            a.wt += dt
        else:
            a.it += dt
            if a.phase == "wait":
                a.wait += dt
        a.t_last = t

    def _log(self, t, event, **kw):
        if self.trace is not None:
            self.trace.append({"t": t, "event": event, **kw})

    def _finish(self, a, t, state):
        self._advance(a, t)
        a.end = t
        a.state = state
        a.phase = "done"

    def _walk_out(self, a, t):
        self._advance(a, t)
        a.phase = "walk"
        a.distance += ACCESS_KM
        self.push(t + 3600.0 * ACCESS_KM / WALK_SPEED, _DONE, a)

    def _enter_station(self, a, station, t):
        self._advance(a, t)
        if station == a.destination:
            self._walk_out(a, t)
            return
        line = self.m.line_for(station, a.destination, a.mode)
        if line is None:
            self._finish(a, t, "unserved")
            return
        a.leg = (line.id, station, a.destination)
        a.phase = "wait"
        seg = line.segment(station, a.destination)
        if self._blocked(line, seg[0], seg[1], t):
            self._strand(a, (seg[0], seg[1]), t)
            return
        self.queues.setdefault((station, line.id), deque()).append(a)

    def _blocked(self, line, a, b, t) -> bool:
        return (self.d is not None and line.mode == self.d.mode and (a, b) in self.affected
                and self.d.start <= t < self.d.end)

    def _strand(self, a, pair, t):
        self._advance(a, t)
        a.stranded = True
        a.phase = "wait"
        u = self.rng.random()
        self._log(t, "strand", agent=a.id, station=pair[0], leave=u < self.leave[pair])
        if u < self.leave[pair]:
            a.left = True
            self._reroute(a, pair[0], t)
            return
        for veh in self.dwelling.get(pair, []):
            if len(veh.onboard) < veh.cand.capacity:
                self._board_replacement(veh, a, t)
                if len(veh.onboard) >= veh.cand.capacity:
                    self._depart_replacement(veh, t)
                return
        self.pair_queue.setdefault(pair, deque()).append(a)

    # ---- rerouting ----------------------------------------------------

    def _graph(self):
        if self._reroute_graph is not None:
            return self._reroute_graph
        g = nx.DiGraph()

        def add(u, v, **w):
            cur = g.get_edge_data(u, v)
            if cur is None or w["time"] < cur["time"]:
                g.add_edge(u, v, **w)

        for l in self.m.links:
            if not l.modes & _WALKABLE:
                continue
            add(l.source, l.target, time=3600.0 * l.length / WALK_SPEED, walk=3600.0 * l.length / WALK_SPEED,
                wait=0.0, ride=0.0, km=l.length)
        for line in self.m.lines:
            speed = self.m.mode_by_kind[line.mode].speed
            stops = line.stops
            for x in range(len(stops) - 1):
                ride = 0.0
                km = 0.0
                for y in range(x + 1, len(stops)):
                    a, b = stops[y - 1], stops[y]
                    if line.mode == (self.d.mode if self.d else None) and (a, b) in self.affected:
                        break
                    l = self._seg_link(a, b, line.mode)
                    ride += 3600.0 * l.length / min(speed, l.free_flow_speed)
                    km += l.length
                    wait = line.headway * 30.0
                    add(stops[x], stops[y], time=wait + ride, walk=0.0, wait=wait, ride=ride, km=km)
        self._reroute_graph = g
        return g

    def _reroute(self, a, station, t):
        g = self._graph()
        if station not in self._reroute_cache:
            if station in g:
                _, paths = nx.single_source_dijkstra(g, station, weight="time")
            else:
                paths = {station: [station]}
            self._reroute_cache[station] = paths
        path = self._reroute_cache[station].get(a.destination)
        if path is None:
            self._finish(a, t, "unserved")
            return
        walk = wait = ride = km = 0.0
        for u, v in zip(path, path[1:]):
            e = g[u][v]
            walk += e["walk"]
            wait += e["wait"]
            ride += e["ride"]
            km += e["km"]
        a.t_last = t
        a.wt += walk + 3600.0 * ACCESS_KM / WALK_SPEED
        a.it += wait + ride
        a.wait += wait
        a.distance += km + ACCESS_KM
        a.end = t + walk + wait + ride + 3600.0 * ACCESS_KM / WALK_SPEED
        a.state = "rerouted"
        a.phase = "done"

    # ---- transit runs -------------------------------------------------

    def _run_stop(self, run, t):
        line = run.line
        stop = line.stops[run.k]
        last = run.k == len(line.stops) - 1
        keep = []
        left = len(run.onboard)
        for a in run.onboard:
            if a.leg[2] == stop:
                left -= 1
                self._walk_out(a, t)
                self._log(t, "alight", vehicle=run.name, station=stop, agent=a.id, onboard=left)
            else:
                keep.append(a)
        run.onboard = keep
        if last:
            return
        nxt = line.stops[run.k + 1]
        q = self.queues.get((stop, line.id))
        if self._blocked(line, stop, nxt, t):
            stranded = run.onboard
            run.onboard = []
            self._log(t, "terminate", vehicle=run.name, station=stop, onboard=0)
            for a in stranded:
                self._strand(a, (stop, nxt), t)
            while q:
                self._strand(q.popleft(), (stop, nxt), t)
            return
        cut_key = (line.id, stop)
        if self.d is not None and t >= self.d.start and self._cut.get(cut_key):
            # this stop's vehicle was pulled away: one departure is skipped
            self._cut[cut_key] = False
            for a in run.onboard:
                self._advance(a, t)
                a.phase = "wait"
                a.leg = (line.id, stop, a.leg[2])
                self.queues.setdefault((stop, line.id), deque()).append(a)
            run.onboard = []
            self._log(t, "truncate", vehicle=run.name, station=stop, onboard=0)
            return
        while q and len(run.onboard) < run.cap:
            a = q.popleft()
            self._advance(a, t)
            a.phase = "ride"
            run.onboard.append(a)
            self._log(t, "board", vehicle=run.name, station=stop, agent=a.id,
                      onboard=len(run.onboard), capacity=run.cap)
        link = self._seg_link(stop, nxt, line.mode)
        f = self._enter_link(link, t)
        for a in run.onboard:
            a.distance += link.length
        dt = 3600.0 * link.length / min(run.speed, link.free_flow_speed) * f
        run.k += 1
        self.push(t + dt, _RUN, run)

    # ---- replacement vehicles -----------------------------------------

    def _veh_step(self, r, t):
        c = r.cand
        path = r.path
        if r.k < len(path) - 1:
            a, b = path[r.k], path[r.k + 1]
            link = self._seg_link(a, b, c.mode)
            f = self._enter_link(link, t)
            v = min(c.speed, link.free_flow_speed)
            r.eff += link.length * f * (c.speed / v)
            if r.phase == "service":
                for ag in r.onboard:
                    ag.distance += link.length
            r.k += 1
            self.push(r.t0 + 3600.0 * r.eff / c.speed, _VEH, r)
            return
        if r.phase == "access":
            r.track.ta_sim = 3600.0 * r.eff / c.speed
            r.track.arrival = t
            self._log(t, "arrive", vehicle=c.vehicle_id, station=path[-1], onboard=0,
                      ta_sim=r.track.ta_sim)
            if t >= self.d.end:
                return
            q = self.pair_queue.get(c.pair)
            while q and len(r.onboard) < c.capacity:
                self._board_replacement(r, q.popleft(), t)
            if len(r.onboard) >= c.capacity:
                self._depart_replacement(r, t)
            else:
                self.dwelling.setdefault(c.pair, []).append(r)
            return
        # service leg finished at the destination of the disrupted pair
        for ag in r.onboard:
            self._enter_station(ag, path[-1], t)
        self._log(t, "unload", vehicle=c.vehicle_id, station=path[-1], onboard=0)
        r.onboard = []

    def _board_replacement(self, r, a, t):
        self._advance(a, t)
        a.phase = "ride"
        r.onboard.append(a)
        r.track.served += 1
        self._log(t, "board", vehicle=r.cand.vehicle_id, station=r.cand.pair[0], agent=a.id,
                  onboard=len(r.onboard), capacity=r.cand.capacity)

    def _depart_replacement(self, r, t):
        lst = self.dwelling.get(r.cand.pair)
        if lst and r in lst:
            lst.remove(r)
        r.phase = "service"
        r.path = r.cand.service_path
        r.k = 0
        r.eff = 0.0
        r.t0 = t
        self.push(t, _VEH, r)

    def _end(self, t):
        for pair in sorted(self.dwelling):
            for r in list(self.dwelling[pair]):
                self._depart_replacement(r, t)
        for pair in sorted(self.pair_queue):
            q = self.pair_queue[pair]
            while q:
                a = q.popleft()
                self._enter_station(a, pair[0], t)

    # ---- main loop ----------------------------------------------------

    def run(self) -> KpiReport:
        self._setup()
        while self.heap:
            t, _, kind, obj = heapq.heappop(self.heap)
            if kind == _START:
                obj.phase = "walk"
                obj.distance += ACCESS_KM
                self.push(t + 3600.0 * ACCESS_KM / WALK_SPEED, _AT_STATION, obj)
            elif kind == _AT_STATION:
                self._enter_station(obj, obj.origin, t)
            elif kind == _RUN:
                self._run_stop(obj, t)
            elif kind == _VEH:
                self._veh_step(obj, t)
            elif kind == _DONE:
                self._finish(obj, t, "arrived")
            elif kind == _END:
                self._end(t)
        horizon = max((a.t_last for a in self.agents), default=0.0)
        for a in self.agents:
            if a.phase != "done":
                self._finish(a, max(a.t_last, horizon), "unserved")
        meta = {"leave_rates": {f"{p[0]}->{p[1]}": r for p, r in sorted(self.leave.items())}}
        return KpiReport(self.agents, self.tracks, self.trace, meta)


def run(model: ScenarioModel, disruption: DisruptionSpec | None, plan=None, seed: int = 0,
        trace: bool = False) -> KpiReport:
    """Simulate one day.  ``disruption=None`` gives the undisrupted baseline."""
    return Simulator(model, disruption, plan, seed, trace).run()
