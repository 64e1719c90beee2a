"""Disruption partitioning, routing and candidate-vehicle generation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import networkx as nx

from .costs import CandidateVehicle, blocked_volume
from .model import (CostParams, DisruptionSpec, ModeKind, ScenarioModel, ScenarioError,
                    UnknownLink, validate_disruption)

log = logging.getLogger(__name__)


class NoPathError(ScenarioError):
    pass


@dataclass(frozen=True)
class ModeSets:
    disrupted: frozenset  # I
    destinations: frozenset  # J
    undisrupted: frozenset  # I bar
    other_destinations: frozenset  # J bar


@dataclass(frozen=True)
class StationPartition:
    disruption: DisruptionSpec
    sets: dict  # ModeKind -> ModeSets
    pi: frozenset  # affected (i, j) pairs of the disrupted mode
    od_pairs: tuple

    @property
    def mode(self) -> ModeKind:
        return self.disruption.mode

    def pi_flag(self, i: str, j: str) -> int:
        return int((i, j) in self.pi)

    @property
    def td(self) -> int:
        return self.disruption.duration


def _mode_pairs(model: ScenarioModel, kind: ModeKind) -> list:
    seen = []
    for l in model.links:
        if kind in l.modes and l.pair not in seen:
            seen.append(l.pair)
    return seen


def apply_disruption(model: ScenarioModel, d: DisruptionSpec) -> StationPartition:
    for pair in d.affected_links:
        if not model.links_between(pair[0], pair[1], d.mode):
            raise UnknownLink(pair, d.mode)
    validate_disruption(model, d)
    affected = tuple(dict.fromkeys(tuple(p) for p in d.affected_links))
    affected_set = frozenset(affected)
    sets = {}
    for m in model.modes:
        pairs = _mode_pairs(model, m.kind)
        if not pairs:
            continue
        serving = {s for p in pairs for s in p}
        hit = [p for p in pairs if p in affected_set] if m.kind == d.mode else \
              [p for p in pairs if p in affected_set and _shared_link(model, p, d.mode, m.kind)]
        I = frozenset(p[0] for p in hit)
        J = frozenset(p[1] for p in hit)
        sets[m.kind] = ModeSets(I, J, frozenset(serving - I),
                                frozenset(p[1] for p in pairs if p not in hit))
    return StationPartition(d, sets, affected_set, affected)


def _shared_link(model, pair, disrupted: ModeKind, other: ModeKind) -> bool:
    return any(disrupted in l.modes and other in l.modes for l in model.links_between(*pair))


# --------------------------------------------------------------------------
# routing
# --------------------------------------------------------------------------

def mode_graph(model: ScenarioModel, kind: ModeKind, blocked: frozenset = frozenset(),
               blocked_mode: ModeKind | None = None) -> nx.DiGraph:
    """Directed graph of links permitting ``kind``, weighted by length.

    Links whose (from, to) pair is in ``blocked`` are left out when they
    carry ``blocked_mode``; parallel links keep the shortest.
    """
    key = (kind, blocked, blocked_mode)
    # the model is frozen but its instance dict can hold derived data
    cache = model.__dict__.setdefault("_graph_cache", {})
    if key not in cache:
        cache[key] = _mode_graph(model, kind, blocked, blocked_mode)
    return cache[key]


def _mode_graph(model, kind, blocked, blocked_mode):
    g = nx.DiGraph()
    for l in model.links:
        if kind not in l.modes:
            continue
        if l.pair in blocked and (blocked_mode is None or blocked_mode in l.modes):
            continue
        cur = g.get_edge_data(l.source, l.target)
        if cur is None or l.length < cur["length"]:
            g.add_edge(l.source, l.target, length=l.length, link=l.id)
    return g


def shortest_path(g: nx.DiGraph, source: str, target: str) -> tuple:
    """Return ``(km, stations)``; raises :class:`NoPathError`."""
    if source == target:
        return 0.0, (source,)
    try:
        dist, path = nx.single_source_dijkstra(g, source, target, weight="length")
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise NoPathError(f"no path {source} -> {target}") from None
    return dist, tuple(path)


def snap_to_station(model: ScenarioModel, position, kind: ModeKind) -> str:
    g = mode_graph(model, kind)
    best = None
    for sid in sorted(g.nodes):
        s = model.station_by_id[sid]
        d = math.hypot(s.x - position[0], s.y - position[1])
        if best is None or d < best[0]:
            best = (d, sid)
    if best is None:
        raise NoPathError(f"no {kind.value} network to snap to")
    return best[1]


def vehicle_origin(model: ScenarioModel, vehicle) -> str:
    a = vehicle.assignment
    if a.kind == "line":
        return a.link[0]
    if a.station is not None:
        return a.station
    return snap_to_station(model, a.position, vehicle.mode)


# --------------------------------------------------------------------------
# demand aggregation
# --------------------------------------------------------------------------

def ride_segment(model: ScenarioModel, entry) -> tuple | None:
    line = model.line_for(entry.origin, entry.destination, entry.mode)
    if line is None:
        return None
    return line, line.segment(entry.origin, entry.destination)


def first_affected(segment, affected: frozenset):
    for a, b in zip(segment, segment[1:]):
        if (a, b) in affected:
            return (a, b)
    return None


def stranded_volumes(model: ScenarioModel, partition: StationPartition) -> dict:
    """Blocked passengers per disrupted pair over the disruption window.

    A demand entry counts toward the first affected link on its ride.
    """
    d = partition.disruption
    out = {p: 0.0 for p in partition.od_pairs}
    window = (d.start, d.end)
    for entry in model.demand:
        if entry.mode != d.mode:
            continue
        rs = ride_segment(model, entry)
        if rs is None:
            continue
        hit = first_affected(rs[1], partition.pi)
        if hit is not None:
            out[hit] += blocked_volume(entry, window)
    return out


def boarding_volume(model: ScenarioModel, line, station: str, start: int, headway_min: float) -> float:
    """Passengers boarding ``line`` at ``station`` during one headway from ``start``."""
    window = (start, start + headway_min * 60.0)
    total = 0.0
    for entry in model.demand:
        if entry.origin != station or entry.mode != line.mode:
            continue
        if model.line_for(entry.origin, entry.destination, entry.mode) is line:
            total += blocked_volume(entry, window)
    return total


# --------------------------------------------------------------------------
# candidates
# --------------------------------------------------------------------------

def candidate_vehicles(model: ScenarioModel, partition: StationPartition,
                       params: CostParams | None = None, skipped: list | None = None) -> list:
    """Vehicles eligible to bridge, each bound to the disrupted pair it reaches first.

    A scheduled vehicle is dropped when its line touches a disrupted link or
    its headway exceeds ``h_max``.  Vehicles that cannot reach a disrupted
    station, or cannot drive on to the destination, are dropped and reported
    through ``skipped`` as ``(vehicle_id, reason)``.
    """
    params = params or model.cost_params
    d = partition.disruption
    out = []
    paths: dict = {}

    def route(g, a, b):
        key = (id(g), a, b)
        if key not in paths:
            try:
                paths[key] = shortest_path(g, a, b)
            except NoPathError as exc:
                paths[key] = exc
        if isinstance(paths[key], NoPathError):
            raise paths[key]
        return paths[key]

    for v in model.vehicles:
        mode = model.mode_by_kind[v.mode]
        a = v.assignment
        line = model.line_by_id.get(a.line) if a.kind == "line" else None
        if line is not None:
            line_pairs = set(zip(line.stops, line.stops[1:]))
            if line.mode == d.mode and line_pairs & partition.pi:
                _skip(skipped, v.id, "line disrupted")
                continue
            if line.headway > params.h_max:
                _skip(skipped, v.id, "headway above threshold")
                continue
        g = mode_graph(model, v.mode, partition.pi, d.mode)
        try:
            origin = vehicle_origin(model, v)
        except NoPathError as exc:
            _skip(skipped, v.id, str(exc))
            continue
        best = None
        for pair in partition.od_pairs:
            try:
                d_ri, access = route(g, origin, pair[0])
                d_ij, service = route(g, pair[0], pair[1])
            except NoPathError:
                continue
            if best is None or d_ri < best[0]:
                best = (d_ri, pair, access, d_ij, service)
        if best is None:
            log.warning("vehicle %s cannot reach any disrupted station", v.id)
            _skip(skipped, v.id, "no path")
            continue
        d_ri, pair, access, d_ij, service = best
        source = tuple(a.link) if line is not None else None
        headway = line.headway if line is not None else None
        v_rs = boarding_volume(model, line, source[0], d.start, headway) if line is not None else 0.0
        out.append(CandidateVehicle(
            vehicle_id=v.id, mode=v.mode, pair=pair, d_ri=d_ri, d_ij=d_ij,
            ta=3600.0 * d_ri / mode.speed, capacity=model.capacity_of(v), speed=mode.speed,
            origin=origin, kind=a.kind, source=source, line=line.id if line else None,
            headway=headway, v_rs=v_rs, access_path=access, service_path=service))
    return out


def _skip(skipped, vid, reason):
    if skipped is not None:
        skipped.append((vid, reason))
