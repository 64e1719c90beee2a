"""Scenario data model: stations, links, modes, lines, fleets, demand, disruption.

Scenario files are UTF-8 JSON.  Times are integer seconds from midnight,
distances are kilometres, demand rates are passengers per hour and headways
are minutes.  Every entity is validated on load and the resulting
:class:`ScenarioModel` is immutable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Base class for scenario problems."""


class ParseError(ScenarioError):
    """The file is not valid JSON or does not follow the scenario layout."""


class ValidationError(ScenarioError):
    """A named invariant is violated.

    ``rule`` is the dotted invariant name (``"Link.length"``) and ``entity``
    the offending id, when there is one.
    """

    def __init__(self, rule: str, entity: str | None = None, detail: str = ""):
        self.rule = rule
        self.entity = entity
        self.detail = detail
        msg = rule if entity is None else f"{rule} [{entity}]"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class UnknownLink(ValidationError):
    def __init__(self, pair, mode):
        super().__init__("DisruptionSpec.affected_links", f"{pair[0]}->{pair[1]}",
                         f"no link carries {mode.value}")
        self.pair = tuple(pair)


class ModeKind(str, Enum):
    RAIL = "Rail"
    SUBWAY = "Subway"
    TRAM = "Tram"
    BUS = "Bus"
    TAXI = "Taxi"
    VAN = "AutomatedVan"

    @property
    def scheduled(self) -> bool:
        return self in SCHEDULED_MODES


SCHEDULED_MODES = frozenset({ModeKind.RAIL, ModeKind.SUBWAY, ModeKind.TRAM, ModeKind.BUS})
FREE_MODES = frozenset({ModeKind.TAXI, ModeKind.VAN})


@dataclass(frozen=True)
class Station:
    id: str
    name: str
    x: float  # metres
    y: float


@dataclass(frozen=True)
class Link:
    id: str
    source: str
    target: str
    length: float  # km
    free_flow_speed: float  # km/h
    capacity: float  # vehicles/h
    modes: frozenset
    # general traffic not simulated as vehicles, vehicles/h
    background_flow: float = 0.0

    @property
    def pair(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class Mode:
    """Operating characteristics of one mode.

    The operating cost is affine in the trip distance so the taxi fare rule
    (``1.72 * distance + 2.2``) fits the same shape as flat per-km costs.
    """

    kind: ModeKind
    op_cost_base: float  # EUR / passenger.km
    op_cost_per_km: float
    capacity: int
    speed: float  # km/h

    def op_cost(self, distance: float) -> float:
        return self.op_cost_base + self.op_cost_per_km * distance


@dataclass(frozen=True)
class TransitLine:
    id: str
    mode: ModeKind
    stops: tuple
    headway: float  # minutes
    service_window: tuple  # (start s, end s)

    @cached_property
    def stop_index(self) -> dict:
        return {s: k for k, s in enumerate(self.stops)}

    def segment(self, origin: str, destination: str) -> tuple | None:
        """Stops from ``origin`` to ``destination`` along the line, or None."""
        a = self.stop_index.get(origin)
        b = self.stop_index.get(destination)
        if a is None or b is None or a >= b:
            return None
        return self.stops[a:b + 1]


@dataclass(frozen=True)
class Assignment:
    kind: str  # "line" | "free" | "depot"
    line: str | None = None
    link: tuple | None = None  # (r, s) for scheduled vehicles
    station: str | None = None
    position: tuple | None = None  # (x, y) metres, free vehicles only


@dataclass(frozen=True)
class Vehicle:
    id: str
    mode: ModeKind
    assignment: Assignment
    capacity: int | None = None


@dataclass(frozen=True)
class DemandBin:
    start: int
    end: int
    rate: float  # passengers/h


@dataclass(frozen=True)
class DemandEntry:
    origin: str
    destination: str
    mode: ModeKind
    bins: tuple


@dataclass(frozen=True)
class DisruptionSpec:
    mode: ModeKind
    affected_links: tuple  # ((i, j), ...)
    start: int
    duration: int  # seconds

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class CostParams:
    cl: float = 2.5  # EUR / passenger
    ct: float = 11.2  # EUR / passenger.hour
    p_min: float = 0.3
    p_max: float = 1.0
    ca_rate: float = 0.2
    alpha: float = 0.1
    beta: float = 0.1
    h_max: float = 15.0  # minutes
    theta: float = 0.2

    def validate(self) -> None:
        vals = (self.cl, self.ct, self.p_min, self.p_max, self.ca_rate, self.alpha,
                self.beta, self.h_max, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("CostParams.finite")
        if not 0 <= self.p_min <= self.p_max <= 1:
            raise ValidationError("CostParams.payment_rates")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1 and 0 <= self.theta <= 1):
            raise ValidationError("CostParams.rates")
        if self.alpha + self.beta > 1 + 1e-12:
            raise ValidationError("CostParams.alpha_beta")
        if self.h_max <= 0:
            raise ValidationError("CostParams.h_max")
        if self.cl < 0 or self.ct < 0 or self.ca_rate < 0:
            raise ValidationError("CostParams.nonnegative")


@dataclass(frozen=True)
class ScenarioModel:
    stations: tuple
    links: tuple
    modes: tuple
    lines: tuple
    vehicles: tuple
    demand: tuple
    cost_params: CostParams = field(default_factory=CostParams)
    disruption: DisruptionSpec | None = None

    @cached_property
    def station_by_id(self) -> dict:
        return {s.id: s for s in self.stations}

    @cached_property
    def link_by_id(self) -> dict:
        return {l.id: l for l in self.links}

    @cached_property
    def mode_by_kind(self) -> dict:
        return {m.kind: m for m in self.modes}

    @cached_property
    def line_by_id(self) -> dict:
        return {l.id: l for l in self.lines}

    @cached_property
    def vehicle_by_id(self) -> dict:
        return {v.id: v for v in self.vehicles}

    def links_between(self, source: str, target: str, mode: ModeKind | None = None) -> list:
        out = self._links_by_pair.get((source, target), [])
        if mode is None:
            return list(out)
        return [l for l in out if mode in l.modes]

    @cached_property
    def _links_by_pair(self) -> dict:
        idx: dict = {}
        for l in self.links:
            idx.setdefault(l.pair, []).append(l)
        return idx

    def capacity_of(self, vehicle: Vehicle) -> int:
        if vehicle.capacity is not None:
            return vehicle.capacity
        return self.mode_by_kind[vehicle.mode].capacity

    def line_for(self, origin: str, destination: str, mode: ModeKind) -> TransitLine | None:
        """First line of ``mode`` (file order) serving origin before destination."""
        for line in self.lines:
            if line.mode == mode and line.segment(origin, destination) is not None:
                return line
        return None

    def replace(self, **changes) -> "ScenarioModel":
        kw = {k: getattr(self, k) for k in ("stations", "links", "modes", "lines",
                                             "vehicles", "demand", "cost_params", "disruption")}
        kw.update(changes)
        return ScenarioModel(**kw)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_TOP_KEYS = {"schema_version", "stations", "links", "modes", "lines", "vehicles",
             "demand", "cost_params"}
_OPTIONAL_TOP = {"disruption"}


def _fields(obj: Any, rule: str, required: set, optional: set = frozenset(), entity=None) -> dict:
    if not isinstance(obj, Mapping):
        raise ParseError(f"{rule}: expected an object")
    keys = set(obj)
    unknown = keys - required - set(optional)
    if unknown:
        raise ValidationError(f"{rule}.unknown_field", entity, ", ".join(sorted(unknown)))
    missing = required - keys
    if missing:
        raise ParseError(f"{rule}: missing {', '.join(sorted(missing))}")
    return obj


def _num(value, rule, entity=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{rule} [{entity}]: expected a number")
    return float(value)


def _mode(value, rule, entity=None) -> ModeKind:
    try:
        return ModeKind(value)
    except ValueError:
        raise ValidationError(rule, entity, f"unknown mode {value!r}") from None


def parse_scenario(doc: Mapping) -> ScenarioModel:
    """Build and validate a model from an already-decoded JSON document."""
    if not isinstance(doc, Mapping):
        raise ParseError("scenario: top level must be an object")
    keys = set(doc)
    unknown = keys - _TOP_KEYS - _OPTIONAL_TOP
    if unknown:
        raise ValidationError("Scenario.unknown_field", None, ", ".join(sorted(unknown)))
    missing = _TOP_KEYS - keys
    if missing:
        raise ParseError(f"scenario: missing {', '.join(sorted(missing))}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ValidationError("Scenario.schema_version", None, str(doc["schema_version"]))

    stations = []
    for s in doc["stations"]:
        _fields(s, "Station", {"id", "name", "x", "y"})
        stations.append(Station(str(s["id"]), str(s["name"]), _num(s["x"], "Station.position", s["id"]),
                                _num(s["y"], "Station.position", s["id"])))

    links = []
    for l in doc["links"]:
        _fields(l, "Link", {"id", "from", "to", "length", "free_flow_speed", "capacity", "modes"},
                {"background_flow"}, l.get("id") if isinstance(l, Mapping) else None)
        lid = str(l["id"])
        links.append(Link(
            id=lid, source=str(l["from"]), target=str(l["to"]),
            length=_num(l["length"], "Link.length", lid),
            free_flow_speed=_num(l["free_flow_speed"], "Link.free_flow_speed", lid),
            capacity=_num(l["capacity"], "Link.capacity", lid),
            modes=frozenset(_mode(m, "Link.modes", lid) for m in l["modes"]),
            background_flow=_num(l.get("background_flow", 0.0), "Link.background_flow", lid),
        ))

    modes = []
    for m in doc["modes"]:
        _fields(m, "Mode", {"kind", "op_cost", "capacity", "speed"})
        kind = _mode(m["kind"], "Mode.kind")
        oc = m["op_cost"]
        if isinstance(oc, Mapping):
            _fields(oc, "Mode.op_cost", {"base"}, {"per_km"}, kind.value)
            base, per_km = _num(oc["base"], "Mode.op_cost", kind.value), _num(oc.get("per_km", 0.0), "Mode.op_cost", kind.value)
        else:
            base, per_km = _num(oc, "Mode.op_cost", kind.value), 0.0
        cap = m["capacity"]
        if isinstance(cap, bool) or not isinstance(cap, int):
            raise ValidationError("Mode.capacity", kind.value, "must be an integer")
        modes.append(Mode(kind, base, per_km, cap, _num(m["speed"], "Mode.speed", kind.value)))

    lines = []
    for ln in doc["lines"]:
        _fields(ln, "TransitLine", {"id", "mode", "stops", "headway", "service_window"})
        lid = str(ln["id"])
        win = ln["service_window"]
        if not isinstance(win, (list, tuple)) or len(win) != 2:
            raise ParseError(f"TransitLine.service_window [{lid}]")
        lines.append(TransitLine(lid, _mode(ln["mode"], "TransitLine.mode", lid),
                                 tuple(str(s) for s in ln["stops"]),
                                 _num(ln["headway"], "TransitLine.headway", lid),
                                 (int(win[0]), int(win[1]))))

    vehicles = []
    for v in doc["vehicles"]:
        _fields(v, "Vehicle", {"id", "mode", "assignment"}, {"capacity"})
        vid = str(v["id"])
        a = _fields(v["assignment"], "Vehicle.assignment", {"kind"},
                    {"line", "link", "station", "position"}, vid)
        link = tuple(str(x) for x in a["link"]) if a.get("link") is not None else None
        pos = tuple(_num(x, "Vehicle.assignment", vid) for x in a["position"]) if a.get("position") is not None else None
        cap = v.get("capacity")
        if cap is not None and (isinstance(cap, bool) or not isinstance(cap, int)):
            raise ValidationError("Vehicle.capacity", vid, "must be an integer")
        vehicles.append(Vehicle(vid, _mode(v["mode"], "Vehicle.mode", vid),
                                Assignment(str(a["kind"]), a.get("line"), link,
                                           a.get("station"), pos), cap))

    demand = []
    for d in doc["demand"]:
        _fields(d, "DemandProfile", {"origin", "destination", "mode", "bins"})
        bins = []
        for b in d["bins"]:
            if not isinstance(b, (list, tuple)) or len(b) != 3:
                raise ParseError("DemandProfile.bins: expected [start, end, rate]")
            bins.append(DemandBin(int(b[0]), int(b[1]), _num(b[2], "DemandProfile.rate")))
        demand.append(DemandEntry(str(d["origin"]), str(d["destination"]),
                                  _mode(d["mode"], "DemandProfile.mode"), tuple(bins)))

    cp = _fields(doc["cost_params"], "CostParams", set(),
                 {"cl", "ct", "p_min", "p_max", "ca_rate", "alpha", "beta", "h_max", "theta"})
    params = CostParams(**{k: _num(v, f"CostParams.{k}") for k, v in cp.items()})

    disruption = None
    if doc.get("disruption") is not None:
        dd = _fields(doc["disruption"], "DisruptionSpec", {"mode", "links", "start", "duration"})
        disruption = DisruptionSpec(_mode(dd["mode"], "DisruptionSpec.mode"),
                                    tuple((str(a), str(b)) for a, b in dd["links"]),
                                    int(dd["start"]), int(dd["duration"]))

    model = ScenarioModel(tuple(stations), tuple(links), tuple(modes), tuple(lines),
                          tuple(vehicles), tuple(demand), params, disruption)
    validate(model)
    return model


def load_scenario(path: str | Path) -> ScenarioModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_scenario(doc)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def _unique(ids: Iterable[str], rule: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(rule, i, "duplicate id")
        seen.add(i)


def validate(model: ScenarioModel) -> None:
    """Raise :class:`ValidationError` on the first violated invariant."""
    _unique((s.id for s in model.stations), "Station.id")
    for s in model.stations:
        if not (math.isfinite(s.x) and math.isfinite(s.y)):
            raise ValidationError("Station.position", s.id)
    st = model.station_by_id

    _unique((l.id for l in model.links), "Link.id")
    for l in model.links:
        if l.source not in st or l.target not in st:
            raise ValidationError("Link.endpoints", l.id, "unknown station")
        if l.source == l.target:
            raise ValidationError("Link.endpoints", l.id, "from == to")
        if not (l.length > 0 and math.isfinite(l.length)):
            raise ValidationError("Link.length", l.id)
        if not (l.free_flow_speed > 0 and math.isfinite(l.free_flow_speed)):
            raise ValidationError("Link.free_flow_speed", l.id)
        if not (l.capacity > 0 and math.isfinite(l.capacity)):
            raise ValidationError("Link.capacity", l.id)
        if not l.modes:
            raise ValidationError("Link.modes", l.id, "empty")
        if not (l.background_flow >= 0 and math.isfinite(l.background_flow)):
            raise ValidationError("Link.background_flow", l.id)

    kinds = [m.kind for m in model.modes]
    if len(set(kinds)) != len(kinds):
        raise ValidationError("Mode.kind", None, "duplicate mode")
    for m in model.modes:
        if m.capacity < 1:
            raise ValidationError("Mode.capacity", m.kind.value)
        if m.op_cost_base < 0 or m.op_cost_per_km < 0:
            raise ValidationError("Mode.op_cost", m.kind.value, "negative")
        if not (m.speed > 0 and math.isfinite(m.speed)):
            raise ValidationError("Mode.speed", m.kind.value)
    modes = model.mode_by_kind

    _unique((l.id for l in model.lines), "TransitLine.id")
    for ln in model.lines:
        if ln.mode not in SCHEDULED_MODES:
            raise ValidationError("TransitLine.mode", ln.id, "lines carry scheduled modes only")
        if ln.mode not in modes:
            raise ValidationError("TransitLine.mode", ln.id, "mode not declared")
        if len(ln.stops) < 2 or len(set(ln.stops)) != len(ln.stops):
            raise ValidationError("TransitLine.stops", ln.id, "need >= 2 distinct stops")
        if not (ln.headway > 0):
            raise ValidationError("TransitLine.headway", ln.id)
        if not ln.service_window[0] < ln.service_window[1]:
            raise ValidationError("TransitLine.service_window", ln.id)
        for a, b in zip(ln.stops, ln.stops[1:]):
            if a not in st or b not in st:
                raise ValidationError("TransitLine.stops", ln.id, "unknown station")
            if not model.links_between(a, b, ln.mode):
                raise ValidationError("TransitLine.stops", ln.id, f"no {ln.mode.value} link {a}->{b}")

    _unique((v.id for v in model.vehicles), "Vehicle.id")
    lines = model.line_by_id
    for v in model.vehicles:
        if v.mode not in modes:
            raise ValidationError("Vehicle.mode", v.id, "mode not declared")
        if v.capacity is not None and v.capacity < 1:
            raise ValidationError("Vehicle.capacity", v.id)
        a = v.assignment
        if a.kind == "line":
            line = lines.get(a.line)
            if line is None or a.link is None or len(a.link) != 2:
                raise ValidationError("Vehicle.assignment", v.id, "unknown line")
            if line.mode != v.mode:
                raise ValidationError("Vehicle.assignment", v.id, "line mode differs")
            r, s = a.link
            k = line.stop_index.get(r)
            if k is None or k + 1 >= len(line.stops) or line.stops[k + 1] != s:
                raise ValidationError("Vehicle.assignment", v.id, "link not on line")
        elif a.kind == "free":
            if v.mode not in FREE_MODES:
                raise ValidationError("Vehicle.assignment", v.id, "free positioning is for taxis and vans")
            if (a.station is None) == (a.position is None):
                raise ValidationError("Vehicle.assignment", v.id, "give exactly one of station/position")
            if a.station is not None and a.station not in st:
                raise ValidationError("Vehicle.assignment", v.id, "unknown station")
            if a.position is not None and (len(a.position) != 2 or not all(math.isfinite(c) for c in a.position)):
                raise ValidationError("Vehicle.assignment", v.id, "bad position")
        elif a.kind == "depot":
            if a.station not in st:
                raise ValidationError("Vehicle.assignment", v.id, "unknown depot station")
        else:
            raise ValidationError("Vehicle.assignment", v.id, f"unknown kind {a.kind!r}")

    for d in model.demand:
        tag = f"{d.origin}->{d.destination}"
        if d.origin not in st or d.destination not in st:
            raise ValidationError("DemandProfile.stations", tag)
        if d.mode not in modes:
            raise ValidationError("DemandProfile.mode", tag)
        prev_end = None
        for b in sorted(d.bins, key=lambda b: b.start):
            if not b.start < b.end:
                raise ValidationError("DemandProfile.bins", tag, "empty bin")
            if not (b.rate >= 0 and math.isfinite(b.rate)):
                raise ValidationError("DemandProfile.rate", tag)
            if prev_end is not None and b.start < prev_end:
                raise ValidationError("DemandProfile.bins", tag, "overlapping bins")
            prev_end = b.end

    model.cost_params.validate()
    if model.disruption is not None:
        validate_disruption(model, model.disruption)


def validate_disruption(model: ScenarioModel, d: DisruptionSpec) -> None:
    if d.mode not in model.mode_by_kind:
        raise ValidationError("DisruptionSpec.mode", None, d.mode.value)
    if d.duration <= 0:
        raise ValidationError("DisruptionSpec.duration")
    for pair in d.affected_links:
        if not model.links_between(pair[0], pair[1], d.mode):
            raise UnknownLink(pair, d.mode)


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

def scenario_to_dict(model: ScenarioModel) -> dict:
    def assignment(a: Assignment) -> dict:
        out: dict = {"kind": a.kind}
        if a.line is not None:
            out["line"] = a.line
        if a.link is not None:
            out["link"] = list(a.link)
        if a.station is not None:
            out["station"] = a.station
        if a.position is not None:
            out["position"] = list(a.position)
        return out

    def vehicle(v: Vehicle) -> dict:
        out = {"id": v.id, "mode": v.mode.value, "assignment": assignment(v.assignment)}
        if v.capacity is not None:
            out["capacity"] = v.capacity
        return out

    def mode(m: Mode) -> dict:
        oc: Any = m.op_cost_base if m.op_cost_per_km == 0 else {"base": m.op_cost_base, "per_km": m.op_cost_per_km}
        return {"kind": m.kind.value, "op_cost": oc, "capacity": m.capacity, "speed": m.speed}

    def link(l: Link) -> dict:
        out = {"id": l.id, "from": l.source, "to": l.target, "length": l.length,
               "free_flow_speed": l.free_flow_speed, "capacity": l.capacity,
               "modes": sorted(k.value for k in l.modes)}
        if l.background_flow:
            out["background_flow"] = l.background_flow
        return out

    cp = model.cost_params
    doc = {
        "schema_version": SCHEMA_VERSION,
        "stations": [{"id": s.id, "name": s.name, "x": s.x, "y": s.y} for s in model.stations],
        "links": [link(l) for l in model.links],
        "modes": [mode(m) for m in model.modes],
        "lines": [{"id": l.id, "mode": l.mode.value, "stops": list(l.stops), "headway": l.headway,
                   "service_window": list(l.service_window)} for l in model.lines],
        "vehicles": [vehicle(v) for v in model.vehicles],
        "demand": [{"origin": d.origin, "destination": d.destination, "mode": d.mode.value,
                    "bins": [[b.start, b.end, b.rate] for b in d.bins]} for d in model.demand],
        "cost_params": {k: getattr(cp, k) for k in ("cl", "ct", "p_min", "p_max", "ca_rate",
                                                     "alpha", "beta", "h_max", "theta")},
    }
    if model.disruption is not None:
        d = model.disruption
        doc["disruption"] = {"mode": d.mode.value, "links": [list(p) for p in d.affected_links],
                             "start": d.start, "duration": d.duration}
    return doc


def dump_scenario(model: ScenarioModel, path: str | Path) -> None:
    text = json.dumps(scenario_to_dict(model), indent=1, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
