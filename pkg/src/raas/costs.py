"""Cost and passenger-behaviour formulas for disruption bridging.

Everything here is a pure function.  Units: durations in seconds unless a
name says otherwise, distances in km, money in EUR, ``ct`` in EUR per
passenger-hour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .model import CostParams, DemandEntry, Mode, ModeKind


class DegenerateRates(ValueError):
    """P_max == P_min leaves the late-arrival payment branch undefined."""


@dataclass(frozen=True)
class CandidateVehicle:
    """A vehicle that may be pulled to bridge one disrupted pair.

    ``source`` is the scheduled link (r, s) the vehicle is serving, or None for
    taxis, vans and depot vehicles.  ``ta`` is the free-flow arrival duration
    at the disrupted station, in seconds.
    """

    vehicle_id: str
    mode: ModeKind
    pair: tuple
    d_ri: float
    d_ij: float
    ta: float
    capacity: int
    speed: float
    origin: str
    kind: str = "free"  # line | free | depot
    source: tuple | None = None
    line: str | None = None
    headway: float | None = None  # minutes
    v_rs: float = 0.0
    access_path: tuple = ()
    service_path: tuple = ()

    def __post_init__(self):
        if self.d_ri < 0 or self.d_ij < 0:
            raise ValueError(f"{self.vehicle_id}: negative distance")


@dataclass(frozen=True)
class PassengerSplit:
    volume: float
    leaving: int
    waiting: float  # unserved waiting passengers
    served: float
    leave_rate: float


@dataclass(frozen=True)
class VehicleCost:
    vehicle_id: str
    mode: ModeKind
    distance: float
    y: float
    service_rate: float
    transfer: float
    arrangement: float


@dataclass(frozen=True)
class CostBreakdown:
    transfer: float
    arrangement: float
    z1: float
    leaving_main: float
    waiting_main: float
    leaving_deliberate: float
    waiting_deliberate: float
    z2: float
    total: float
    items: tuple = field(default=())

    @classmethod
    def build(cls, transfer, arrangement, leaving_main, waiting_main,
              leaving_deliberate, waiting_deliberate, items=()) -> "CostBreakdown":
        z1 = transfer + arrangement
        z2 = leaving_main + waiting_main + leaving_deliberate + waiting_deliberate
        return cls(transfer, arrangement, z1, leaving_main, waiting_main, leaving_deliberate,
                   waiting_deliberate, z2, z1 + z2, tuple(items))

    def to_dict(self) -> dict:
        return {
            "transfer": self.transfer, "arrangement": self.arrangement, "Z1": self.z1,
            "leaving_main": self.leaving_main, "waiting_main": self.waiting_main,
            "leaving_deliberate": self.leaving_deliberate,
            "waiting_deliberate": self.waiting_deliberate, "Z2": self.z2, "total": self.total,
            "vehicles": [
                {"id": it.vehicle_id, "mode": it.mode.value, "distance_km": it.distance, "y": it.y,
                 "service_rate": it.service_rate, "transfer": it.transfer,
                 "arrangement": it.arrangement}
                for it in self.items
            ],
        }


def blocked_volume(demand, window: tuple) -> float:
    """Passengers generated by a piecewise-constant rate over ``window``.

    ``demand`` is a :class:`DemandEntry` or a sequence of :class:`DemandBin`.
    Uncovered time contributes nothing.
    """
    bins = demand.bins if isinstance(demand, DemandEntry) else demand
    lo, hi = window
    total = 0.0
    for b in bins:
        overlap = min(hi, b.end) - max(lo, b.start)
        if overlap > 0:
            total += b.rate * overlap / 3600.0
    return total


def late_value(p_min: float, p_max: float) -> float:
    if p_max == p_min:
        raise DegenerateRates("P_max equals P_min")
    return -p_min / (p_max - p_min)


def payment_phase(ta: float, td: float, p_min: float, p_max: float) -> float:
    if ta <= td / 2:
        return 1.0
    if ta < td:
        return 0.0
    return late_value(p_min, p_max)


def service_rate(mode: Mode, distance: float, y: float, p_min: float, p_max: float) -> float:
    """Per passenger-km payment CS for one vehicle.

    The late-arrival value of ``y`` cancels the bracket exactly; it is mapped
    to 0 rather than left to floating-point residue.
    """
    if p_max != p_min and y == late_value(p_min, p_max):
        return 0.0
    return mode.op_cost(distance) * (y * p_max + (1 - y) * p_min)


def vehicle_distance(c: CandidateVehicle) -> float:
    # distance after the destination is not paid for
    return c.d_ri + c.d_ij


def arrangement_cost(c: CandidateVehicle, transfer_cost: float, ca_rate: float) -> float:
    """Arrangement fee: ``ca_rate * transfer_cost`` over the arrival time in minutes.

    The divisor is clamped at one minute so the fee stays bounded as the
    arrival time approaches zero.
    """
    return ca_rate * transfer_cost / max(c.ta / 60.0, 1.0)


def price_vehicle(c: CandidateVehicle, mode: Mode, td: float, params: CostParams,
                  ta: float | None = None) -> VehicleCost:
    """Transfer and arrangement cost of selecting ``c``.

    ``ta`` overrides the candidate's own arrival time (the coupling loop
    scales it).  The arrangement fee is based on the full-rate transfer cost,
    so a vehicle arriving after the disruption still pays for arranging.
    """
    if ta is not None and ta != c.ta:
        c = replace(c, ta=ta)
    d = vehicle_distance(c)
    y = payment_phase(c.ta, td, params.p_min, params.p_max)
    cs = service_rate(mode, d, y, params.p_min, params.p_max)
    transfer = cs * c.capacity * d
    nominal = service_rate(mode, d, 1.0, params.p_min, params.p_max) * c.capacity * d
    return VehicleCost(c.vehicle_id, c.mode, d, y, cs, transfer,
                       arrangement_cost(c, nominal, params.ca_rate))


def avg_arrival(selected: Iterable[CandidateVehicle], mode: ModeKind) -> float:
    total = 0.0
    n = 0
    for c in selected:
        if c.mode == mode:
            total += c.ta
            n += 1
    return total / n if n else 0.0


def leaving_rate(min_ta: float, td: float, alpha: float, beta: float) -> float:
    m = min_ta if min_ta < td else td
    return alpha + (1.0 - beta - alpha) * m / td


def willingness_to_wait(ta: float, td: float, theta: float) -> float:
    m = ta if ta < td else td
    return 1.0 - (1.0 - theta) * m / td


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def passenger_split(volume: float, leave_rate: float, served_capacity: float) -> PassengerSplit:
    vl = round_half_up(leave_rate * volume)
    vw = volume - vl - served_capacity
    if vw < 0:
        vw = 0.0
    served = min(volume - vl, served_capacity)
    return PassengerSplit(volume, vl, float(vw), float(max(served, 0.0)), leave_rate)


@dataclass(frozen=True)
class LoyaltyCost:
    leaving_main: float
    waiting_main: float
    leaving_deliberate: float
    waiting_deliberate: float

    @property
    def total(self) -> float:
        return self.leaving_main + self.waiting_main + self.leaving_deliberate + self.waiting_deliberate


def loyalty_cost(main: Mapping, deliberate: Mapping, params: CostParams, td: float) -> LoyaltyCost:
    """Loyalty loss at primarily and deliberately disrupted stations.

    ``main`` maps (i, j) to a :class:`PassengerSplit`; ``deliberate`` maps
    (r, s) to ``(PassengerSplit, headway_minutes)``.  ``td`` is in seconds.
    """
    tdh = td / 3600.0
    lm = wm = ld = wd = 0.0
    for split in main.values():
        lm += (params.cl + tdh * params.ct) * split.leaving
        wm += tdh * params.ct * split.waiting
    for split, headway in deliberate.values():
        hh = headway / 60.0
        ld += (params.cl + hh * params.ct) * split.leaving
        wd += hh * params.ct * split.waiting
    return LoyaltyCost(lm, wm, ld, wd)


def deliberate_split(volume: float, headway: float, td: float, params: CostParams) -> PassengerSplit:
    """Split at a station whose vehicle was pulled: one headway of extra wait, no bridge."""
    rate = leaving_rate(headway * 60.0, td, params.alpha, params.beta)
    return passenger_split(volume, rate, 0.0)


def monetary_cost(selected: Sequence[CandidateVehicle], modes: Mapping, td: float,
                  params: CostParams) -> tuple:
    """Return ``(transfer_total, arrangement_total, items)`` for a selection."""
    items = [price_vehicle(c, modes[c.mode], td, params) for c in selected]
    transfer = 0.0
    arrangement = 0.0
    for it in items:
        transfer += it.transfer
        arrangement += it.arrangement
    return transfer, arrangement, items


def do_nothing_split(volume: float, params: CostParams) -> PassengerSplit:
    # no replacement ever arrives: the leaving rate sits at its ceiling
    return passenger_split(volume, 1.0 - params.beta, 0.0)
