"""Exact vehicle reallocation.

Selections are scored by the plan evaluation kernel (compiled when
available).  Candidates that are interchangeable (same pair, mode, arrival
time, capacity, prices and source link) are grouped, and the best-first
branch and bound decides how many of each group to take.  Because grouped
members are adjacent in the canonical order, any equally sized subset of a
group gives bit-identical sums, so the search and the exhaustive oracle agree
to the last bit.
"""
from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._pykernels import better
from .costs import (CandidateVehicle, CostBreakdown, deliberate_split, loyalty_cost,
                    monetary_cost, passenger_split, price_vehicle, leaving_rate, do_nothing_split)
from .model import CostParams, ModeKind

MODE_ORDER = tuple(ModeKind)


def induced_xi(gamma, candidates) -> frozenset:
    """Source links deliberately disrupted by a selection; free and depot vehicles induce none."""
    chosen = set(gamma)
    return frozenset(c.source for c in candidates
                     if c.vehicle_id in chosen and c.kind == "line" and c.source is not None)


def _source_key(c: CandidateVehicle):
    return (c.line, c.source) if c.kind == "line" and c.source is not None else None


def deliberate_cost(c: CandidateVehicle, td: float, params: CostParams) -> float:
    split = deliberate_split(c.v_rs, c.headway, td, params)
    return loyalty_cost({}, {c.source: (split, c.headway)}, params, td).total


@dataclass
class Instance:
    """Solver input in canonical candidate order."""

    candidates: list
    pairs: tuple
    volumes: np.ndarray
    td: np.ndarray
    params: CostParams
    transfer: np.ndarray
    arrange: np.ndarray
    pair: np.ndarray
    mode: np.ndarray
    ta: np.ndarray
    cap: np.ndarray
    link: np.ndarray
    links: tuple
    link_cost: np.ndarray
    rank: np.ndarray
    groups: list  # (start, size)
    prices: list

    @property
    def n(self) -> int:
        return len(self.candidates)

    def kernel_args(self) -> tuple:
        p = self.params
        return (self.transfer, self.arrange, self.pair, self.mode, self.ta, self.cap, self.link,
                self.volumes, self.td, self.link_cost, len(MODE_ORDER), p.alpha, p.beta, p.cl, p.ct)

    def evaluate_mask(self, mask, backend=None) -> tuple:
        fn = backend.evaluate if backend is not None else kernels.evaluate
        return fn(np.ascontiguousarray(mask, dtype=np.int8), *self.kernel_args())

    def mask_of(self, bits: int) -> np.ndarray:
        return np.array([(bits >> k) & 1 for k in range(self.n)], dtype=np.int8)


def build_instance(candidates, volumes: dict, td: float, params: CostParams, modes: dict) -> Instance:
    """Price candidates and lay them out in canonical order.

    ``volumes`` maps each disrupted pair to its blocked volume; ``modes`` maps
    ModeKind to :class:`Mode`.
    """
    pairs = tuple(volumes)
    pidx = {p: k for k, p in enumerate(pairs)}
    cands = [c for c in candidates if c.pair in pidx]
    prices = {c.vehicle_id: price_vehicle(c, modes[c.mode], td, params) for c in cands}
    links = sorted({_source_key(c) for c in cands} - {None}, key=lambda k: (k[0], k[1]))
    lidx = {k: i for i, k in enumerate(links)}
    link_cost = np.zeros(len(links))
    for c in cands:
        key = _source_key(c)
        if key is not None and link_cost[lidx[key]] == 0.0:
            link_cost[lidx[key]] = deliberate_cost(c, td, params)

    def sort_key(c):
        pr = prices[c.vehicle_id]
        key = _source_key(c)
        return (pidx[c.pair], MODE_ORDER.index(c.mode), c.ta, c.capacity, pr.transfer,
                pr.arrangement, lidx[key] if key is not None else -1, c.vehicle_id)

    cands.sort(key=sort_key)
    by_id = sorted(range(len(cands)), key=lambda k: cands[k].vehicle_id)
    rank = np.empty(len(cands), dtype=np.int64)
    for r, k in enumerate(by_id):
        rank[k] = r
    groups = []
    prev = None
    for k, c in enumerate(cands):
        sig = sort_key(c)[:-1]
        if sig == prev:
            groups[-1][1] += 1
        else:
            groups.append([k, 1])
            prev = sig
    return Instance(
        candidates=cands, pairs=pairs,
        volumes=np.array([float(volumes[p]) for p in pairs], dtype=np.float64),
        td=np.full(len(pairs), float(td)), params=params,
        transfer=np.array([prices[c.vehicle_id].transfer for c in cands], dtype=np.float64),
        arrange=np.array([prices[c.vehicle_id].arrangement for c in cands], dtype=np.float64),
        pair=np.array([pidx[c.pair] for c in cands], dtype=np.int64),
        mode=np.array([MODE_ORDER.index(c.mode) for c in cands], dtype=np.int64),
        ta=np.array([c.ta for c in cands], dtype=np.float64),
        cap=np.array([float(c.capacity) for c in cands], dtype=np.float64),
        link=np.array([lidx[_source_key(c)] if _source_key(c) is not None else -1 for c in cands],
                      dtype=np.int64),
        links=tuple(links), link_cost=link_cost, rank=rank,
        groups=[tuple(g) for g in groups], prices=[prices[c.vehicle_id] for c in cands])


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

class _Bounder:
    """Admissible bounds for partial selections over groups of candidates."""

    def __init__(self, inst: Instance, groups):
        self.inst = inst
        self.groups = groups
        p = inst.params
        self.alpha, self.beta, self.cl, self.ct = p.alpha, p.beta, p.cl, p.ct
        self.g_pair = [int(inst.pair[s]) for s, _ in groups]
        self.g_ta = [float(inst.ta[s]) for s, _ in groups]
        self.g_cap = [float(inst.cap[s]) for s, _ in groups]
        self.g_cost = [float(inst.transfer[s] + inst.arrange[s]) for s, _ in groups]
        self.g_link = [int(inst.link[s]) for s, _ in groups]
        self.n_pairs = len(inst.pairs)
        # per pair, groups ordered by cost per seat for the fractional cover
        self.by_ratio = [sorted((g for g in range(len(groups)) if self.g_pair[g] == p),
                                key=lambda g: (self._ratio(g), g)) for p in range(self.n_pairs)]
        self.dp = self._integer_covers()

    def _integer_covers(self):
        """Per pair, exact min cost of seating ``s`` passengers with groups ``k..G-1``.

        ``dp[p][k][s]`` ignores arrival times, so it bounds every case from
        below.  Only built when capacities are whole seats.
        """
        if any(c != math.floor(c) for c in self.g_cap):
            return None
        G = len(self.groups)
        out = []
        for p in range(self.n_pairs):
            S = int(math.ceil(float(self.inst.volumes[p]))) + 1
            cur = np.full(S + 1, np.inf)
            cur[0] = 0.0
            table = [None] * (G + 1)
            table[G] = cur
            for g in range(G - 1, -1, -1):
                if self.g_pair[g] == p and self.g_cap[g] > 0:
                    nxt = cur.copy()
                    cap = int(self.g_cap[g])
                    idx = np.arange(S + 1)
                    for c in range(1, self.groups[g][1] + 1):
                        shifted = cur[np.maximum(idx - c * cap, 0)] + c * self.g_cost[g]
                        np.minimum(nxt, shifted, out=nxt)
                        if c * cap >= S:
                            break
                    cur = nxt
                table[g] = cur
            out.append(table)
        return out

    def _ratio(self, g):
        return self.g_cost[g] / self.g_cap[g] if self.g_cap[g] > 0 else math.inf

    def _vl(self, p, min_ta):
        td = float(self.inst.td[p])
        if min_ta is None:
            rate = 1.0 - self.beta
        else:
            t = min_ta if min_ta < td else td
            rate = self.alpha + (1.0 - self.beta - self.alpha) * t / td
        return math.floor(rate * float(self.inst.volumes[p]) + 0.5)

    def bound(self, counts, target_vw=None) -> tuple:
        """``(vw_lb, objective_lb)`` over all completions of ``counts``.

        ``counts`` fixes the first ``len(counts)`` groups.  With ``target_vw``
        the objective bound only covers completions whose unserved waiting
        volume is at most that target.
        """
        k = len(counts)
        G = len(self.groups)
        committed = 0.0
        used = set()
        pcap = [0.0] * self.n_pairs
        pmin = [None] * self.n_pairs
        for g in range(k):
            c = counts[g]
            if c:
                committed += c * self.g_cost[g]
                p = self.g_pair[g]
                pcap[p] += c * self.g_cap[g]
                if pmin[p] is None or self.g_ta[g] < pmin[p]:
                    pmin[p] = self.g_ta[g]
                if self.g_link[g] >= 0:
                    used.add(self.g_link[g])
        for r in used:
            committed += float(self.inst.link_cost[r])
        vw_lb = 0.0
        total = committed
        for p in range(self.n_pairs):
            V = float(self.inst.volumes[p])
            tdh = float(self.inst.td[p]) / 3600.0
            A = self.cl + tdh * self.ct
            B = tdh * self.ct
            # split on the arrival time that sets the leaving rate
            tops = {self.g_ta[g] for g in range(k, G)
                    if self.g_pair[g] == p and (pmin[p] is None or self.g_ta[g] < pmin[p])}
            if pmin[p] is not None:
                tops.add(pmin[p])
            cases = ([None] if pmin[p] is None else []) + sorted(tops)
            case_vw = math.inf
            case_lb = math.inf
            for T in cases:
                vl = self._vl(p, T)
                W = max(0.0, V - vl - pcap[p])
                if T is None:
                    vw, lb = W, A * vl + B * W
                    if target_vw is not None and vw > target_vw:
                        lb = math.inf
                else:
                    seats = self._seats(p, k, T)
                    vw = max(0.0, W - seats)
                    lb = A * vl + self._cover(p, k, T, W, B, True)
                    if target_vw is not None:
                        need = W - target_vw
                        lb = max(lb, A * vl + self._cover(p, k, T, need, B, False))
                        if self.dp is not None and need > 0:
                            row = self.dp[p][k]
                            lb = max(lb, A * vl + float(row[min(len(row) - 1, int(math.ceil(need)))]))
                case_vw = min(case_vw, vw)
                case_lb = min(case_lb, lb)
            vw_lb += case_vw
            total += case_lb
        return vw_lb, total

    def _seats(self, p, k, tmin):
        return sum(self.groups[g][1] * self.g_cap[g] for g in self.by_ratio[p]
                   if g >= k and self.g_ta[g] >= tmin)

    def _cover(self, p, k, tmin, need, B, optional):
        """Cheapest fractional cover of ``need`` seats by undecided groups arriving at or after ``tmin``.

        With ``optional`` the cover stops once seats cost more than leaving a
        passenger waiting, and the rest waits at ``B`` each; otherwise the
        whole need must be seated or the bound is infinite.
        """
        cost = 0.0
        for g in self.by_ratio[p]:
            if need <= 0:
                break
            if g < k or self.g_ta[g] < tmin:
                continue
            ratio = self._ratio(g)
            if optional and ratio >= B:
                break
            take = min(self.groups[g][1] * self.g_cap[g], need)
            cost += ratio * take
            need -= take
        if need > 0:
            cost = cost + B * need if optional else math.inf
        return cost


def lower_bound(inst: Instance, fixed) -> float:
    """Admissible bound given decisions for the first ``len(fixed)`` canonical candidates."""
    if len(fixed) >= inst.n:
        ok, obj, _ = inst.evaluate_mask(np.array([int(bool(x)) for x in fixed[:inst.n]], dtype=np.int8))
        return float(obj) if ok else math.inf
    singles = [(k, 1) for k in range(inst.n)]
    return _Bounder(inst, singles).bound([int(bool(x)) for x in fixed])[1]


# --------------------------------------------------------------------------
# plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveReport:
    nodes_explored: int
    best_bound: float
    proven_optimal: bool
    wall_time: float
    method: str
    backend: str


@dataclass(frozen=True)
class ReallocationPlan:
    gamma: tuple
    xi: tuple
    U: dict
    ta_per_mode: dict
    cost: CostBreakdown
    objective: float
    selected: tuple = field(default=(), repr=False)
    unserved_waiting: float = 0.0

    @property
    def count(self) -> int:
        return len(self.gamma)

    def avg_ta(self) -> float:
        if not self.selected:
            return 0.0
        return sum(c.ta for c in self.selected) / len(self.selected)

    def to_dict(self, report: SolveReport | None = None) -> dict:
        out = {
            "gamma": list(self.gamma),
            "xi": [list(x) for x in self.xi],
            "U": {f"{p[0]}->{p[1]}:{m}": n for (p, m), n in sorted(self.U.items())},
            "TA_per_mode": {f"{p[0]}->{p[1]}:{m}": t for (p, m), t in sorted(self.ta_per_mode.items())},
            "cost_breakdown": self.cost.to_dict(),
            "objective": self.objective,
        }
        if report is not None:
            out["solve_report"] = {
                "nodes_explored": report.nodes_explored, "best_bound": report.best_bound,
                "proven_optimal": report.proven_optimal, "wall_time": report.wall_time,
                "method": report.method, "backend": report.backend,
            }
        return out

    def to_json(self, report: SolveReport | None = None) -> str:
        return json.dumps(self.to_dict(report), indent=2, sort_keys=True)


def cost_breakdown(selected, volumes: dict, td: float, params: CostParams, modes: dict) -> CostBreakdown:
    """Re-evaluate a selection with the scalar cost formulas."""
    transfer, arrangement, items = monetary_cost(selected, modes, td, params)
    main = {}
    for pair, V in volumes.items():
        mine = [c for c in selected if c.pair == pair]
        if mine:
            rate = leaving_rate(min(c.ta for c in mine), td, params.alpha, params.beta)
            main[pair] = passenger_split(V, rate, float(sum(c.capacity for c in mine)))
        else:
            main[pair] = do_nothing_split(V, params)
    delib = {}
    for c in selected:
        key = _source_key(c)
        if key is not None and key not in delib:
            delib[key] = (deliberate_split(c.v_rs, c.headway, td, params), c.headway)
    lc = loyalty_cost(main, delib, params, td)
    return CostBreakdown.build(transfer, arrangement, lc.leaving_main, lc.waiting_main,
                               lc.leaving_deliberate, lc.waiting_deliberate, items)


def _plan(inst: Instance, bits: int, obj: float, vw: float, modes: dict) -> ReallocationPlan:
    sel = [inst.candidates[k] for k in range(inst.n) if (bits >> k) & 1]
    U: dict = {}
    sums: dict = {}
    for c in sel:
        key = (c.pair, c.mode.value)
        U[key] = U.get(key, 0) + 1
        sums[key] = sums.get(key, 0.0) + c.ta
    ta = {k: sums[k] / U[k] for k in U}
    td = float(inst.td[0]) if len(inst.td) else 0.0
    vols = {p: float(v) for p, v in zip(inst.pairs, inst.volumes)}
    cost = cost_breakdown(sel, vols, td, inst.params, modes)
    return ReallocationPlan(
        gamma=tuple(sorted(c.vehicle_id for c in sel)),
        xi=tuple(sorted(induced_xi([c.vehicle_id for c in sel], sel))),
        U=U, ta_per_mode=ta, cost=cost, objective=obj, selected=tuple(sel),
        unserved_waiting=vw)


# --------------------------------------------------------------------------
# search
# --------------------------------------------------------------------------

def _bits_for(groups, counts) -> int:
    bits = 0
    for (start, _), c in zip(groups, counts):
        for k in range(start, start + c):
            bits |= 1 << k
    return bits


def _eval_bits(inst: Instance, bits: int):
    ok, obj, vw = inst.evaluate_mask(inst.mask_of(bits))
    return ok, obj, vw


def branch_and_bound(inst: Instance, serve_all: bool = False, node_limit: int | None = None):
    """Best-first search over per-group counts.

    Returns ``(bits, objective, unserved_waiting, nodes, best_bound, proven)``.
    """
    groups = inst.groups
    G = len(groups)
    bounder = _Bounder(inst, groups)
    rank = inst.rank
    best = None  # (vw, obj, cnt, bits)

    def offer(bits):
        nonlocal best
        ok, obj, vw = _eval_bits(inst, bits)
        if not ok:
            return
        cnt = bin(bits).count("1")
        if best is None or better(vw, obj, cnt, bits, *best, rank, serve_all):
            best = (vw, obj, cnt, bits)

    offer(0)
    # greedy prefixes in cost-per-seat order seed the incumbent
    order = sorted(range(G), key=lambda g: (bounder._ratio(g), g))
    counts = [0] * G
    for g in order:
        for c in range(1, groups[g][1] + 1):
            counts[g] = c
            offer(_bits_for(groups, counts))

    def prunable(vw_lb, obj_lb):
        bvw, bobj = best[0], best[1]
        tol = 1e-9 * max(1.0, abs(bobj))
        if serve_all:
            if vw_lb > bvw:
                return True
            return vw_lb == bvw and obj_lb > bobj + tol
        return obj_lb > bobj + tol

    def node_bound(cs):
        vw_lb, lb = bounder.bound(cs)
        if serve_all:
            _, lb2 = bounder.bound(cs, target_vw=best[0])
            if vw_lb == best[0]:
                lb = max(lb, lb2)
        return vw_lb, lb

    nodes = 0
    seq = 0
    root = ()
    vw_lb, lb = node_bound(root)
    heap = [((vw_lb if serve_all else 0.0), lb, seq, root)]
    proven = True
    while heap:
        key_vw, lb, _, cs = heapq.heappop(heap)
        if prunable(key_vw, lb):
            continue
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            heapq.heappush(heap, (key_vw, lb, seq, cs))
            proven = False
            break
        k = len(cs)
        if k == G:
            offer(_bits_for(groups, cs))
            continue
        for c in range(groups[k][1], -1, -1):
            child = cs + (c,)
            if len(child) == G:
                offer(_bits_for(groups, child))
                nodes += 1
                continue
            cvw, clb = node_bound(child)
            if prunable(cvw, clb):
                continue
            seq += 1
            heapq.heappush(heap, ((cvw if serve_all else 0.0), clb, seq, child))
    if proven:
        bound = best[1]
    else:
        bound = min(best[1], min(h[1] for h in heap)) if heap else best[1]
    vw, obj, _, bits = best
    return bits, obj, vw, nodes, bound, proven


def solve(candidates, volumes: dict, td: float, params: CostParams, modes: dict,
          method: str = "branch_and_bound", serve_all: bool = False,
          node_limit: int | None = None):
    """Minimise monetary plus loyalty cost over the candidate selection.

    ``serve_all`` ranks selections by unserved waiting passengers first, the
    rule for single-mode bridging where every waiting passenger is carried.
    Returns ``(ReallocationPlan, SolveReport)``.
    """
    t0 = time.perf_counter()
    inst = build_instance(candidates, volumes, td, params, modes)
    if method == "enumerate":
        bits, obj, vw, nodes = kernels.enumerate_best(*inst.kernel_args(), inst.rank, serve_all)
        bound, proven = obj, True
    elif method == "branch_and_bound":
        bits, obj, vw, nodes, bound, proven = branch_and_bound(inst, serve_all, node_limit)
    else:
        raise ValueError(f"unknown method {method!r}")
    plan = _plan(inst, int(bits), float(obj), float(vw), modes)
    report = SolveReport(nodes, bound, proven, time.perf_counter() - t0, method, kernels.BACKEND)
    return plan, report
