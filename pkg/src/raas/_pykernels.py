"""Pure-Python plan evaluation kernels.

Operation order here is the contract shared with the compiled twin in
``_ckernels.pyx``; both must produce bit-identical floats.
"""
from __future__ import annotations

import math


def evaluate(mask, transfer, arrange, pair, mode, ta, cap, link, volume, td, link_cost,
             n_modes, alpha, beta, cl, ct):
    """Objective of one selection.

    Returns ``(feasible, objective, unserved_waiting)``.  Candidates must be
    in canonical order; ``mask[k]`` is nonzero when candidate ``k`` is picked.
    """
    n = len(transfer)
    n_pairs = len(volume)
    pcap = [0.0] * n_pairs
    pcnt = [0] * n_pairs
    pmin = [0.0] * n_pairs
    msum = [0.0] * (n_pairs * n_modes)
    mcnt = [0] * (n_pairs * n_modes)
    used = [0] * len(link_cost)
    tsum = 0.0
    asum = 0.0
    for k in range(n):
        if not mask[k]:
            continue
        tsum += transfer[k]
        asum += arrange[k]
        p = pair[k]
        pcap[p] += cap[k]
        if pcnt[p] == 0 or ta[k] < pmin[p]:
            pmin[p] = ta[k]
        pcnt[p] += 1
        q = p * n_modes + mode[k]
        msum[q] += ta[k]
        mcnt[q] += 1
        if link[k] >= 0:
            used[link[k]] = 1
    for p in range(n_pairs):
        for m in range(n_modes):
            q = p * n_modes + m
            if mcnt[q] > 0 and msum[q] / mcnt[q] > td[p]:
                return False, math.inf, math.inf
    main = 0.0
    vw_total = 0.0
    for p in range(n_pairs):
        if pcnt[p] == 0:
            rate = 1.0 - beta
        else:
            t = pmin[p] if pmin[p] < td[p] else td[p]
            rate = alpha + (1.0 - beta - alpha) * t / td[p]
        vl = float(math.floor(rate * volume[p] + 0.5))
        vw = volume[p] - vl - pcap[p]
        if vw < 0.0:
            vw = 0.0
        tdh = td[p] / 3600.0
        main += (cl + tdh * ct) * vl + tdh * ct * vw
        vw_total += vw
    delib = 0.0
    for r in range(len(link_cost)):
        if used[r]:
            delib += link_cost[r]
    return True, (tsum + asum) + (main + delib), vw_total


def better(vw, obj, cnt, bits, bvw, bobj, bcnt, bbits, rank, serve_all):
    if serve_all:
        if vw != bvw:
            return vw < bvw
    if obj != bobj:
        return obj < bobj
    if cnt != bcnt:
        return cnt < bcnt
    diff = bits ^ bbits
    if not diff:
        return False
    # the selection holding the lowest differing id rank wins
    low = None
    k = 0
    while diff:
        if diff & 1:
            if low is None or rank[k] < rank[low]:
                low = k
        diff >>= 1
        k += 1
    return bool((bits >> low) & 1)


def enumerate_best(transfer, arrange, pair, mode, ta, cap, link, volume, td, link_cost,
                   n_modes, alpha, beta, cl, ct, rank, serve_all):
    """Exhaustive search over all ``2**n`` selections.

    Returns ``(bits, objective, unserved_waiting, evaluated)`` where bit ``k``
    of ``bits`` selects candidate ``k``.
    """
    n = len(transfer)
    if n > 30:
        raise ValueError("enumeration limited to 30 candidates in pure Python")
    best = None
    mask = [0] * n
    for bits in range(1 << n):
        for k in range(n):
            mask[k] = (bits >> k) & 1
        ok, obj, vw = evaluate(mask, transfer, arrange, pair, mode, ta, cap, link, volume, td,
                               link_cost, n_modes, alpha, beta, cl, ct)
        if not ok:
            continue
        cnt = bin(bits).count("1")
        if best is None or better(vw, obj, cnt, bits, *best, rank, serve_all):
            best = (vw, obj, cnt, bits)
    vw, obj, cnt, bits = best
    return bits, obj, vw, 1 << n

