# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled plan evaluation kernels; mirrors ``_pykernels`` operation for operation."""
from libc.math cimport floor, INFINITY
from libc.stdlib cimport malloc, calloc, free
from libc.stdint cimport uint64_t, int64_t


cdef struct Inst:
    int n
    int n_pairs
    int n_modes
    int n_links
    const double* transfer
    const double* arrange
    const long long* pair
    const long long* mode
    const double* ta
    const double* cap
    const long long* link
    const double* volume
    const double* td
    const double* link_cost
    double alpha
    double beta
    double cl
    double ct


cdef struct Scratch:
    double* pcap
    long long* pcnt
    double* pmin
    double* msum
    long long* mcnt
    char* used


cdef int _alloc(Scratch* s, Inst* d) except -1:
    s.pcap = <double*>malloc(max(d.n_pairs, 1) * sizeof(double))
    s.pcnt = <long long*>malloc(max(d.n_pairs, 1) * sizeof(long long))
    s.pmin = <double*>malloc(max(d.n_pairs, 1) * sizeof(double))
    s.msum = <double*>malloc(max(d.n_pairs * d.n_modes, 1) * sizeof(double))
    s.mcnt = <long long*>malloc(max(d.n_pairs * d.n_modes, 1) * sizeof(long long))
    s.used = <char*>malloc(max(d.n_links, 1))
    if not (s.pcap and s.pcnt and s.pmin and s.msum and s.mcnt and s.used):
        raise MemoryError()
    return 0


cdef void _release(Scratch* s):
    free(s.pcap); free(s.pcnt); free(s.pmin); free(s.msum); free(s.mcnt); free(s.used)


cdef int _eval(Inst* d, Scratch* s, const char* mask, double* obj, double* vwt) nogil:
    cdef int k, p, m, q, r
    cdef double tsum = 0.0, asum = 0.0, main = 0.0, delib = 0.0, vw_total = 0.0
    cdef double rate, t, vl, vw, tdh
    for p in range(d.n_pairs):
        s.pcap[p] = 0.0
        s.pcnt[p] = 0
        s.pmin[p] = 0.0
    for q in range(d.n_pairs * d.n_modes):
        s.msum[q] = 0.0
        s.mcnt[q] = 0
    for r in range(d.n_links):
        s.used[r] = 0
    for k in range(d.n):
        if not mask[k]:
            continue
        tsum += d.transfer[k]
        asum += d.arrange[k]
        p = <int>d.pair[k]
        s.pcap[p] += d.cap[k]
        if s.pcnt[p] == 0 or d.ta[k] < s.pmin[p]:
            s.pmin[p] = d.ta[k]
        s.pcnt[p] += 1
        q = p * d.n_modes + <int>d.mode[k]
        s.msum[q] += d.ta[k]
        s.mcnt[q] += 1
        if d.link[k] >= 0:
            s.used[d.link[k]] = 1
    for p in range(d.n_pairs):
        for m in range(d.n_modes):
            q = p * d.n_modes + m
            if s.mcnt[q] > 0 and s.msum[q] / <double>s.mcnt[q] > d.td[p]:
                obj[0] = INFINITY
                vwt[0] = INFINITY
                return 0
    for p in range(d.n_pairs):
        if s.pcnt[p] == 0:
            rate = 1.0 - d.beta
        else:
            t = s.pmin[p] if s.pmin[p] < d.td[p] else d.td[p]
            rate = d.alpha + (1.0 - d.beta - d.alpha) * t / d.td[p]
        vl = floor(rate * d.volume[p] + 0.5)
        vw = d.volume[p] - vl - s.pcap[p]
        if vw < 0.0:
            vw = 0.0
        tdh = d.td[p] / 3600.0
        main += (d.cl + tdh * d.ct) * vl + tdh * d.ct * vw
        vw_total += vw
    for r in range(d.n_links):
        if s.used[r]:
            delib += d.link_cost[r]
    obj[0] = (tsum + asum) + (main + delib)
    vwt[0] = vw_total
    return 1


cdef Inst _inst(const double[::1] transfer, const double[::1] arrange,
                const long long[::1] pair, const long long[::1] mode, const double[::1] ta,
                const double[::1] cap, const long long[::1] link, const double[::1] volume,
                const double[::1] td, const double[::1] link_cost, int n_modes,
                double alpha, double beta, double cl, double ct):
    cdef Inst d
    cdef double dummy = 0.0
    cdef long long idummy = 0
    d.n = transfer.shape[0]
    d.n_pairs = volume.shape[0]
    d.n_modes = n_modes
    d.n_links = link_cost.shape[0]
    d.transfer = &transfer[0] if d.n else &dummy
    d.arrange = &arrange[0] if d.n else &dummy
    d.pair = &pair[0] if d.n else &idummy
    d.mode = &mode[0] if d.n else &idummy
    d.ta = &ta[0] if d.n else &dummy
    d.cap = &cap[0] if d.n else &dummy
    d.link = &link[0] if d.n else &idummy
    d.volume = &volume[0] if d.n_pairs else &dummy
    d.td = &td[0] if d.n_pairs else &dummy
    d.link_cost = &link_cost[0] if d.n_links else &dummy
    d.alpha = alpha
    d.beta = beta
    d.cl = cl
    d.ct = ct
    return d


def evaluate(const char[::1] mask, const double[::1] transfer, const double[::1] arrange,
             const long long[::1] pair, const long long[::1] mode, const double[::1] ta,
             const double[::1] cap, const long long[::1] link, const double[::1] volume,
             const double[::1] td, const double[::1] link_cost, int n_modes,
             double alpha, double beta, double cl, double ct):
    cdef Inst d = _inst(transfer, arrange, pair, mode, ta, cap, link, volume, td, link_cost,
                        n_modes, alpha, beta, cl, ct)
    cdef Scratch s
    cdef double obj, vw
    cdef char zero = 0
    cdef int ok
    _alloc(&s, &d)
    try:
        ok = _eval(&d, &s, &mask[0] if d.n else &zero, &obj, &vw)
    finally:
        _release(&s)
    return bool(ok), obj, vw


cdef inline bint _better(double vw, double obj, int cnt, uint64_t bits, double bvw, double bobj,
                         int bcnt, uint64_t bbits, const long long* rank, int n,
                         bint serve_all) nogil:
    cdef uint64_t diff
    cdef int k, low = -1
    if serve_all and vw != bvw:
        return vw < bvw
    if obj != bobj:
        return obj < bobj
    if cnt != bcnt:
        return cnt < bcnt
    diff = bits ^ bbits
    if diff == 0:
        return False
    for k in range(n):
        if (diff >> k) & 1:
            if low < 0 or rank[k] < rank[low]:
                low = k
    return (bits >> low) & 1


def enumerate_best(const double[::1] transfer, const double[::1] arrange,
                   const long long[::1] pair, const long long[::1] mode, const double[::1] ta,
                   const double[::1] cap, const long long[::1] link, const double[::1] volume,
                   const double[::1] td, const double[::1] link_cost, int n_modes,
                   double alpha, double beta, double cl, double ct,
                   const long long[::1] rank, bint serve_all):
    cdef Inst d = _inst(transfer, arrange, pair, mode, ta, cap, link, volume, td, link_cost,
                        n_modes, alpha, beta, cl, ct)
    cdef Scratch s
    cdef int n = d.n, k, cnt, bcnt = 0
    cdef uint64_t bits, total, bbits = 0
    cdef double obj, vw, bobj = INFINITY, bvw = INFINITY
    cdef bint have = False
    cdef char* mask
    cdef long long rdummy = 0
    cdef const long long* rp = &rank[0] if n else &rdummy
    if n > 40:
        raise ValueError("enumeration limited to 40 candidates")
    total = (<uint64_t>1) << n
    mask = <char*>calloc(max(n, 1), 1)
    if not mask:
        raise MemoryError()
    _alloc(&s, &d)
    try:
        with nogil:
            bits = 0
            while bits < total:
                cnt = 0
                for k in range(n):
                    mask[k] = (bits >> k) & 1
                    cnt += mask[k]
                if _eval(&d, &s, mask, &obj, &vw):
                    if not have or _better(vw, obj, cnt, bits, bvw, bobj, bcnt, bbits, rp, n,
                                           serve_all):
                        have = True
                        bvw = vw
                        bobj = obj
                        bcnt = cnt
                        bbits = bits
                bits += 1
    finally:
        free(mask)
        _release(&s)
    return int(bbits), bobj, bvw, int(total)
