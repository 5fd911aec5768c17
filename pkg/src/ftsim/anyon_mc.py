"""Stochastic anyon engine for the toric-code memory.

Two independent species share one lattice: species 0 is the Z-error chain
with defects on vertices, species 1 the X-error chain with defects on faces.
Each sweep creates pairs on defect-free edges, lets every defect hop across
one incident edge, and annihilates defects that meet.  Winding bits are
toggled whenever a toggled edge lies on the species' reference cut, so at
any vacuum time they equal the homology class of the accumulated chain.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .lattice import HomologyClass, PauliChain, ToricLattice, build_lattice
from .rng import philox4x32, trial_seed
from .stats import wilson_interval

_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# direction order used in every per-site table
PX, MX, PY, MY = 0, 1, 2, 3


@dataclass(frozen=True)
class MCParams:
    p_create: float
    p_hop: float
    bias_q: float = 0.0
    bias_radius: int = 1
    t_max: int = 10_000
    seed: int = 0

    def __post_init__(self):
        for name in ("p_create", "p_hop", "bias_q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.bias_radius < 1:
            raise ValueError("bias_radius must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def fingerprint(self) -> str:
        d = asdict(self)
        d.pop("seed")
        return ";".join(f"{k}={d[k]!r}" for k in sorted(d))


class TrialOutcome(NamedTuple):
    failed: bool
    failure_time: int | None
    max_defect_count: int
    cleanup: bool        # defects were force-annihilated at t_max


class Geometry(NamedTuple):
    """Per-species lookup tables consumed by the compiled kernel."""

    k: int
    dir_edge: np.ndarray   # (2, k*k, 4) edge crossed moving +x, -x, +y, -y
    dir_site: np.ndarray   # (2, k*k, 4) site reached
    edge_sites: np.ndarray  # (2, 2k*k, 2)
    seam: np.ndarray       # (2, 2k*k) winding bit toggled by the edge, or -1


_GEOMETRY_CACHE: dict[int, Geometry] = {}


def geometry(lattice: ToricLattice) -> Geometry:
    g = _GEOMETRY_CACHE.get(lattice.k)
    if g is not None:
        return g
    k = lattice.k
    kk = k * k
    sites = np.arange(kk)
    x, y = sites % k, sites // k

    def site(xx, yy):
        return (yy % k) * k + (xx % k)

    def hid(xx, yy):
        return (yy % k) * k + (xx % k)

    def vid(xx, yy):
        return kk + (yy % k) * k + (xx % k)

    dir_site = np.empty((2, kk, 4), np.int64)
    for sp in range(2):
        dir_site[sp] = np.stack([site(x + 1, y), site(x - 1, y), site(x, y + 1), site(x, y - 1)], axis=1)
    dir_edge = np.empty((2, kk, 4), np.int64)
    dir_edge[0] = np.stack([hid(x, y), hid(x - 1, y), vid(x, y), vid(x, y - 1)], axis=1)
    dir_edge[1] = np.stack([vid(x + 1, y), vid(x, y), hid(x, y + 1), hid(x, y)], axis=1)
    edge_sites = np.stack([lattice.edge_vertices, lattice.edge_faces]).astype(np.int64)
    seam = np.full((2, 2 * kk), -1, np.int64)
    seam[0, lattice.seam_v] = 0
    seam[0, lattice.seam_h] = 1
    seam[1, lattice.dual_seam_v] = 0
    seam[1, lattice.dual_seam_h] = 1
    g = Geometry(k, dir_edge, dir_site, edge_sites, seam)
    _GEOMETRY_CACHE[k] = g
    return g


# --------------------------------------------------------------------------
# compiled kernel
#
# rs: uint64[7] = [key, next_block, pos, w0, w1, w2, w3]


@njit(cache=True, inline='always')
def _rng_init(rs, key):
    rs[0] = np.uint64(key)
    rs[1] = 0
    rs[2] = 4


@njit(cache=True, inline='always')
def _u32(rs):
    if rs[2] >= 4:
        c = rs[1]
        w0, w1, w2, w3 = philox4x32(c & _LO, c >> _S32, np.uint64(0), np.uint64(0), rs[0] & _LO, rs[0] >> _S32)
        rs[3] = w0
        rs[4] = w1
        rs[5] = w2
        rs[6] = w3
        rs[1] = c + np.uint64(1)
        rs[2] = 0
    w = rs[3 + np.int64(rs[2])]
    rs[2] += np.uint64(1)
    return w


@njit(cache=True, inline='always')
def _uniform(rs):
    a = _u32(rs) >> np.uint64(5)
    b = _u32(rs) >> np.uint64(6)
    return (float(a) * 67108864.0 + float(b)) / 9007199254740992.0


@njit(cache=True, inline='always')
def _bernoulli(rs, threshold):
    # threshold = p * 2**32; one word per draw
    return float(_u32(rs)) < threshold


@njit(cache=True, inline='always')
def _geometric_gap(rs, log1mp):
    # failures before the next success of a Bernoulli(p) sequence
    u = 1.0 - _uniform(rs)
    return int(math.floor(math.log(u) / log1mp))


@njit(cache=True, inline='always')
def _flip_defect(sp, site, occ, dlist, dcount, dpos):
    if occ[sp, site]:
        i = dpos[sp, site]
        last = dcount[sp] - 1
        moved = dlist[sp, last]
        dlist[sp, i] = moved
        dpos[sp, moved] = i
        dpos[sp, site] = -1
        dcount[sp] = last
        occ[sp, site] = 0
    else:
        dlist[sp, dcount[sp]] = site
        dpos[sp, site] = dcount[sp]
        dcount[sp] += 1
        occ[sp, site] = 1


@njit(cache=True, inline='always')
def _toggle(sp, e, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind):
    chain[sp, e] ^= 1
    b = seam[sp, e]
    if b >= 0:
        wind[sp, b] ^= 1
    _flip_defect(sp, edge_sites[sp, e, 0], occ, dlist, dcount, dpos)
    _flip_defect(sp, edge_sites[sp, e, 1], occ, dlist, dcount, dpos)


@njit(cache=True, inline='always')
def _dist(k, a, b):
    dx = abs(a % k - b % k)
    dy = abs(a // k - b // k)
    return min(dx, k - dx) + min(dy, k - dy)


@njit(cache=True)
def _nearest(k, sp, site, radius, dlist, dcount):
    best = -1
    bestd = radius + 1
    for i in range(dcount[sp]):
        o = dlist[sp, i]
        if o == site:
            continue
        d = _dist(k, site, o)
        if d < bestd or (d == bestd and o < best):
            best = o
            bestd = d
    return best


@njit(cache=True)
def _step(k, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind, stamp,
          clock, p_create, p_hop, bias_q, radius, scratch, rs):
    n_edges = edge_sites.shape[1]
    log1mp = math.log1p(-p_create) if p_create < 1.0 else 0.0
    hop_thr = p_hop * 4294967296.0
    bias_thr = bias_q * 4294967296.0
    for sp in range(2):
        # (a) pair creation on edges whose endpoints are both defect-free
        if p_create > 0.0:
            e = -1
            while True:
                if p_create >= 1.0:
                    e += 1
                else:
                    e += 1 + _geometric_gap(rs, log1mp)
                if e >= n_edges:
                    break
                if occ[sp, edge_sites[sp, e, 0]] == 0 and occ[sp, edge_sites[sp, e, 1]] == 0:
                    _toggle(sp, e, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind)
        # (b) hops, over a snapshot of this sweep's defects
        n = dcount[sp]
        for i in range(n):
            scratch[i] = dlist[sp, i]
        for i in range(n):
            a = scratch[i]
            if occ[sp, a] == 0 or stamp[sp, a] == clock:
                continue
            if not _bernoulli(rs, hop_thr):
                continue
            d = np.int64(-1)
            if bias_q > 0.0 and _bernoulli(rs, bias_thr):
                t = _nearest(k, sp, a, radius, dlist, dcount)
                if t >= 0:
                    d0 = _dist(k, a, t)
                    beste = n_edges
                    for dd in range(4):
                        if _dist(k, dir_site[sp, a, dd], t) < d0 and dir_edge[sp, a, dd] < beste:
                            beste = dir_edge[sp, a, dd]
                            d = np.int64(dd)
            if d < 0:
                d = np.int64(_u32(rs) >> np.uint64(30))
            b = dir_site[sp, a, d]
            _toggle(sp, dir_edge[sp, a, d], edge_sites, seam, chain, occ, dlist, dcount, dpos, wind)
            if occ[sp, b]:
                stamp[sp, b] = clock


@njit(cache=True)
def _walk(k, sp, a, b, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind):
    # toggle a shortest path a -> b: x first, then y; ties go the positive way
    cur = a
    dx = (b % k - a % k) % k
    ddx = PX if dx <= k - dx else MX
    nx = dx if ddx == PX else k - dx
    dy = (b // k - a // k) % k
    ddy = PY if dy <= k - dy else MY
    ny = dy if ddy == PY else k - dy
    for _ in range(nx):
        e = dir_edge[sp, cur, ddx]
        nxt = dir_site[sp, cur, ddx]
        chain[sp, e] ^= 1
        if seam[sp, e] >= 0:
            wind[sp, seam[sp, e]] ^= 1
        cur = nxt
    for _ in range(ny):
        e = dir_edge[sp, cur, ddy]
        nxt = dir_site[sp, cur, ddy]
        chain[sp, e] ^= 1
        if seam[sp, e] >= 0:
            wind[sp, seam[sp, e]] ^= 1
        cur = nxt
    _flip_defect(sp, a, occ, dlist, dcount, dpos)
    _flip_defect(sp, b, occ, dlist, dcount, dpos)


@njit(cache=True)
def _cleanup(k, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind):
    # greedy nearest-pair matching; ties by lowest (site, site) pair
    for sp in range(2):
        while dcount[sp] > 0:
            ba = -1
            bb = -1
            bd = 1 << 30
            for i in range(dcount[sp]):
                for j in range(dcount[sp]):
                    a = dlist[sp, i]
                    b = dlist[sp, j]
                    if a >= b:
                        continue
                    d = _dist(k, a, b)
                    if d < bd or (d == bd and (a < ba or (a == ba and b < bb))):
                        ba = a
                        bb = b
                        bd = d
            _walk(k, sp, ba, bb, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind)


@njit(cache=True)
def _run_trial(k, dir_edge, dir_site, edge_sites, seam, p_create, p_hop, bias_q, radius, t_max, key):
    kk = k * k
    n_edges = 2 * kk
    chain = np.zeros((2, n_edges), np.uint8)
    occ = np.zeros((2, kk), np.uint8)
    dlist = np.zeros((2, kk), np.int64)
    dcount = np.zeros(2, np.int64)
    dpos = np.full((2, kk), -1, np.int64)
    wind = np.zeros((2, 2), np.uint8)
    stamp = np.full((2, kk), -1, np.int64)
    scratch = np.zeros(kk, np.int64)
    rs = np.zeros(7, np.uint64)
    _rng_init(rs, key)
    max_def = 0
    for clock in range(1, t_max + 1):
        _step(k, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind, stamp,
              clock, p_create, p_hop, bias_q, radius, scratch, rs)
        nd = dcount[0] + dcount[1]
        if nd > max_def:
            max_def = nd
        for sp in range(2):
            if dcount[sp] == 0 and (wind[sp, 0] or wind[sp, 1]):
                return True, clock, max_def, False
    if dcount[0] + dcount[1] == 0:
        return False, -1, max_def, False
    _cleanup(k, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind)
    failed = (wind[0, 0] | wind[0, 1] | wind[1, 0] | wind[1, 1]) != 0
    return failed, (t_max if failed else -1), max_def, True


@njit(cache=True)
def _pair_lifetime(k, dir_edge, dir_site, edge_sites, seam, p_hop, t_max, key):
    # one Z pair on edge 0, no creation; steps until it annihilates
    kk = k * k
    chain = np.zeros((2, 2 * kk), np.uint8)
    occ = np.zeros((2, kk), np.uint8)
    dlist = np.zeros((2, kk), np.int64)
    dcount = np.zeros(2, np.int64)
    dpos = np.full((2, kk), -1, np.int64)
    wind = np.zeros((2, 2), np.uint8)
    stamp = np.full((2, kk), -1, np.int64)
    scratch = np.zeros(kk, np.int64)
    rs = np.zeros(7, np.uint64)
    _rng_init(rs, key)
    _toggle(0, 0, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind)
    for clock in range(1, t_max + 1):
        _step(k, dir_edge, dir_site, edge_sites, seam, chain, occ, dlist, dcount, dpos, wind, stamp,
              clock, 0.0, p_hop, 0.0, 1, scratch, rs)
        if dcount[0] == 0:
            return clock
    return -1


@njit(cache=True)
def _run_batch(k, dir_edge, dir_site, edge_sites, seam, p_create, p_hop, bias_q, radius, t_max,
               seed, first, count, failed, ftime, maxdef, cleaned):
    for j in range(count):
        key = np.uint64(seed) + np.uint64(first + j)
        f, t, m, c = _run_trial(k, dir_edge, dir_site, edge_sites, seam, p_create, p_hop, bias_q,
                                radius, t_max, key)
        failed[j] = f
        ftime[j] = t
        maxdef[j] = m
        cleaned[j] = c


# --------------------------------------------------------------------------
# python-facing state


class AnyonState:
    """Full stepping state; mirrors the compiled kernel for inspection and tests."""

    def __init__(self, lattice: ToricLattice, seed: int = 0):
        self.lattice = lattice
        self.geo = geometry(lattice)
        kk = lattice.k ** 2
        self.chain_bits = np.zeros((2, 2 * kk), np.uint8)
        self.occ = np.zeros((2, kk), np.uint8)
        self.dlist = np.zeros((2, kk), np.int64)
        self.dcount = np.zeros(2, np.int64)
        self.dpos = np.full((2, kk), -1, np.int64)
        self.wind = np.zeros((2, 2), np.uint8)
        self.stamp = np.full((2, kk), -1, np.int64)
        self.scratch = np.zeros(kk, np.int64)
        self.rs = np.zeros(7, np.uint64)
        _rng_init(self.rs, np.uint64(seed))
        self.clock = 0

    @property
    def chain(self) -> PauliChain:
        # species 0 carries Z errors, species 1 X errors
        return PauliChain(self.chain_bits[1].astype(bool), self.chain_bits[0].astype(bool))

    @property
    def vertex_defects(self) -> frozenset:
        return frozenset(int(s) for s in np.flatnonzero(self.occ[0]))

    @property
    def face_defects(self) -> frozenset:
        return frozenset(int(s) for s in np.flatnonzero(self.occ[1]))

    @property
    def winding(self) -> HomologyClass:
        w = self.wind
        return HomologyClass(int(w[0, 0]), int(w[0, 1]), int(w[1, 0]), int(w[1, 1]))

    def is_vacuum(self) -> bool:
        return int(self.dcount.sum()) == 0

    def toggle_edge(self, species: int, e: int) -> None:
        g = self.geo
        _toggle(species, e, g.edge_sites, g.seam, self.chain_bits, self.occ, self.dlist, self.dcount,
                self.dpos, self.wind)

    def step(self, params: MCParams) -> "AnyonState":
        g = self.geo
        self.clock += 1
        _step(g.k, g.dir_edge, g.dir_site, g.edge_sites, g.seam, self.chain_bits, self.occ, self.dlist,
              self.dcount, self.dpos, self.wind, self.stamp, self.clock, params.p_create, params.p_hop,
              params.bias_q, params.bias_radius, self.scratch, self.rs)
        return self

    def cleanup(self) -> None:
        g = self.geo
        _cleanup(g.k, g.dir_edge, g.dir_site, g.edge_sites, g.seam, self.chain_bits, self.occ,
                 self.dlist, self.dcount, self.dpos, self.wind)


def mc_step(state: AnyonState, params: MCParams) -> AnyonState:
    return state.step(params)


def _batch_arrays(k: int, params: MCParams, first: int, count: int):
    g = geometry(build_lattice(k))
    failed = np.zeros(count, np.bool_)
    ftime = np.zeros(count, np.int64)
    maxdef = np.zeros(count, np.int64)
    cleaned = np.zeros(count, np.bool_)
    _run_batch(k, g.dir_edge, g.dir_site, g.edge_sites, g.seam, params.p_create, params.p_hop,
               params.bias_q, params.bias_radius, params.t_max, np.uint64(params.seed), first, count,
               failed, ftime, maxdef, cleaned)
    return failed, ftime, maxdef, cleaned


def run_trial(k: int, params: MCParams, trial_index: int = 0) -> TrialOutcome:
    """One trial keyed by ``params.seed + trial_index``."""
    build_lattice(k)
    f, t, m, c = _batch_arrays(k, params, trial_index, 1)
    return TrialOutcome(bool(f[0]), int(t[0]) if f[0] else None, int(m[0]), bool(c[0]))


def pair_lifetime(k: int, p_hop: float = 0.5, t_max: int = 10**6, seed: int = 0) -> int | None:
    """Steps until a single freshly created pair re-annihilates (None if not by t_max)."""
    g = geometry(build_lattice(k))
    t = _pair_lifetime(g.k, g.dir_edge, g.dir_site, g.edge_sites, g.seam, float(p_hop), int(t_max),
                       np.uint64(seed))
    return None if t < 0 else int(t)


class RateEstimate(NamedTuple):
    k: int
    fingerprint: str
    n_trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    mean_failure_time: float   # nan when no trial failed
    cleanups: int


def _chunk(args):
    k, params, first, count = args
    return _batch_arrays(k, params, first, count)


def logical_error_rate(k: int, params: MCParams, n_trials: int, workers: int = 1,
                       chunk: int = 500) -> RateEstimate:
    """Failure fraction over trials seeded ``seed + i`` with a Wilson 95% interval.

    Trials are cut into fixed chunks independent of ``workers``, and results
    are reassembled by trial index, so the estimate is identical for every
    worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    build_lattice(k)
    jobs = [(k, params, s, min(chunk, n_trials - s)) for s in range(0, n_trials, chunk)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    failed = np.concatenate([p[0] for p in parts])
    ftime = np.concatenate([p[1] for p in parts])
    cleaned = np.concatenate([p[3] for p in parts])
    nf = int(failed.sum())
    lo, hi = wilson_interval(nf, n_trials)
    mean_t = float(ftime[failed].mean()) if nf else float("nan")
    return RateEstimate(k, params.fingerprint(), n_trials, nf, nf / n_trials, lo, hi, mean_t,
                        int(cleaned.sum()))
