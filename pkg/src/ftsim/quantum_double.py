"""S3 flux anyons on an open L x L grid.

Fluxes are labels relative to a fixed gauge frame: every anyon is read
through its own branch cut and the total flux is the product of all labels
in ascending spatial key ``(x, y)``.  A horizontal step across the key of
another anyon ``q`` changes labels so that the ordered product is unchanged:

  stepping right past q (mover m):  q above m:  m <- q^-1 m q
                                    q below m:  q <- m q m^-1
  stepping left past q:             q above m:  m <- q m q^-1
                                    q below m:  q <- m^-1 q m

Vertical steps pass no keys.  A closed loop therefore conjugates the mover
by exactly the fluxes it encloses, while open motion only relabels.

All randomness comes from a Philox stream; every state change is recorded
as an event dict, and ``replay`` rebuilds a state from those events alone.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from . import s3
from .rng import PhiloxStream, trial_seed
from .stats import intervals_overlap, wilson_interval

DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))   # right, up, left, down


class DoubleError(ValueError):
    pass


class OccupiedError(DoubleError):
    pass


class BlockedPathError(DoubleError):
    pass


class NotAdjacentError(DoubleError):
    pass


@dataclass
class FluxAnyon:
    id: int
    flux: int
    pos: tuple
    partner_id: int        # -1 once the partner is gone or for fusion residuals

    def as_list(self):
        return [self.id, self.flux, list(self.pos), self.partner_id]


class FuseResult(NamedTuple):
    flux: int              # e on annihilation
    survivor: int          # id of the residual anyon, -1 on annihilation
    wrong_pair: bool


def _manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class DoubleState:
    """Anyon configuration, event log and random stream of one run."""

    def __init__(self, L: int, seed: int = 0, log: bool = True):
        if L < 2:
            raise DoubleError("grid needs L >= 2")
        self.L = L
        self.seed = seed
        self.anyons: dict[int, FluxAnyon] = {}
        self.occ: dict[tuple, int] = {}
        self.protected: set[int] = set()
        self.rng = PhiloxStream(seed)
        self.clock = 0
        self.next_id = 0
        self.stats = {"created": 0, "annihilated": 0, "residual": 0, "wrong_pairs": 0, "blocked": 0}
        self.events: list[dict] | None = [] if log else None
        self._record({"ev": "init", "L": L, "seed": seed})

    # -- bookkeeping ------------------------------------------------------

    def _record(self, ev: dict) -> None:
        if self.events is not None:
            self.events.append(ev)

    def in_grid(self, p) -> bool:
        return 0 <= p[0] < self.L and 0 <= p[1] < self.L

    def free(self, p) -> bool:
        return self.in_grid(p) and p not in self.occ

    def strays(self) -> list[int]:
        return sorted(i for i in self.anyons if i not in self.protected)

    def total_flux(self) -> int:
        return s3.product(a.flux for a in sorted(self.anyons.values(), key=lambda a: a.pos))

    def snapshot(self) -> dict:
        return {
            "L": self.L, "clock": self.clock, "next_id": self.next_id,
            "anyons": [self.anyons[i].as_list() for i in sorted(self.anyons)],
            "protected": sorted(self.protected), "stats": dict(sorted(self.stats.items())),
        }

    def dumps(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))

    def event_lines(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events or [])

    # -- frame transport ----------------------------------------------------

    def _pass_horizontal(self, mid: int, key_from: tuple, key_to: tuple) -> None:
        """Relabel for a horizontal shift of ``mid`` between two keys at the same height."""
        m = self.anyons[mid]
        y = key_from[1]
        lo, hi = min(key_from, key_to), max(key_from, key_to)
        between = sorted((a.pos, a.id) for a in self.anyons.values()
                         if a.id != mid and lo < a.pos < hi)
        right = key_to > key_from
        if not right:
            between.reverse()
        for pos, qid in between:
            q = self.anyons[qid]
            above = pos[1] > y
            if right:
                if above:
                    m.flux = s3.conjugate(m.flux, q.flux)
                else:
                    q.flux = s3.multiply(s3.multiply(m.flux, q.flux), s3.inverse(m.flux))
            else:
                if above:
                    m.flux = s3.multiply(s3.multiply(q.flux, m.flux), s3.inverse(q.flux))
                else:
                    q.flux = s3.conjugate(q.flux, m.flux)

    def _relocate(self, aid: int, to: tuple) -> None:
        a = self.anyons[aid]
        if a.pos in self.occ and self.occ[a.pos] == aid:
            del self.occ[a.pos]
        a.pos = to
        if float(to[0]).is_integer() and float(to[1]).is_integer():
            self.occ[to] = aid

    def _shift(self, aid: int, to: tuple) -> None:
        a = self.anyons[aid]
        if to[1] == a.pos[1] and to[0] != a.pos[0]:
            self._pass_horizontal(aid, a.pos, to)
        elif to[0] != a.pos[0]:
            raise DoubleError("shift must be horizontal or vertical")
        self._relocate(aid, to)

    # -- operations ---------------------------------------------------------

    def create_pair(self, g, site_a, site_b, protected: bool = False) -> tuple[int, int]:
        g = s3.element(g)
        site_a, site_b = tuple(site_a), tuple(site_b)
        if g == s3.E:
            raise DoubleError("cannot create a pair with trivial flux")
        if _manhattan(site_a, site_b) != 1:
            raise NotAdjacentError(f"{site_a} and {site_b} are not adjacent")
        for p in (site_a, site_b):
            if not self.in_grid(p):
                raise DoubleError(f"site {p} is outside the grid")
            if p in self.occ:
                raise OccupiedError(f"site {p} is occupied")
        ia, ib = self.next_id, self.next_id + 1
        self.next_id += 2
        self.anyons[ia] = FluxAnyon(ia, g, site_a, ib)
        self.occ[site_a] = ia
        if site_a[0] == site_b[0]:
            self.anyons[ib] = FluxAnyon(ib, s3.inverse(g), site_b, ia)
            self.occ[site_b] = ib
        else:
            # born in the half-step slot just above a, then carried over
            self.anyons[ib] = FluxAnyon(ib, s3.inverse(g), (site_a[0], site_a[1] + 0.5), ia)
            self._shift(ib, (site_b[0], site_a[1] + 0.5))
            self._relocate(ib, site_b)
        if protected:
            self.protected.update((ia, ib))
        self.stats["created"] += 1
        self._record({"ev": "create", "g": g, "a": list(site_a), "b": list(site_b), "ids": [ia, ib],
                      "protected": protected})
        return ia, ib

    def move(self, aid: int, to) -> None:
        to = tuple(to)
        a = self._get(aid)
        if _manhattan(a.pos, to) != 1:
            raise NotAdjacentError(f"move {a.pos} -> {to} is not a unit step")
        if not self.in_grid(to):
            raise DoubleError(f"site {to} is outside the grid")
        if to in self.occ:
            raise OccupiedError(f"site {to} is occupied")
        self._shift(aid, to)
        self._record({"ev": "move", "id": aid, "to": list(to)})

    def _get(self, aid: int) -> FluxAnyon:
        try:
            return self.anyons[aid]
        except KeyError:
            raise DoubleError(f"no anyon with id {aid}") from None

    def braid_path(self, moving_id: int, around_id: int) -> list[tuple]:
        """Counterclockwise boundary of the box spanning around's 3x3 block and the mover."""
        m, c = self._get(moving_id), self._get(around_id)
        if m.pos == c.pos or moving_id == around_id:
            raise DoubleError("braid needs two distinct anyons")
        (px, py), (cx, cy) = m.pos, c.pos
        x0, x1 = min(cx - 1, px), max(cx + 1, px)
        y0, y1 = min(cy - 1, py), max(cy + 1, py)
        ring = [(x, y0) for x in range(x0, x1)] + [(x1, y) for y in range(y0, y1)]
        ring += [(x, y1) for x in range(x1, x0, -1)] + [(x0, y) for y in range(y1, y0, -1)]
        i = ring.index((px, py))
        path = ring[i + 1:] + ring[:i + 1]
        for p in path[:-1]:
            if not self.in_grid(p):
                raise BlockedPathError(f"braid path leaves the grid at {p}")
            if p in self.occ:
                raise BlockedPathError(f"braid path blocked at {p}")
        for p, aid in self.occ.items():
            if x0 <= p[0] <= x1 and aid not in (moving_id, around_id):
                if y0 < p[1] < y1:
                    raise BlockedPathError(f"anyon {aid} inside the braid loop")
                raise BlockedPathError(f"anyon {aid} shares the braid loop's column strip")
        return path

    def braid(self, moving_id: int, around_id: int) -> int:
        """Carry ``moving_id`` once counterclockwise around ``around_id``.

        The loop acts on the pair as a pure braid.  With the two labels
        ``a, b`` taken in key order it maps ``a -> b^-1 a b`` and
        ``b -> a'^-1 b a'``, so when the mover precedes the encircled anyon
        (left of it, or below it in the same column) its flux becomes
        ``g2^-1 g1 g2``.  Both classes are preserved.  Returns the mover's new
        flux.  The loop's column strip must hold no other anyon, which keeps
        bystander labels untouched.
        """
        path = self.braid_path(moving_id, around_id)
        for p in path:
            self._shift(moving_id, p)
        self._record({"ev": "braid", "id": moving_id, "around": around_id})
        return self.anyons[moving_id].flux

    def fuse(self, id_a: int, id_b: int) -> FuseResult:
        """Fuse two adjacent anyons into their ordered product.

        The pair is first made key-adjacent (a horizontal partner is carried
        through the half-step slot above the left member); the product is
        taken in key order and a residual keeps the lower id at the left or
        lower site.
        """
        a, b = self._get(id_a), self._get(id_b)
        if _manhattan(a.pos, b.pos) != 1:
            raise NotAdjacentError(f"anyons {id_a} and {id_b} are not adjacent")
        first, second = (a, b) if a.pos < b.pos else (b, a)
        if first.pos[1] == second.pos[1]:
            x, y = first.pos
            self._relocate(second.id, (second.pos[0], y + 0.5))
            self._shift(second.id, (x, y + 0.5))
        g = s3.multiply(first.flux, second.flux)
        wrong = a.partner_id != b.id or b.partner_id != a.id
        site = first.pos
        del self.occ[first.pos]
        if second.pos in self.occ:
            del self.occ[second.pos]
        del self.anyons[first.id], self.anyons[second.id]
        for other in (a, b):
            partner = self.anyons.get(other.partner_id)
            if partner is not None:
                partner.partner_id = -1
        if wrong:
            self.stats["wrong_pairs"] += 1
        survivor = -1
        if g == s3.E:
            self.stats["annihilated"] += 1
        else:
            survivor = min(id_a, id_b)
            self.anyons[survivor] = FluxAnyon(survivor, g, site, -1)
            self.occ[site] = survivor
            self.stats["residual"] += 1
        self.protected.discard(id_a if survivor != id_a else -1)
        self.protected.discard(id_b if survivor != id_b else -1)
        self._record({"ev": "fuse", "ids": [id_a, id_b], "result": g, "wrong": wrong})
        return FuseResult(g, survivor, wrong)

    # -- noise and correction ---------------------------------------------

    def noise_step(self, p_pair: float, class_weights: Sequence[float] = (0.5, 0.5),
                   max_tries: int = 64) -> None:
        """Maybe create a stray pair, then give every stray one random-walk attempt."""
        if not 0 <= p_pair <= 1:
            raise DoubleError("p_pair must be a probability")
        if len(class_weights) != 2 or min(class_weights) < 0 or sum(class_weights) <= 0:
            raise DoubleError("class_weights must weight (transposition, 3-cycle)")
        rng = self.rng
        self.clock += 1
        self._record({"ev": "tick"})
        if p_pair > 0 and rng.random() < p_pair:
            for _ in range(max_tries):
                s = rng.integers(self.L * self.L)
                a = (s % self.L, s // self.L)
                dx, dy = DIRS[rng.integers(4)]
                b = (a[0] + dx, a[1] + dy)
                if self.free(a) and self.free(b):
                    cls = s3.CLASSES[1 + rng.choice_weighted(class_weights)]
                    self.create_pair(cls[rng.integers(len(cls))], a, b)
                    break
        for aid in self.strays():
            a = self.anyons.get(aid)
            if a is None:
                continue
            dx, dy = DIRS[rng.integers(4)]
            to = (a.pos[0] + dx, a.pos[1] + dy)
            if self.free(to):
                self.move(aid, to)

    def route(self, aid: int, target: tuple) -> list[tuple] | None:
        """Shortest free path from ``aid`` to any free neighbour of ``target``."""
        start = self.anyons[aid].pos
        goals = {(target[0] + dx, target[1] + dy) for dx, dy in DIRS}
        if start in goals:
            return []
        prev = {start: None}
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for dx, dy in DIRS:
                q = (p[0] + dx, p[1] + dy)
                if q in prev or not self.free(q):
                    continue
                prev[q] = p
                if q in goals:
                    path = [q]
                    while prev[path[-1]] != start:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(q)
        return None

    def sweep(self, radius: int) -> int:
        """Annihilate nearby inverse-flux strays until a fixed point; returns fusions done."""
        if radius < 1:
            raise DoubleError("radius must be >= 1")
        skipped: set[tuple[int, int]] = set()
        fused = 0
        while True:
            ids = self.strays()
            best = None
            for i, ia in enumerate(ids):
                a = self.anyons[ia]
                for ib in ids[i + 1:]:
                    b = self.anyons[ib]
                    if (ia, ib) in skipped or s3.multiply(a.flux, b.flux) != s3.E:
                        continue
                    d = _manhattan(a.pos, b.pos)
                    if d <= radius and (best is None or (d, ia, ib) < best):
                        best = (d, ia, ib)
            if best is None:
                return fused
            _, ia, ib = best
            path = self.route(ib, self.anyons[ia].pos)
            if path is None:
                skipped.add((ia, ib))
                self.stats["blocked"] += 1
                continue
            for p in path:
                self.move(ib, p)
            self.fuse(ia, ib)
            fused += 1


def pure_braid(a: int, b: int) -> tuple[int, int]:
    """Labels after a full counterclockwise exchange of key-ordered anyons a, b."""
    a2 = s3.conjugate(a, b)
    return a2, s3.conjugate(b, a2)


# --------------------------------------------------------------------------
# replay


def replay(events: Iterable[dict], L: int = 2) -> DoubleState:
    """Rebuild a state from its event log; random draws are not needed.

    An empty log replays to the empty (vacuum) grid of size ``L``.  Errors
    name the offending event by its position in the log.
    """
    events = list(events)
    if not events:
        return DoubleState(L)
    first = events[0]
    if first.get("ev") != "init":
        raise DoubleError("event 0: log must start with init")
    st = DoubleState(first["L"], first["seed"])
    for i, ev in enumerate(events[1:], 1):
        try:
            _apply(st, ev)
        except (DoubleError, KeyError, TypeError) as err:
            raise DoubleError(f"event {i}: {err}") from None
    return st


def _apply(st: DoubleState, ev: dict) -> None:
    kind = ev["ev"]
    if kind == "create":
        ids = st.create_pair(ev["g"], ev["a"], ev["b"], ev.get("protected", False))
        if list(ids) != ev["ids"]:
            raise DoubleError("replay diverged at create")
    elif kind == "move":
        st.move(ev["id"], ev["to"])
    elif kind == "braid":
        st.braid(ev["id"], ev["around"])
    elif kind == "fuse":
        r = st.fuse(*ev["ids"])
        if r.flux != ev["result"]:
            raise DoubleError("replay diverged at fuse")
    elif kind == "tick":
        st.clock += 1
        st._record({"ev": "tick"})
    else:
        raise DoubleError(f"unknown event {kind!r}")


def read_events(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# --------------------------------------------------------------------------
# randomized stress run


def random_events(L: int, n_events: int, seed: int, check_every: int = 1,
                  max_anyons: int = 8) -> tuple[DoubleState, int]:
    """Drive create/move/braid/fuse at random, checking total flux after each check interval.

    Returns the state and the number of flux checks performed; raises if the
    ordered total flux ever leaves e.
    """
    st = DoubleState(L, seed)
    rng = PhiloxStream(trial_seed(seed, 1 << 32))
    done = checks = 0
    while done < n_events:
        r = rng.integers(10)
        ids = sorted(st.anyons)
        if (r < 2 and len(ids) < max_anyons) or len(ids) < 2:
            s = rng.integers(L * L)
            a = (s % L, s // L)
            dx, dy = DIRS[rng.integers(4)]
            b = (a[0] + dx, a[1] + dy)
            if not (st.free(a) and st.free(b)):
                continue
            st.create_pair(1 + rng.integers(5), a, b)
        elif r < 7:
            aid = ids[rng.integers(len(ids))]
            dx, dy = DIRS[rng.integers(4)]
            p = st.anyons[aid].pos
            to = (p[0] + dx, p[1] + dy)
            if not st.free(to):
                continue
            st.move(aid, to)
        elif r < 9:
            m, c = ids[rng.integers(len(ids))], ids[rng.integers(len(ids))]
            if m == c:
                continue
            try:
                st.braid_path(m, c)
            except BlockedPathError:
                continue
            before = st.anyons[m].flux, st.anyons[c].flux
            first = st.anyons[m].pos < st.anyons[c].pos
            out = st.braid(m, c)
            want = pure_braid(*before) if first else pure_braid(before[1], before[0])[::-1]
            if (out, st.anyons[c].flux) != want:
                raise DoubleError("braid broke the pure-braid rule")
        else:
            aid = ids[rng.integers(len(ids))]
            p = st.anyons[aid].pos
            nb = [st.occ[q] for q in ((p[0] + dx, p[1] + dy) for dx, dy in DIRS) if q in st.occ]
            if not nb:
                continue
            st.fuse(aid, nb[rng.integers(len(nb))])
        done += 1
        if done % check_every == 0:
            checks += 1
            if st.total_flux() != s3.E:
                raise DoubleError(f"total flux left e after event {done}")
    return st, checks


# --------------------------------------------------------------------------
# memory experiment


def loop_path(L: int, margin: int = 2) -> list[tuple]:
    """Counterclockwise rectangle at ``margin`` from the edge, starting after (margin, margin)."""
    lo, hi = margin, L - 1 - margin
    if hi - lo < 2:
        raise DoubleError("grid too small for the logical loop")
    ring = [(x, lo) for x in range(lo, hi)] + [(hi, y) for y in range(lo, hi)]
    ring += [(x, hi) for x in range(hi, lo, -1)] + [(lo, y) for y in range(hi, lo, -1)]
    return ring[1:] + ring[:1]


class MemoryTrial(NamedTuple):
    failed: bool
    residual: int          # fused flux of the logical pair (e on success)
    timeout: bool
    steps: int
    strays_created: int
    wrong_pairs: int


def memory_trial(L: int, p_pair: float, radius: int | None, seed: int,
                 class_weights: Sequence[float] = (0.5, 0.5), log: bool = False,
                 step_cap_factor: int = 20) -> tuple[MemoryTrial, DoubleState]:
    """One logical anyon carried once around a long loop under stray-pair noise.

    The logical pair (12),(12) starts at (margin, margin) with its partner
    just outside the loop.  Each time step runs ``noise_step``, then the
    sweeper (unless ``radius`` is None), then one step of the logical anyon
    (it waits if the next site is occupied).  At the end the pair is fused; a
    non-trivial residual means a stray was enclosed and the logical flux was
    conjugated.
    """
    if L < 8:
        raise DoubleError("memory experiment needs L >= 8")
    st = DoubleState(L, seed, log=log)
    path = loop_path(L)
    start = path[-1]
    lid, pid = st.create_pair("(12)", start, (start[0] - 1, start[1]), protected=True)
    cap = step_cap_factor * len(path)
    i = steps = 0
    while i < len(path) and steps < cap:
        steps += 1
        st.noise_step(p_pair, class_weights)
        if radius is not None:
            st.sweep(radius)
        if st.free(path[i]):
            st.move(lid, path[i])
            i += 1
    timeout = i < len(path)
    if timeout:
        res = s3.E
        failed = True
    else:
        if _manhattan(st.anyons[lid].pos, st.anyons[pid].pos) != 1:
            raise DoubleError("logical pair not adjacent at the end of the loop")
        res = st.fuse(lid, pid).flux
        failed = res != s3.E
    return MemoryTrial(failed, res, timeout, steps, st.stats["created"] - 1, st.stats["wrong_pairs"]), st


class ArmReport(NamedTuple):
    arm: str
    radius: int | None
    n_trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    timeouts: int
    wrong_pairs: int


def _memory_chunk(args):
    L, p_pair, radius, seed, first, count, weights = args
    out = []
    for j in range(first, first + count):
        t, _ = memory_trial(L, p_pair, radius, trial_seed(seed, j), weights)
        out.append((t.failed, t.timeout, t.wrong_pairs))
    return out


def memory_arm(L: int, p_pair: float, radius: int | None, n_trials: int, seed: int,
               class_weights: Sequence[float] = (0.5, 0.5), workers: int = 1, chunk: int = 250) -> ArmReport:
    """Failure rate of one arm; trial j uses seed + j in every arm."""
    if n_trials < 1:
        raise DoubleError("n_trials must be >= 1")
    jobs = [(L, p_pair, radius, seed, s, min(chunk, n_trials - s), tuple(class_weights))
            for s in range(0, n_trials, chunk)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_memory_chunk, jobs))
    else:
        parts = [_memory_chunk(j) for j in jobs]
    rows = [r for p in parts for r in p]
    nf = sum(r[0] for r in rows)
    lo, hi = wilson_interval(nf, n_trials)
    arm = "unswept" if radius is None else f"swept_r{radius}"
    return ArmReport(arm, radius, n_trials, nf, nf / n_trials, lo, hi, sum(r[1] for r in rows),
                     sum(r[2] for r in rows))


class MemoryReport(NamedTuple):
    swept: ArmReport
    unswept: ArmReport
    overlap: bool          # Wilson intervals overlap

    @property
    def sweeper_helps(self) -> bool:
        return self.swept.estimate <= self.unswept.estimate


def braiding_memory_experiment(L: int = 16, p_pair: float = 0.01, radius: int = 3, n_trials: int = 2000,
                               seed: int = 0, class_weights: Sequence[float] = (0.5, 0.5),
                               workers: int = 1) -> MemoryReport:
    sw = memory_arm(L, p_pair, radius, n_trials, seed, class_weights, workers)
    un = memory_arm(L, p_pair, None, n_trials, seed, class_weights, workers)
    return MemoryReport(sw, un, intervals_overlap((sw.ci_low, sw.ci_high), (un.ci_low, un.ci_high)))
