"""Itineraries through rectangle partitions, wiggles, crookedness, and the
search for block schedules whose successive annuli are crooked.

Itinerary indices are unreduced lift indices: rectangle ``i`` and ``i + N``
are deck translates of each other on the cover.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .annuli import (
    A1_HALF_HEIGHT,
    DEFAULT_BUDGET,
    DEFAULT_TOL,
    LiftedCurve,
    Pullback,
    RectanglePartition,
    max_rect_diameter,
    partition_level,
    trace_curve,
    trace_level,
)
from .errors import AmbiguousCrossing, SearchExhausted, UnresolvedCurve
from .maps import Block, BlockSchedule, LiftPoint, MapId, WParams

DEFAULT_MIN_SPAN = 3
DEFAULT_SEARCH_BUDGET = 200


@dataclass(frozen=True, eq=False)
class Itinerary:
    indices: np.ndarray
    modulus: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("an itinerary needs at least one index")
        if idx.size > 1 and np.any(np.abs(np.diff(idx)) != 1):
            raise ValueError("consecutive itinerary entries must differ by exactly 1")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_bins(cls, bins, modulus: int) -> "Itinerary":
        return cls(chain_bins(bins), modulus)

    def __len__(self) -> int:
        return int(self.indices.size)

    def reversed(self) -> "Itinerary":
        return Itinerary(self.indices[::-1], self.modulus)

    def shifted(self, k: int) -> "Itinerary":
        return Itinerary(self.indices + k, self.modulus)

    @property
    def lo(self) -> int:
        return int(self.indices.min())

    @property
    def hi(self) -> int:
        return int(self.indices.max())

    @property
    def span(self) -> int:
        return self.hi - self.lo

    def reduced(self) -> np.ndarray:
        return np.mod(self.indices, self.modulus)

    def turns(self) -> int:
        """Number of direction changes (local extrema) of the index walk."""
        d = np.diff(self.indices)
        return int(np.count_nonzero(d[1:] != d[:-1])) if d.size > 1 else 0

    def tolist(self) -> list[int]:
        return [int(v) for v in self.indices]


def chain_bins(bins) -> np.ndarray:
    """Collapse repeats and fill jumps so that steps are exactly +-1."""
    b = np.asarray(bins, dtype=np.int64)
    if b.size == 0:
        return b
    b = b[np.concatenate([[True], b[1:] != b[:-1]])]
    d = np.diff(b)
    if d.size == 0 or np.all(np.abs(d) == 1):
        return b
    steps = np.repeat(np.sign(d), np.abs(d))
    out = np.empty(steps.size + 1, dtype=np.int64)
    out[0] = b[0]
    out[1:] = b[0] + np.cumsum(steps)
    return out


def check_ambiguous(bins, near) -> None:
    """Reject a one-vertex excursion across a cut that the vertex only grazes."""
    b = np.asarray(bins)
    if b.size < 3:
        return
    spike = (b[1:-1] != b[:-2]) & (b[:-2] == b[2:]) & np.asarray(near)[1:-1]
    if np.any(spike):
        i = int(np.flatnonzero(spike)[0]) + 1
        raise AmbiguousCrossing(
            f"vertex {i} grazes the cut between rectangles {b[i - 1]} and {b[i]}; refine tol")


def _fiber_coordinates(curve: LiftedCurve, part: RectanglePartition, x, y, p):
    outer, inner = curve.pullback, part.pullback
    if (curve.exact and outer is not None
            and outer.steps[len(outer.steps) - len(inner.steps):] == inner.steps
            and len(outer.steps) >= len(inner.steps)):
        # exact: evaluate the part of the composite above the partition depth
        extra = Pullback(outer.steps[:len(outer.steps) - len(inner.steps)])
        X, Y = extra.pull(p, np.full_like(p, curve.level))
    else:
        X, Y = inner.push(x, y)
    return X, Y


def itinerary(curve: LiftedCurve, part: RectanglePartition, window: str = "period",
              tol: float = DEFAULT_TOL, check: bool = True) -> Itinerary:
    """Rectangles visited by the curve, in order, over one period or circuit."""
    if window not in ("period", "closed"):
        raise ValueError("window must be 'period' or 'closed'")
    c = curve.closed() if window == "closed" else curve
    X, Y = _fiber_coordinates(c, part, c.x, c.y, c.param)
    if np.any(np.abs(Y) > A1_HALF_HEIGHT * (1 + 1e-9)):
        raise ValueError("curve leaves the partitioned annulus")
    return _itinerary_from_X(X, part, tol, check)


def _near_cut(X, part: RectanglePartition, eps: float):
    D = part.deck_period
    r = np.mod(X, D)
    ext = np.concatenate([part.cuts, [part.cuts[0] + D]])
    j = np.clip(np.searchsorted(ext, r), 1, ext.size - 1)
    return np.minimum(r - ext[j - 1], ext[j] - r) < eps


def _itinerary_from_X(X, part: RectanglePartition, tol: float, check: bool) -> Itinerary:
    bins = part.index_of_param(X)
    if check:
        eps = tol * part.deck_period / part.arc_length
        check_ambiguous(bins, _near_cut(X, part, eps))
    return Itinerary.from_bins(bins, part.N)


# -- wiggles -----------------------------------------------------------------

def _forward_wiggle(s: np.ndarray, j0: int, j1: int) -> bool:
    p1 = np.flatnonzero(s == j1)
    p0 = np.flatnonzero(s == j0)
    if p1.size == 0 or p0.size == 0:
        return True
    # latest j0 before each j1; the pair binds only if no j1 sits in between
    ai = np.searchsorted(p0, p1) - 1
    prev1 = np.concatenate([[-1], p1[:-1]])
    has_a = ai >= 0
    a = np.where(has_a, p0[np.maximum(ai, 0)], -1)
    bind = has_a & (a > prev1)
    if not np.any(bind):
        return True
    a, b = a[bind], p1[bind]
    pc = np.flatnonzero(s == j1 - 1)
    pd = np.flatnonzero(s == j0 + 1)
    if pc.size == 0 or pd.size == 0:
        return False
    ci = np.searchsorted(pc, a, side="right")
    c = np.where(ci < pc.size, pc[np.minimum(ci, pc.size - 1)], np.iinfo(np.int64).max)
    di = np.searchsorted(pd, b) - 1
    d = np.where(di >= 0, pd[np.maximum(di, 0)], -1)
    return bool(np.all((c < b) & (d > c)))


def has_wiggle(it, j0: int, j1: int) -> bool:
    """Whether every j0-to-first-j1 passage reaches j1-1 and then returns to
    j0+1 before entering j1, in both traversal directions."""
    if j1 <= j0 + 2:
        raise ValueError(f"wiggle query needs j1 > j0 + 2, got ({j0}, {j1})")
    s = it.indices if isinstance(it, Itinerary) else np.asarray(it, dtype=np.int64)
    return _forward_wiggle(s, j0, j1) and _forward_wiggle(s[::-1], j0, j1)


def failing_pairs(it, limit: Optional[int] = None) -> list[tuple[int, int]]:
    s = it.indices if isinstance(it, Itinerary) else np.asarray(it, dtype=np.int64)
    vals = np.unique(s)
    bad = []
    for j0 in vals:
        for j1 in vals[vals > j0 + 2]:
            if not has_wiggle(s, int(j0), int(j1)):
                bad.append((int(j0), int(j1)))
                if limit is not None and len(bad) >= limit:
                    return bad
    return bad


def is_crooked(it, part: Optional[RectanglePartition] = None) -> bool:
    """True iff every pair j1 > j0 + 2 of visited indices has a wiggle."""
    return not failing_pairs(it, limit=1)


def crooked_summary(it: Itinerary, min_span: int = 0) -> dict:
    vals = np.unique(it.indices)
    pairs = int(sum(np.count_nonzero(vals > v + 2) for v in vals))
    bad = failing_pairs(it)
    return {
        "crooked": not bad and it.span >= min_span,
        "wiggles_hold": not bad,
        "span": it.span,
        "lo": it.lo,
        "hi": it.hi,
        "length": len(it),
        "turns": it.turns(),
        "pairs_checked": pairs,
        "failing_pairs": [list(p) for p in bad[:20]],
    }


def crooked_pattern(w: int) -> list[int]:
    """A crooked +-1 walk from 0 to w.

    Built as: crooked 0 -> w-1, back down crookedly w-1 -> 1, then crooked 1 -> w.
    """
    if w < 0:
        raise ValueError("span must be >= 0")
    if w <= 2:
        return list(range(w + 1))
    up = crooked_pattern(w - 1)
    down = [v + 1 for v in reversed(crooked_pattern(w - 2))]
    return up + down[1:] + [v + 1 for v in up][1:]


# -- reversals ---------------------------------------------------------------

@dataclass(frozen=True)
class Reversal:
    param: float
    point: LiftPoint
    kind: str  # "max" where x stops increasing, "min" where it stops decreasing


def _reversal_vertices(curve: LiftedCurve):
    dx = np.diff(curve.x)
    nz = np.flatnonzero(dx != 0)
    if nz.size < 2:
        return np.array([], dtype=int), np.array([], dtype=int)
    sg = np.sign(dx[nz])
    # cyclic: the last segment of one period precedes the first of the next
    prev = np.roll(sg, 1)
    change = sg != prev
    seg = nz[change]
    before = prev[change]
    # the reversal vertex is the start of the first segment in the new direction
    return seg, before


def _refine_extremum(curve: LiftedCurve, i: int, sign: float) -> float:
    """Parameter of the x-extremum next to vertex i."""
    n = len(curve)
    hl = curve.param[i] - curve.param[i - 1] if i > 0 else curve.param[-1] - curve.param[-2]
    hr = curve.param[i + 1] - curve.param[i] if i + 1 < n else curve.param[1] - curve.param[0]
    a, b = curve.param[i] - hl, curve.param[i] + hr
    if not curve.exact:
        # vertex of the parabola through the three neighbouring vertices
        pa, pb = curve.param[i] - hl, curve.param[i] + hr
        xa, _ = curve.evaluate(pa)
        xb, _ = curve.evaluate(pb)
        xm = curve.x[i]
        den = hr * (xa - xm) + hl * (xb - xm)
        if den == 0:
            return float(curve.param[i])
        t = 0.5 * (hr * hr * (xa - xm) - hl * hl * (xb - xm)) / den
        return float(curve.param[i] + np.clip(t, -hl, hr))
    g = (math.sqrt(5) - 1) / 2
    c1, c2 = b - g * (b - a), a + g * (b - a)
    f1 = sign * float(curve.evaluate(c1)[0])
    f2 = sign * float(curve.evaluate(c2)[0])
    for _ in range(80):
        if f1 >= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - g * (b - a)
            f1 = sign * float(curve.evaluate(c1)[0])
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + g * (b - a)
            f2 = sign * float(curve.evaluate(c2)[0])
        if b - a < 1e-13 * max(1.0, abs(a)):
            break
    return 0.5 * (a + b)


def reversal_locations(curve: LiftedCurve) -> list[Reversal]:
    """Points where the x-direction of traversal flips, one stored period.

    Each flip is found at vertex resolution and then refined to the
    extremum of x along the parameter."""
    if len(curve) < 3:
        raise ValueError("need at least 3 vertices")
    seg, before = _reversal_vertices(curve)
    p0, P = curve.param[0], curve.period
    out = []
    for i, b in zip(seg, before):
        p = _refine_extremum(curve, int(i), 1.0 if b > 0 else -1.0)
        p = p0 + (p - p0) % P
        x, y = curve.evaluate(p)
        out.append(Reversal(float(p), LiftPoint(float(x), float(y)), "max" if b > 0 else "min"))
    return sorted(out, key=lambda r: r.param)


def count_reversals(curve: LiftedCurve, per: str = "circuit") -> int:
    """Reversals per stored period, or per closed 2*pi circuit."""
    if len(curve) < 3:
        raise ValueError("need at least 3 vertices")
    n = len(_reversal_vertices(curve)[0])
    if per == "period":
        return n
    if per == "circuit":
        return n * curve.turns
    raise ValueError("per must be 'period' or 'circuit'")


# -- schedule search ---------------------------------------------------------

@dataclass(frozen=True)
class DepthVerdict:
    depth: int
    N: int
    block: tuple[int, int]
    crooked: bool
    span: int
    itinerary_length: int
    turns: int
    pairs_checked: int
    thinness_margin: float
    strip_thickness: float
    rectangle_spacing: float
    candidates_tried: int

    def to_dict(self) -> dict:
        return {
            "depth": self.depth, "N": self.N, "block": list(self.block),
            "crooked": self.crooked, "span": self.span,
            "itinerary_length": self.itinerary_length, "turns": self.turns,
            "pairs_checked": self.pairs_checked,
            "thinness_margin": self.thinness_margin,
            "strip_thickness": self.strip_thickness,
            "rectangle_spacing": self.rectangle_spacing,
            "candidates_tried": self.candidates_tried,
        }


@dataclass(frozen=True)
class SearchResult:
    schedule: BlockSchedule
    verdicts: tuple[DepthVerdict, ...]
    diameters: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.text(),
            "blocks": [[b.m, b.n] for b in self.schedule.blocks],
            "M": self.schedule.params.M,
            "schedule_hash": self.schedule.digest(),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "max_rect_diameter": list(self.diameters),
        }


def _thread_cap() -> int:
    raw = os.environ.get("CROOKED_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, cap)


def relative_core(block: Block, sched: BlockSchedule, tol: float,
                  budget: int = DEFAULT_BUDGET) -> LiftedCurve:
    """f_{i+1}^{-1} of the core line, covering one holonomy period of the
    combined depth-(i+1) pullback.  Its x-coordinate is the fiber coordinate
    of the depth-(i+1) core relative to the depth-i partition."""
    steps = [MapId.W] * block.n + [MapId.T] * block.m
    rel = trace_curve(0.0, steps, sched.params, tol, budget)
    full = Pullback.from_schedule(sched, len(sched))
    copies = max(1, int(round(full.base_period / rel.period)))
    return rel.unrolled(copies)


def strip_thickness(sched: BlockSchedule, k: int, samples: int = 4097) -> float:
    """Longest pulled-back fiber of A_k; bounds the strip width from above."""
    pb = Pullback.from_schedule(sched, k)
    X = np.linspace(0.0, pb.base_period, samples)
    ux, uy = pb.pull(X, np.full_like(X, A1_HALF_HEIGHT))
    lx, ly = pb.pull(X, np.full_like(X, -A1_HALF_HEIGHT))
    return float(np.hypot(ux - lx, uy - ly).max())


def check_block(block: Block, prefix: Sequence[Block], part: RectanglePartition,
                params: WParams, tol: float, min_span: int,
                budget: int = DEFAULT_BUDGET) -> tuple[Optional[bool], Optional[Itinerary]]:
    """Crookedness of one candidate block; ``None`` when it cannot be resolved.

    Binning only needs resolution relative to the rectangle widths in fiber
    coordinates, so refinement starts there and tightens on ambiguity.
    """
    sched = BlockSchedule(tuple(prefix) + (block,), params)
    gaps = np.diff(np.concatenate([part.cuts, [part.cuts[0] + part.deck_period]]))
    rel_tol = max(tol, float(gaps.min()) / 32)
    while True:
        try:
            rel = relative_core(block, sched, rel_tol, budget)
            it = _itinerary_from_X(rel.x, part, rel_tol, check=True)
            return (it.span >= min_span and is_crooked(it)), it
        except AmbiguousCrossing:
            if rel_tol <= tol:
                return None, None
            rel_tol = max(tol, rel_tol / 8)
        except UnresolvedCurve:
            return None, None


def _candidates(max_size: int):
    for size in range(1, max_size + 1):
        yield [Block(m, size - m) for m in range(size + 1)]


def find_crooked_blocks(target_depth: int, N_sequence: Sequence[int],
                        params: WParams = WParams(), budget: int = DEFAULT_SEARCH_BUDGET,
                        tol: float = DEFAULT_TOL, min_span: int = DEFAULT_MIN_SPAN,
                        max_block: int = 24, threads: Optional[int] = None,
                        curve_budget: int = DEFAULT_BUDGET) -> SearchResult:
    """Greedy depth-by-depth search for a crooked schedule.

    At each depth the candidates (m, n) are tried in shells of increasing
    m + n; within a shell the smallest crooked m wins.  ``budget`` caps the
    total number of candidates examined.
    """
    N_sequence = [int(n) for n in N_sequence]
    if target_depth < 1:
        raise ValueError("target depth must be >= 1")
    if len(N_sequence) < target_depth:
        raise ValueError("N_sequence must have at least target_depth entries")
    if any(b < a for a, b in zip(N_sequence, N_sequence[1:])):
        raise ValueError("N_sequence must be nondecreasing")
    workers = min(threads or _thread_cap(), _thread_cap())
    blocks: list[Block] = []
    verdicts: list[DepthVerdict] = []
    diameters: list[float] = []
    remaining = budget
    for i in range(target_depth):
        N = N_sequence[i]
        # any trailing block works here: only the first i blocks are traced
        anchor = BlockSchedule(tuple(blocks) + (Block(1, 0),), params)
        part = partition_level(trace_level(anchor, i, tol, curve_budget), N, tol)
        diameters.append(max_rect_diameter(part))
        found = None
        tried = unresolved = 0
        for shell in _candidates(max_block):
            if remaining <= 0:
                break
            shell = shell[:remaining]
            remaining -= len(shell)
            tried += len(shell)
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(
                    lambda b: check_block(b, blocks, part, params, tol, min_span, curve_budget),
                    shell))
            for b, (ok, it) in zip(shell, results):
                if ok is None:
                    unresolved += 1
                if ok:
                    found = (b, it)
                    break
            if found:
                break
        if found is None:
            raise SearchExhausted(
                f"no crooked block at depth {i + 1} with N={N} after {tried} candidates "
                f"({unresolved} unresolved)")
        b, it = found
        blocks.append(b)
        sched = BlockSchedule(tuple(blocks), params)
        thick = strip_thickness(sched, i + 1)
        vals = np.unique(it.indices)
        verdicts.append(DepthVerdict(
            depth=i + 1, N=N, block=(b.m, b.n), crooked=True, span=it.span,
            itinerary_length=len(it), turns=it.turns(),
            pairs_checked=int(sum(np.count_nonzero(vals > v + 2) for v in vals)),
            thinness_margin=part.spacing - thick, strip_thickness=thick,
            rectangle_spacing=part.spacing, candidates_tried=tried))
    return SearchResult(BlockSchedule(tuple(blocks), params), tuple(verdicts), tuple(diameters))


def verify_schedule(sched: BlockSchedule, N_sequence: Sequence[int],
                    tol: float = DEFAULT_TOL, min_span: int = DEFAULT_MIN_SPAN,
                    window: str = "period",
                    curve_budget: int = DEFAULT_BUDGET) -> list[dict]:
    """Re-check each depth by tracing the full core and computing its
    itinerary through the partition one level up."""
    out = []
    for i in range(len(sched)):
        part = partition_level(trace_level(sched, i, tol, curve_budget), N_sequence[i], tol)
        core = trace_curve(0.0, sched.inverse_steps(i + 1), sched.params, tol, curve_budget)
        it = itinerary(core, part, window=window, tol=tol)
        rep = crooked_summary(it, min_span)
        rep.update(depth=i + 1, N=part.N, block=[sched.blocks[i].m, sched.blocks[i].n],
                   itinerary=it.tolist())
        out.append(rep)
    return out
