"""Nested annuli A_k = (f_k ... f_1)^{-1}(A_1) and their rectangle partitions.

Annuli are never stored as regions.  Membership is decided by forward
composition; geometry comes from three traced curves per depth (the
preimages of y = +2, y = -2 and the core y = 0), each kept as one period of
a lifted polyline on the universal cover together with its holonomy.

Every traced curve remembers the horizontal line it came from and the
composite of lifted inverse maps that produced it, so any parameter value
can be re-evaluated exactly.  The curve parameter is the x-coordinate of
the vertex's image on that line, which doubles as the fiber coordinate used
by the rectangle partitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SelfIntersectingFibers, UnresolvedCurve
from .maps import (
    TWO_PI,
    BlockSchedule,
    CylinderPoint,
    MapId,
    WParams,
    forward_xy,
    lift_forward_xy,
    lift_inverse_xy,
)

DEFAULT_TOL = 1e-3
DEFAULT_BUDGET = 10_000_000
TURN_LIMIT = 0.2
A1_HALF_HEIGHT = 2.0


@dataclass(frozen=True)
class Pullback:
    """Composite of lifted inverse maps, applied left to right."""

    steps: tuple[tuple[MapId, float], ...] = ()

    @classmethod
    def from_schedule(cls, sched: BlockSchedule, k: int) -> "Pullback":
        M = sched.params.M
        return cls(tuple((m, M) for m in sched.inverse_steps(k)))

    def then(self, m: MapId, M: float) -> "Pullback":
        return Pullback(self.steps + ((MapId(m), float(M)),))

    def pull(self, x, y):
        for m, M in self.steps:
            x, y = lift_inverse_xy(m, x, y, M)
        return x, y

    def push(self, x, y):
        for m, M in reversed(self.steps):
            x, y = lift_forward_xy(m, x, y, M)
        return x, y

    @property
    def t_count(self) -> int:
        return sum(1 for m, _ in self.steps if m is MapId.T)

    @property
    def base_period(self) -> float:
        """Smallest parameter shift that is an exact symmetry of pulled lines."""
        t = last = 0
        for m, _ in self.steps:
            if m is MapId.T:
                t += 1
            elif m.needs_full_turn:
                last = t
        return TWO_PI * 2.0 ** last

    @property
    def holonomy(self) -> float:
        return self.base_period / 2.0 ** self.t_count

    @property
    def deck_period(self) -> float:
        """Parameter shift corresponding to one 2*pi deck translation."""
        return TWO_PI * 2.0 ** self.t_count


@dataclass(frozen=True, eq=False)
class LiftedCurve:
    """One period of a periodic polyline on the cover.

    The continuation satisfies ``c(param + period) = c(param) + (holonomy, 0)``.
    """

    param: np.ndarray
    x: np.ndarray
    y: np.ndarray
    holonomy: float
    level: Optional[float] = None
    pullback: Optional[Pullback] = None

    def __len__(self) -> int:
        return len(self.param)

    @property
    def period(self) -> float:
        return float(self.param[-1] - self.param[0])

    @property
    def exact(self) -> bool:
        return self.level is not None and self.pullback is not None

    @property
    def turns(self) -> int:
        """Number of stored periods making up one closed circuit."""
        return max(1, int(round(TWO_PI / self.holonomy)))

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        if self.exact:
            return self.pullback.pull(p, np.full_like(p, self.level))
        p0, P = self.param[0], self.period
        k = np.floor((p - p0) / P)
        r = p - k * P
        x = np.interp(r, self.param, self.x) + k * self.holonomy
        y = np.interp(r, self.param, self.y)
        return x, y

    def unrolled(self, copies: int) -> "LiftedCurve":
        """Concatenate ``copies`` deck translates into one longer period."""
        if copies == 1:
            return self
        P, H = self.period, self.holonomy
        ps, xs, ys = [self.param], [self.x], [self.y]
        for j in range(1, copies):
            ps.append(self.param[1:] + j * P)
            xs.append(self.x[1:] + j * H)
            ys.append(self.y[1:])
        return LiftedCurve(np.concatenate(ps), np.concatenate(xs),
                           np.concatenate(ys), H * copies, self.level, self.pullback)

    def closed(self) -> "LiftedCurve":
        """The stored period unrolled to a full 2*pi circuit."""
        return self.unrolled(self.turns)

    def arc_length(self) -> np.ndarray:
        seg = np.hypot(np.diff(self.x), np.diff(self.y))
        return np.concatenate([[0.0], np.cumsum(seg)])


def horizontal_curve(level: float, tol: float = DEFAULT_TOL) -> LiftedCurve:
    n = int(math.ceil(TWO_PI / tol)) + 1
    p = np.linspace(0.0, TWO_PI, n)
    return LiftedCurve(p, p.copy(), np.full(n, float(level)), TWO_PI,
                       float(level), Pullback())


def refine(param, x, y, evaluate: Callable, tol: float = DEFAULT_TOL,
           turn: Optional[float] = TURN_LIMIT, budget: int = DEFAULT_BUDGET):
    """Bisect parameter intervals until segments are short and turns gentle."""
    min_len = tol * 1e-3
    while True:
        dx, dy = np.diff(x), np.diff(y)
        seg = np.hypot(dx, dy)
        split = seg > tol
        if turn is not None and seg.size > 1:
            cross = dx[:-1] * dy[1:] - dy[:-1] * dx[1:]
            dot = dx[:-1] * dx[1:] + dy[:-1] * dy[1:]
            sharp = np.abs(np.arctan2(cross, dot)) > turn
            bent = np.zeros_like(split)
            bent[:-1] |= sharp
            bent[1:] |= sharp
            split |= bent & (seg > min_len)
        gap = np.diff(param)
        stuck = gap <= 4 * np.spacing(np.maximum(np.abs(param[:-1]), np.abs(param[1:])))
        if np.any(split & stuck & (seg > tol)):
            raise UnresolvedCurve("curve cannot be resolved below tol in floating point")
        idx = np.flatnonzero(split & ~stuck)
        if idx.size == 0:
            return param, x, y
        if param.size + idx.size > budget:
            raise UnresolvedCurve(
                f"refinement needs more than {budget} vertices (tol={tol:g})")
        mid = 0.5 * (param[idx] + param[idx + 1])
        mx, my = evaluate(mid)
        param = np.insert(param, idx + 1, mid)
        x = np.insert(x, idx + 1, mx)
        y = np.insert(y, idx + 1, my)


def _is_full_turn(h: float) -> bool:
    k = h / TWO_PI
    return k >= 1 - 1e-12 and abs(k - round(k)) < 1e-9


def pullback_curve(c: LiftedCurve, m: MapId, params: WParams = WParams(),
                   tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET,
                   turn: Optional[float] = TURN_LIMIT) -> LiftedCurve:
    """Lifted preimage of ``c`` under one map, adaptively refined."""
    m = MapId(m)
    if c.holonomy == 0:
        raise ValueError("curve must have nonzero holonomy")
    if m.needs_full_turn and not _is_full_turn(c.holonomy):
        c = c.closed()
    M = params.M
    x, y = lift_inverse_xy(m, c.x, c.y, M)
    h = c.holonomy / 2 if m is MapId.T else c.holonomy
    if c.exact:
        pb = c.pullback.then(m, M)
        level = c.level
        evaluate = lambda p: pb.pull(p, np.full_like(p, level))
    else:
        pb = level = None
        evaluate = lambda p: lift_inverse_xy(m, *c.evaluate(p), M)
    param, x, y = refine(c.param.copy(), x, y, evaluate, tol, turn, budget)
    return LiftedCurve(param, x, y, h, level, pb)


def trace_curve(level: float, steps, params: WParams = WParams(),
                tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> LiftedCurve:
    # every later T^-1 at least halves segment lengths, so intermediate
    # curves only need tol scaled by that contraction
    steps = [MapId(m) for m in steps]
    t_after = len([m for m in steps if m is MapId.T])
    c = horizontal_curve(level, tol * 2.0 ** t_after)
    for m in steps:
        if m is MapId.T:
            t_after -= 1
        c = pullback_curve(c, m, params, tol * 2.0 ** t_after, budget)
    return c


@dataclass(frozen=True, eq=False)
class ChainLevel:
    depth: int
    upper: LiftedCurve
    lower: LiftedCurve
    core: LiftedCurve
    pullback: Pullback

    def curves(self) -> dict[str, LiftedCurve]:
        return {"upper": self.upper, "lower": self.lower, "core": self.core}


@dataclass(frozen=True, eq=False)
class AnnulusChain:
    schedule: BlockSchedule
    levels: tuple[ChainLevel, ...]
    tol: float = DEFAULT_TOL

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, k: int) -> ChainLevel:
        return self.levels[k]


def trace_level(sched: BlockSchedule, k: int, tol: float = DEFAULT_TOL,
                budget: int = DEFAULT_BUDGET) -> ChainLevel:
    steps = sched.inverse_steps(k)
    curves = [trace_curve(v, steps, sched.params, tol, budget)
              for v in (A1_HALF_HEIGHT, -A1_HALF_HEIGHT, 0.0)]
    return ChainLevel(k, *curves, Pullback.from_schedule(sched, k))


def trace_chain(sched: BlockSchedule, k: int, tol: float = DEFAULT_TOL,
                budget: int = DEFAULT_BUDGET) -> AnnulusChain:
    if k > len(sched):
        raise ValueError(f"depth {k} exceeds schedule length {len(sched)}")
    levels = tuple(trace_level(sched, j, tol, budget) for j in range(k + 1))
    return AnnulusChain(sched, levels, tol)


def membership_xy(x, y, sched: Optional[BlockSchedule], k: int):
    if k == 0 or sched is None:
        return np.abs(y) <= A1_HALF_HEIGHT
    _, fy = forward_xy(x, y, sched, k)
    return np.abs(fy) <= A1_HALF_HEIGHT


def membership(p: CylinderPoint, sched: Optional[BlockSchedule], k: int) -> bool:
    if k < 0:
        raise ValueError("depth must be >= 0")
    return bool(membership_xy(p.x, p.y, sched, k))


# -- rasters -----------------------------------------------------------------

DEFAULT_BOX = (0.0, TWO_PI, -4.0, 4.0)


@dataclass(frozen=True, eq=False)
class Raster:
    """Membership bits at cell centers; row 0 is the bottom row (y0)."""

    bits: np.ndarray
    box: tuple[float, float, float, float]
    schedule: Optional[BlockSchedule]
    depth: int

    @property
    def res(self) -> tuple[int, int]:
        rows, cols = self.bits.shape
        return cols, rows

    @property
    def fraction(self) -> float:
        return float(self.bits.mean())

    def centers(self):
        x0, x1, y0, y1 = self.box
        cols, rows = self.res
        cx = x0 + (np.arange(cols) + 0.5) * (x1 - x0) / cols
        cy = y0 + (np.arange(rows) + 0.5) * (y1 - y0) / rows
        return np.meshgrid(cx, cy)

    def cell_size(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.box
        cols, rows = self.res
        return (x1 - x0) / cols, (y1 - y0) / rows


def rasterize(sched: Optional[BlockSchedule], k: int, box=DEFAULT_BOX,
              res=(100, 100)) -> Raster:
    cols, rows = res
    if cols < 2 or rows < 2:
        raise ValueError("raster resolution must be at least 2x2")
    box = tuple(float(v) for v in box)
    if not (box[1] > box[0] and box[3] > box[2]):
        raise ValueError("raster box must have positive extent")
    empty = Raster(np.zeros((rows, cols), bool), box, sched, k)
    X, Y = empty.centers()
    return Raster(membership_xy(X, Y, sched, k), box, sched, k)


# -- rectangle partitions ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class RectanglePartition:
    """N rectangles cut from a depth-k annulus at equal core arc length.

    Rectangle ``i`` (a lift index, any integer) is the set of annulus points
    whose fiber coordinate lies between cut ``i`` and cut ``i + 1``.  Fibers
    are preimages of vertical segments of A_1, so they never cross.
    """

    N: int
    cuts: np.ndarray
    level: ChainLevel
    arc_length: float
    fiber_samples: int = 33

    @property
    def depth(self) -> int:
        return self.level.depth

    @property
    def pullback(self) -> Pullback:
        return self.level.pullback

    @property
    def deck_period(self) -> float:
        return self.pullback.deck_period

    @property
    def spacing(self) -> float:
        return self.arc_length / self.N

    def cut_param(self, i):
        q, j = np.divmod(np.asarray(i), self.N)
        return self.cuts[j] + q * self.deck_period

    def index_of_param(self, X):
        X = np.asarray(X, dtype=float)
        q = np.floor(X / self.deck_period)
        r = X - q * self.deck_period
        j = np.searchsorted(self.cuts, r, side="right") - 1
        return (j + q.astype(np.int64) * self.N).astype(np.int64)

    def fiber_coordinate(self, x, y):
        X, _ = self.pullback.push(np.asarray(x, float), np.asarray(y, float))
        return X

    def locate_xy(self, x, y):
        """Lift-level rectangle index of cover points."""
        return self.index_of_param(self.fiber_coordinate(x, y))

    def fiber(self, i, samples: Optional[int] = None):
        k = samples or self.fiber_samples
        X = np.full(k, float(self.cut_param(i)))
        return self.pullback.pull(X, np.linspace(-A1_HALF_HEIGHT, A1_HALF_HEIGHT, k))

    def _boundary_piece(self, c: LiftedCurve, a: float, b: float):
        p0, P, H = c.param[0], c.period, c.holonomy
        xs, ys = [], []
        for j in range(int(math.floor((a - p0) / P)), int(math.floor((b - p0) / P)) + 1):
            p = c.param + j * P
            sel = (p > a) & (p < b)
            xs.append(c.x[sel] + j * H)
            ys.append(c.y[sel])
        ex, ey = c.evaluate(np.array([a, b]))
        x = np.concatenate([[ex[0]], *xs, [ex[1]]])
        y = np.concatenate([[ey[0]], *ys, [ey[1]]])
        return x, y

    def polygon(self, i: int):
        """Closed boundary ring of rectangle ``i`` on the cover."""
        a, b = float(self.cut_param(i)), float(self.cut_param(i + 1))
        lx, ly = self._boundary_piece(self.level.lower, a, b)
        ux, uy = self._boundary_piece(self.level.upper, a, b)
        fbx, fby = self.fiber(i + 1)
        fax, fay = self.fiber(i)
        x = np.concatenate([lx, fbx[1:-1], ux[::-1], fax[::-1][1:-1]])
        y = np.concatenate([ly, fby[1:-1], uy[::-1], fay[::-1][1:-1]])
        return x, y


def partition(chain: AnnulusChain, k: int, N: int) -> RectanglePartition:
    return partition_level(chain[k], N, chain.tol)


def partition_level(level: ChainLevel, N: int, tol: float = DEFAULT_TOL) -> RectanglePartition:
    if N < 4:
        raise ValueError("a partition needs N >= 4 rectangles")
    core = level.core
    copies = int(round(level.pullback.deck_period / core.period))
    s = core.arc_length()
    per = float(s[-1])
    total = per * copies
    targets = np.arange(N) * total / N
    which, rem = np.divmod(targets, per)
    cuts = core.param[0] + which * core.period + np.interp(rem, s, core.param)
    cuts[0] = core.param[0]
    if np.any(np.diff(cuts) <= 0) or cuts[-1] >= core.param[0] + level.pullback.deck_period:
        raise SelfIntersectingFibers(
            f"fibers for N={N} are not separated at tol={tol:g}; lower N or refine")
    return RectanglePartition(N, cuts, level, total)


def cylinder_distance(x1, y1, x2, y2):
    dx = np.mod(np.abs(x1 - x2), TWO_PI)
    dx = np.minimum(dx, TWO_PI - dx)
    return np.hypot(dx, y1 - y2)


def _decimate(x, y, limit: int):
    if len(x) <= limit:
        return x, y
    keep = np.unique(np.concatenate([
        np.linspace(0, len(x) - 1, limit).astype(int),
        [np.argmin(x), np.argmax(x), np.argmin(y), np.argmax(y)],
    ]))
    return x[keep], y[keep]


def point_set_diameter(x, y, chunk: int = 512) -> float:
    best = 0.0
    for start in range(0, len(x), chunk):
        d = cylinder_distance(x[start:start + chunk, None], y[start:start + chunk, None],
                              x[None, :], y[None, :])
        best = max(best, float(d.max()))
    return best


def max_rect_diameter(part: RectanglePartition, max_samples: int = 2000) -> float:
    best = 0.0
    for i in range(part.N):
        x, y = _decimate(*part.polygon(i), max_samples)
        best = max(best, point_set_diameter(x, y))
    return best
