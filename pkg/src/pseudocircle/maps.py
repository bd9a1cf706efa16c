"""Generating maps of the cylinder S^1 x R and their lifts to the plane.

Array kernels (``*_xy``) take and return numpy arrays or floats; the
``apply_*`` wrappers work on single points.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
M_MIN = 512.0


def reduce_angle(x):
    """Reduce angles into [0, 2*pi)."""
    r = np.mod(x, TWO_PI)
    if np.ndim(r) == 0:
        r = float(r)
        return 0.0 if r >= TWO_PI else r
    r = np.asarray(r, dtype=float)
    r[r >= TWO_PI] = 0.0
    return r


class CylinderPoint(NamedTuple):
    x: float
    y: float

    @classmethod
    def of(cls, x: float, y: float) -> "CylinderPoint":
        return cls(reduce_angle(float(x)), float(y))


class LiftPoint(NamedTuple):
    x: float
    y: float

    def project(self) -> CylinderPoint:
        return CylinderPoint.of(self.x, self.y)


class MapId(str, enum.Enum):
    T = "T"
    S = "S"
    SIGMA = "SIGMA"
    W = "W"

    @property
    def needs_full_turn(self) -> bool:
        # s involves sin(x); it only commutes with shifts by multiples of 2*pi
        return self in (MapId.S, MapId.W)


@dataclass(frozen=True)
class WParams:
    M: float = M_MIN

    def __post_init__(self):
        if not (self.M >= M_MIN):
            raise ValueError(f"M must be >= {M_MIN:g}, got {self.M!r}")


@dataclass(frozen=True)
class Block:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or self.m + self.n < 1:
            raise ValueError(f"invalid block ({self.m}, {self.n})")

    @property
    def size(self) -> int:
        return self.m + self.n


@dataclass(frozen=True)
class BlockSchedule:
    blocks: tuple[Block, ...]
    params: WParams = WParams()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ValueError("a schedule needs at least one block")

    @classmethod
    def of(cls, pairs: Iterable[Sequence[int]], M: float = M_MIN) -> "BlockSchedule":
        return cls(tuple(Block(int(m), int(n)) for m, n in pairs), WParams(M))

    def __len__(self) -> int:
        return len(self.blocks)

    def prefix(self, k: int) -> "BlockSchedule":
        return BlockSchedule(self.blocks[:k], self.params)

    def forward_steps(self, k: int) -> tuple[MapId, ...]:
        """Map sequence of f_k o ... o f_1, in application order."""
        self._check_depth(k)
        steps: list[MapId] = []
        for b in self.blocks[:k]:
            steps += [MapId.T] * b.m + [MapId.W] * b.n
        return tuple(steps)

    def inverse_steps(self, k: int) -> tuple[MapId, ...]:
        """Inverse maps pulling A_1 back to depth k, in application order."""
        return tuple(reversed(self.forward_steps(k)))

    def _check_depth(self, k: int):
        if not 0 <= k <= len(self.blocks):
            raise ValueError(f"depth {k} outside 0..{len(self.blocks)}")

    def text(self) -> str:
        return ";".join(f"{b.m},{b.n}" for b in self.blocks)

    def digest(self) -> str:
        key = f"{self.text()}|M={self.params.M!r}"
        return hashlib.sha256(key.encode()).hexdigest()[:12]


def parse_blocks(text: str) -> list[tuple[int, int]]:
    """Parse ``"3,3;0,3"`` into ``[(3, 3), (0, 3)]``."""
    pairs = []
    for chunk in text.replace(" ", "").split(";"):
        if not chunk:
            continue
        m, n = chunk.split(",")
        pairs.append((int(m), int(n)))
    if not pairs:
        raise ValueError("empty block schedule")
    return pairs


# -- lifted maps on the plane (no modular arithmetic) -----------------------

def t_xy(x, y):
    return 2.0 * x, 8.0 * y


def s_xy(x, y, M: float = M_MIN):
    return x, M * y - (M - 1.0) * np.sin(x)


def sigma_xy(x, y):
    return x - TWO_PI * y, y


def w_xy(x, y, M: float = M_MIN):
    return s_xy(*sigma_xy(x, y), M)


def t_inv_xy(x, y):
    return 0.5 * x, y / 8.0


def s_inv_xy(x, y, M: float = M_MIN):
    return x, (y + (M - 1.0) * np.sin(x)) / M


def sigma_inv_xy(x, y):
    return x + TWO_PI * y, y


def w_inv_xy(x, y, M: float = M_MIN):
    return sigma_inv_xy(*s_inv_xy(x, y, M))


def lift_forward_xy(m: MapId, x, y, M: float = M_MIN):
    if m is MapId.T:
        return t_xy(x, y)
    if m is MapId.S:
        return s_xy(x, y, M)
    if m is MapId.SIGMA:
        return sigma_xy(x, y)
    return w_xy(x, y, M)


def lift_inverse_xy(m: MapId, x, y, M: float = M_MIN):
    if m is MapId.T:
        return t_inv_xy(x, y)
    if m is MapId.S:
        return s_inv_xy(x, y, M)
    if m is MapId.SIGMA:
        return sigma_inv_xy(x, y)
    return w_inv_xy(x, y, M)


def lift_inverse_step(m: MapId, q: LiftPoint, params: WParams = WParams()) -> LiftPoint:
    return LiftPoint(*map(float, lift_inverse_xy(MapId(m), q.x, q.y, params.M)))


def lift_forward_step(m: MapId, q: LiftPoint, params: WParams = WParams()) -> LiftPoint:
    return LiftPoint(*map(float, lift_forward_xy(MapId(m), q.x, q.y, params.M)))


# -- cylinder maps -----------------------------------------------------------

def _cyl(m: MapId, p: CylinderPoint, params: WParams) -> CylinderPoint:
    x, y = lift_forward_xy(m, p.x, p.y, params.M)
    return CylinderPoint.of(x, y)


def apply_T(p: CylinderPoint) -> CylinderPoint:
    return _cyl(MapId.T, p, WParams())


def apply_s(p: CylinderPoint, params: WParams = WParams()) -> CylinderPoint:
    return _cyl(MapId.S, p, params)


def apply_sigma(p: CylinderPoint) -> CylinderPoint:
    return _cyl(MapId.SIGMA, p, WParams())


def apply_W(p: CylinderPoint, params: WParams = WParams()) -> CylinderPoint:
    return apply_s(apply_sigma(p), params)


def apply_map(m: MapId, p: CylinderPoint, params: WParams = WParams()) -> CylinderPoint:
    return _cyl(MapId(m), p, params)


def inverse_W(p: CylinderPoint, params: WParams = WParams()) -> CylinderPoint:
    """The cylinder inverse of W (W is a bijection of the cylinder)."""
    x, y = w_inv_xy(p.x, p.y, params.M)
    return CylinderPoint.of(x, y)


def t_preimages(p: CylinderPoint) -> tuple[CylinderPoint, CylinderPoint]:
    return (CylinderPoint.of(p.x / 2, p.y / 8),
            CylinderPoint.of(p.x / 2 + math.pi, p.y / 8))


def forward_xy(x, y, sched: BlockSchedule, k: int, lift: bool = False):
    """Apply f_k o ... o f_1 to arrays of points.

    With ``lift=True`` the lifted maps are used and x is left unreduced.
    """
    M = sched.params.M
    for m in sched.forward_steps(k):
        x, y = lift_forward_xy(m, x, y, M)
    if not lift:
        x = reduce_angle(x)
    return x, y


def block_forward(p: CylinderPoint, sched: BlockSchedule, k: int) -> CylinderPoint:
    if not 1 <= k <= len(sched):
        raise ValueError(f"depth {k} outside 1..{len(sched)}")
    x, y = forward_xy(p.x, p.y, sched, k)
    return CylinderPoint.of(x, y)
