"""Base dynamics g(z) = 3z on the circle, its {1,2}-coding on I1 = [0, pi/2]
and I2 = [pi, 3pi/2], and the skew product F(x, y, z).

Angles may be floats (radians) or ``Fraction`` values, which are read as
exact multiples of pi.  Fraction inputs stay exact through every operation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import OutsideDomain
from .maps import TWO_PI, Block, BlockSchedule, WParams, lift_forward_xy, reduce_angle, MapId

Angle = Union[float, Fraction]
Code = tuple[int, ...]

# interval endpoints in units of pi
I1 = (Fraction(0), Fraction(1, 2))
I2 = (Fraction(1), Fraction(3, 2))
INTERVALS = {1: I1, 2: I2}
Y_BOUND = 2.0


@dataclass(frozen=True)
class Escaped:
    step: int

    def __str__(self) -> str:
        return f"ESCAPED({self.step})"


@dataclass(frozen=True)
class Never:
    maxiter: int

    def __str__(self) -> str:
        return f"NEVER({self.maxiter})"


@dataclass(frozen=True)
class SymbolInterval:
    """Closed interval [lo*pi, hi*pi]; endpoints kept exactly."""

    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> float:
        return float(self.hi - self.lo) * math.pi

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def radians(self) -> tuple[float, float]:
        return float(self.lo) * math.pi, float(self.hi) * math.pi

    def __contains__(self, z) -> bool:
        if isinstance(z, Fraction):
            return self.lo <= z <= self.hi
        lo, hi = self.radians()
        return lo <= z <= hi

    def __str__(self) -> str:
        return f"[{format_pi(self.lo)}, {format_pi(self.hi)}]"


class SkewState(NamedTuple):
    x: float
    y: float
    z: float


def format_pi(r: Fraction) -> str:
    """Render r*pi as text, e.g. 1/6 -> 'π/6', 3/2 -> '3π/2'."""
    r = Fraction(r)
    if r == 0:
        return "0"
    num = "π" if abs(r.numerator) == 1 else f"{abs(r.numerator)}π"
    sign = "-" if r < 0 else ""
    return f"{sign}{num}" if r.denominator == 1 else f"{sign}{num}/{r.denominator}"


def parse_code(text: Union[str, Iterable[int]]) -> Code:
    if isinstance(text, str):
        syms = [c for c in text if c in "12"]
        if any(c not in "12,() []" for c in text):
            raise ValueError(f"codes use only the symbols 1 and 2: {text!r}")
    else:
        syms = list(text)
    code = tuple(int(s) for s in syms)
    if any(s not in (1, 2) for s in code):
        raise ValueError(f"codes use only the symbols 1 and 2: {text!r}")
    return code


def code_text(code: Sequence[int]) -> str:
    return "".join(str(s) for s in code)


def _reduce(z: Angle) -> Angle:
    if isinstance(z, Fraction):
        return z % 2
    return reduce_angle(z)


def apply_g(z: Angle) -> Angle:
    return _reduce(3 * z)


def symbol_of(z: Angle) -> int:
    """1 or 2 for z in I1 or I2 (closed), 0 otherwise."""
    z = _reduce(z)
    for k, (lo, hi) in INTERVALS.items():
        if isinstance(z, Fraction):
            if lo <= z <= hi:
                return k
        elif float(lo) * math.pi <= z <= float(hi) * math.pi:
            return k
    return 0


def symbols_xy(z: np.ndarray) -> np.ndarray:
    """Vectorized ``symbol_of`` for float radians."""
    z = reduce_angle(np.asarray(z, dtype=float))
    out = np.zeros(z.shape, dtype=np.int8)
    out[(z >= 0) & (z <= math.pi / 2)] = 1
    out[(z >= math.pi) & (z <= 1.5 * math.pi)] = 2
    return out


def g_itinerary(z: Angle, n: int) -> Union[Code, Escaped]:
    if n < 1:
        raise ValueError("n must be >= 1")
    code = []
    z = _reduce(z)
    for t in range(n):
        k = symbol_of(z)
        if k == 0:
            return Escaped(t)
        code.append(k)
        z = apply_g(z)
    return tuple(code)


def code_to_interval(code: Sequence[int]) -> SymbolInterval:
    """Closed set of z in I_{a0} whose first len(code) iterates follow the code."""
    code = parse_code(code)
    if not code:
        raise ValueError("code must be nonempty")
    lo, hi = INTERVALS[code[-1]]
    for a in reversed(code[:-1]):
        if a == 1:
            shift = 0
        elif hi <= I1[1]:
            shift = 4
        else:
            shift = 2
        lo, hi = (lo + shift) / 3, (hi + shift) / 3
    return SymbolInterval(lo, hi)


def interval_width(depth: int) -> float:
    return (math.pi / 2) * 3.0 ** (-(depth - 1))


def covering_check() -> dict:
    """Exact endpoint check that g maps each I_k injectively over I1 and I2."""
    out = {}
    for k, (lo, hi) in INTERVALS.items():
        a, b = 3 * lo, 3 * hi
        covers = {}
        for j, (tlo, thi) in INTERVALS.items():
            # target is covered if some 2*pi translate of it lies in [a, b]
            shifts = range(math.floor((a - thi) / 2) - 1, math.ceil((b - tlo) / 2) + 2)
            covers[j] = any(a <= tlo + 2 * s and thi + 2 * s <= b for s in shifts)
        out[k] = {
            "image": (a, b),
            "covers": covers,
            "injective": 3 * (hi - lo) < 2,
        }
    return out


# -- skew product ------------------------------------------------------------

def _in_domain(z: float) -> int:
    k = symbol_of(z)
    if k == 0:
        raise OutsideDomain(f"z = {z!r} is outside I1 and I2")
    return k


def apply_F(s: SkewState, params: WParams = WParams()) -> SkewState:
    k = _in_domain(s.z)
    m = MapId.T if k == 1 else MapId.W
    x, y = lift_forward_xy(m, s.x, s.y, params.M)
    z = apply_g(s.z)
    return SkewState(reduce_angle(float(x)), float(y), z if isinstance(z, Fraction) else float(z))


def escape_time(s: SkewState, params: WParams = WParams(),
                maxiter: int = 1000) -> Union[int, Never]:
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    for t in range(maxiter + 1):
        if abs(s.y) > Y_BOUND or symbol_of(s.z) == 0:
            return t
        if t == maxiter:
            break
        s = apply_F(s, params)
    return Never(maxiter)


def escape_times(x, y, z, params: WParams = WParams(), maxiter: int = 1000) -> np.ndarray:
    """Vectorized escape_time; NEVER is reported as -1."""
    x = reduce_angle(np.array(x, dtype=float, ndmin=1))
    y = np.array(y, dtype=float, ndmin=1)
    z = reduce_angle(np.array(z, dtype=float, ndmin=1))
    out = np.full(x.shape, -1, dtype=np.int64)
    live = np.ones(x.shape, dtype=bool)
    for t in range(maxiter + 1):
        k = symbols_xy(z)
        gone = live & ((np.abs(y) > Y_BOUND) | (k == 0))
        out[gone] = t
        live &= ~gone
        if t == maxiter or not live.any():
            break
        i1 = live & (k == 1)
        i2 = live & (k == 2)
        x[i1], y[i1] = lift_forward_xy(MapId.T, x[i1], y[i1])
        x[i2], y[i2] = lift_forward_xy(MapId.W, x[i2], y[i2], params.M)
        x = reduce_angle(x)
        z = reduce_angle(3.0 * z)
    return out


def orbit(s: SkewState, params: WParams = WParams(), steps: int = 1000) -> list[SkewState]:
    out = [s]
    for _ in range(steps):
        s = apply_F(s, params)
        out.append(s)
    return out


def escape_grid(nx: int = 50, ny: int = 50, nz: int = 40):
    """Grid over S^1 x [-2, 2] x (I1 u I2), half the z samples in each interval."""
    xs = TWO_PI * np.arange(nx) / nx
    ys = np.linspace(-Y_BOUND, Y_BOUND, ny)
    half = nz // 2
    zs = np.concatenate([np.linspace(0.0, math.pi / 2, half),
                         np.linspace(math.pi, 1.5 * math.pi, nz - half)])
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    return X.ravel(), Y.ravel(), Z.ravel()


# -- codes and schedules -----------------------------------------------------

def schedule_from_code(code: Sequence[int], params: WParams = WParams()) -> BlockSchedule:
    """Group runs: each run of 1s (T) with the following run of 2s (W) is a block."""
    code = parse_code(code)
    if not code:
        raise ValueError("code must be nonempty")
    blocks = []
    i = 0
    while i < len(code):
        m = n = 0
        while i < len(code) and code[i] == 1:
            m += 1
            i += 1
        while i < len(code) and code[i] == 2:
            n += 1
            i += 1
        blocks.append(Block(m, n))
    return BlockSchedule(tuple(blocks), params)


def de_bruijn(L: int) -> Code:
    """Binary de Bruijn sequence over {1, 2}, linearized to contain every
    word of length L exactly once."""
    a = [0] * (2 * L + 1)
    seq: list[int] = []

    def db(t: int, p: int):
        if t > L:
            if L % p == 0:
                seq.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, 2):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    lin = seq + seq[:L - 1]
    return tuple(s + 1 for s in lin)


def transitivity_witness(L: int) -> Code:
    if L < 1:
        raise ValueError("L must be >= 1")
    return de_bruijn(L)


def words_in(code: Sequence[int], L: int) -> set[Code]:
    code = tuple(code)
    return {code[i:i + L] for i in range(len(code) - L + 1)}


def witness_visits(code: Sequence[int], L: int) -> set[Code]:
    """Depth-L cylinders visited by the exact orbit of the code's midpoint."""
    code = parse_code(code)
    z = code_to_interval(code).mid
    seen: set[Code] = set()
    for _ in range(len(code) - L + 1):
        it = g_itinerary(z, L)
        if isinstance(it, Escaped):
            break
        seen.add(it)
        z = apply_g(z)
    return seen
