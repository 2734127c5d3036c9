"""Higher order polynomial lattice point sets, digital shifts and the tent fold.

Coordinates are kept as integer numerators over 2^precision until they are
handed to an integrand or kernel.  A raw point has precision m'; shifted and
folded points carry the shift precision P (53 by default, so every value
converts to a double exactly).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence, TextIO

import numpy as np

from . import f2poly
from .kernel import WeightModel

DEFAULT_SHIFT_PRECISION = 53
MAX_SHIFT_PRECISION = 63
BIN_MAGIC = b"PLRP"
BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sHHIIIIQ")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RuleSpec:
    """Generating vector and modulus of a rule with 2^m points, plus the
    smoothness and weights it was built for."""

    s: int
    m: int
    mprime: int
    modulus: int
    generators: tuple[int, ...]
    alpha: int
    weights: WeightModel

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not 0 <= self.m <= self.mprime:
            raise ValueError("need 0 <= m <= m'")
        if self.mprime > f2poly.MAX_MPRIME:
            raise ValueError(f"m' > {f2poly.MAX_MPRIME} is not supported")
        if f2poly.degree(self.modulus) != self.mprime:
            raise ValueError("modulus degree must equal m'")
        if not f2poly.is_irreducible(self.modulus):
            raise ValueError("modulus must be irreducible")
        if len(self.generators) != self.s:
            raise ValueError("need one generator per coordinate")
        for q in self.generators:
            if q < 0 or q >> self.mprime:
                raise ValueError("generators must have degree < m'")
        if self.alpha < 2:
            raise ValueError("alpha must be >= 2")
        if self.weights.s != self.s:
            raise ValueError("weights dimension does not match s")

    @property
    def n_points(self) -> int:
        return 1 << self.m


@dataclass(frozen=True)
class DyadicPoint:
    numerators: tuple[int, ...]
    precision: int

    def values(self) -> tuple[float, ...]:
        return tuple(n / (1 << self.precision) for n in self.numerators)


@dataclass(frozen=True)
class PointSet:
    """``numerators[n, j]`` / 2^precision is coordinate j of point n."""

    numerators: np.ndarray
    precision: int

    def __len__(self) -> int:
        return self.numerators.shape[0]

    @property
    def s(self) -> int:
        return self.numerators.shape[1]

    def values(self) -> np.ndarray:
        return np.ldexp(self.numerators.astype(np.float64), -self.precision)

    def __iter__(self) -> Iterator[DyadicPoint]:
        for row in self.numerators:
            yield DyadicPoint(tuple(int(v) for v in row), self.precision)


@dataclass(frozen=True)
class ShiftVector:
    numerators: tuple[int, ...]
    precision: int
    seed: int
    index: int = 0


def generate_point(rule: RuleSpec, n: int) -> DyadicPoint:
    """Point n: coordinate j is v_m'(n(x) q_j(x) / p(x))."""
    if not 0 <= n < rule.n_points:
        raise ValueError(f"n must lie in [0, 2^{rule.m})")
    nums = tuple(
        f2poly.laurent_numerator(f2poly.mul_mod(n, q, rule.modulus), rule.modulus, rule.mprime)
        for q in rule.generators
    )
    return DyadicPoint(nums, rule.mprime)


def coordinate_numerators(q: int, p: int, m: int, mprime: int) -> np.ndarray:
    """Numerators of v_m'(n q / p) for n = 0 .. 2^m - 1.

    n -> v_m'(n q / p) is linear over GF(2) in the bits of n, so the table is
    built by doubling from the images of x^b q, b < m.
    """
    out = np.zeros(1, dtype=np.uint64)
    for b in range(m):
        basis = f2poly.laurent_numerator(f2poly.mul_mod(1 << b, q, p), p, mprime)
        out = np.concatenate([out, out ^ np.uint64(basis)])
    return out


def generate_point_set(rule: RuleSpec) -> PointSet:
    cols = [coordinate_numerators(q, rule.modulus, rule.m, rule.mprime) for q in rule.generators]
    return PointSet(np.stack(cols, axis=1), rule.mprime)


# ---------------------------------------------------------------------------
# randomisation


def splitmix64(seed: int) -> Iterator[int]:
    """SplitMix64 stream (Steele, Lea, Flood 2014).

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    yield z ^ (z >> 31)            (all arithmetic mod 2^64)
    """
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def draw_shift(s: int, seed: int, precision: int = DEFAULT_SHIFT_PRECISION, index: int = 0) -> ShiftVector:
    """Shift number ``index`` for ``seed``.

    Coordinate j of shift r is the top ``precision`` bits of output r*s + j of
    ``splitmix64(seed)``.
    """
    if not 1 <= precision <= MAX_SHIFT_PRECISION:
        raise ValueError(f"shift precision must lie in [1, {MAX_SHIFT_PRECISION}]")
    stream = splitmix64(seed)
    for _ in range(index * s):
        next(stream)
    nums = tuple(next(stream) >> (64 - precision) for _ in range(s))
    return ShiftVector(nums, precision, seed & _MASK64, index)


def digital_shift(x: PointSet | DyadicPoint, sigma: ShiftVector) -> PointSet | DyadicPoint:
    """Digitwise XOR at the shift precision (point digits zero-extended)."""
    if sigma.precision < x.precision:
        raise ValueError("shift precision must be >= point precision")
    up = sigma.precision - x.precision
    if isinstance(x, DyadicPoint):
        if len(x.numerators) != len(sigma.numerators):
            raise ValueError("dimension mismatch")
        return DyadicPoint(tuple((a << up) ^ b for a, b in zip(x.numerators, sigma.numerators)), sigma.precision)
    if x.s != len(sigma.numerators):
        raise ValueError("dimension mismatch")
    shifted = (x.numerators << np.uint64(up)) ^ np.array(sigma.numerators, dtype=np.uint64)
    return PointSet(shifted, sigma.precision)


def _tent_numerators(nums, precision: int):
    half = 1 << (precision - 1)
    full2 = 1 << (precision + 1)
    if isinstance(nums, np.ndarray):
        nums = nums.astype(np.uint64)
        return np.where(nums < np.uint64(half), nums * np.uint64(2), np.uint64(full2) - nums * np.uint64(2))
    return 2 * nums if nums < half else full2 - 2 * nums


def tent_transform(x: PointSet | DyadicPoint) -> PointSet | DyadicPoint:
    """phi(x) = 1 - |2x - 1| at the same precision; phi(1/2) = 1 is kept."""
    if x.precision < 1:
        return x
    if isinstance(x, DyadicPoint):
        if any(not 0 <= v < (1 << x.precision) for v in x.numerators):
            raise ValueError("x must lie in [0, 1)")
        return DyadicPoint(tuple(_tent_numerators(v, x.precision) for v in x.numerators), x.precision)
    return PointSet(_tent_numerators(x.numerators, x.precision), x.precision)


def randomize(
    rule: RuleSpec,
    seed: int,
    precision: int = DEFAULT_SHIFT_PRECISION,
    index: int = 0,
    sigma: ShiftVector | None = None,
) -> tuple[PointSet, ShiftVector]:
    """z_n = phi(x_n XOR sigma) for every point of the rule."""
    if sigma is None:
        sigma = draw_shift(rule.s, seed, max(precision, rule.mprime), index)
    pts = generate_point_set(rule)
    return tent_transform(digital_shift(pts, sigma)), sigma


def zero_shift(s: int, precision: int = DEFAULT_SHIFT_PRECISION) -> ShiftVector:
    return ShiftVector((0,) * s, precision, 0)


# ---------------------------------------------------------------------------
# export


def write_csv(points: PointSet, out: TextIO) -> None:
    for row in points.values():
        out.write(",".join(format(float(v), ".17g") for v in row))
        out.write("\n")


def write_bin(points: PointSet, out: BinaryIO, m: int, mprime: int) -> None:
    """Header (magic, version, s, m, m', P, count) then little-endian u64 numerators, row-major."""
    n, s = points.numerators.shape
    out.write(_BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, 0, s, m, mprime, points.precision, n))
    out.write(np.ascontiguousarray(points.numerators, dtype="<u8").tobytes())


def read_bin(data: bytes | BinaryIO) -> tuple[PointSet, dict]:
    if not isinstance(data, (bytes, bytearray)):
        data = data.read()
    magic, version, _, s, m, mprime, precision, n = _BIN_HEADER.unpack_from(data, 0)
    if magic != BIN_MAGIC or version != BIN_VERSION:
        raise ValueError("not a point file of a supported version")
    body = np.frombuffer(data, dtype="<u8", count=n * s, offset=_BIN_HEADER.size)
    header = {"s": s, "m": m, "mprime": mprime, "precision": precision, "count": n}
    return PointSet(body.reshape(n, s).astype(np.uint64), precision), header


def points_to_bytes(points: PointSet, m: int, mprime: int) -> bytes:
    buf = io.BytesIO()
    write_bin(points, buf, m, mprime)
    return buf.getvalue()


def as_pointset(rows: Sequence[Sequence[int]], precision: int) -> PointSet:
    return PointSet(np.asarray(rows, dtype=np.uint64).reshape(len(rows), -1), precision)
