"""Fixed-point phase angles with deterministic and randomized rounding.

All angles are measured in turns (one turn is ``2*pi`` radians) and stored as
exact 64-bit dyadic fractions, so rounding identities such as
``E[Theta] == theta`` can be checked with exact rational arithmetic.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Union

import numpy as np

from .config import ANGLE_BITS
from .errors import ParameterError

__all__ = [
    "FixedPointAngle",
    "GridAngle",
    "RandomizedAngle",
    "PhaseErrorBound",
    "truncate_deterministic",
    "randomize",
    "sample",
    "sample_many",
    "expected_phase",
    "phase",
    "phase_error_bound",
    "bits_for_epsilon",
]

_MOD = 1 << ANGLE_BITS
_MAX_BITS = ANGLE_BITS - 1

Mode = Literal["deterministic", "randomized"]


def _check_bits(b: int) -> None:
    if isinstance(b, bool) or not isinstance(b, (int, np.integer)) or not 1 <= b <= _MAX_BITS:
        raise ParameterError(f"bits must be an integer in [1, {_MAX_BITS}], got {b!r}")


def phase(turns: Union[float, Fraction]) -> complex:
    """Return ``exp(2*pi*i*turns)``."""
    return cmath.exp(2j * math.pi * float(turns))


@dataclass(frozen=True, order=True)
class FixedPointAngle:
    """An angle ``numerator / 2**64`` turns, always in ``[0, 1)``."""

    numerator: int

    def __post_init__(self):
        if not 0 <= self.numerator < _MOD:
            raise ParameterError(f"numerator must lie in [0, 2**{ANGLE_BITS})")

    @classmethod
    def from_turns(cls, turns: Union[float, int, Fraction]) -> "FixedPointAngle":
        """Snap a real angle in turns to the nearest 64-bit dyadic (mod 1).

        Ties round to even. The snap moves the angle by at most ``2**-65`` turns.
        """
        if isinstance(turns, float) and not math.isfinite(turns):
            raise ParameterError("angle must be finite")
        return cls(round(Fraction(turns) * _MOD) % _MOD)

    @classmethod
    def from_radians(cls, radians: float) -> "FixedPointAngle":
        return cls.from_turns(Fraction(radians) / Fraction(2 * math.pi))

    @property
    def turns(self) -> Fraction:
        return Fraction(self.numerator, _MOD)

    def __float__(self) -> float:
        return self.numerator / _MOD

    def __add__(self, other: "FixedPointAngle") -> "FixedPointAngle":
        return FixedPointAngle((self.numerator + other.numerator) % _MOD)

    def __sub__(self, other: "FixedPointAngle") -> "FixedPointAngle":
        return FixedPointAngle((self.numerator - other.numerator) % _MOD)

    def __neg__(self) -> "FixedPointAngle":
        return FixedPointAngle(-self.numerator % _MOD)


@dataclass(frozen=True, order=True)
class GridAngle:
    """The angle ``index * 2**-bits`` turns on a ``bits``-bit grid."""

    bits: int
    index: int

    def __post_init__(self):
        _check_bits(self.bits)
        if not 0 <= self.index < (1 << self.bits):
            raise ParameterError(f"index {self.index} out of range for {self.bits} bits")

    @property
    def turns(self) -> Fraction:
        return Fraction(self.index, 1 << self.bits)

    def __float__(self) -> float:
        return self.index / (1 << self.bits)

    def to_fixed(self) -> FixedPointAngle:
        return FixedPointAngle(self.index << (ANGLE_BITS - self.bits))

    def successor(self) -> "GridAngle":
        """Next grid point, wrapping ``2**bits - 1`` around to 0."""
        return GridAngle(self.bits, (self.index + 1) % (1 << self.bits))

    def bitstring(self) -> str:
        """Binary expansion ``theta_1 theta_2 ... theta_b`` (most significant first)."""
        return format(self.index, f"0{self.bits}b")


@dataclass(frozen=True)
class RandomizedAngle:
    """Two-point random angle: ``base`` or ``base.successor()`` with probability ``r``.

    ``remainder`` is the numerator of ``r`` over ``2**(64 - bits)``, so ``r`` is
    always an exact dyadic in ``[0, 1)``.
    """

    base: GridAngle
    remainder: int

    def __post_init__(self):
        if not 0 <= self.remainder < self.denominator:
            raise ParameterError("remainder out of range for the grid resolution")

    @property
    def bits(self) -> int:
        return self.base.bits

    @property
    def denominator(self) -> int:
        return 1 << (ANGLE_BITS - self.base.bits)

    @property
    def bernoulli_r(self) -> Fraction:
        return Fraction(self.remainder, self.denominator)

    @property
    def is_deterministic(self) -> bool:
        return self.remainder == 0

    def support(self) -> list[tuple[GridAngle, Fraction]]:
        r = self.bernoulli_r
        if r == 0:
            return [(self.base, Fraction(1))]
        return [(self.base, 1 - r), (self.base.successor(), r)]

    def expectation(self) -> Fraction:
        """``E[Theta]`` in turns, reduced mod 1, as an exact rational."""
        value = self.base.turns + self.bernoulli_r / (1 << self.bits)
        return value - math.floor(value)

    def to_fixed(self) -> FixedPointAngle:
        """The source angle this distribution reconstructs in expectation."""
        return FixedPointAngle((self.base.index << (ANGLE_BITS - self.bits)) + self.remainder)


@dataclass(frozen=True)
class PhaseErrorBound:
    bits: int
    bound: float
    mode: str


def truncate_deterministic(theta: FixedPointAngle, b: int) -> GridAngle:
    """Round ``theta`` to the nearest point of the ``2**-b`` grid.

    Exact halfway cases round up; the result wraps to index 0 past the last
    grid point.
    """
    _check_bits(b)
    shift = ANGLE_BITS - b
    index = ((theta.numerator + (1 << (shift - 1))) >> shift) % (1 << b)
    return GridAngle(b, index)


def randomize(theta: FixedPointAngle, b: int) -> RandomizedAngle:
    """Floor ``theta`` onto the ``2**-b`` grid and keep the exact remainder as ``r``."""
    _check_bits(b)
    shift = ANGLE_BITS - b
    return RandomizedAngle(GridAngle(b, theta.numerator >> shift), theta.numerator & ((1 << shift) - 1))


def sample(ra: RandomizedAngle, rng: np.random.Generator) -> GridAngle:
    """Draw one grid angle from ``ra``.

    The Bernoulli draw compares ``64 - b`` uniform bits with the remainder, so
    the upper point is chosen with probability exactly ``r``.
    """
    if ra.is_deterministic:
        return ra.base
    u = int(rng.integers(0, ra.denominator, dtype=np.uint64))
    return ra.base.successor() if u < ra.remainder else ra.base


def sample_many(ra: RandomizedAngle, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized :func:`sample`; returns an array of grid indices."""
    if ra.is_deterministic:
        return np.full(size, ra.base.index, dtype=np.int64)
    u = rng.integers(0, ra.denominator, size=size, dtype=np.uint64)
    upper = (u < np.uint64(ra.remainder)).astype(np.int64)
    return (ra.base.index + upper) % (1 << ra.bits)


def expected_phase(ra: RandomizedAngle) -> complex:
    """``E[exp(2*pi*i*Theta)]`` for the two-point distribution."""
    r = float(ra.bernoulli_r)
    lower = phase(ra.base.turns)
    if r == 0.0:
        return lower
    return (1.0 - r) * lower + r * lower * phase(Fraction(1, 1 << ra.bits))


def phase_error_bound(b: int, mode: Mode = "randomized") -> PhaseErrorBound:
    """Worst-case ``|exp(2*pi*i*theta) - approximation|`` at ``b`` bits."""
    _check_bits(b)
    if mode == "randomized":
        bound = math.pi**2 / 2 ** (2 * b + 1)
    elif mode == "deterministic":
        bound = math.pi / 2**b
    else:
        raise ParameterError(f"unknown rounding mode {mode!r}")
    return PhaseErrorBound(b, bound, mode)


def bits_for_epsilon(epsilon: float, mode: Mode = "randomized") -> int:
    """Fewest bits whose phase error bound is at most ``epsilon``."""
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    if mode == "deterministic":
        return max(1, math.ceil(math.log2(math.pi / epsilon)))
    if mode == "randomized":
        return max(1, math.ceil(0.5 * math.log2(math.pi**2 / (2 * epsilon))))
    raise ParameterError(f"unknown rounding mode {mode!r}")
