"""Memoryless m-ary sources and deterministic symbol streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import accumulate
from typing import Sequence

from .errors import (
    AlphabetTooSmall,
    NonPositiveProbability,
    ProbabilitiesDoNotSumToOne,
)

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)

DEFAULT_MAX_DENOMINATOR = 64
DEFAULT_PERIODICITY_TOL = 1e-12


@dataclass(frozen=True)
class Aperiodic:
    # set when some log-ratio is close to, but not within tol of, a small rational
    near_commensurable: bool = False

    @property
    def is_periodic(self) -> bool:
        return False


@dataclass(frozen=True)
class Periodic:
    """All probabilities are integer powers ``base ** exponents[j]``."""

    base: float
    exponents: tuple[int, ...]

    @property
    def is_periodic(self) -> bool:
        return True

    @property
    def pole_spacing(self) -> float:
        return 2.0 * math.pi / math.log(1.0 / self.base)


Periodicity = Aperiodic | Periodic


def _validate(probs: Sequence[float]) -> tuple[float, ...]:
    probs = tuple(float(p) for p in probs)
    if len(probs) < 2:
        raise AlphabetTooSmall(f"need at least 2 symbols, got {len(probs)}")
    for j, p in enumerate(probs):
        if not (p > 0.0) or not math.isfinite(p):
            raise NonPositiveProbability(f"probability {j} is {p!r}")
        if p >= 1.0:
            # the other symbols would carry no representable mass
            raise NonPositiveProbability(f"probability {j} is {p!r}; every symbol needs mass below 1")
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-12:
        raise ProbabilitiesDoNotSumToOne(f"probabilities sum to {total!r}")
    return probs


def classify_periodicity(
    probs: Sequence[float],
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    tol: float = DEFAULT_PERIODICITY_TOL,
) -> Periodicity:
    """Detect whether all ``ln p_j`` are commensurable.

    Each ratio ``ln p_j / ln p_min`` is approximated by its best continued
    fraction convergent with denominator at most *max_denominator*.  When every
    ratio is matched within *tol*, the source is reported as ``Periodic`` with
    coprime integer exponents over a common base.
    """
    probs = _validate(probs)
    logs = [-math.log(p) for p in probs]
    ref = min(logs)
    fracs = []
    near = True
    for lg in logs:
        ratio = lg / ref
        frac = Fraction(ratio).limit_denominator(max_denominator)
        err = abs(ratio - float(frac))
        if err > tol * max(1.0, ratio):
            if err > 1e-6 * max(1.0, ratio):
                near = False
            fracs = None
        elif fracs is not None:
            fracs.append(frac)
    if fracs is None:
        return Aperiodic(near_commensurable=near)
    denom = reduce(math.lcm, (f.denominator for f in fracs), 1)
    ints = [int(f * denom) for f in fracs]
    g = reduce(math.gcd, ints)
    exponents = tuple(k // g for k in ints)
    # ln(1/base) is the common unit: ref = (denom/g) * unit, since ref's ratio is 1
    unit = ref * g / denom
    base = math.exp(-unit)
    for p, lam in zip(probs, exponents):
        if abs(base ** lam - p) > 1e-10:
            return Aperiodic(near_commensurable=True)
    return Periodic(base=base, exponents=exponents)


@dataclass(frozen=True)
class SourceModel:
    probs: tuple[float, ...]
    entropy: float
    periodicity: Periodicity
    cdf: tuple[float, ...] = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.probs)

    def power_sum(self, x: float) -> float:
        """``sum_k p_k ** x``."""
        return math.fsum(p ** x for p in self.probs)

    def permuted(self, perm: Sequence[int]) -> "SourceModel":
        return new_source([self.probs[i] for i in perm])


def new_source(
    probs: Sequence[float],
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    tol: float = DEFAULT_PERIODICITY_TOL,
) -> SourceModel:
    probs = _validate(probs)
    entropy = -math.fsum(p * math.log(p) for p in probs)
    cdf = list(accumulate(probs))
    cdf[-1] = 1.0
    return SourceModel(
        probs=probs,
        entropy=entropy,
        periodicity=classify_periodicity(probs, max_denominator, tol),
        cdf=tuple(cdf),
    )


def uniform_source(m: int) -> SourceModel:
    return new_source([1.0 / m] * m)


# -- counter-based generator -------------------------------------------------
#
# Symbol d of stream (seed, stream_id) is a pure function of the triple, so a
# stream can be replayed, split or consumed lazily.  The compiled kernel uses
# the exact same integer recipe; keep the two in sync.


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    return mix64(mix64((seed + GOLDEN) & MASK64) ^ (stream_id & MASK64))


def uniform_at(key: int, position: int) -> float:
    return (mix64(key + (position + 1) * GOLDEN) >> 11) * _INV_2_53


def symbol_from_uniform(u: float, cdf: Sequence[float]) -> int:
    j = 0
    while u >= cdf[j]:
        j += 1
    return j


@dataclass
class SymbolStream:
    source: SourceModel
    seed: int
    stream_id: int
    position: int = 0

    def __post_init__(self):
        self._key = stream_key(self.seed, self.stream_id)

    def next_symbol(self) -> int:
        u = uniform_at(self._key, self.position)
        self.position += 1
        return symbol_from_uniform(u, self.source.cdf)

    def symbol_at(self, position: int) -> int:
        return symbol_from_uniform(uniform_at(self._key, position), self.source.cdf)

    def take(self, count: int) -> list[int]:
        return [self.next_symbol() for _ in range(count)]


def next_symbol(stream: SymbolStream) -> int:
    return stream.next_symbol()


def standard_normals(seed: int, stream_id: int, size: int) -> list[float]:
    """Box-Muller normals drawn from the counter-based uniforms."""
    key = stream_key(seed, stream_id)
    out = []
    pos = 0
    while len(out) < size:
        u1 = uniform_at(key, pos)
        u2 = uniform_at(key, pos + 1)
        pos += 2
        if u1 <= 0.0:
            continue
        r = math.sqrt(-2.0 * math.log(u1))
        out.append(r * math.cos(2.0 * math.pi * u2))
        out.append(r * math.sin(2.0 * math.pi * u2))
    return out[:size]
