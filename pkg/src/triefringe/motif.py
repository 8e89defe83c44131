"""Motif semantics: shape functionals, nonoverlap, weighted collections, cousins."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterator, Optional, Sequence

from .errors import AllWeightsZero, ArityMismatch, ConfigError, MotifTooSmall, OverlappingMotifs
from .shape import LEAF, Shape, decode_shape, encode_shape, is_subtree, words_from_shape
from .source import SourceModel


def shape_functional(source: SourceModel, motif: Shape) -> float:
    """Probability that a trie on ``motif.size`` strings has exactly this shape."""
    if motif.arity is not None and motif.arity != source.m:
        raise ArityMismatch(f"motif arity {motif.arity} does not match alphabet size {source.m}", 0)
    symbols = [s for w in words_from_shape(motif) for s in w]
    try:
        q = math.factorial(motif.size) * math.prod(source.probs[s] for s in symbols)
    except OverflowError:
        q = 0.0
    if q > 0.0 and math.isfinite(q):
        return q
    # product under- or overflowed; redo in log space
    log_q = math.lgamma(motif.size + 1) + math.fsum(math.log(source.probs[s]) for s in symbols)
    return math.exp(log_q)


def check_nonoverlapping(shapes: Sequence[Shape]) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, where one shape occurs inside the other.

    An empty list means the shapes are pairwise nonoverlapping.  Equal shapes
    always count as a violation.
    """
    bad = []
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            a, b = shapes[i], shapes[j]
            # a unary chain has the size of the shape below it, so both
            # directions need checking when sizes tie
            if (a.size <= b.size and is_subtree(a, b)) or (b.size <= a.size and is_subtree(b, a)):
                bad.append((i, j))
    return bad


@dataclass(frozen=True)
class MotifEntry:
    shape: Shape
    alpha: float


@dataclass(frozen=True)
class MotifCollection:
    entries: tuple[MotifEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("a collection needs at least one motif")
        for e in self.entries:
            if e.shape.size < 2:
                raise MotifTooSmall(f"motif {encode_shape(e.shape)} has fewer than 2 leaves")
            if not math.isfinite(e.alpha):
                raise ConfigError(f"weight {e.alpha!r} is not finite")
        arities = {e.shape.arity for e in self.entries}
        if len(arities) != 1:
            raise ArityMismatch(f"motifs mix arities {sorted(arities)}", 0)
        bad = check_nonoverlapping(self.shapes)
        if bad:
            desc = ", ".join(f"{i}<->{j}" for i, j in bad)
            raise OverlappingMotifs(f"overlapping motifs: {desc}", bad)
        if all(e.alpha == 0.0 for e in self.entries):
            raise AllWeightsZero("all weights are zero")

    @classmethod
    def of(cls, shapes: Sequence[Shape], alphas: Optional[Sequence[float]] = None) -> "MotifCollection":
        if alphas is None:
            alphas = [1.0] * len(shapes)
        if len(alphas) != len(shapes):
            raise ConfigError(f"{len(shapes)} motifs but {len(alphas)} weights")
        return cls(tuple(MotifEntry(s, float(a)) for s, a in zip(shapes, alphas)))

    @property
    def shapes(self) -> list[Shape]:
        return [e.shape for e in self.entries]

    @property
    def alphas(self) -> list[float]:
        return [e.alpha for e in self.entries]

    @property
    def m(self) -> int:
        return self.entries[0].shape.arity

    @property
    def common_size(self) -> Optional[int]:
        sizes = {e.shape.size for e in self.entries}
        return sizes.pop() if len(sizes) == 1 else None

    def __len__(self):
        return len(self.entries)

    def to_records(self) -> list[dict]:
        return [{"motif": encode_shape(e.shape), "alpha": e.alpha} for e in self.entries]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_records(cls, records, m: Optional[int] = None) -> "MotifCollection":
        if not isinstance(records, list):
            raise ConfigError("collection must be a JSON list")
        shapes, alphas = [], []
        for k, rec in enumerate(records):
            if not isinstance(rec, dict) or "motif" not in rec:
                raise ConfigError(f"collection entry {k} needs a 'motif' key")
            shape = decode_shape(str(rec["motif"]), m)
            if m is None:
                m = shape.arity
            shapes.append(shape)
            alpha = rec.get("alpha", 1.0)
            if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
                raise ConfigError(f"collection entry {k} has a non-numeric alpha")
            alphas.append(float(alpha))
        return cls.of(shapes, alphas)

    @classmethod
    def from_json(cls, text: str, m: Optional[int] = None) -> "MotifCollection":
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"collection JSON: {exc}") from None
        return cls.from_records(records, m)


# -- cousins ---------------------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _exact(size: int, height: int, m: int) -> tuple[Shape, ...]:
    """All shapes with *size* leaves and height exactly *height*."""
    if size == 1:
        return (LEAF,) if height == 0 else ()
    if height == 0:
        return ()
    return tuple(_nodes_of_height(size, height, m, root_branching=False))


@lru_cache(maxsize=None)
def _upto(size: int, height: int, m: int) -> tuple[Shape, ...]:
    out: list[Shape] = []
    for h in range(height + 1):
        out.extend(_exact(size, h, m))
    return tuple(out)


def _nodes_of_height(size, height, m, root_branching):
    # children of a node of height h have height <= h-1 with at least one
    # exactly h-1; split on the first such child to avoid duplicates
    for comp in _compositions(size, m):
        if root_branching and sum(1 for t in comp if t) < 2:
            continue
        live = [j for j in range(m) if comp[j]]
        for first in live:
            choices = []
            for j in range(m):
                t = comp[j]
                if t == 0:
                    choices.append((None,))
                elif j < first:
                    choices.append(_upto(t, height - 2, m) if height >= 2 else ())
                elif j == first:
                    choices.append(_exact(t, height - 1, m))
                else:
                    choices.append(_upto(t, height - 1, m))
            for kids in product(*choices):
                yield Shape(kids)


def mirror_shape(shape: Optional[Shape]) -> Optional[Shape]:
    """Reverse the child order at every node."""
    if shape is None or shape.children is None:
        return shape
    return Shape([mirror_shape(c) for c in reversed(shape.children)])


def _cousin_order(shape: Shape) -> tuple[str, str]:
    # mirror images sort next to each other; the all-left chain leads each height
    text = encode_shape(shape)
    return min(text, encode_shape(mirror_shape(shape))), text


def enumerate_cousins(
    tau: int, m: int, max_height: Optional[int] = None, limit: Optional[int] = None
) -> Iterator[Shape]:
    """Root-branching shapes with *tau* leaves, height by height.

    Within a height, a shape is followed by its mirror image (when distinct),
    and pairs are ordered by canonical text.  The stream is infinite for
    ``tau >= 3`` unless *max_height* or *limit* is set.
    """
    if tau < 2:
        raise MotifTooSmall("cousins need at least 2 leaves")
    if m < 2:
        raise ConfigError("alphabet size must be at least 2")
    emitted = 0
    height = 1
    while max_height is None or height <= max_height:
        level = sorted(_nodes_of_height(tau, height, m, root_branching=True), key=_cousin_order)
        for shape in level:
            if limit is not None and emitted >= limit:
                return
            yield shape
            emitted += 1
        # with two leaves every root-branching shape is a single split
        if tau == 2:
            return
        height += 1


def cousin_mass_partial_sum(source: SourceModel, tau: int, height: int) -> tuple[float, float]:
    """Total shape functional over cousins of height at most *height*.

    Returns ``(partial, tail_bound)``.  The tail bound certifies
    ``target - partial <= tail_bound`` with ``target = 1 - sum p_j**tau``.
    """
    if tau < 2:
        raise MotifTooSmall("cousins need at least 2 leaves")
    m = source.m
    probs = source.probs
    target = 1.0 - source.power_sum(tau)

    # weight[t] = sum over shapes of t leaves and bounded height of prod P(W_j)
    weight = {1: 1.0}
    for t in range(2, tau + 1):
        weight[t] = 0.0
    comps = {t: list(_compositions(t, m)) for t in range(2, tau + 1)}

    def level_sum(t: int, w: dict, branching: bool) -> float:
        terms = []
        for comp in comps[t]:
            if branching and sum(1 for x in comp if x) < 2:
                continue
            val = 1.0
            for j, tj in enumerate(comp):
                if tj:
                    val *= probs[j] ** tj * w[tj]
            terms.append(val)
        return math.fsum(terms)

    if height <= 0:
        return 0.0, target
    for _ in range(height - 1):
        weight = {1: 1.0, **{t: level_sum(t, weight, False) for t in range(2, tau + 1)}}
    partial = math.factorial(tau) * level_sum(tau, weight, True)
    pair_bound = math.comb(tau, 2) * source.power_sum(2) ** height
    return partial, min(pair_bound, target)
