"""Canonical m-ary trie shapes.

A :class:`Shape` is either the external node ``LEAF`` or an internal node with
exactly ``m`` child slots, each ``None`` (an empty subtree) or a ``Shape``.
The same type represents motifs and built tries.

Text grammar::

    shape := "L" | "(" child^m ")"
    child := "E" | shape
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence

from .errors import (
    ArityMismatch,
    MotifTooSmall,
    ParseError,
    PrefixBudgetExceeded,
    SymbolOutOfRange,
    TriePropertyViolated,
)

DEFAULT_MAX_DEPTH = 10_000

Word = tuple[int, ...]


class Shape:
    __slots__ = ("children", "size", "height", "_hash")

    def __init__(self, children: Optional[Sequence[Optional["Shape"]]] = None):
        if children is None:
            self.children = None
            self.size = 1
            self.height = 0
        else:
            children = tuple(children)
            live = [c for c in children if c is not None]
            if not live:
                raise ValueError("internal node needs a non-empty child")
            self.children = children
            self.size = sum(c.size for c in live)
            self.height = 1 + max(c.height for c in live)
            if self.size < 2:
                raise ValueError("an internal node must hold at least 2 leaves")
        self._hash = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def arity(self) -> Optional[int]:
        if self.children is None:
            return None
        return len(self.children)

    @property
    def is_root_branching(self) -> bool:
        return self.children is not None and sum(c is not None for c in self.children) >= 2

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Shape):
            return NotImplemented
        if self.size != other.size or self.height != other.height:
            return False
        if hash(self) != hash(other):
            return False
        return self.children == other.children

    def __hash__(self):
        if self._hash is None:
            if self.children is None:
                self._hash = hash("L")
            else:
                self._hash = hash(self.children)
        return self._hash

    def __repr__(self):
        return f"Shape({encode_shape(self)!r})"

    def __str__(self):
        return encode_shape(self)

    def nodes(self) -> Iterator["Shape"]:
        """Preorder traversal of all (non-empty) nodes."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if node.children is not None:
                stack.extend(c for c in reversed(node.children) if c is not None)


LEAF = Shape()


def internal(*children: Optional[Shape]) -> Shape:
    return Shape(children)


# -- text format ---------------------------------------------------------------


def encode_shape(shape: Shape) -> str:
    parts: list[str] = []
    stack: list = [shape]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif item is None:
            parts.append("E")
        elif item.children is None:
            parts.append("L")
        else:
            parts.append("(")
            stack.append(")")
            stack.extend(reversed(item.children))
    return "".join(parts)


def decode_shape(text: str, m: Optional[int] = None) -> Shape:
    """Parse canonical text.  With ``m=None`` the arity is taken from the first
    internal node and enforced everywhere else."""
    toks = [(i, ch) for i, ch in enumerate(text) if not ch.isspace()]
    if not toks:
        raise ParseError("empty motif text", 0)
    pos = 0
    arity = m
    # explicit stack of (open offset, children list)
    stack: list[tuple[int, list]] = []
    result = None
    while pos < len(toks):
        off, ch = toks[pos]
        pos += 1
        if result is not None:
            raise ParseError(f"trailing character {ch!r}", off)
        if ch == "(":
            stack.append((off, []))
            continue
        if ch == "L":
            node = LEAF
        elif ch == "E":
            if not stack:
                raise ParseError("empty subtree outside an internal node", off)
            node = None
        elif ch == ")":
            if not stack:
                raise ParseError("unbalanced ')'", off)
            open_off, kids = stack.pop()
            if arity is None:
                arity = len(kids)
                if arity < 2:
                    raise ArityMismatch(f"internal node has {arity} children", open_off)
            if len(kids) != arity:
                raise ArityMismatch(
                    f"internal node has {len(kids)} children, expected {arity}", open_off
                )
            try:
                node = Shape(kids)
            except ValueError as exc:
                raise ParseError(str(exc), open_off) from None
        else:
            raise ParseError(f"unexpected character {ch!r}", off)
        if stack:
            stack[-1][1].append(node)
        else:
            result = node
    if stack:
        raise ParseError("unclosed '('", stack[-1][0])
    if result is None:
        raise ParseError("no shape", len(text))
    return result


# -- words ---------------------------------------------------------------------


def _as_word(word, alphabet: Optional[str]) -> Word:
    if isinstance(word, str):
        if alphabet is None:
            alphabet = "0123456789"
        try:
            return tuple(alphabet.index(ch) for ch in word)
        except ValueError:
            raise SymbolOutOfRange(f"word {word!r} uses a symbol outside {alphabet!r}") from None
    return tuple(int(s) for s in word)


def shape_from_words(words: Sequence, m: int, alphabet: Optional[str] = None) -> Shape:
    """Build the unique trie whose external nodes sit at the given words.

    Words may be strings over *alphabet* (digits by default) or integer
    sequences.  Raises :class:`TriePropertyViolated` if the tuple is not a
    valid trie description.
    """
    ws = [_as_word(w, alphabet) for w in words]
    if not ws:
        raise TriePropertyViolated("no words")
    for i, w in enumerate(ws):
        for s in w:
            if not 0 <= s < m:
                raise SymbolOutOfRange(f"word {i} has symbol {s} outside 0..{m - 1}")

    def build(idx: list[int], depth: int) -> Shape:
        if len(idx) == 1:
            (i,) = idx
            if len(ws[i]) != depth:
                raise TriePropertyViolated(
                    f"word {i} extends past its distinguishing prefix", (i,)
                )
            return LEAF
        for i in idx:
            if len(ws[i]) == depth:
                other = next(j for j in idx if j != i)
                raise TriePropertyViolated(f"word {i} is a prefix of word {other}", (i, other))
        buckets: list[list[int]] = [[] for _ in range(m)]
        for i in idx:
            buckets[ws[i][depth]].append(i)
        return Shape([build(b, depth + 1) if b else None for b in buckets])

    return build(list(range(len(ws))), 0)


def words_from_shape(shape: Shape) -> list[Word]:
    """Leaf paths in leftmost-first depth-first order."""
    out: list[Word] = []
    stack: list = [(shape, ())]
    while stack:
        node, path = stack.pop()
        if node.children is None:
            out.append(path)
            continue
        for j in range(len(node.children) - 1, -1, -1):
            child = node.children[j]
            if child is not None:
                stack.append((child, path + (j,)))
    return out


def format_words(words: Iterable[Word], alphabet: str = "0123456789") -> list[str]:
    return ["".join(alphabet[s] for s in w) for w in words]


# -- construction from streams ---------------------------------------------------


def build_trie(streams: Sequence, n: Optional[int] = None, max_depth: int = DEFAULT_MAX_DEPTH) -> Shape:
    """Trie on the strings produced by *streams*.

    Each stream is asked for symbols only until its string is isolated, so it
    ends positioned at its distinguishing prefix length.
    """
    if n is None:
        n = len(streams)
    if n < 1 or n > len(streams):
        raise ValueError(f"need 1 <= n <= {len(streams)}, got {n}")
    streams = streams[:n]
    m = streams[0].source.m
    if n == 1:
        return LEAF

    def split(idx: list[int], depth: int) -> list[list[int]]:
        if depth >= max_depth:
            raise PrefixBudgetExceeded(f"strings still collide at depth {max_depth}")
        buckets: list[list[int]] = [[] for _ in range(m)]
        for i in idx:
            buckets[streams[i].next_symbol()].append(i)
        return buckets

    # frames: [buckets, next slot, finished children, depth]
    stack = [[split(list(range(n)), 0), 0, [], 0]]
    while True:
        frame = stack[-1]
        buckets, slot, kids, depth = frame
        if slot == m:
            node = Shape(kids)
            stack.pop()
            if not stack:
                return node
            stack[-1][2].append(node)
            stack[-1][1] += 1
            continue
        bucket = buckets[slot]
        if len(bucket) >= 2:
            stack.append([split(bucket, depth + 1), 0, [], depth + 1])
            continue
        kids.append(LEAF if bucket else None)
        frame[1] += 1


# -- fringe counting -------------------------------------------------------------


def count_fringe_occurrences(trie: Shape, motif: Shape) -> int:
    """Number of nodes whose full rooted subtree equals *motif*."""
    if motif.size < 2:
        raise MotifTooSmall("motifs must have at least 2 leaves")
    count = 0
    stack = [trie]
    while stack:
        node = stack.pop()
        if node.size < motif.size:
            continue
        if node.size == motif.size and node == motif:
            count += 1
            continue
        if node.children is not None:
            stack.extend(c for c in node.children if c is not None)
    return count


def is_subtree(small: Shape, big: Shape) -> bool:
    """True when *small* equals the full subtree at some node of *big*."""
    return any(node.size == small.size and node == small for node in big.nodes())
