"""Pure-Python fringe counting kernel (reference and fallback).

Mirrors ``_ckernel.pyx`` operation for operation.  The trie is never
materialized: strings are partitioned by their next symbol, and any segment
holding exactly as many strings as a motif has leaves is matched against that
motif in place.
"""

from __future__ import annotations

from .errors import PrefixBudgetExceeded
from .source import GOLDEN, MASK64, mix64, stream_key

EMPTY = -1
EXTERNAL = -2


def _symbol(key: int, depth: int, cdf) -> int:
    u = (mix64(key + (depth + 1) * GOLDEN) >> 11) * (1.0 / (1 << 53))
    j = 0
    while u >= cdf[j]:
        j += 1
    return j


def _match(node, idx, depth, keys, cdf, m, child, node_size) -> bool:
    buckets = [[] for _ in range(m)]
    for i in idx:
        buckets[_symbol(keys[i], depth, cdf)].append(i)
    base = node * m
    for j in range(m):
        code = child[base + j]
        if code == EMPTY:
            expected = 0
        elif code == EXTERNAL:
            expected = 1
        else:
            expected = node_size[code]
        if len(buckets[j]) != expected:
            return False
    for j in range(m):
        code = child[base + j]
        if code >= 0 and not _match(code, buckets[j], depth + 1, keys, cdf, m, child, node_size):
            return False
    return True


def fringe_counts(seed, stream_base, n, cdf, m, child, node_size, roots, sizes, max_height, max_depth):
    """Occurrence count of each motif in the trie on strings
    ``stream_base .. stream_base + n - 1``."""
    k = len(roots)
    counts = [0] * k
    if n < 2 or k == 0:
        return counts
    keys = [stream_key(seed, (stream_base + j) & MASK64) for j in range(n)]
    min_tau = min(sizes)
    stack = [(list(range(n)), 0)]
    while stack:
        idx, depth = stack.pop()
        c = len(idx)
        for t in range(k):
            if sizes[t] == c and _match(roots[t], idx, depth, keys, cdf, m, child, node_size):
                counts[t] += 1
                break
        if c < min_tau:
            continue
        if depth >= max_depth:
            raise PrefixBudgetExceeded(f"strings still collide at depth {max_depth}")
        buckets = [[] for _ in range(m)]
        for i in idx:
            buckets[_symbol(keys[i], depth, cdf)].append(i)
        for j in range(m - 1, -1, -1):
            if len(buckets[j]) >= min_tau:
                stack.append((buckets[j], depth + 1))
    return counts
