"""Backend selection for the fringe counting kernel.

The compiled extension is used when it imports; otherwise, or when
``TRIEFRINGE_BACKEND=python`` is set, the pure-Python reference runs instead.
Both produce identical counts for identical inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

from . import _pykernel
from .errors import ConfigError
from .shape import DEFAULT_MAX_DEPTH, Shape

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_IMPLS = {"python": _pykernel.fringe_counts}
if _ckernel is not None:
    _IMPLS["cython"] = _ckernel.fringe_counts

BACKEND = os.environ.get("TRIEFRINGE_BACKEND") or ("cython" if _ckernel is not None else "python")
if BACKEND not in _IMPLS:
    raise ImportError(f"TRIEFRINGE_BACKEND={BACKEND!r} is not available; have {sorted(_IMPLS)}")


def available_backends() -> list[str]:
    return sorted(_IMPLS)


@dataclass(frozen=True)
class MotifTable:
    """Flat encoding of motifs: node ``k`` has child codes
    ``child[k*m:(k+1)*m]`` (-1 empty, -2 external, else a node index)."""

    m: int
    child: tuple[int, ...]
    node_size: tuple[int, ...]
    roots: tuple[int, ...]
    sizes: tuple[int, ...]
    max_height: int

    @classmethod
    def from_shapes(cls, shapes: Sequence[Shape], m: int) -> "MotifTable":
        child: list[int] = []
        node_size: list[int] = []
        roots = []

        def add(node: Shape) -> int:
            k = len(node_size)
            node_size.append(node.size)
            child.extend([0] * m)
            for j, c in enumerate(node.children):
                if c is None:
                    code = _pykernel.EMPTY
                elif c.children is None:
                    code = _pykernel.EXTERNAL
                else:
                    code = add(c)
                child[k * m + j] = code
            return k

        for s in shapes:
            if s.children is None or len(s.children) != m:
                raise ValueError(f"motif {s} is not an internal {m}-ary shape")
            roots.append(add(s))
        return cls(
            m=m,
            child=tuple(child),
            node_size=tuple(node_size),
            roots=tuple(roots),
            sizes=tuple(s.size for s in shapes),
            max_height=max((s.height for s in shapes), default=0),
        )


def fringe_counts(
    seed: int,
    stream_base: int,
    n: int,
    cdf: Sequence[float],
    table: MotifTable,
    max_depth: int = DEFAULT_MAX_DEPTH,
    backend: Optional[str] = None,
) -> list[int]:
    """Count each motif of *table* in the trie on streams
    ``(seed, stream_base + j)`` for ``j < n``."""
    name = backend or BACKEND
    if name not in _IMPLS:
        raise ConfigError(f"backend {name!r} is not available; have {sorted(_IMPLS)}")
    impl = _IMPLS[name]
    return impl(
        seed,
        stream_base,
        n,
        list(cdf),
        table.m,
        table.child,
        table.node_size,
        table.roots,
        table.sizes,
        table.max_height,
        max_depth,
    )
