import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triefringe import SymbolStream, build_trie, count_fringe_occurrences, decode_shape, enumerate_cousins, new_source
from triefringe.errors import PrefixBudgetExceeded
from triefringe.kernels import BACKEND, MotifTable, available_backends, fringe_counts

BACKENDS = available_backends()


def reference_counts(source, seed, base, n, shapes):
    if n == 0:
        return [0] * len(shapes)
    trie = build_trie([SymbolStream(source, seed, base + j) for j in range(n)])
    return [count_fringe_occurrences(trie, s) if trie.size >= s.size else 0 for s in shapes]


def test_compiled_backend_present():
    # the build ships the extension; the fallback is for environments without a compiler
    assert "python" in BACKENDS
    assert BACKEND in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
def test_matches_tree_path(dna, dna_left, dna_right, backend):
    shapes = [dna_left, dna_right]
    table = MotifTable.from_shapes(shapes, 4)
    for seed in range(5):
        for n in (1, 2, 5, 60, 400):
            got = fringe_counts(seed, 1000 * seed, n, dna.cdf, table, backend=backend)
            assert got == reference_counts(dna, seed, 1000 * seed, n, shapes)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**40), st.integers(0, 300), st.sampled_from([2, 3]))
def test_backends_agree(seed, n, m):
    src = new_source([1.0 / m] * m) if m == 2 else new_source([0.2, 0.3, 0.5])
    shapes = list(enumerate_cousins(3, m, max_height=2))[:4]
    table = MotifTable.from_shapes(shapes, m)
    results = {b: fringe_counts(seed, 7, n, src.cdf, table, backend=b) for b in BACKENDS}
    ref = reference_counts(src, seed, 7, n, shapes)
    assert all(r == ref for r in results.values())


@pytest.mark.parametrize("backend", BACKENDS)
def test_chain_motifs(binary, backend):
    shapes = [decode_shape("(((LL)E)L)", 2), decode_shape("((E(LL))L)", 2)]
    table = MotifTable.from_shapes(shapes, 2)
    for seed in range(20):
        assert fringe_counts(seed, 0, 50, binary.cdf, table, backend=backend) == reference_counts(
            binary, seed, 0, 50, shapes
        )


@pytest.mark.parametrize("backend", BACKENDS)
def test_depth_budget(backend):
    # a near-degenerate source makes long shared prefixes; a tiny budget must trip
    src = new_source([1 - 1e-6, 1e-6])
    table = MotifTable.from_shapes([decode_shape("(LL)", 2)], 2)
    with pytest.raises(PrefixBudgetExceeded):
        fringe_counts(0, 0, 10, src.cdf, table, max_depth=5, backend=backend)


def test_deterministic(dna, dna_left):
    table = MotifTable.from_shapes([dna_left], 4)
    runs = {tuple(fringe_counts(42, 0, 2000, dna.cdf, table, backend=b)) for b in BACKENDS for _ in range(2)}
    assert len(runs) == 1


def test_table_rejects_wrong_arity(cherry):
    with pytest.raises(ValueError):
        MotifTable.from_shapes([cherry], 3)


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, TRIEFRINGE_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from triefringe import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.strip()
    assert out == "python"
