import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triefringe import SymbolStream, classify_periodicity, new_source, uniform_source
from triefringe.errors import AlphabetTooSmall, NonPositiveProbability, ProbabilitiesDoNotSumToOne
from triefringe.source import Aperiodic, Periodic, standard_normals


def test_binary_entropy():
    assert new_source([0.5, 0.5]).entropy == pytest.approx(math.log(2), abs=1e-15)


def test_dna_entropy(dna):
    assert dna.entropy == pytest.approx(1.304011483, abs=1e-9)


@pytest.mark.parametrize(
    "probs, exc",
    [
        ([0.5, 0.6], ProbabilitiesDoNotSumToOne),
        ([1.0], AlphabetTooSmall),
        ([0.0, 1.0], NonPositiveProbability),
        ([-0.5, 1.5], NonPositiveProbability),
        ([float("nan"), 0.5], NonPositiveProbability),
        ([1.0, 1e-13], NonPositiveProbability),
    ],
)
def test_invalid_sources(probs, exc):
    with pytest.raises(exc):
        new_source(probs)


def test_sum_tolerance_is_tight():
    new_source([0.5, 0.5 + 5e-13])
    with pytest.raises(ProbabilitiesDoNotSumToOne):
        new_source([0.5, 0.5 + 5e-12])


def test_periodic_unbiased():
    per = classify_periodicity([0.5, 0.5], 64, 1e-12)
    assert isinstance(per, Periodic)
    assert per.base == pytest.approx(0.5)
    assert per.exponents == (1, 1)


def test_periodic_mixed_powers():
    per = classify_periodicity([0.25, 0.25, 0.5], 64, 1e-12)
    assert isinstance(per, Periodic)
    assert per.base == pytest.approx(0.5)
    assert per.exponents == (2, 2, 1)


def test_dna_is_aperiodic(dna):
    assert isinstance(dna.periodicity, Aperiodic)


def test_golden_ratio_source_is_periodic():
    # p + p^2 = 1
    p = (math.sqrt(5) - 1) / 2
    per = new_source([p, p * p]).periodicity
    assert isinstance(per, Periodic)
    assert per.exponents == (1, 2)


@given(st.integers(2, 12))
def test_uniform_entropy_is_log_m(m):
    assert uniform_source(m).entropy == pytest.approx(math.log(m), abs=1e-12)


@settings(max_examples=60)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=5), st.randoms(use_true_random=False))
def test_periodic_reconstruction_and_permutation(exponents, rnd):
    # find r with sum r^e = 1 by bisection, then classify
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(mid**e for e in exponents) > 1.0:
            hi = mid
        else:
            lo = mid
    probs = [lo**e for e in exponents]
    probs[-1] = 1.0 - math.fsum(probs[:-1])
    per = classify_periodicity(probs, 64, 1e-10)
    assert isinstance(per, Periodic)
    for p, lam in zip(probs, per.exponents):
        assert abs(per.base**lam - p) < 1e-10
    perm = list(range(len(probs)))
    rnd.shuffle(perm)
    per2 = classify_periodicity([probs[i] for i in perm], 64, 1e-10)
    assert per2.exponents == tuple(per.exponents[i] for i in perm)


def test_stream_replay(dna):
    a = SymbolStream(dna, seed=11, stream_id=5).take(500)
    b = SymbolStream(dna, seed=11, stream_id=5).take(500)
    assert a == b
    assert a != SymbolStream(dna, seed=12, stream_id=5).take(500)


def test_stream_positions_advance(dna):
    s = SymbolStream(dna, seed=3, stream_id=0)
    first = s.take(10)
    assert s.position == 10
    assert [s.symbol_at(k) for k in range(10)] == first


def test_near_degenerate_source():
    src = new_source([1 - 1e-9, 1e-9])
    draws = SymbolStream(src, seed=1, stream_id=0).take(1000)
    assert sum(draws) <= 1


def test_symbol_frequencies(dna):
    draws = np.array(SymbolStream(dna, seed=4, stream_id=9).take(40_000))
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all(np.abs(freq - np.array(dna.probs)) < 0.01)


def test_distinct_streams_uncorrelated(binary):
    a = np.array(SymbolStream(binary, seed=0, stream_id=1).take(100_000), dtype=float)
    b = np.array(SymbolStream(binary, seed=0, stream_id=2).take(100_000), dtype=float)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_own_normal_sampler_passes_ks():
    from triefringe import ks_statistic

    draws = standard_normals(seed=5, stream_id=0, size=100_000)
    assert ks_statistic(draws) < 1.95 / math.sqrt(len(draws))
