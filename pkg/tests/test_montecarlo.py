import math
import random

import numpy as np
import pytest

from triefringe import (
    Fixed,
    MotifCollection,
    Poisson,
    analyze,
    compare,
    decode_shape,
    enumerate_cousins,
    exact_distribution,
    exact_mean,
    ks_statistic,
    new_source,
    normality_diagnostics,
    simulate,
)
from triefringe.errors import (
    ConfigError,
    DegenerateSample,
    MixedMotifSizes,
    PrefixBudgetExceeded,
    ShapeMismatch,
    StateSpaceExceeded,
)
from triefringe.montecarlo import exact_occurrence_law, parametric_bootstrap, sample_moments


@pytest.fixture(scope="module")
def cherry_set(cherry):
    return MotifCollection.of([cherry])


def test_forced_cherry(binary, cherry_set):
    s = simulate(binary, cherry_set, Fixed(2), 50, seed=7)
    assert np.all(s.counts == 1)


def test_fixed_four_mean(binary, cherry_set):
    s = simulate(binary, cherry_set, Fixed(4), 10_000, seed=3)
    se = math.sqrt(s.combo_var / s.replicates)
    assert abs(s.combo_mean - 10 / 7) < 4 * se


def test_deterministic_summary(dna, dna_pair):
    a = simulate(dna, dna_pair, Fixed(500), 30, seed=123)
    b = simulate(dna, dna_pair, Fixed(500), 30, seed=123)
    assert np.array_equal(a.counts, b.counts)
    assert a.to_dict(include_samples=True) == b.to_dict(include_samples=True)
    c = simulate(dna, dna_pair, Fixed(500), 30, seed=123, workers=4)
    assert np.array_equal(a.counts, c.counts)


def test_seed_changes_output(dna, dna_pair):
    a = simulate(dna, dna_pair, Fixed(500), 30, seed=1)
    b = simulate(dna, dna_pair, Fixed(500), 30, seed=2)
    assert not np.array_equal(a.counts, b.counts)


def test_equal_size_counts_are_disjoint(binary):
    shapes = list(enumerate_cousins(3, 2, max_height=3))
    s = simulate(binary, MotifCollection.of(shapes), Fixed(300), 40, seed=0)
    assert np.all(s.counts.sum(axis=1) * 3 <= 300)


def test_poisson_sizes(binary, cherry_set):
    z, reps = 200.0, 400
    s = simulate(binary, cherry_set, Poisson(z), reps, seed=9)
    assert s.population.to_dict() == {"mode": "poisson", "z": z}
    assert abs(s.sizes.mean() - z) < 4 * math.sqrt(z / reps)


def test_bilinearity(dna):
    shapes = [decode_shape(t, 4) for t in ("((LELL)EEL)", "(LE(ELLE)L)")]
    col = MotifCollection.of(shapes, [0.7, -1.3])
    s = simulate(dna, col, Fixed(2000), 60, seed=4)
    a = np.array(col.alphas)
    assert s.combo_var == pytest.approx(float(a @ s.empirical_cov @ a), rel=1e-10)


def test_prefix_budget_carries_replicate(cherry_set):
    src = new_source([1 - 1e-6, 1e-6])
    with pytest.raises(PrefixBudgetExceeded) as err:
        simulate(src, cherry_set, Fixed(8), 3, seed=0, max_depth=4)
    assert err.value.replicate == 0


def test_simulate_argument_checks(binary, cherry_set, dna_pair):
    with pytest.raises(ConfigError):
        simulate(binary, cherry_set, Fixed(10), 0, seed=0)
    with pytest.raises(ConfigError):
        simulate(binary, dna_pair, Fixed(10), 5, seed=0)
    with pytest.raises(ConfigError):
        simulate(binary, cherry_set, Poisson(0.0), 5, seed=0)


# -- diagnostics ----------------------------------------------------------------------


def test_symmetric_sample_skewness():
    skew, _ = sample_moments([-1.0, 0.0, 1.0])
    assert skew == 0.0


def test_ks_single_point():
    assert ks_statistic([0.0]) == pytest.approx(0.5)


def test_diagnostics_guards():
    with pytest.raises(DegenerateSample):
        normality_diagnostics([2.0] * 10)
    with pytest.raises(ConfigError):
        normality_diagnostics([0.1, 0.2])


def test_ks_against_numpy_normals():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(100_000)
    d = normality_diagnostics(x)
    assert d.ks_stat < 1.95 / math.sqrt(len(x))
    assert abs(d.skewness) < 0.05 and abs(d.excess_kurtosis) < 0.1


def test_ks_matches_scipy():
    from scipy import stats

    x = np.random.default_rng(1).normal(0.1, 1.2, 500)
    assert ks_statistic(x) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-14)


# -- exact law ---------------------------------------------------------------------------


def test_exact_law_cherry(binary, cherry_set):
    assert exact_distribution(binary, cherry_set, 2).as_dict() == {1.0: 1.0}
    pmf = exact_distribution(binary, cherry_set, 4).as_dict()
    assert pmf[1.0] == pytest.approx(4 / 7, abs=1e-14)
    assert pmf[2.0] == pytest.approx(3 / 7, abs=1e-14)
    assert exact_distribution(binary, cherry_set, 1).as_dict() == {0.0: 1.0}


def test_exact_law_guards(binary, cherry_set):
    with pytest.raises(StateSpaceExceeded):
        exact_distribution(binary, cherry_set, 13)
    with pytest.raises(StateSpaceExceeded):
        exact_distribution(new_source([0.2] * 5), MotifCollection.of([decode_shape("(LLEEE)", 5)]), 3)
    col = MotifCollection.of([decode_shape("(LLE)", 3), decode_shape("(L(LEL)L)", 3)])
    assert col.common_size is None
    with pytest.raises(MixedMotifSizes):
        exact_distribution(new_source([0.2, 0.3, 0.5]), col, 4)


def test_exact_law_against_means():
    rnd = random.Random(11)
    for _ in range(10):
        m = rnd.choice([2, 3])
        raw = [rnd.uniform(0.2, 1) for _ in range(m)]
        probs = [x / sum(raw) for x in raw]
        probs[-1] = 1 - sum(probs[:-1])
        src = new_source(probs)
        tau = rnd.choice([2, 3])
        shapes = rnd.sample(list(enumerate_cousins(tau, m, max_height=2)), 1 if tau == 2 else 2)
        col = MotifCollection.of(shapes)
        for n in range(tau, 9):
            law = exact_occurrence_law(src, col, n)
            assert math.fsum(law.values()) == pytest.approx(1.0, abs=1e-12)
            for v, s in enumerate(shapes):
                mean_v = math.fsum(key[v] * p for key, p in law.items())
                assert mean_v == pytest.approx(exact_mean(src, s, n).value, abs=1e-10)
            assert exact_distribution(src, col, n).variance >= 0.0


def test_exact_law_matches_simulation(dna, dna_pair):
    pmf = exact_distribution(dna, dna_pair, 8)
    s = simulate(dna, dna_pair, Fixed(8), 20_000, seed=5)
    emp = {y: float(np.mean(s.combo == y)) for y in pmf.support}
    for y, p in zip(pmf.support, pmf.probs):
        se = math.sqrt(p * (1 - p) / 20_000) + 1e-4
        assert abs(emp[y] - p) < 5 * se


# -- comparison ----------------------------------------------------------------------------


def test_bootstrap_self_consistency(dna, dna_pair):
    rep = analyze(dna, dna_pair)
    worst = 0.0
    for seed in range(5):
        s = parametric_bootstrap(rep, Fixed(10**5), 2000, seed)
        worst = max(worst, max(abs(r.z) for r in compare(rep, s)))
    assert worst < 4


def test_bootstrap_periodic(binary, cherry_set):
    rep = analyze(binary, cherry_set)
    s = parametric_bootstrap(rep, Poisson(1000.0), 2000, 0)
    assert all(abs(r.z) < 4 for r in compare(rep, s))


def test_compare_mismatch(dna, dna_pair, dna_left):
    rep = analyze(dna, dna_pair)
    s = simulate(dna, MotifCollection.of([dna_left]), Fixed(100), 5, seed=0)
    with pytest.raises(ShapeMismatch):
        compare(rep, s)


def test_compare_against_simulation(binary, cherry_set):
    rep = analyze(binary, cherry_set)
    s = simulate(binary, cherry_set, Fixed(2000), 400, seed=21)
    rows = compare(rep, s)
    names = [r.quantity for r in rows]
    assert names == ["mean[(LL)]", "var[(LL)]", "mean[combo]", "var[combo]"]
    assert all(abs(r.z) < 4 for r in rows)
