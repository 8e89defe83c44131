"""Simulation of fringe counts, normality diagnostics and the exact small-n law."""

from __future__ import annotations

import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from . import analytics
from .errors import (
    ConfigError,
    DegenerateSample,
    MixedMotifSizes,
    PrefixBudgetExceeded,
    ShapeMismatch,
    StateSpaceExceeded,
)
from .kernels import MotifTable, fringe_counts
from .motif import MotifCollection, _compositions, shape_functional
from .shape import DEFAULT_MAX_DEPTH, decode_shape, encode_shape
from .source import MASK64, SourceModel, new_source

MIN_DIAGNOSTIC_SAMPLES = 8
DEFAULT_N_MAX = 12
DEFAULT_M_MAX = 4
_MISS_NOISE = 8 * sys.float_info.epsilon
# strings of one replicate occupy stream ids (replicate << 32) + j
_STREAM_SHIFT = 32


@dataclass(frozen=True)
class Fixed:
    n: int

    @property
    def scale(self) -> float:
        return float(self.n)

    def to_dict(self) -> dict:
        return {"mode": "fixed", "n": self.n}


@dataclass(frozen=True)
class Poisson:
    z: float

    @property
    def scale(self) -> float:
        return float(self.z)

    def to_dict(self) -> dict:
        return {"mode": "poisson", "z": self.z}


Population = Union[Fixed, Poisson]


# -- diagnostics -------------------------------------------------------------------


def ks_statistic(samples: Sequence[float]) -> float:
    """Sup distance between the empirical CDF of *samples* and the standard normal CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    r = len(x)
    if r == 0:
        raise ConfigError("no samples")
    cdf = ndtr(x)
    i = np.arange(1, r + 1)
    return float(max(np.max(i / r - cdf), np.max(cdf - (i - 1) / r)))


def sample_moments(samples: Sequence[float]) -> tuple[float, float]:
    """Skewness and excess kurtosis from central moment ratios."""
    x = np.asarray(samples, dtype=float)
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        raise DegenerateSample("sample has zero variance")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return m3 / m2**1.5, m4 / (m2 * m2) - 3.0


@dataclass(frozen=True)
class Diagnostics:
    ks_stat: float
    skewness: float
    excess_kurtosis: float

    def to_dict(self) -> dict:
        return {"ks_stat": self.ks_stat, "skewness": self.skewness, "excess_kurtosis": self.excess_kurtosis}


def normality_diagnostics(samples: Sequence[float]) -> Diagnostics:
    x = np.asarray(samples, dtype=float)
    if len(x) < MIN_DIAGNOSTIC_SAMPLES:
        raise ConfigError(f"need at least {MIN_DIAGNOSTIC_SAMPLES} samples, got {len(x)}")
    skew, kurt = sample_moments(x)
    return Diagnostics(ks_statistic(x), skew, kurt)


def _safe_diagnostics(x) -> Optional[Diagnostics]:
    try:
        return normality_diagnostics(x)
    except (DegenerateSample, ConfigError):
        return None


# -- simulation ----------------------------------------------------------------------


@dataclass
class SimulationSummary:
    population: Population
    replicates: int
    seed: int
    motifs: list[str]
    alphas: list[float]
    sizes: np.ndarray
    counts: np.ndarray
    combo: np.ndarray
    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    combo_mean: float
    combo_var: float
    standardized: Optional[np.ndarray]
    standardized_analytic: Optional[np.ndarray]
    diagnostics: Optional[Diagnostics]
    diagnostics_analytic: Optional[Diagnostics]
    probs: tuple[float, ...] = field(default=())

    @property
    def empirical_var(self) -> np.ndarray:
        return np.diag(self.empirical_cov).copy()

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {
            "population": self.population.to_dict(),
            "replicates": self.replicates,
            "seed": self.seed,
            "motifs": self.motifs,
            "alphas": self.alphas,
            "empirical_mean": [float(v) for v in self.empirical_mean],
            "empirical_var": [float(v) for v in self.empirical_var],
            "empirical_cov": [[float(v) for v in row] for row in self.empirical_cov],
            "combo_mean": self.combo_mean,
            "combo_var": self.combo_var,
            "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict(),
            "diagnostics_analytic": None
            if self.diagnostics_analytic is None
            else self.diagnostics_analytic.to_dict(),
        }
        if include_samples:
            out["sizes"] = [int(v) for v in self.sizes]
            out["counts"] = [[int(v) for v in row] for row in self.counts]
            out["combo"] = [float(v) for v in self.combo]
        return out


def _analytic_center(source, collection, population):
    # mean and standard deviation of the weighted count predicted at this scale
    scale = population.scale
    drift = analytics.mean_derivative_coefficient(source, collection)
    osc = 0.0
    try:
        for e in collection.entries:
            osc += e.alpha * analytics.oscillation_xi(source, e.shape, scale)
    except analytics.NotCommensurable:
        osc = 0.0
    var = analytics.linear_combo_variance_coefficient(source, collection)
    if isinstance(population, Poisson):
        var += drift * drift
    return scale * (drift + osc), math.sqrt(max(var, 0.0) * scale)


def poisson_sizes(z: float, replicates: int, seed: int) -> np.ndarray:
    """Population size of each replicate, one independent generator per replicate."""
    out = np.empty(replicates, dtype=np.int64)
    for i in range(replicates):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64, i])))
        out[i] = rng.poisson(z)
    return out


def simulate(
    source: SourceModel,
    collection: MotifCollection,
    population: Population,
    replicates: int,
    seed: int,
    max_depth: int = DEFAULT_MAX_DEPTH,
    backend: Optional[str] = None,
    workers: int = 1,
) -> SimulationSummary:
    """Count every motif of *collection* in *replicates* independent tries.

    Replicate ``i`` reads its strings from streams ``(seed, (i << 32) + j)``,
    so the result depends only on the arguments, not on *workers*.
    """
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    if collection.m != source.m:
        raise ConfigError(f"motifs are {collection.m}-ary but the source has {source.m} symbols")
    seed &= MASK64
    if isinstance(population, Fixed):
        if population.n < 0:
            raise ConfigError("n must be nonnegative")
        sizes = np.full(replicates, population.n, dtype=np.int64)
    else:
        if not population.z > 0:
            raise ConfigError("Poisson mean must be positive")
        sizes = poisson_sizes(population.z, replicates, seed)
    if sizes.max(initial=0) >= 1 << _STREAM_SHIFT:
        raise ConfigError("population too large for the stream layout")
    table = MotifTable.from_shapes(collection.shapes, source.m)

    def run(i: int) -> list[int]:
        try:
            return fringe_counts(seed, i << _STREAM_SHIFT, int(sizes[i]), source.cdf, table, max_depth, backend)
        except PrefixBudgetExceeded as exc:
            raise PrefixBudgetExceeded(str(exc), replicate=i) from None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(replicates)))
    else:
        rows = [run(i) for i in range(replicates)]
    counts = np.array(rows, dtype=np.int64).reshape(replicates, len(collection))
    alphas = np.array(collection.alphas)
    combo = counts @ alphas
    mean = counts.mean(axis=0)
    if replicates > 1:
        cov = np.atleast_2d(np.cov(counts, rowvar=False, ddof=1))
        combo_var = float(np.var(combo, ddof=1))
    else:
        cov = np.zeros((len(collection), len(collection)))
        combo_var = 0.0
    combo_mean = float(combo.mean())

    standardized = None
    if combo_var > 0.0:
        standardized = (combo - combo_mean) / math.sqrt(combo_var)
    center, spread = _analytic_center(source, collection, population)
    standardized_analytic = (combo - center) / spread if spread > 0 else None

    return SimulationSummary(
        population=population,
        replicates=replicates,
        seed=seed,
        motifs=[encode_shape(s) for s in collection.shapes],
        alphas=list(collection.alphas),
        sizes=sizes,
        counts=counts,
        combo=combo,
        empirical_mean=mean,
        empirical_cov=cov,
        combo_mean=combo_mean,
        combo_var=combo_var,
        standardized=standardized,
        standardized_analytic=standardized_analytic,
        diagnostics=None if standardized is None else _safe_diagnostics(standardized),
        diagnostics_analytic=None if standardized_analytic is None else _safe_diagnostics(standardized_analytic),
        probs=source.probs,
    )


# -- exact distribution ------------------------------------------------------------------


@dataclass(frozen=True)
class ExactPmf:
    support: tuple[float, ...]
    probs: tuple[float, ...]

    @property
    def mean(self) -> float:
        return math.fsum(y * p for y, p in zip(self.support, self.probs))

    @property
    def variance(self) -> float:
        mu = self.mean
        return math.fsum((y - mu) ** 2 * p for y, p in zip(self.support, self.probs))

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.support, self.probs))


def _convolve(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, pa in a.items():
        for kb, pb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0.0) + pa * pb
    return out


def exact_occurrence_law(
    source: SourceModel,
    collection: MotifCollection,
    n: int,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
) -> dict[tuple[int, ...], float]:
    """Law of the occurrence-count vector on a trie of *n* strings.

    Recurses over the multiset of symbols at the root.  The split that sends
    every string to one child reproduces the same law, so it is solved for
    directly by dividing by ``1 - sum p_j**k`` instead of being iterated.
    """
    tau = collection.common_size
    if tau is None:
        raise MixedMotifSizes("exact law needs motifs of a single size")
    if n < 0:
        raise ConfigError("n must be nonnegative")
    if n > n_max:
        raise StateSpaceExceeded(f"n = {n} exceeds the cap {n_max}")
    if source.m > m_max:
        raise StateSpaceExceeded(f"alphabet size {source.m} exceeds the cap {m_max}")
    k = len(collection)
    zero = (0,) * k
    probs = source.probs
    q = [shape_functional(source, s) for s in collection.shapes]
    memo: dict[int, dict] = {}

    def law(size: int) -> dict:
        if size in memo:
            return memo[size]
        if size < tau:
            memo[size] = {zero: 1.0}
            return memo[size]
        stay = source.power_sum(size)
        if size == tau:
            # the root subtree itself matches motif v with probability v's
            # shape functional, summed over every chain depth
            out = {}
            hit = 0.0
            for v in range(k):
                e = tuple(1 if i == v else 0 for i in range(k))
                out[e] = q[v] / (1.0 - stay)
                hit += q[v]
            miss = 1.0 - stay - hit
            # a few ulps is rounding in the subtraction, not mass
            if miss > _MISS_NOISE:
                out[zero] = miss / (1.0 - stay)
            memo[size] = out
            return out
        acc: dict = {}
        log_nf = math.lgamma(size + 1)
        for comp in _compositions(size, source.m):
            if max(comp) == size:
                continue
            logw = log_nf
            for j, c in enumerate(comp):
                if c:
                    logw += c * math.log(probs[j]) - math.lgamma(c + 1)
            w = math.exp(logw)
            dist = {zero: 1.0}
            for c in comp:
                if c >= tau:
                    dist = _convolve(dist, law(c))
            for key, p in dist.items():
                acc[key] = acc.get(key, 0.0) + w * p
        out = {key: p / (1.0 - stay) for key, p in acc.items()}
        memo[size] = out
        return out

    return dict(sorted(law(n).items()))


def exact_distribution(
    source: SourceModel,
    collection: MotifCollection,
    n: int,
    n_max: int = DEFAULT_N_MAX,
    m_max: int = DEFAULT_M_MAX,
) -> ExactPmf:
    """Exact law of ``sum alpha_k X_k`` for a trie on *n* strings."""
    vec = exact_occurrence_law(source, collection, n, n_max, m_max)
    alphas = collection.alphas
    merged: dict[float, list[float]] = {}
    for key, p in vec.items():
        y = math.fsum(a * c for a, c in zip(alphas, key))
        merged.setdefault(y, []).append(p)
    support = sorted(merged)
    return ExactPmf(tuple(support), tuple(math.fsum(merged[y]) for y in support))


# -- comparison ------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    empirical: float
    analytic: float
    std_error: float
    z: float
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "empirical": self.empirical,
            "analytic": self.analytic,
            "std_error": self.std_error,
            "z": self.z,
            "flagged": self.flagged,
        }


Z_FLAG = 4.0


def _mean_se(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _var_se(x: np.ndarray) -> float:
    # standard error of the unbiased sample variance from the fourth moment
    r = len(x)
    d = x - x.mean()
    s2 = float(np.var(x, ddof=1))
    m4 = float(np.mean(d**4))
    return math.sqrt(max(m4 - s2 * s2 * (r - 3) / (r - 1), 0.0) / r)


def _cov_se(x: np.ndarray, y: np.ndarray) -> float:
    prod = (x - x.mean()) * (y - y.mean())
    return float(np.std(prod, ddof=1) / math.sqrt(len(x)))


def _row(name, emp, target, se) -> ComparisonRow:
    if se > 0:
        z = (emp - target) / se
    else:
        z = 0.0 if emp == target else math.copysign(math.inf, emp - target)
    return ComparisonRow(name, float(emp), float(target), float(se), float(z), bool(abs(z) > Z_FLAG))


def _oscillations(source: SourceModel, texts: Sequence[str], scale: float) -> list[float]:
    out = []
    for text in texts:
        try:
            out.append(analytics.oscillation_xi(source, decode_shape(text, source.m), scale))
        except analytics.NotCommensurable:
            out.append(0.0)
    return out


def compare(report: analytics.MomentReport, summary: SimulationSummary) -> list[ComparisonRow]:
    """z-scores of simulated means, variances and covariances against *report*.

    Targets are the report's per-string coefficients times ``n`` (or ``z``);
    for periodic sources the mean target includes the oscillating term.
    """
    texts = [m["motif"] for m in report.motifs]
    alphas = [m["alpha"] for m in report.motifs]
    if texts != summary.motifs or alphas != summary.alphas:
        raise ShapeMismatch("report and simulation use different motif collections")
    if summary.probs and tuple(report.probs) != tuple(summary.probs):
        raise ShapeMismatch("report and simulation use different sources")
    if summary.replicates < 2:
        raise ConfigError("comparison needs at least 2 replicates")
    source = new_source(report.probs)
    scale = summary.population.scale
    poisson = isinstance(summary.population, Poisson)
    osc = _oscillations(source, texts, scale)
    rows = []
    counts = summary.counts.astype(float)
    for v, text in enumerate(texts):
        col = counts[:, v]
        mu = report.mean_coeff[v]
        rows.append(_row(f"mean[{text}]", col.mean(), scale * (mu + osc[v]), _mean_se(col)))
        var = report.var_coeff[v] + (mu * mu if poisson else 0.0)
        rows.append(_row(f"var[{text}]", np.var(col, ddof=1), scale * var, _var_se(col)))
    for entry in report.cov_coeff:
        i, j = entry["i"], entry["j"]
        cov = entry["value"]
        if poisson:
            cov += report.mean_coeff[i] * report.mean_coeff[j]
        emp = float(np.cov(counts[:, i], counts[:, j], ddof=1)[0, 1])
        rows.append(_row(f"cov[{texts[i]},{texts[j]}]", emp, scale * cov, _cov_se(counts[:, i], counts[:, j])))
    drift = report.mean_derivative_coeff
    combo_osc = sum(a * o for a, o in zip(alphas, osc))
    rows.append(_row("mean[combo]", summary.combo.mean(), scale * (drift + combo_osc), _mean_se(summary.combo)))
    cvar = report.combo_var_coeff + (drift * drift if poisson else 0.0)
    rows.append(_row("var[combo]", np.var(summary.combo, ddof=1), scale * cvar, _var_se(summary.combo)))
    return rows


def parametric_bootstrap(
    report: analytics.MomentReport, population: Population, replicates: int, seed: int
) -> SimulationSummary:
    """Gaussian stand-in for a simulation, drawn from the report's own moments."""
    k = len(report.motifs)
    scale = population.scale
    texts = [m["motif"] for m in report.motifs]
    osc = _oscillations(new_source(report.probs), texts, scale)
    mean = scale * (np.array(report.mean_coeff) + np.array(osc))
    cov = np.diag(report.var_coeff).astype(float)
    for entry in report.cov_coeff:
        cov[entry["i"], entry["j"]] = cov[entry["j"], entry["i"]] = entry["value"]
    if isinstance(population, Poisson):
        cov = cov + np.outer(report.mean_coeff, report.mean_coeff)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64])))
    draws = rng.multivariate_normal(mean, scale * cov, size=replicates, method="cholesky")
    alphas = [m["alpha"] for m in report.motifs]
    combo = draws @ np.array(alphas)
    return SimulationSummary(
        population=population,
        replicates=replicates,
        seed=seed,
        motifs=[m["motif"] for m in report.motifs],
        alphas=alphas,
        sizes=np.full(replicates, int(scale)),
        counts=draws,
        combo=combo,
        empirical_mean=draws.mean(axis=0),
        empirical_cov=np.atleast_2d(np.cov(draws, rowvar=False, ddof=1)).reshape(k, k),
        combo_mean=float(combo.mean()),
        combo_var=float(np.var(combo, ddof=1)),
        standardized=None,
        standardized_analytic=None,
        diagnostics=None,
        diagnostics_analytic=None,
        probs=tuple(report.probs),
    )
