"""Exact and asymptotic moments of fringe motif counts.

Word sums run level by level over word length.  Words of one level are grouped
by how many symbols they draw from each class of equal probabilities, so a
level costs one array operation per composition rather than per word.  After
level ``L`` the remaining mass of ``P(w)**x`` is at most
``S(x)**(L+1) / (1 - S(x))`` with ``S(x) = sum_k p_k**x``, which certifies
every truncation below.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (
    NotCommensurable,
    OverlappingMotifs,
    SeriesDivergenceGuard,
    ToleranceUnreachable,
    TooFewStrings,
)
from .motif import MotifCollection, check_nonoverlapping, shape_functional
from .shape import Shape, encode_shape
from .source import SourceModel
from .special import complex_log_gamma

DEFAULT_WORD_TOL = 1e-12
DEFAULT_SERIES_TOL = 1e-14
DEFAULT_MAX_LEVELS = 100_000
DEFAULT_KMAX = 50

_LN2 = math.log(2.0)


# -- word levels -------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _compositions_array(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions_array(total - first, parts - 1)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


class WordLevels:
    """Words of each length, grouped into (log probability, log multiplicity)."""

    def __init__(self, source: SourceModel):
        classes: dict[float, int] = {}
        for p in source.probs:
            classes[p] = classes.get(p, 0) + 1
        self.source = source
        self.log_q = np.log(np.array(list(classes.keys())))
        self.log_mult = np.log(np.array(list(classes.values()), dtype=float))
        self._levels: list[tuple[np.ndarray, np.ndarray]] = []

    def level(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        while len(self._levels) <= length:
            ell = len(self._levels)
            comp = _compositions_array(ell, len(self.log_q))
            log_p = comp @ self.log_q
            log_count = gammaln(ell + 1) - gammaln(comp + 1).sum(axis=1) + comp @ self.log_mult
            self._levels.append((log_p, log_count))
        return self._levels[length]

    def flat(self, first: int, last: int) -> tuple[np.ndarray, np.ndarray]:
        """All groups with length in ``first..last`` concatenated."""
        parts = [self.level(ell) for ell in range(first, last + 1)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _geometric_tail(s: float, after: int) -> float:
    """Bound on the sum over levels ``> after`` of a level mass ``s**level``."""
    return s ** (after + 1) / (1.0 - s)


@dataclass(frozen=True)
class Estimate:
    value: float
    error_bound: float
    levels: int


def _word_sum(levels: WordLevels, term, tail, tol: float, max_levels: int) -> Estimate:
    parts = []
    for ell in range(max_levels + 1):
        log_p, log_count = levels.level(ell)
        parts.append(math.fsum(term(log_p, log_count)))
        bound = tail(ell)
        if bound < tol:
            return Estimate(math.fsum(parts), bound, ell + 1)
    raise ToleranceUnreachable(f"word tail still {bound:.3g} after {max_levels} levels")


# -- means --------------------------------------------------------------------------


def exact_mean(
    source: SourceModel,
    motif: Shape,
    n: int,
    tol: float = DEFAULT_WORD_TOL,
    max_levels: int = DEFAULT_MAX_LEVELS,
    levels: Optional[WordLevels] = None,
) -> Estimate:
    """Expected fringe count of *motif* in a trie on *n* strings."""
    tau = motif.size
    if n < tau:
        raise TooFewStrings(f"n = {n} is below the motif size {tau}")
    levels = levels or WordLevels(source)
    q = shape_functional(source, motif)
    log_binom = math.lgamma(n + 1) - math.lgamma(tau + 1) - math.lgamma(n - tau + 1)
    rest = n - tau
    s_tau = source.power_sum(tau)

    def term(log_p, log_count):
        val = log_count + log_binom + tau * log_p
        if rest:
            p = np.exp(log_p)
            with np.errstate(divide="ignore"):
                val = val + rest * np.log1p(-p)
        return q * np.exp(val)

    scale = q * math.exp(log_binom)
    return _word_sum(levels, term, lambda ell: scale * _geometric_tail(s_tau, ell), tol, max_levels)


def poissonized_mean_B1(
    source: SourceModel,
    motif: Shape,
    z: float,
    tol: float = DEFAULT_WORD_TOL,
    max_levels: int = DEFAULT_MAX_LEVELS,
    levels: Optional[WordLevels] = None,
) -> Estimate:
    """Expected fringe count when the number of strings is Poisson(z)."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    if z == 0:
        return Estimate(0.0, 0.0, 0)
    tau = motif.size
    levels = levels or WordLevels(source)
    weight = shape_functional(source, motif) / math.factorial(tau)
    log_z = math.log(z)
    s_tau = source.power_sum(tau)

    def term(log_p, log_count):
        return weight * np.exp(log_count + tau * (log_p + log_z) - z * np.exp(log_p))

    scale = weight * z**tau
    return _word_sum(levels, term, lambda ell: scale * _geometric_tail(s_tau, ell), tol, max_levels)


def mean_coefficient(source: SourceModel, motif: Shape) -> float:
    tau = motif.size
    return shape_functional(source, motif) / (tau * (tau - 1) * source.entropy)


def mean_derivative_coefficient(source: SourceModel, collection: MotifCollection) -> float:
    return math.fsum(e.alpha * mean_coefficient(source, e.shape) for e in collection.entries)


# -- alternating j-series ---------------------------------------------------------------


def _ctail(source: SourceModel, x: float) -> float:
    """``sum over nonempty words of P(u)**x``."""
    s = source.power_sum(x)
    if 1.0 - s < 1e-12:
        raise SeriesDivergenceGuard(f"1 - S({x}) = {1.0 - s:.3g} is too small")
    return s / (1.0 - s)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    terms: int
    tail_bound: float
    method: str


# cancellation factor past which the word form replaces the alternating series
_CANCELLATION_LIMIT = 1e4


def prefix_series(
    source: SourceModel,
    top: int,
    lows: Sequence[tuple[int, float]],
    series_tol: float = DEFAULT_SERIES_TOL,
    max_terms: int = 100_000,
) -> SeriesValue:
    """``sum_j (-1)**j (top+j-2)!/j! * sum_b w_b S(b+j)/(1-S(b+j))``.

    *lows* lists ``(b, w_b)`` pairs.  Summation stops once terms are below
    *series_tol* and shrinking, which makes the next term a valid tail bound.
    Heavy cancellation switches to the equivalent positive word sum
    :func:`prefix_series_by_words`.
    """
    terms = []
    peak = 0.0
    prev = math.inf
    mag = math.inf
    for j in range(max_terms):
        mag = math.exp(math.lgamma(top - 1 + j) - math.lgamma(j + 1)) * math.fsum(
            w * _ctail(source, b + j) for b, w in lows
        )
        terms.append(-mag if j & 1 else mag)
        peak = max(peak, mag)
        if mag < series_tol and mag <= prev:
            break
        prev = mag
    else:
        raise ToleranceUnreachable(f"alternating series needs more than {max_terms} terms")
    value = math.fsum(terms)
    j = len(terms)
    nxt = math.exp(math.lgamma(top - 1 + j) - math.lgamma(j + 1)) * math.fsum(
        w * _ctail(source, b + j) for b, w in lows
    )
    if peak > _CANCELLATION_LIMIT * max(abs(value), 1e-300):
        words = prefix_series_by_words(source, top, lows, tol=series_tol)
        return SeriesValue(words.value, len(terms), words.error_bound, "words")
    return SeriesValue(value, len(terms), nxt, "alternating")


def prefix_series_by_words(
    source: SourceModel,
    top: int,
    lows: Sequence[tuple[int, float]],
    tol: float = DEFAULT_SERIES_TOL,
    max_levels: int = DEFAULT_MAX_LEVELS,
    levels: Optional[WordLevels] = None,
) -> Estimate:
    """Same quantity as :func:`prefix_series`, resummed over nonempty words as
    ``(top-2)! * sum_u sum_b w_b P(u)**b (1+P(u))**(1-top)``."""
    levels = levels or WordLevels(source)
    lead = math.lgamma(top - 1)

    def term(log_p, log_count):
        p = np.exp(log_p)
        base = log_count + lead + (1 - top) * np.log1p(p)
        return sum(w * np.exp(base + b * log_p) for b, w in lows)

    s = {b: source.power_sum(b) for b, _ in lows}

    def tail(ell):
        return math.exp(lead) * sum(abs(w) * _geometric_tail(s[b], ell) for b, w in lows)

    parts = []
    for ell in range(1, max_levels + 1):
        log_p, log_count = levels.level(ell)
        parts.append(math.fsum(term(log_p, log_count)))
        bound = tail(ell)
        if bound < tol:
            return Estimate(math.fsum(parts), bound, ell)
    raise ToleranceUnreachable(f"word tail still {bound:.3g} after {max_levels} levels")


def _split_term(a: int) -> float:
    # 2**(-a) (a-2)!
    return math.exp(-a * _LN2 + math.lgamma(a - 1))


# -- linear coefficients ------------------------------------------------------------------


def variance_coefficient(source: SourceModel, motif: Shape, series_tol: float = DEFAULT_SERIES_TOL) -> float:
    """Coefficient of n in the variance of the fringe count."""
    return _variance_detail(source, motif, series_tol)[0]


def _variance_detail(source, motif, series_tol):
    tau = motif.size
    q = shape_functional(source, motif)
    h = source.entropy
    mu = q / (tau * (tau - 1) * h)
    js = prefix_series(source, 2 * tau, [(tau, 1.0)], series_tol)
    inv_fact2 = math.exp(-2.0 * math.lgamma(tau + 1))
    bracket = _split_term(2 * tau) * inv_fact2 + js.value * inv_fact2
    return mu - (2.0 * q * q / h) * bracket - mu * mu, js


def covariance_coefficient(
    source: SourceModel, motif: Shape, other: Shape, series_tol: float = DEFAULT_SERIES_TOL
) -> float:
    """Coefficient of n in the covariance of two nonoverlapping motif counts."""
    return _covariance_detail(source, motif, other, series_tol)[0]


def _covariance_detail(source, motif, other, series_tol):
    if check_nonoverlapping([motif, other]):
        raise OverlappingMotifs(f"{encode_shape(motif)} and {encode_shape(other)} overlap", [(0, 1)])
    t1, t2 = motif.size, other.size
    q1, q2 = shape_functional(source, motif), shape_functional(source, other)
    h = source.entropy
    a = t1 + t2
    js = prefix_series(source, a, [(t1, 0.5), (t2, 0.5)], series_tol)
    lead = 2.0 * q1 * q2 / (math.factorial(t1) * math.factorial(t2) * h)
    mixed = q1 * q2 / (t1 * (t1 - 1) * t2 * (t2 - 1) * h * h)
    return -lead * (_split_term(a) + js.value) - mixed, js


def linear_combo_variance_coefficient(
    source: SourceModel, collection: MotifCollection, series_tol: float = DEFAULT_SERIES_TOL
) -> float:
    """Coefficient of n in the variance of ``sum alpha_k X_k``, from the
    double sum over ordered motif pairs (independent of the pairwise helpers)."""
    return _combo_detail(source, collection, series_tol)[0]


def _combo_detail(source, collection, series_tol):
    h = source.entropy
    taus = [e.shape.size for e in collection.entries]
    alphas = collection.alphas
    qs = [shape_functional(source, e.shape) for e in collection.entries]
    mus = [q / (t * (t - 1) * h) for q, t in zip(qs, taus)]
    series = []
    diag = math.fsum(a * a * mu for a, mu in zip(alphas, mus))
    pairs = []
    for k in range(len(taus)):
        for v in range(len(taus)):
            if alphas[k] == 0.0 or alphas[v] == 0.0:
                continue
            top = taus[k] + taus[v]
            js = prefix_series(source, top, [(taus[v], 1.0)], series_tol)
            series.append(js)
            weight = alphas[k] * alphas[v] * qs[k] * qs[v]
            weight /= math.factorial(taus[k]) * math.factorial(taus[v]) * h
            pairs.append(weight * (2.0 * _split_term(top) + 2.0 * js.value))
    drift = math.fsum(a * mu for a, mu in zip(alphas, mus))
    return diag - math.fsum(pairs) - drift * drift, series


# -- oscillations ------------------------------------------------------------------------


def _period_base(source: SourceModel) -> Optional[float]:
    per = source.periodicity
    if per.is_periodic:
        if not 0.0 < per.base < 1.0:
            raise NotCommensurable(f"invalid common base {per.base!r}")
        return per.base
    if per.near_commensurable:
        raise NotCommensurable("log-probability ratios are close to, but not within tolerance of, rationals")
    return None


def _pole(base: float, k: int) -> complex:
    return complex(0.0, 2.0 * math.pi * k / math.log(1.0 / base))


@dataclass(frozen=True)
class OscillationSeries:
    """Real series ``2 * scale * Re sum_k coefficients[k-1] * z**(-chi_k)``,
    ``chi_k = 2 pi i k / ln(1/base)``; the ``-k`` terms are the conjugates."""

    base: float
    scale: float
    coefficients: tuple[complex, ...]
    tail_bound: float

    @property
    def pole_spacing(self) -> float:
        return 2.0 * math.pi / math.log(1.0 / self.base)

    @property
    def amplitude_bound(self) -> float:
        return 2.0 * self.scale * math.fsum(abs(c) for c in self.coefficients) + self.tail_bound

    def __call__(self, z: float) -> float:
        log_z = math.log(z)
        acc = []
        for k, c in enumerate(self.coefficients, start=1):
            acc.append((c * cmath.exp(-_pole(self.base, k) * log_z)).real)
        return 2.0 * self.scale * math.fsum(acc)


def _gamma_terms(base, offset, kmax, tol, scale):
    coefs = []
    for k in range(1, kmax + 1):
        c = cmath.exp(complex_log_gamma(offset + _pole(base, k)))
        coefs.append(c)
        if 2.0 * scale * abs(c) < tol:
            break
    # |Gamma| decays faster than geometrically along vertical lines
    tail = 0.0
    if len(coefs) >= 2 and abs(coefs[-2]) > 0:
        ratio = abs(coefs[-1]) / abs(coefs[-2])
        if ratio < 1.0:
            tail = 2.0 * scale * abs(coefs[-1]) * ratio / (1.0 - ratio)
        else:
            tail = math.inf
    return coefs, tail


def mean_oscillation(
    source: SourceModel, motif: Shape, kmax: int = DEFAULT_KMAX, tol: float = DEFAULT_SERIES_TOL
) -> Optional[OscillationSeries]:
    """Fluctuating part of the mean per string; ``None`` for aperiodic sources."""
    base = _period_base(source)
    if base is None:
        return None
    tau = motif.size
    scale = shape_functional(source, motif) / (math.factorial(tau) * source.entropy)
    coefs, tail = _gamma_terms(base, tau - 1, kmax, tol, scale)
    return OscillationSeries(base, scale, tuple(coefs), tail)


def oscillation_xi(
    source: SourceModel, motif: Shape, z: float, kmax: int = DEFAULT_KMAX, tol: float = DEFAULT_SERIES_TOL
) -> float:
    series = mean_oscillation(source, motif, kmax, tol)
    return 0.0 if series is None else series(z)


@dataclass(frozen=True)
class VarianceOscillation:
    """Residue coefficients of the depoissonized variance per string.

    ``variance[k]`` and ``drift[k]`` are indexed by ``k = 0..K``; ``k = 0``
    holds the constant parts.  The estimate at ``z`` is
    ``sum_k V_k z**(-chi_k) - (sum_k D_k z**(-chi_k))**2`` over all integer k.
    """

    base: float
    variance: tuple[complex, ...]
    drift: tuple[complex, ...]
    word_tail_bound: float

    @property
    def pole_spacing(self) -> float:
        return 2.0 * math.pi / math.log(1.0 / self.base)

    @property
    def constant(self) -> float:
        return self.variance[0].real - self.drift[0].real ** 2

    @property
    def band(self) -> float:
        v = 2.0 * math.fsum(abs(c) for c in self.variance[1:])
        d = 2.0 * math.fsum(abs(c) for c in self.drift[1:])
        return v + 2.0 * abs(self.drift[0]) * d + d * d

    def fluctuation(self, z: float) -> float:
        log_z = math.log(z)
        v = complex(0.0)
        d = complex(0.0)
        for k in range(1, len(self.variance)):
            rot = cmath.exp(-_pole(self.base, k) * log_z)
            v += 2.0 * (self.variance[k] * rot).real
            d += 2.0 * (self.drift[k] * rot).real
        d0 = self.drift[0].real
        return v.real - (2.0 * d0 * d.real + d.real * d.real)


def _shifted_word_sum(source, levels, low, top, chi, tol, max_levels):
    # sum over nonempty u of P(u)**low (1+P(u))**(1-top-chi)
    s_low = source.power_sum(low)
    parts = []
    for ell in range(1, max_levels + 1):
        log_p, log_count = levels.level(ell)
        log1p = np.log1p(np.exp(log_p))
        vals = np.exp(log_count + low * log_p + (1 - top) * log1p) * np.exp(-chi * log1p)
        parts.append(complex(vals.sum()))
        bound = _geometric_tail(s_low, ell)
        if bound < tol:
            return sum(parts, complex(0.0)), bound
    raise ToleranceUnreachable(f"word tail still {bound:.3g} after {max_levels} levels")


def variance_oscillation(
    source: SourceModel,
    collection: MotifCollection,
    kmax: int = DEFAULT_KMAX,
    tol: float = DEFAULT_SERIES_TOL,
    word_tol: float = DEFAULT_WORD_TOL,
    constant_only: bool = False,
) -> Optional[VarianceOscillation]:
    """Residues behind the oscillating band of the variance coefficient.

    ``None`` for aperiodic sources.  With *constant_only* only the k = 0
    residues are evaluated, for any source, as a cross-check of the
    closed-form coefficients.
    """
    base = 0.5 if constant_only else _period_base(source)
    if base is None:
        return None
    h = source.entropy
    levels = WordLevels(source)
    ents = [e for e in collection.entries if e.alpha != 0.0]
    taus = [e.shape.size for e in ents]
    coef = [e.alpha * shape_functional(source, e.shape) / math.factorial(e.shape.size) for e in ents]
    sq = [e.alpha * e.alpha * shape_functional(source, e.shape) / math.factorial(e.shape.size) for e in ents]
    variance, drift = [], []
    worst_tail = 0.0
    kcap = 0 if constant_only else kmax
    for k in range(kcap + 1):
        chi = _pole(base, k)
        gam = {t: cmath.exp(complex_log_gamma(t - 1 + chi)) for t in set(taus)}
        vk = sum(sq[i] * gam[taus[i]] for i in range(len(ents))) / h
        dk = sum(coef[i] * (1 - chi) * gam[taus[i]] for i in range(len(ents))) / h
        for a_i in range(len(ents)):
            for b_i in range(len(ents)):
                top = taus[a_i] + taus[b_i]
                g = cmath.exp(complex_log_gamma(top - 1 + chi))
                w, tail = _shifted_word_sum(source, levels, taus[b_i], top, chi, word_tol, DEFAULT_MAX_LEVELS)
                worst_tail = max(worst_tail, tail)
                split = cmath.exp((1 - chi - top) * _LN2)
                vk -= coef[a_i] * coef[b_i] * g * (split + 2.0 * w) / h
        variance.append(vk)
        drift.append(dk)
        if k >= 1 and abs(vk) + abs(dk) < tol:
            break
    return VarianceOscillation(base, tuple(variance), tuple(drift), worst_tail)


# -- poissonized variance oracle ---------------------------------------------------------


@dataclass(frozen=True)
class PoissonVariance:
    """Variance of the weighted count under a Poisson(z) number of strings,
    with the derivative of its mean, both certified by *error_bound* terms."""

    z: float
    value: float
    v1: float
    v2: float
    v3: float
    error_bound: float
    mean_derivative: float
    mean_derivative_error: float
    levels: int

    @property
    def depoissonized(self) -> float:
        """Fixed-population variance estimate ``v(z) - z * E'(z)**2``."""
        return self.value - self.z * self.mean_derivative**2

    @property
    def coefficient(self) -> float:
        return self.depoissonized / self.z

    @property
    def coefficient_error(self) -> float:
        ed = self.mean_derivative_error
        return (self.error_bound + self.z * (2.0 * abs(self.mean_derivative) * ed + ed * ed)) / self.z


class _InnerSums:
    """``f_t(y) = sum over nonempty u of P(u)**t exp(-y P(u))`` for arrays of y."""

    def __init__(self, source: SourceModel, levels: WordLevels, series_tol: float):
        self.source = source
        self.levels = levels
        self.series_tol = series_tol
        self.pmax = max(source.probs)
        self.switch = 4.0 / self.pmax
        self._ctabs: dict[int, np.ndarray] = {}
        self._direct: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, float]] = {}

    def _ctab(self, t: int) -> np.ndarray:
        if t not in self._ctabs:
            vals = []
            j = 0
            log_y = math.log(self.switch)
            while True:
                c = _ctail(self.source, t + j)
                vals.append(c)
                bound = math.exp(j * log_y - math.lgamma(j + 1)) * c
                if j > self.switch and bound < 1e-3 * self.series_tol:
                    break
                j += 1
            self._ctabs[t] = np.array(vals)
        return self._ctabs[t]

    def series(self, t: int, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ctab = self._ctab(t)
        jj = np.arange(len(ctab))
        with np.errstate(divide="ignore"):
            log_y = np.log(y)
        logfac = gammaln(jj + 1)
        mags = np.exp(np.outer(log_y, jj) - logfac) * ctab
        mags[:, 0] = ctab[0]
        signs = np.where(jj % 2 == 1, -1.0, 1.0)
        vals = (mags * signs).sum(axis=1)
        j = len(ctab)
        c_next = _ctail(self.source, t + j)
        err = np.exp(j * log_y - math.lgamma(j + 1)) * c_next / (1.0 - np.minimum(y * self.pmax / (j + 1), 0.5))
        return vals, err + 1e-16 * np.abs(mags).sum(axis=1)

    def _table(self, t: int, depth: int):
        key = (t, depth)
        if key not in self._direct:
            log_p, log_count = self.levels.flat(1, depth)
            self._direct[key] = (np.exp(log_p), np.exp(log_count + t * log_p), _geometric_tail(self.source.power_sum(t), depth))
        return self._direct[key]

    def direct(self, t: int, y: np.ndarray, rel: float) -> tuple[np.ndarray, np.ndarray]:
        s = self.source.power_sum(t)
        ymax = float(np.max(y))
        # value is of order y**(1-t); ask for the tail to sit far below that
        target = rel * max(ymax, 1.0) ** (1 - t)
        depth = max(1, math.ceil(math.log(target * (1.0 - s)) / math.log(s)))
        depth = min(depth, 4000)
        p, wt, tail = self._table(t, depth)
        out = np.empty(len(y))
        for lo in range(0, len(y), 256):
            chunk = y[lo : lo + 256]
            out[lo : lo + 256] = np.exp(-np.outer(chunk, p)) @ wt
        return out, np.full(len(y), tail)

    def __call__(self, t: int, y: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
        if method == "raw":
            return self.direct(t, y, 1e-18)
        small = y <= self.switch
        vals = np.empty(len(y))
        errs = np.empty(len(y))
        if small.any():
            vals[small], errs[small] = self.series(t, y[small])
        if (~small).any():
            vals[~small], errs[~small] = self.direct(t, y[~small], 1e-18)
        return vals, errs


def exact_poissonized_variance(
    source: SourceModel,
    collection: MotifCollection,
    z: float,
    word_tol: float = DEFAULT_WORD_TOL,
    series_tol: float = DEFAULT_SERIES_TOL,
    max_levels: int = DEFAULT_MAX_LEVELS,
    v3_method: str = "reduced",
) -> PoissonVariance:
    """Numeric variance of ``sum alpha_k X_k`` under a Poisson(z) population.

    The variance splits as ``v1 - v2 - 2 v3``: diagonal terms, squared
    means at one node, and pairs of nodes where one lies below the other.
    For ``v3`` the inner sum over descendants uses the series in ``S(t+j)``
    for small arguments and a grouped word sum otherwise.
    ``v3_method="raw"`` forces the plain double word sum for cross-checks.
    """
    if z < 0:
        raise ValueError("z must be nonnegative")
    if v3_method not in ("reduced", "raw"):
        raise ValueError(f"unknown v3_method {v3_method!r}")
    if z == 0:
        return PoissonVariance(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
    ents = [e for e in collection.entries if e.alpha != 0.0]
    taus = np.array([e.shape.size for e in ents])
    qs = [shape_functional(source, e.shape) for e in ents]
    coef = np.array([e.alpha * q / math.factorial(e.shape.size) for e, q in zip(ents, qs)])
    sq = np.array([e.alpha * e.alpha * q / math.factorial(e.shape.size) for e, q in zip(ents, qs)])
    acoef = np.abs(coef)
    log_z = math.log(z)
    levels = WordLevels(source)
    inner = _InnerSums(source, levels, series_tol)
    uniq = sorted(set(int(t) for t in taus))
    ctail = {t: _ctail(source, t) for t in uniq}
    s_of = {}

    def ps(x):
        if x not in s_of:
            s_of[x] = source.power_sum(x)
        return s_of[x]

    def tails(ell):
        t1 = sum(abs(sq[i]) * z ** taus[i] * _geometric_tail(ps(taus[i]), ell) for i in range(len(ents)))
        t23 = 0.0
        for i in range(len(ents)):
            for j in range(len(ents)):
                a = int(taus[i] + taus[j])
                g = acoef[i] * acoef[j] * z**a * _geometric_tail(ps(a), ell)
                t23 += g * (1.0 + 2.0 * ctail[int(taus[j])])
        td = sum(acoef[i] * (taus[i] * z ** (taus[i] - 1) + z ** taus[i]) * _geometric_tail(ps(taus[i]), ell) for i in range(len(ents)))
        return t1 + t23, td

    p1, p2, p3, pd = [], [], [], []
    err = 0.0
    skip_floor = 1e-6 * word_tol
    for ell in range(max_levels + 1):
        log_p, log_count = levels.level(ell)
        log_y = log_p + log_z
        y = np.exp(log_y)
        cnt = np.exp(log_count)
        ey = np.exp(-y)
        # y**t for each motif size, as columns
        powers = {t: np.exp(t * log_y) for t in uniq}
        outer = sum(coef[i] * powers[int(taus[i])] for i in range(len(ents)))
        p1.append(math.fsum(cnt * ey * sum(sq[i] * powers[int(taus[i])] for i in range(len(ents)))))
        p2.append(math.fsum(cnt * np.exp(-2.0 * y) * outer * outer))
        pd.append(math.fsum(cnt * ey * sum(coef[i] * powers[int(taus[i])] * (taus[i] - y) for i in range(len(ents))) / z))
        # v3: outer node at w, inner node strictly below it
        abs_outer = cnt * ey * sum(acoef[i] * powers[int(taus[i])] for i in range(len(ents)))
        inner_bound = sum(acoef[j] * powers[int(taus[j])] * ctail[int(taus[j])] for j in range(len(ents)))
        bound = abs_outer * inner_bound
        keep = bound > skip_floor
        err += 2.0 * float(bound[~keep].sum())
        if keep.any():
            yk = y[keep]
            inner_val = np.zeros(len(yk))
            inner_err = np.zeros(len(yk))
            for t in uniq:
                f, fe = inner(t, yk, "raw" if v3_method == "raw" else "reduced")
                w = sum(coef[j] for j in range(len(ents)) if taus[j] == t)
                aw = sum(acoef[j] for j in range(len(ents)) if taus[j] == t)
                inner_val += w * powers[t][keep] * f
                inner_err += aw * powers[t][keep] * fe
            o = (cnt * ey * outer)[keep]
            p3.append(math.fsum(o * inner_val))
            err += 2.0 * float((abs_outer[keep] * inner_err).sum())
        tv, td = tails(ell)
        if ell >= 1 and tv < word_tol and td < word_tol:
            v1, v2, v3 = math.fsum(p1), math.fsum(p2), math.fsum(p3)
            return PoissonVariance(
                z=z,
                value=v1 - v2 - 2.0 * v3,
                v1=v1,
                v2=v2,
                v3=v3,
                error_bound=err + tv,
                mean_derivative=math.fsum(pd),
                mean_derivative_error=td,
                levels=ell + 1,
            )
    raise ToleranceUnreachable(f"word tail still above {word_tol:g} after {max_levels} levels")


# -- report -------------------------------------------------------------------------------


@dataclass
class Truncation:
    word_tail_bound: float = 0.0
    series_tail_bound: float = 0.0
    j_terms_used: int = 0

    def absorb_series(self, s: SeriesValue):
        self.series_tail_bound = max(self.series_tail_bound, s.tail_bound)
        self.j_terms_used = max(self.j_terms_used, s.terms)


@dataclass
class MomentReport:
    probs: tuple[float, ...]
    entropy: float
    periodicity: dict
    motifs: list[dict]
    mean_coeff: list[float]
    var_coeff: list[float]
    cov_coeff: list[dict]
    combo_var_coeff: float
    mean_derivative_coeff: float
    oscillation: dict
    truncation: Truncation = field(default_factory=Truncation)

    def to_dict(self) -> dict:
        return {
            "probs": list(self.probs),
            "entropy": self.entropy,
            "periodicity": self.periodicity,
            "motifs": self.motifs,
            "mean_coeff": self.mean_coeff,
            "var_coeff": self.var_coeff,
            "cov_coeff": self.cov_coeff,
            "combo_var_coeff": self.combo_var_coeff,
            "mean_derivative_coeff": self.mean_derivative_coeff,
            "oscillation": self.oscillation,
            "truncation": {
                "word_tail_bound": self.truncation.word_tail_bound,
                "series_tail_bound": self.truncation.series_tail_bound,
                "j_terms_used": self.truncation.j_terms_used,
            },
        }


def periodicity_dict(source: SourceModel) -> dict:
    per = source.periodicity
    if per.is_periodic:
        return {"mode": "periodic", "base": per.base, "exponents": list(per.exponents)}
    return {"mode": "aperiodic", "near_commensurable": per.near_commensurable}


def analyze(
    source: SourceModel,
    collection: MotifCollection,
    tol: float = DEFAULT_WORD_TOL,
    series_tol: float = DEFAULT_SERIES_TOL,
    max_levels: int = DEFAULT_MAX_LEVELS,
    kmax: int = DEFAULT_KMAX,
) -> MomentReport:
    trunc = Truncation()
    shapes = collection.shapes
    motifs, means, variances = [], [], []
    for e in collection.entries:
        motifs.append(
            {
                "motif": encode_shape(e.shape),
                "alpha": e.alpha,
                "tau": e.shape.size,
                "shape_functional": shape_functional(source, e.shape),
            }
        )
        means.append(mean_coefficient(source, e.shape))
        var, js = _variance_detail(source, e.shape, series_tol)
        trunc.absorb_series(js)
        variances.append(var)
    covs = []
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            cov, js = _covariance_detail(source, shapes[i], shapes[j], series_tol)
            trunc.absorb_series(js)
            covs.append({"i": i, "j": j, "value": cov})
    combo, series = _combo_detail(source, collection, series_tol)
    for js in series:
        trunc.absorb_series(js)

    try:
        osc_mean = [mean_oscillation(source, s, kmax, series_tol) for s in shapes]
        osc_var = variance_oscillation(source, collection, kmax, series_tol, tol)
        if osc_var is None:
            oscillation = {"mode": None, "mean": [None] * len(shapes), "variance": None}
        else:
            trunc.word_tail_bound = max(trunc.word_tail_bound, osc_var.word_tail_bound)
            for s in osc_mean:
                trunc.series_tail_bound = max(trunc.series_tail_bound, s.tail_bound)
            oscillation = {
                "mode": "series",
                "mean": [
                    {"pole_spacing": s.pole_spacing, "amplitude_bound": s.amplitude_bound} for s in osc_mean
                ],
                "variance": {"pole_spacing": osc_var.pole_spacing, "amplitude_bound": osc_var.band},
            }
    except NotCommensurable:
        oscillation = {"mode": "undetermined", "mean": [None] * len(shapes), "variance": None}

    return MomentReport(
        probs=source.probs,
        entropy=source.entropy,
        periodicity=periodicity_dict(source),
        motifs=motifs,
        mean_coeff=means,
        var_coeff=variances,
        cov_coeff=covs,
        combo_var_coeff=combo,
        mean_derivative_coeff=mean_derivative_coefficient(source, collection),
        oscillation=oscillation,
        truncation=trunc,
    )
