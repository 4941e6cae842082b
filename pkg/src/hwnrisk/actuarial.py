"""Compound-Poisson insurer surplus: simulation, ruin, infimum law and premium calibration.

The reserve is R(t) = y + c*t - (sum of claims up to t). It only drops at
claim instants, so the infimum over [0, T] is the smaller of y and the
post-claim reserves, and every path is simulated event by event.
"""

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import binom, poisson

from .errors import CalibrationError, InvalidParameterError
from .seeding import child_rng

#: paths per random stream; estimates depend on it only through the seed layout
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class ClaimDistribution:
    kind: str  # "deterministic" or "exponential"
    value: float  # the fixed amount, or the mean

    def __post_init__(self):
        if self.kind not in ("deterministic", "exponential"):
            raise InvalidParameterError(f"unknown claim distribution {self.kind!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise InvalidParameterError(f"claim amount must be positive and finite, got {self.value}")

    @classmethod
    def deterministic(cls, amount):
        return cls("deterministic", float(amount))

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", float(mean))

    @property
    def mean(self):
        return self.value

    def sample(self, rng, n):
        if self.kind == "deterministic":
            return np.full(n, self.value)
        return self.value * rng.standard_exponential(n)


@dataclass(frozen=True)
class InsuranceConfig:
    initial_reserve: float
    premium_rate: float
    claim_intensity: float
    claims: ClaimDistribution
    horizon: float

    def __post_init__(self):
        for name in ("initial_reserve", "premium_rate", "claim_intensity"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidParameterError(f"horizon must be positive and finite, got {self.horizon}")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def safety_loading(self):
        """c / (lambda * E[W]) - 1; infinite without claims."""
        outflow = self.claim_intensity * self.claims.mean
        return math.inf if outflow == 0 else self.premium_rate / outflow - 1


@dataclass(frozen=True, eq=False)
class SurplusPath:
    times: np.ndarray
    amounts: np.ndarray
    reserves: np.ndarray  # reserve right after each claim
    infimum: float
    initial_reserve: float
    premium_rate: float
    horizon: float

    @property
    def ruined(self):
        return self.infimum < 0

    @property
    def final_reserve(self):
        return self.initial_reserve + self.premium_rate * self.horizon - float(np.sum(self.amounts))

    def reserve_at(self, t):
        """R(t), right-continuous: a claim at t is already paid."""
        t = np.asarray(t, dtype=float)
        paid = np.concatenate([[0.0], np.cumsum(self.amounts)])
        n = np.searchsorted(self.times, t, side="right")
        return self.initial_reserve + self.premium_rate * t - paid[n]

    def events(self):
        """(t, reserve) vertices of the piecewise-linear path, both sides of each jump."""
        rows = [(0.0, self.initial_reserve)]
        for t, after, w in zip(self.times, self.reserves, self.amounts):
            rows.append((float(t), float(after + w)))
            rows.append((float(t), float(after)))
        rows.append((self.horizon, self.final_reserve))
        return rows

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "reserve"])
            for t, r in self.events():
                writer.writerow([repr(t), repr(r)])
        return path


def surplus_path_from_claims(config, times, amounts):
    """Path with the given claim instants and amounts (sorted by time)."""
    times = np.asarray(times, dtype=float)
    amounts = np.asarray(amounts, dtype=float)
    if times.shape != amounts.shape:
        raise InvalidParameterError("times and amounts must have the same length")
    if np.any(np.diff(times) <= 0):
        raise InvalidParameterError("claim times must be strictly increasing")
    if len(times) and (times[0] < 0 or times[-1] > config.horizon):
        raise InvalidParameterError("claim times must lie in [0, horizon]")
    if np.any(amounts <= 0):
        raise InvalidParameterError("claim amounts must be positive")
    reserves = config.initial_reserve + config.premium_rate * times - np.cumsum(amounts)
    infimum = min(config.initial_reserve, float(reserves.min())) if len(reserves) else config.initial_reserve
    return SurplusPath(times, amounts, reserves, infimum, config.initial_reserve, config.premium_rate, config.horizon)


def _draw_claims(config, rng, n_paths, reference_intensity):
    """Claim (path index, time, amount), sorted by path then time.

    Claims are a thinning of a Poisson stream at ``reference_intensity``, so
    runs that differ only in intensity share nested claim sets.
    """
    lam = config.claim_intensity
    ref = lam if reference_intensity is None else float(reference_intensity)
    if ref < lam:
        raise InvalidParameterError("reference_intensity must be at least claim_intensity")
    counts = rng.poisson(ref * config.horizon, n_paths) if ref > 0 else np.zeros(n_paths, dtype=np.int64)
    total = int(counts.sum())
    times = rng.random(total) * config.horizon
    marks = rng.random(total)
    amounts = config.claims.sample(rng, total)
    path = np.repeat(np.arange(n_paths), counts)
    if ref > lam:
        keep = marks * ref < lam
        path, times, amounts = path[keep], times[keep], amounts[keep]
    order = np.lexsort((times, path))
    return path[order], times[order], amounts[order]


def _block_infima(config, seed, block, n_paths, reference_intensity):
    rng = child_rng(seed, "claims", block)
    path, times, amounts = _draw_claims(config, rng, n_paths, reference_intensity)
    y = config.initial_reserve
    infima = np.full(n_paths, float(y))
    if len(path) == 0:
        return infima
    starts = np.flatnonzero(np.r_[True, path[1:] != path[:-1]])
    pos = np.arange(len(path)) - np.repeat(starts, np.diff(np.r_[starts, len(path)]))
    # per-path running totals on a padded grid: each path's sums involve only
    # its own claims, so dropping a claim can never raise a later total
    grid = np.zeros((n_paths, int(pos.max()) + 1))
    grid[path, pos] = amounts
    paid = np.cumsum(grid, axis=1)[path, pos]
    reserves = y + config.premium_rate * times - paid
    lows = np.minimum.reduceat(reserves, starts)
    owners = path[starts]
    infima[owners] = np.minimum(infima[owners], lows)
    return infima


def path_infima(config, paths, seed, reference_intensity=None):
    """Exact infimum of R over [0, T] for each of ``paths`` independent paths."""
    paths = int(paths)
    if paths < 1:
        raise InvalidParameterError("paths must be >= 1")
    out = []
    for block, start in enumerate(range(0, paths, BLOCK_SIZE)):
        out.append(_block_infima(config, seed, block, min(BLOCK_SIZE, paths - start), reference_intensity))
    return np.concatenate(out)


def simulate_surplus_path(config, seed):
    """One event-driven realization of the surplus process."""
    rng = child_rng(seed, "surplus-path")
    _, times, amounts = _draw_claims(config, rng, 1, None)
    return surplus_path_from_claims(config, times, amounts)


@dataclass(frozen=True)
class RuinEstimate:
    probability: float
    half_width: float
    paths: int
    seed: int

    @property
    def std_error(self):
        return math.sqrt(self.probability * (1 - self.probability) / self.paths)


def _ruin_from_infima(infima, seed):
    n = len(infima)
    p = float(np.count_nonzero(infima < 0)) / n
    return RuinEstimate(p, 1.96 * math.sqrt(p * (1 - p) / n), n, seed)


def ruin_probability(config, paths, seed, reference_intensity=None):
    """Fraction of simulated paths whose reserve drops below zero before T."""
    return _ruin_from_infima(path_infima(config, paths, seed, reference_intensity), seed)


@dataclass(frozen=True, eq=False)
class InfimumDistribution:
    infima: np.ndarray  # sorted
    quantiles: dict
    counts: np.ndarray
    edges: np.ndarray
    seed: int

    def cdf(self, x):
        return np.searchsorted(self.infima, x, side="right") / len(self.infima)

    @property
    def ruin(self):
        return _ruin_from_infima(self.infima, self.seed)


def infimum_distribution(config, paths, seed, quantiles=(0.01, 0.05, 0.5, 0.95, 0.99), bins=50,
                         reference_intensity=None):
    """Empirical law of the path infimum: sorted sample, quantiles and histogram."""
    if int(paths) < 2:
        raise InvalidParameterError("infimum_distribution needs at least two paths")
    qs = [float(q) for q in quantiles]
    if any(not 0 < q < 1 for q in qs):
        raise InvalidParameterError("quantiles must lie in (0, 1)")
    m = np.sort(path_infima(config, paths, seed, reference_intensity))
    lo, hi = float(m[0]), float(m[-1])
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(m, bins=bins, range=(lo, hi))
    return InfimumDistribution(m, {q: float(np.quantile(m, q)) for q in qs}, counts, edges, seed)


@dataclass(frozen=True)
class OracleResult:
    non_ruin: float
    tail_bound: float  # Poisson mass beyond max_n left out of non_ruin
    max_n: int

    @property
    def ruin(self):
        return 1.0 - self.non_ruin


def order_statistics_lower_bounds(bounds):
    """P(U_(k) >= bounds[k-1] for every k) for len(bounds) sorted uniforms on [0, 1].

    Walks the thresholds left to right carrying the law of the number of
    points below the current one; the fresh points in each gap are binomial
    among those not yet placed.
    """
    a = np.maximum(np.asarray(bounds, dtype=float), 0.0)
    n = len(a)
    if n == 0:
        return 1.0
    if np.any(np.diff(a) < 0):
        raise InvalidParameterError("bounds must be non-decreasing")
    if a[-1] >= 1.0:
        return 0.0
    dist = np.array([1.0])  # dist[m] = P(m points below the current threshold, constraints so far)
    prev = 0.0
    for k in range(1, n + 1):
        p = (a[k - 1] - prev) / (1.0 - prev)
        m = np.arange(len(dist))
        if p > 0:
            j = np.arange(k)
            # new[m + j] += dist[m] * Binom(n - m, p)(j); keep only states m + j <= k - 1
            moved = dist[:, None] * binom.pmf(j[None, :], (n - m)[:, None], p)
            new = np.zeros(k)
            for mm in m:
                span = k - mm
                new[mm:] += moved[mm, :span]
            dist = new
        else:
            dist = np.concatenate([dist, [0.0]])[:k]
        prev = a[k - 1]
    return float(dist.sum())


def deterministic_claim_oracle(config, max_n=None, tail=1e-10):
    """Finite-time non-ruin probability for fixed claim amounts, exact up to a Poisson tail."""
    if config.claims.kind != "deterministic":
        raise InvalidParameterError("the oracle needs deterministic claims")
    mean_n = config.claim_intensity * config.horizon
    if mean_n == 0:
        return OracleResult(1.0, 0.0, 0)
    if max_n is None:
        max_n = int(poisson.ppf(1 - tail, mean_n))
        while poisson.sf(max_n, mean_n) >= tail:
            max_n += 1
    y, c, w, T = config.initial_reserve, config.premium_rate, config.claims.value, config.horizon
    total = 0.0
    for n in range(max_n + 1):
        if c == 0:
            q = 1.0 if y - n * w >= 0 else 0.0
        else:
            k = np.arange(1, n + 1)
            q = order_statistics_lower_bounds((k * w - y) / (c * T))
        total += poisson.pmf(n, mean_n) * q
    return OracleResult(float(total), float(poisson.sf(max_n, mean_n)), int(max_n))


def cramer_lundberg_ruin(initial_reserve, premium_rate, claim_intensity, mean_claim):
    """Infinite-horizon ruin probability with exponential claims."""
    loading = premium_rate / (claim_intensity * mean_claim) - 1
    if loading <= 0:
        return 1.0
    return math.exp(-loading * initial_reserve / ((1 + loading) * mean_claim)) / (1 + loading)


@dataclass(frozen=True)
class CalibrationResult:
    premium: float
    lower: float
    ruin_at_premium: float
    ruin_at_lower: float
    evaluations: int


def calibrate_premium(config, target, paths, seed, resolution=1e-3, max_premium=None):
    """Smallest premium rate (to ``resolution``) whose estimated ruin is <= ``target``.

    All evaluations share the claim sample of ``seed``, on which ruin is
    non-increasing in the premium rate, so bisection is exact on that sample.
    """
    if not 0 < target < 1:
        raise InvalidParameterError("target ruin probability must lie in (0, 1)")
    if not resolution > 0:
        raise InvalidParameterError("resolution must be positive")
    calls = 0

    def ruin(c):
        nonlocal calls
        calls += 1
        return ruin_probability(config.replace(premium_rate=c), paths, seed).probability

    at_zero = ruin(0.0)
    if at_zero <= target:
        return CalibrationResult(0.0, 0.0, at_zero, at_zero, calls)

    if max_premium is None:
        hi = max(2.0 * config.claim_intensity * config.claims.mean, resolution)
        cap = 1e6 * hi
        while (r_hi := ruin(hi)) > target:
            if hi > cap:
                raise CalibrationError(
                    f"ruin stays above {target} up to premium rate {hi:g}",
                    {"premium": hi, "ruin": r_hi, "evaluations": calls},
                )
            hi *= 2.0
    else:
        hi = float(max_premium)
        r_hi = ruin(hi)
        if r_hi > target:
            raise CalibrationError(
                f"ruin {r_hi:g} at the maximum premium rate {hi:g} exceeds the target {target:g}",
                {"premium": hi, "ruin": r_hi, "evaluations": calls},
            )
    lo, r_lo = 0.0, at_zero
    while hi - lo >= resolution:
        mid = 0.5 * (lo + hi)
        r = ruin(mid)
        if r <= target:
            hi, r_hi = mid, r
        else:
            lo, r_lo = mid, r
    return CalibrationResult(hi, lo, r_hi, r_lo, calls)
