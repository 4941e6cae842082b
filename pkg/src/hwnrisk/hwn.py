"""K-tier downlink with jammers: association, SINR and service-outage estimation.

The typical user sits at the window centre. Each tier is an independent
PPP or alpha-GPP; base stations transmit with Rayleigh (unit-mean
exponential power) fading and the user attaches to the tier whose nearest
BS gives the strongest average received power. Non-serving BSs transmit on
the user's channel independently with probability ``reuse_factor``.

Powers are handled relative to the strongest transmitter in the network so
that shifting every power by a common dB offset leaves the SINR unchanged
when the network is interference limited.
"""

import math
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.stats import poisson as poisson_dist

from .errors import InvalidParameterError, NoCoverageError
from .geometry import (
    MAX_MATRIX_SIZE,
    PointPattern,
    ProcessSpec,
    Window,
    draw_unit,
    ginibre_matrix_size,
    sample_points,
)
from .seeding import as_generator, child_rng

#: trials per work unit; results do not depend on it
BLOCK_SIZE = 512


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_mw(dbm):
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class TierConfig:
    power_dbm: float
    density: float
    alpha: float | None = None
    pathloss_exponent: float = 4.0

    def __post_init__(self):
        kind = type(self).__name__
        if not math.isfinite(self.power_dbm):
            raise InvalidParameterError(f"{kind}.power_dbm must be finite")
        if not self.pathloss_exponent > 2:
            raise InvalidParameterError(
                f"{kind}.pathloss_exponent must exceed 2, got {self.pathloss_exponent}"
            )
        # ProcessSpec validates density and alpha
        self.spec

    @property
    def spec(self):
        return ProcessSpec(self.density, self.alpha)


@dataclass(frozen=True)
class JammerConfig(TierConfig):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple
    jammers: JammerConfig | None = None
    reuse_factor: float = 1.0
    noise_dbm: float | None = None  # None: interference limited
    sinr_threshold_db: float = 0.0
    window: Window = field(default_factory=lambda: Window(100.0))
    user_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if len(self.tiers) < 1:
            raise InvalidParameterError("a network needs at least one tier")
        if not 0 < self.reuse_factor <= 1:
            raise InvalidParameterError(f"reuse_factor must lie in (0, 1], got {self.reuse_factor}")
        if int(self.user_count) != self.user_count or self.user_count < 1:
            raise InvalidParameterError(f"user_count must be a positive integer, got {self.user_count}")
        if not math.isfinite(self.sinr_threshold_db):
            raise InvalidParameterError("sinr_threshold_db must be finite")
        if self.noise_dbm is not None and not math.isfinite(self.noise_dbm):
            raise InvalidParameterError("noise_dbm must be finite or None")

    @property
    def sinr_threshold(self):
        return 10.0 ** (self.sinr_threshold_db / 10.0)

    @property
    def reference_power_dbm(self):
        powers = [t.power_dbm for t in self.tiers]
        if self.jammers is not None:
            powers.append(self.jammers.power_dbm)
        return max(powers)

    def relative_power(self, power_dbm):
        return 10.0 ** ((power_dbm - self.reference_power_dbm) / 10.0)

    @property
    def relative_noise(self):
        if self.noise_dbm is None:
            return 0.0
        return self.relative_power(self.noise_dbm)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    tier_patterns: tuple
    jammer_pattern: PointPattern | None
    serving_tier: int | None
    serving_index: int | None
    serving_distance: float | None
    active: tuple  # per tier, bool per BS; the serving BS is always False here

    @property
    def covered(self):
        return self.serving_tier is not None


@dataclass(frozen=True)
class OutageEstimate:
    """Outage probability with a 95% confidence half-width.

    ``method="bernoulli"`` counts outage events; ``"conditional"`` averages the
    exact per-realization outage probability given the BS layout.
    """

    probability: float
    half_width: float
    trials: int
    seed: int
    method: str = "bernoulli"

    @classmethod
    def from_outcomes(cls, outcomes, seed):
        outcomes = np.asarray(outcomes, dtype=bool)
        n = len(outcomes)
        p = float(np.count_nonzero(outcomes)) / n
        return cls(p, 1.96 * math.sqrt(p * (1 - p) / n), n, seed)

    @classmethod
    def from_conditional(cls, values, seed):
        values = np.asarray(values, dtype=float)
        n = len(values)
        p = float(np.mean(values))
        sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
        return cls(p, 1.96 * sd / math.sqrt(n), n, seed, "conditional")

    @property
    def std_error(self):
        return self.half_width / 1.96


def associate(candidates, tiers):
    """Index and distance of the tier whose nearest BS gives the largest mean power.

    ``candidates[k]`` is the nearest-BS distance of tier k, or None/inf when the
    tier has no BS. Ties go to the lower tier index.
    """
    if len(candidates) != len(tiers):
        raise InvalidParameterError("one candidate distance per tier is required")
    best, best_power, best_r = None, -math.inf, None
    for k, (r, tier) in enumerate(zip(candidates, tiers)):
        if r is None or not math.isfinite(r):
            continue
        # compare in the log domain to avoid overflow at tiny distances
        log_power = tier.power_dbm / 10.0 * math.log(10.0) - tier.pathloss_exponent * math.log(r)
        if log_power > best_power:
            best, best_power, best_r = k, log_power, float(r)
    if best is None:
        raise NoCoverageError("no tier has a base station to serve the user")
    return best, best_r


GEOMETRIES = ("moduli", "eigen")
METHODS = ("bernoulli", "conditional")


class _TierDraw(NamedTuple):
    dists: list  # distance of every BS to the origin, per tier
    marks: list  # reuse marks, active iff mark < reuse_factor
    fading: list


def _draw_tiers(config, rng, geometry, max_matrix_size):
    dists = []
    for t in config.tiers:
        unit = draw_unit(t.spec, config.window, rng, max_matrix_size=max_matrix_size,
                         moduli_only=geometry == "moduli")
        z, _ = unit.dilate(t.density, config.window)
        dists.append(np.abs(z))
    marks = [rng.random(len(d)) for d in dists]
    fading = [rng.standard_exponential(len(d)) for d in dists]
    return _TierDraw(dists, marks, fading)


def _serving(config, dists):
    candidates = [float(d.min()) if len(d) else None for d in dists]
    try:
        k, r = associate(candidates, config.tiers)
    except NoCoverageError:
        return None, None, None
    return k, int(np.argmin(dists[k])), r


def _interferer_mask(config, draw, j, k, idx):
    active = draw.marks[j] < config.reuse_factor
    if j == k:
        active[idx] = False
    return active


def _tier_terms(config, draw):
    """(signal, tier interference) of one trial, or (0, 0) without coverage."""
    k, idx, r = _serving(config, draw.dists)
    if k is None:
        return 0.0, 0.0
    tier = config.tiers[k]
    signal = config.relative_power(tier.power_dbm) * draw.fading[k][idx] * r ** (-tier.pathloss_exponent)
    interference = 0.0
    for j, t in enumerate(config.tiers):
        act = _interferer_mask(config, draw, j, k, idx)
        if act.any():
            d = draw.dists[j][act]
            interference += config.relative_power(t.power_dbm) * float(
                np.sum(draw.fading[j][act] * d ** (-t.pathloss_exponent))
            )
    return signal, interference


def _sinr(signal, denominator):
    if signal == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.inf
    return signal / denominator


def realize_network(config, seed, index=0, max_matrix_size=MAX_MATRIX_SIZE):
    """Geometry and channel activity of one network realization.

    ``realize_network(config, s, i)`` places base stations and jammers at the
    same distances as trial ``i`` of ``simulate_sinr(config, ..., s,
    geometry="eigen")``.
    """
    rng = child_rng(seed, "hwn-tiers", index)
    points = [sample_points(t.spec, config.window, rng, max_matrix_size) for t in config.tiers]
    marks = [rng.random(len(z)) for z in points]
    dists = [np.abs(z) for z in points]
    k, idx, r = _serving(config, dists)
    active = []
    for j, m in enumerate(marks):
        flags = m < config.reuse_factor
        if j == k:
            flags[idx] = False
        active.append(flags)
    patterns = tuple(
        PointPattern(np.column_stack([z.real, z.imag]), config.window, t.spec.label)
        for z, t in zip(points, config.tiers)
    )
    jam = None
    if config.jammers is not None:
        jrng = child_rng(seed, "hwn-jammers", index)
        z = sample_points(config.jammers.spec, config.window, jrng, max_matrix_size)
        jam = PointPattern(np.column_stack([z.real, z.imag]), config.window, config.jammers.spec.label)
    return NetworkRealization(patterns, jam, k, idx, r, tuple(active))


def sinr_sample(realization, config, seed):
    """Linear SINR at the origin for one draw of Rayleigh fading on ``realization``.

    Returns ``inf`` when nothing interferes and the network is noiseless.
    """
    if not realization.covered:
        raise NoCoverageError("realization has no serving base station")
    rng = as_generator(seed)
    k = realization.serving_tier
    signal = 0.0
    interference = 0.0
    for j, (pattern, tier) in enumerate(zip(realization.tier_patterns, config.tiers)):
        h = rng.standard_exponential(len(pattern))
        d = pattern.distances()
        p = config.relative_power(tier.power_dbm)
        if j == k:
            i = realization.serving_index
            signal = p * h[i] * d[i] ** (-tier.pathloss_exponent)
        act = realization.active[j]
        interference += p * float(np.sum(h[act] * d[act] ** (-tier.pathloss_exponent)))
    if realization.jammer_pattern is not None and len(realization.jammer_pattern):
        jc = config.jammers
        d = realization.jammer_pattern.distances()
        h = rng.standard_exponential(len(d))
        interference += config.relative_power(jc.power_dbm) * float(np.sum(h * d ** (-jc.pathloss_exponent)))
    return _sinr(signal, config.relative_noise + interference)


@dataclass(frozen=True)
class JammerVariant:
    """Jammer field evaluated at several densities from one coupled draw."""

    jammers: JammerConfig | None
    densities: tuple

    @classmethod
    def of(cls, jammers, densities=None):
        if jammers is None:
            return cls(None, (0.0,))
        dens = (jammers.density,) if densities is None else tuple(float(d) for d in densities)
        if not dens:
            raise InvalidParameterError("a jammer variant needs at least one density")
        if any(d < 0 or not math.isfinite(d) for d in dens):
            raise InvalidParameterError("jammer densities must be finite and >= 0")
        return cls(jammers, dens)

    @property
    def reference_density(self):
        return max(self.densities)


def _sinr_block(config, seed, start, stop, variants, geometry, max_matrix_size):
    cols = sum(len(v.densities) for v in variants)
    out = np.empty((stop - start, cols))
    noise = config.relative_noise
    for row, i in enumerate(range(start, stop)):
        rng = child_rng(seed, "hwn-tiers", i)
        signal, tier_int = _tier_terms(config, _draw_tiers(config, rng, geometry, max_matrix_size))
        col = 0
        for v in variants:
            if v.jammers is None or signal == 0.0:
                for _ in v.densities:
                    out[row, col] = _sinr(signal, noise + tier_int)
                    col += 1
                continue
            jc = v.jammers
            # same stream for every variant: jammer draws are common random numbers
            jrng = child_rng(seed, "hwn-jammers", i)
            unit = draw_unit(jc.spec, config.window, jrng, v.reference_density, max_matrix_size,
                             moduli_only=geometry == "moduli")
            h = jrng.standard_exponential(len(unit.points))
            pj = config.relative_power(jc.power_dbm)
            for dens in v.densities:
                z, idx = unit.dilate(dens, config.window)
                jam = pj * float(np.sum(h[idx] * np.abs(z) ** (-jc.pathloss_exponent)))
                out[row, col] = _sinr(signal, noise + tier_int + jam)
                col += 1
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@lru_cache(maxsize=64)
def _radial_quadrature(upper, matrix_size):
    """Nodes, weights and Poisson-weighted weights on [0, upper] in squared unit radius.

    Row k-1 of the returned matrix integrates against the Gamma(k, 1) density,
    the law of the k-th squared Ginibre modulus. Segments double from 1e-9 up
    to 1 and are unit length beyond, so both the sharp jammer kernel near the
    origin and every gamma density are resolved.
    """
    cuts = [0.0]
    x = 1e-9
    while x < min(1.0, upper):
        cuts.append(x)
        x *= 2.0
    cuts.extend(np.arange(1.0, upper, 1.0).tolist())
    cuts.append(upper)
    cuts = np.unique(np.asarray(cuts))
    a, b = cuts[:-1, None], cuts[1:, None]
    nodes = (0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * _GL_WEIGHTS).ravel()
    if matrix_size == 0:
        return nodes, weights, None
    k = np.arange(matrix_size)[:, None]
    gamma_w = poisson_dist.pmf(k, nodes[None, :]) * weights[None, :]
    return nodes, weights, gamma_w


def _jammer_log_laplace(jc, density, window, reference_density, b):
    """log E[prod_j (1 - phi(d_j))] over the jammer field, phi = 1/(1 + b * u^(mu/2)).

    ``u`` is the squared unit-scale distance and ``b[t] = S_t * scale^mu / (tau * P_J)``
    for trial t; the result has one entry per trial.
    """
    if density == 0:
        return np.zeros_like(b)
    scale2 = 1.0 / (math.pi * (density if jc.alpha is None else density / jc.alpha))
    upper = window.radius**2 / scale2
    half_mu = jc.pathloss_exponent / 2.0
    if jc.alpha is None:
        nodes, weights, _ = _radial_quadrature(upper, 0)
        phi = 1.0 / (1.0 + np.outer(nodes**half_mu, b))
        return -(weights @ phi)
    m = ginibre_matrix_size(reference_density / jc.alpha * window.area)
    nodes, _, gamma_w = _radial_quadrature(upper, m)
    phi = 1.0 / (1.0 + np.outer(nodes**half_mu, b))
    c = gamma_w @ phi
    return np.sum(np.log1p(-jc.alpha * np.minimum(c, 1.0)), axis=0)


def _conditional_block(config, seed, start, stop, variants, geometry, max_matrix_size):
    tau = config.sinr_threshold
    n = stop - start
    log_base = np.zeros(n)
    strength = np.zeros(n)  # fading-free serving power S
    covered = np.zeros(n, dtype=bool)
    for row, i in enumerate(range(start, stop)):
        rng = child_rng(seed, "hwn-tiers", i)
        draw = _draw_tiers(config, rng, geometry, max_matrix_size)
        k, idx, r = _serving(config, draw.dists)
        if k is None:
            continue
        t = config.tiers[k]
        s = config.relative_power(t.power_dbm) * r ** (-t.pathloss_exponent)
        acc = -tau * config.relative_noise / s
        for j, tj in enumerate(config.tiers):
            d = draw.dists[j]
            if j == k:
                d = np.delete(d, idx)
            if len(d):
                phi = 1.0 / (1.0 + s * d**tj.pathloss_exponent / (tau * config.relative_power(tj.power_dbm)))
                acc += float(np.sum(np.log1p(-config.reuse_factor * phi)))
        log_base[row], strength[row], covered[row] = acc, s, True

    cols = []
    for v in variants:
        for dens in v.densities:
            log_cov = log_base.copy()
            if v.jammers is not None and dens > 0 and covered.any():
                jc = v.jammers
                scale_mu = (math.pi * (dens if jc.alpha is None else dens / jc.alpha)) ** (-jc.pathloss_exponent / 2)
                b = strength[covered] * scale_mu / (tau * config.relative_power(jc.power_dbm))
                log_cov[covered] += _jammer_log_laplace(jc, dens, config.window, v.reference_density, b)
            cols.append(np.where(covered, -np.expm1(log_cov), 1.0))
    return np.column_stack(cols)


def _run_blocks(fn, config, trials, seed, variants, geometry, n_jobs, max_matrix_size):
    trials = int(trials)
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if geometry not in GEOMETRIES:
        raise InvalidParameterError(f"geometry must be one of {GEOMETRIES}, got {geometry!r}")
    if variants is None:
        variants = [JammerVariant.of(config.jammers)]
    blocks = [(s, min(s + BLOCK_SIZE, trials)) for s in range(0, trials, BLOCK_SIZE)]
    args = (variants, geometry, max_matrix_size)
    if n_jobs == 1 or len(blocks) == 1:
        parts = [fn(config, seed, a, b, *args) for a, b in blocks]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(fn)(config, seed, a, b, *args) for a, b in blocks)
    return np.vstack(parts)


def simulate_sinr(config, trials, seed, variants=None, geometry="moduli", n_jobs=1,
                  max_matrix_size=MAX_MATRIX_SIZE):
    """Per-trial SINR, one column per (variant, density); 0 marks no coverage.

    Tiers, reuse marks and fading are shared across columns, and each jammer
    variant is a single draw dilated to each density, so every column is a
    common-random-number coupling of the others. Trial ``i`` depends only on
    ``(seed, i)``, never on ``n_jobs`` or the block split.

    ``geometry="moduli"`` draws only distances to the origin, which is all the
    SINR at the origin depends on; ``"eigen"`` diagonalises full Ginibre
    matrices and is kept as a cross-check.
    """
    return _run_blocks(_sinr_block, config, trials, seed, variants, geometry, n_jobs, max_matrix_size)


def conditional_outage(config, trials, seed, variants=None, geometry="moduli", n_jobs=1,
                       max_matrix_size=MAX_MATRIX_SIZE):
    """Per-trial outage probability given the BS layout, laid out like ``simulate_sinr``.

    Fading and reuse activity are integrated in closed form, and so is the
    jammer field: for a PPP through its Laplace functional, for an alpha-GPP
    through the independence of the squared Ginibre moduli (Gamma(k, 1)) and
    of the thinning marks. Each entry is therefore a smooth function of the
    jammer density, which removes the event noise from density and repulsion
    comparisons.
    """
    return _run_blocks(_conditional_block, config, trials, seed, variants, geometry, n_jobs, max_matrix_size)


def outage_samples(config, trials, seed, variants=None, method="bernoulli", **kwargs):
    """Per-trial outage values: 0/1 events or conditional probabilities."""
    if method == "bernoulli":
        return simulate_sinr(config, trials, seed, variants, **kwargs) < config.sinr_threshold
    if method == "conditional":
        return conditional_outage(config, trials, seed, variants, **kwargs)
    raise InvalidParameterError(f"method must be one of {METHODS}, got {method!r}")


def summarize(samples, seed, method):
    if method == "bernoulli":
        return OutageEstimate.from_outcomes(samples, seed)
    return OutageEstimate.from_conditional(samples, seed)


def estimate_outage(config, trials, seed, method="bernoulli", **kwargs):
    """Outage probability of the typical user; no coverage counts as outage."""
    samples = outage_samples(config, trials, seed, method=method, **kwargs)[:, 0]
    return summarize(samples, seed, method)


class ConvergenceResult(NamedTuple):
    at_radius: OutageEstimate
    at_double_radius: OutageEstimate
    delta: float


def convergence_check(config, trials, seed, **kwargs):
    """Outage at window radius R and 2R with the same seed; small delta means R is large enough."""
    small = estimate_outage(config, trials, seed, **kwargs)
    big_cfg = config.replace(window=Window(2 * config.window.radius))
    big = estimate_outage(big_cfg, trials, seed, **kwargs)
    return ConvergenceResult(small, big, abs(small.probability - big.probability))


def interference_factor(tau, mu):
    """rho(tau, mu) = tau^(2/mu) * int_{tau^(-2/mu)}^inf du / (1 + u^(mu/2))."""
    if not mu > 2:
        raise InvalidParameterError(f"path-loss exponent must exceed 2, got {mu}")
    if tau < 0:
        raise InvalidParameterError("threshold must be non-negative")
    if tau == 0:
        return 0.0
    lower = tau ** (-2.0 / mu)
    val, _ = integrate.quad(lambda u: 1.0 / (1.0 + u ** (mu / 2.0)), lower, np.inf, epsabs=0, epsrel=1e-10, limit=200)
    return tau ** (2.0 / mu) * val


def ppp_coverage_oracle(
    tau, mu, density=1.0, power_dbm=0.0, jammers=None, reuse_factor=1.0, noise_dbm=None
):
    """Coverage probability of a single PPP tier with Rayleigh fading, whole-plane model.

    ``tau`` is linear. ``jammers`` is an optional ``(density, power_dbm,
    pathloss_exponent)`` triple or a JammerConfig, modelled as a PPP.
    """
    rho = interference_factor(tau, mu)
    if isinstance(jammers, TierConfig):
        jammers = (jammers.density, jammers.power_dbm, jammers.pathloss_exponent)
    if jammers is not None and jammers[0] == 0:
        jammers = None
    if jammers is None and noise_dbm is None:
        return 1.0 / (1.0 + reuse_factor * rho)
    if density <= 0:
        raise InvalidParameterError("serving tier density must be positive")
    if jammers is not None:
        zj, pj, muj = jammers
        if not muj > 2:
            raise InvalidParameterError(f"jammer path-loss exponent must exceed 2, got {muj}")
        d = 2.0 / muj
        jam_coef = math.pi * zj * gamma_fn(1 + d) * gamma_fn(1 - d) * (tau * 10 ** ((pj - power_dbm) / 10)) ** d
    noise = 0.0 if noise_dbm is None else tau * 10 ** ((noise_dbm - power_dbm) / 10)

    def integrand(v):
        # v = pi * density * r^2, so the nearest-BS law becomes exp(-v) dv
        r = math.sqrt(v / (math.pi * density))
        log_f = -v * (1 + reuse_factor * rho)
        if jammers is not None:
            log_f -= jam_coef * r ** (mu * d)
        if noise:
            log_f -= noise * r**mu
        return math.exp(log_f)

    val, _ = integrate.quad(integrand, 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)
    return val
