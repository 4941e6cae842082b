"""Poisson, Ginibre and alpha-Ginibre point processes on a centred disk.

Points are handled internally as complex numbers ``x + 1j*y``. Every sampler
first draws a *unit* pattern (intensity ``1/pi``, unscaled coordinates) and
then dilates it to the requested intensity. Keeping the unit pattern around
lets callers re-use one draw at several densities (see ``dilate``), which is
how the network simulator couples jammer fields across a density sweep.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InvalidParameterError, ResourceLimitError
from .seeding import as_generator

#: Largest Ginibre matrix the sampler will diagonalise.
MAX_MATRIX_SIZE = 3000


@dataclass(frozen=True)
class Window:
    """Disk of the given radius centred on the origin."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidParameterError(f"window radius must be positive and finite, got {self.radius}")

    @property
    def area(self):
        return math.pi * self.radius**2

    def overlap_area(self, d):
        """Area of the window intersected with its own translate by distance ``d``."""
        d = np.asarray(d, dtype=float)
        r = self.radius
        dd = np.clip(d, 0.0, 2 * r)
        out = 2 * r**2 * np.arccos(dd / (2 * r)) - 0.5 * dd * np.sqrt(4 * r**2 - dd**2)
        return np.where(d >= 2 * r, 0.0, out)


@dataclass(frozen=True)
class ProcessSpec:
    """Intensity ``density`` and repulsion ``alpha``; ``alpha=None`` means Poisson."""

    density: float
    alpha: float | None = None

    def __post_init__(self):
        if not (self.density >= 0 and math.isfinite(self.density)):
            raise InvalidParameterError(f"density must be finite and >= 0, got {self.density}")
        if self.alpha is not None and not (0 < self.alpha <= 1):
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def is_poisson(self):
        return self.alpha is None

    @property
    def label(self):
        return "PPP" if self.alpha is None else f"AlphaGPP({self.alpha:g})"

    @property
    def base_density(self):
        """Intensity of the parent process before independent thinning."""
        return self.density if self.alpha is None else self.density / self.alpha


@dataclass(frozen=True, eq=False)
class PointPattern:
    points: np.ndarray  # shape (n, 2)
    window: Window
    process_label: str = "PPP"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if len(pts):
            if np.any(np.hypot(pts[:, 0], pts[:, 1]) > self.window.radius):
                raise InvalidParameterError("pattern has points outside its window")
            if len(np.unique(pts, axis=0)) != len(pts):
                raise InvalidParameterError("pattern has coincident points")

    def __len__(self):
        return len(self.points)

    @property
    def count(self):
        return len(self.points)

    def distances(self):
        """Distance of every point from the window centre."""
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y"])
            for x, y in self.points:
                writer.writerow([repr(float(x)), repr(float(y))])
        return path


@dataclass
class UnitPattern:
    """Unscaled draw of a process, ready to be dilated to any density up to ``reference_density``.

    ``keep`` holds the independent-thinning outcome of each point. Dilating to
    a lower density pushes every point outward, so anything summed over the
    points of a decreasing function of distance is monotone in density.
    """

    points: np.ndarray  # complex positions, or distances when drawn moduli-only
    keep: np.ndarray
    alpha: float | None
    reference_density: float

    def scale_for(self, density):
        base = density if self.alpha is None else density / self.alpha
        return 1.0 / math.sqrt(math.pi * base)

    def dilate(self, density, window):
        """Physical points inside ``window`` and their index into the unit draw."""
        if density > self.reference_density * (1 + 1e-12):
            raise InvalidParameterError(
                f"density {density} exceeds the reference density {self.reference_density} of this draw"
            )
        if density == 0 or len(self.points) == 0:
            return self.points[:0], np.empty(0, dtype=np.intp)
        z = self.points * self.scale_for(density)
        idx = np.flatnonzero(self.keep & (np.abs(z) <= window.radius))
        return z[idx], idx


def ginibre_matrix_size(expected_count):
    """Matrix dimension giving a full-intensity region that covers ``expected_count`` points.

    The finite-M Ginibre intensity at squared radius u is P(Poisson(u) <= M-1)/pi,
    so M needs a margin of a few sqrt(n) above n for small n.
    """
    n = float(expected_count)
    if n <= 0:
        return 0
    return int(max(math.ceil(1.25 * n), math.ceil(n + 3.0 * math.sqrt(n) + 3.0)))


def ginibre_expected_count(matrix_size, unit_radius_sq):
    """Exact mean number of M x M Ginibre eigenvalues with |z|^2 <= unit_radius_sq."""
    from scipy.special import gammainc

    k = np.arange(1, matrix_size + 1)
    return float(np.sum(gammainc(k, unit_radius_sq)))


def unit_ppp(expected_count, rng):
    """Poisson points of intensity 1/pi on the disk holding ``expected_count`` points on average."""
    n = rng.poisson(expected_count) if expected_count > 0 else 0
    rad = np.sqrt(expected_count * rng.random(n))
    theta = rng.uniform(0.0, 2 * math.pi, n)
    return rad * np.exp(1j * theta)


def unit_ginibre(expected_count, rng, max_matrix_size=MAX_MATRIX_SIZE):
    """Eigenvalues of a complex Ginibre matrix sized for ``expected_count`` points."""
    m = ginibre_matrix_size(expected_count)
    if m > max_matrix_size:
        raise ResourceLimitError(
            f"Ginibre matrix of size {m} exceeds the cap {max_matrix_size}; "
            "reduce the window radius or density"
        )
    if m == 0:
        return np.empty(0, dtype=complex)
    a = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2.0)
    return np.linalg.eigvals(a)


def unit_ginibre_moduli(expected_count, rng):
    """Moduli of the eigenvalues of the same Ginibre matrix as ``unit_ginibre``.

    For an M x M complex Ginibre matrix the squared eigenvalue moduli are
    distributed as independent Gamma(k, 1) variables, k = 1..M. Only
    distances to the origin survive, so use this wherever nothing else is
    needed (e.g. interference at the window centre), never for patterns.
    """
    m = ginibre_matrix_size(expected_count)
    return np.sqrt(rng.standard_gamma(np.arange(1, m + 1, dtype=float)))


def unit_ppp_moduli(expected_count, rng):
    n = rng.poisson(expected_count) if expected_count > 0 else 0
    return np.sqrt(expected_count * rng.random(n))


def draw_unit(spec, window, rng, reference_density=None, max_matrix_size=MAX_MATRIX_SIZE, moduli_only=False):
    """Unit draw able to serve every density of ``spec``'s kind up to ``reference_density``.

    With ``moduli_only`` the draw holds distances to the origin (real, >= 0)
    rather than complex positions; the law of those distances is unchanged.
    """
    ref = spec.density if reference_density is None else float(reference_density)
    if ref < spec.density:
        raise InvalidParameterError("reference density must be at least the process density")
    if spec.alpha is None:
        count = ref * window.area
        pts = unit_ppp_moduli(count, rng) if moduli_only else unit_ppp(count, rng)
        keep = np.ones(len(pts), dtype=bool)
    elif ref == 0:
        pts = np.empty(0, dtype=float if moduli_only else complex)
        keep = np.ones(0, dtype=bool)
    else:
        count = ref / spec.alpha * window.area
        if moduli_only:
            pts = unit_ginibre_moduli(count, rng)
        else:
            pts = unit_ginibre(count, rng, max_matrix_size)
        keep = rng.random(len(pts)) < spec.alpha
    return UnitPattern(points=pts, keep=keep, alpha=spec.alpha, reference_density=ref)


def sample_points(spec, window, seed, max_matrix_size=MAX_MATRIX_SIZE):
    """Complex coordinates of one realization, without building a PointPattern."""
    rng = as_generator(seed)
    unit = draw_unit(spec, window, rng, max_matrix_size=max_matrix_size)
    z, _ = unit.dilate(spec.density, window)
    return z


def _pattern(z, window, label):
    return PointPattern(np.column_stack([z.real, z.imag]), window, label)


def sample_ppp(spec, window, seed):
    """Homogeneous Poisson pattern of intensity ``spec.density`` in ``window``."""
    if not spec.is_poisson:
        spec = ProcessSpec(spec.density)
    return _pattern(sample_points(spec, window, seed), window, "PPP")


def sample_alpha_gpp(spec, window, seed, max_matrix_size=MAX_MATRIX_SIZE):
    """alpha-Ginibre pattern: a Ginibre pattern of intensity density/alpha, thinned with retention alpha."""
    if spec.alpha is None:
        raise InvalidParameterError("alpha-GPP sampling needs alpha in (0, 1]")
    z = sample_points(spec, window, seed, max_matrix_size)
    return _pattern(z, window, spec.label)


def sample_ginibre(density, window, seed, max_matrix_size=MAX_MATRIX_SIZE):
    return sample_alpha_gpp(ProcessSpec(density, 1.0), window, seed, max_matrix_size)


def sample_pattern(spec, window, seed, max_matrix_size=MAX_MATRIX_SIZE):
    if spec.is_poisson:
        return sample_ppp(spec, window, seed)
    return sample_alpha_gpp(spec, window, seed, max_matrix_size)


def alpha_gpp_pair_correlation(r, density, alpha):
    """Pair correlation 1 - exp(-pi*density*r^2/alpha) of the thinned Ginibre process."""
    r = np.asarray(r, dtype=float)
    if alpha is None:
        return np.ones_like(r)
    return 1.0 - np.exp(-math.pi * density * r**2 / alpha)


def pair_correlation(patterns, bin_edges):
    """Translation-corrected pair correlation pooled over replicated patterns.

    Returns ``(r_mid, g)`` arrays, one value per bin. The squared intensity is
    estimated by the pooled n(n-1)/|W|^2, which is unbiased under Poisson.
    """
    patterns = list(patterns)
    if len(patterns) < 2:
        raise InvalidParameterError("pair_correlation needs at least two patterns")
    window = patterns[0].window
    if any(p.window != window for p in patterns):
        raise InvalidParameterError("all patterns must share one window")
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise InvalidParameterError("bin edges must be a strictly increasing, non-negative sequence")

    weighted = np.zeros(len(edges) - 1)
    n_pairs = 0.0
    for p in patterns:
        n = p.count
        n_pairs += n * (n - 1)
        if n < 2:
            continue
        d = pdist(p.points)
        w = 1.0 / window.overlap_area(d)
        # each unordered pair counts twice in the ordered-pair sum
        weighted += 2 * np.histogram(d, bins=edges, weights=w)[0]

    annulus = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    mid = 0.5 * (edges[1:] + edges[:-1])
    if n_pairs == 0:
        return mid, np.zeros_like(mid)
    # sum of per-pattern n(n-1)/|W|^2 estimates of intensity squared
    lam2_total = n_pairs / window.area**2
    return mid, np.maximum(weighted / (lam2_total * annulus), 0.0)


def count_statistics(patterns):
    """Sample mean and unbiased sample variance of the point counts."""
    counts = np.array([len(p) for p in patterns], dtype=float)
    if len(counts) < 2:
        raise InvalidParameterError("count_statistics needs at least two patterns")
    return float(counts.mean()), float(counts.var(ddof=1))
