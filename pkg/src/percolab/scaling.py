"""Crossing-probability estimators, the R1/R2 renormalization map, the
near-critical scaling family, and independence tests.

All Monte Carlo estimates draw one derived seed per sample from a
SeedSchedule, so a tally over any partition of the sample index range gives
identical results: parallel runs are bit-reproducible regardless of worker
count.  Bernoulli intervals are Wilson (correct coverage near 0 and 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .clusters import crossing_indicator
from .lattice import Configuration, LatticeKind, LatticeSpec, sample_configuration
from .rng import SeedSchedule, derive_seed

BOND_PC = 0.5  # square-lattice bond percolation, exact by self-duality

_Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n < 1:
        raise ValueError("need at least one sample")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # at the degenerate tallies the exact bound is 0 or 1; round-off in
    # center - half can leave a stray 1e-18 that breaks lo <= p_hat
    lo = 0.0 if successes == 0 else max(0.0, float(center - half))
    hi = 1.0 if successes == n else min(1.0, float(center + half))
    return lo, hi


@dataclass(frozen=True)
class CrossingEstimate:
    p_hat: float
    n_samples: int
    ci_low: float
    ci_high: float
    successes: int
    config_digest: str

    @classmethod
    def from_tally(cls, successes: int, n: int, digest: str) -> "CrossingEstimate":
        lo, hi = wilson_interval(successes, n)
        return cls(successes / n, n, lo, hi, successes, digest)


def _digest(*fields) -> str:
    text = "|".join(repr(f) for f in fields)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def aspect_spec(base: LatticeSpec, aspect: float) -> LatticeSpec:
    """Rectangle of the requested aspect ratio at the base resolution:
    cols = round(aspect * rows)."""
    if aspect <= 0:
        raise ValueError(f"aspect must be positive, got {aspect}")
    cols = round(aspect * base.rows)
    if cols < 1:
        raise ValueError(f"aspect {aspect} gives zero columns at rows={base.rows}")
    return LatticeSpec(base.kind, cols, base.rows)


def crossing_tally(
    spec: LatticeSpec,
    p: float,
    direction: str,
    schedule: SeedSchedule,
    start: int,
    count: int,
) -> int:
    """Crossing successes over sample indices [start, start+count); pure and
    associative under concatenation of index ranges."""
    hits = 0
    for i in range(start, start + count):
        config = sample_configuration(spec, p, derive_seed(schedule, i))
        hits += crossing_indicator(config, direction)
    return hits


def _tally_worker(args) -> int:
    return crossing_tally(*args)


def _parallel_tally(spec, p, direction, schedule, n_samples, workers) -> int:
    if workers <= 1 or n_samples < 2 * workers:
        return crossing_tally(spec, p, direction, schedule, 0, n_samples)
    bounds = np.linspace(0, n_samples, workers + 1).astype(int)
    jobs = [
        (spec, p, direction, schedule, int(a), int(b - a))
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    with get_context("spawn").Pool(workers) as pool:
        return sum(pool.map(_tally_worker, jobs))


def estimate_crossing(
    spec: LatticeSpec,
    p: float,
    aspect: float,
    direction: str,
    n_samples: int,
    schedule: SeedSchedule,
    workers: int = 1,
) -> CrossingEstimate:
    """Monte Carlo crossing frequency over independent configurations."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    target = aspect_spec(spec, aspect)
    hits = _parallel_tally(target, p, direction, schedule, n_samples, workers)
    digest = _digest(
        target.kind.value, target.cols, target.rows, p, aspect, direction,
        n_samples, schedule.master_seed, schedule.stream_index,
    )
    return CrossingEstimate.from_tally(hits, n_samples, digest)


# -- near-critical family and the RG map --------------------------------


@dataclass(frozen=True)
class ScalingFamily:
    """One-parameter near-critical family p(t, delta) = p_c + t * delta^(1/nu)."""

    p_c: float
    nu: float
    t_grid: tuple
    delta_grid: tuple

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        object.__setattr__(self, "delta_grid", tuple(float(d) for d in self.delta_grid))

    def density(self, t: float, delta: float) -> tuple[float, bool]:
        """(density, clamped flag) for scaling parameter t at spacing delta."""
        p = self.p_c + t * delta ** (1.0 / self.nu)
        clamped = p < 0.0 or p > 1.0
        return min(1.0, max(0.0, p)), clamped


@dataclass(frozen=True)
class RGPoint:
    t: float
    p: float
    clamped: bool
    r1: CrossingEstimate  # unit square
    r2: CrossingEstimate  # doubled square at the same spacing


def rg_scan(
    spec: LatticeSpec,
    family: ScalingFamily,
    n_samples: int,
    schedule: SeedSchedule,
    workers: int = 1,
) -> list[RGPoint]:
    """(R1, R2) along the family at the spacing of `spec` (a square grid).

    R2 is the crossing probability of the square of twice the side length
    at the same spacing.  R1 and R2 use disjoint seed streams.
    """
    if spec.cols != spec.rows:
        raise ValueError("rg_scan needs a square base lattice")
    if not family.t_grid:
        raise ValueError("empty t grid")
    doubled = LatticeSpec(spec.kind, 2 * spec.cols, 2 * spec.rows)
    delta = spec.spacing
    points = []
    for k, t in enumerate(family.t_grid):
        p, clamped = family.density(t, delta)
        sched1 = schedule.shifted(2 * k * n_samples)
        sched2 = schedule.shifted((2 * k + 1) * n_samples)
        r1 = estimate_crossing(spec, p, 1.0, "left_right", n_samples, sched1, workers)
        r2 = estimate_crossing(doubled, p, 1.0, "left_right", n_samples, sched2, workers)
        points.append(RGPoint(t, p, clamped, r1, r2))
    return points


@dataclass(frozen=True)
class FixedPointReport:
    r_star: float
    t_star: float
    slope: float
    slope_ci: tuple[float, float]
    degenerate: bool


def _local_slope(r1: np.ndarray, r2: np.ndarray, center: int, k: int = 5) -> float:
    lo = max(0, min(center - k // 2, len(r1) - k))
    window = slice(lo, lo + k)
    x, y = r1[window], r2[window]
    if np.ptp(x) == 0:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def fixed_point_and_slope(
    points: list[RGPoint],
    n_bootstrap: int = 400,
    bootstrap_seed: int = 20260823,
) -> FixedPointReport:
    """Locate where R2 = R1 along the scan and the map's slope there.

    The crossing t* is interpolated on the monotone piecewise-linear
    difference R2 - R1; the slope dR2/dR1 comes from a local linear
    regression over the nearest 5 scan points, with a parametric bootstrap
    (binomial resampling of each estimate) for its confidence interval.
    """
    if len(points) < 5:
        raise ValueError("need at least 5 scan points")
    t = np.array([pt.t for pt in points])
    r1 = np.array([pt.r1.p_hat for pt in points])
    r2 = np.array([pt.r2.p_hat for pt in points])
    diff = r2 - r1
    if np.all(diff == 0.0):
        slope = 1.0  # the scan lies on the diagonal: every point is fixed
        return FixedPointReport(float(r1[0]), float(t[0]), slope, (slope, slope), True)

    # the unstable fixed point is a negative-to-positive transition of
    # R2 - R1; zero plateaus at the clamped ends are the trivial fixed
    # points (0,0) and (1,1) and must not be picked up
    bracket = None
    for i in range(len(diff) - 1):
        a, b = diff[i], diff[i + 1]
        if (a < 0 <= b) or (a <= 0 < b):
            bracket = i
            break
    if bracket is None:
        raise ValueError("fixed point not bracketed: R2 - R1 does not change sign")
    i = bracket
    w = diff[i] / (diff[i] - diff[i + 1])
    t_star = t[i] + w * (t[i + 1] - t[i])
    r_star = float(np.interp(t_star, t, r1))
    center = int(np.argmin(np.abs(t - t_star)))
    slope = _local_slope(r1, r2, center)

    n1 = np.array([pt.r1.n_samples for pt in points])
    n2 = np.array([pt.r2.n_samples for pt in points])
    rng = np.random.default_rng(bootstrap_seed)
    slopes = []
    for _ in range(n_bootstrap):
        b1 = rng.binomial(n1, r1) / n1
        b2 = rng.binomial(n2, r2) / n2
        s = _local_slope(b1, b2, center)
        if np.isfinite(s):
            slopes.append(s)
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return FixedPointReport(r_star, float(t_star), slope, (float(lo), float(hi)), False)


# -- scaling collapse ------------------------------------------------------


@dataclass(frozen=True)
class CollapseReport:
    family: ScalingFamily
    estimates: dict  # (t, delta) -> CrossingEstimate for the unit square
    spread: float  # sup over t of (max over delta - min over delta) of R1

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.estimates[(t, d)].p_hat for d in self.family.delta_grid]
                for t in self.family.t_grid
            ]
        )


def scaling_collapse(
    kind: LatticeKind,
    family: ScalingFamily,
    n_samples: int,
    schedule: SeedSchedule,
    workers: int = 1,
) -> CollapseReport:
    """R1(t, delta) across the family; small spread certifies that crossing
    curves at different spacings collapse onto one function of t."""
    if not family.delta_grid:
        raise ValueError("empty delta grid")
    estimates = {}
    stream = 0
    for d in family.delta_grid:
        n = round(1.0 / d)
        spec = LatticeSpec(kind, n, n)
        for t in family.t_grid:
            p, _ = family.density(t, d)
            est = estimate_crossing(
                spec, p, 1.0, "left_right", n_samples, schedule.shifted(stream), workers
            )
            estimates[(t, d)] = est
            stream += n_samples
    matrix = np.array(
        [[estimates[(t, d)].p_hat for d in family.delta_grid] for t in family.t_grid]
    )
    spread = float((matrix.max(axis=1) - matrix.min(axis=1)).max()) if len(family.delta_grid) > 1 else 0.0
    return CollapseReport(family, estimates, spread)


# -- independence of disjoint regions -------------------------------------


def subregion_configuration(
    config: Configuration, rect: tuple[float, float, float, float]
) -> Configuration:
    """Restriction of a configuration to the sites inside an axis-aligned
    rectangle (x0, y0, x1, y1) in macroscopic coordinates."""
    x0, y0, x1, y1 = rect
    spec = config.spec
    d = spec.spacing
    i0 = max(0, int(np.ceil(x0 / d - 0.5)))
    i1 = min(spec.cols - 1, int(np.floor(x1 / d - 0.5)))
    j0 = max(0, int(np.ceil(y0 / d - 0.5)))
    j1 = min(spec.rows - 1, int(np.floor(y1 / d - 0.5)))
    if i1 < i0 or j1 < j0:
        raise ValueError(f"rectangle {rect} contains no lattice sites")
    sub = LatticeSpec(spec.kind, i1 - i0 + 1, j1 - j0 + 1)
    if spec.kind is LatticeKind.SITE:
        occ = config.site_grid()[j0 : j1 + 1, i0 : i1 + 1].ravel()
    else:
        e = config.east_bonds()[j0 : j1 + 1, i0 : i1 + 1]
        nb = config.north_bonds()[j0 : j1 + 1, i0 : i1 + 1]
        occ = np.concatenate([e.ravel(), nb.ravel()])
    return Configuration(sub, occ, config.seed, config.density)


@dataclass(frozen=True)
class IndependenceReport:
    p_a: float
    p_b: float
    p_both: float
    covariance: float
    covariance_se: float
    n_samples: int

    @property
    def z_score(self) -> float:
        return self.covariance / self.covariance_se if self.covariance_se > 0 else 0.0


def _rects_disjoint(a, b) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0


def independence_test(
    spec: LatticeSpec,
    p: float,
    rect_a: tuple[float, float, float, float],
    rect_b: tuple[float, float, float, float],
    n_samples: int,
    schedule: SeedSchedule,
    direction: str = "left_right",
) -> IndependenceReport:
    """Empirical covariance of crossing events in two disjoint rectangles
    of the same sampled configuration, with its standard error."""
    if not _rects_disjoint(rect_a, rect_b):
        raise ValueError("rectangles must be disjoint")
    xa = np.empty(n_samples, dtype=float)
    xb = np.empty(n_samples, dtype=float)
    for i in range(n_samples):
        config = sample_configuration(spec, p, derive_seed(schedule, i))
        xa[i] = crossing_indicator(subregion_configuration(config, rect_a), direction)
        xb[i] = crossing_indicator(subregion_configuration(config, rect_b), direction)
    p_a, p_b = xa.mean(), xb.mean()
    prod = (xa - p_a) * (xb - p_b)
    cov = prod.mean()
    se = prod.std(ddof=1) / np.sqrt(n_samples) if n_samples > 1 else float("inf")
    return IndependenceReport(
        float(p_a), float(p_b), float((xa * xb).mean()), float(cov), float(se), n_samples
    )
