"""Continuum Boolean (droplet) percolation: Poisson disc configurations and
crossing detection for arbitrarily rotated rectangles.

The model is isotropic by construction (fixed-radius discs on a homogeneous
Poisson process), so crossing probabilities of congruent rotated rectangles
must agree; rotation_invariance_report quantifies that with pairwise
z-scores.  Centers are sampled on the unit square padded by one radius on
every side: discs centered just outside the square still influence
crossings, and the padding removes that boundary-deficit bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import SeedSchedule, derive_seed, generator
from .scaling import CrossingEstimate, _digest


@dataclass(frozen=True)
class RotatedRect:
    """Rectangle centered at (cx, cy), rotated by angle_deg; the crossing
    runs between the two sides of length `height` (across the width)."""

    cx: float
    cy: float
    width: float
    height: float
    angle_deg: float = 0.0

    def corners(self) -> np.ndarray:
        c, s = math.cos(math.radians(self.angle_deg)), math.sin(math.radians(self.angle_deg))
        half = np.array(
            [[-self.width / 2, -self.height / 2], [self.width / 2, -self.height / 2],
             [self.width / 2, self.height / 2], [-self.width / 2, self.height / 2]]
        )
        rot = np.array([[c, -s], [s, c]])
        return half @ rot.T + (self.cx, self.cy)

    def to_frame(self, points: np.ndarray) -> np.ndarray:
        """Map world points into the rectangle's axis-aligned frame."""
        c, s = math.cos(math.radians(self.angle_deg)), math.sin(math.radians(self.angle_deg))
        shifted = np.atleast_2d(points) - (self.cx, self.cy)
        rot = np.array([[c, s], [-s, c]])
        return shifted @ rot.T

    def fits_unit_square(self) -> bool:
        cs = self.corners()
        return bool((cs >= 0.0).all() and (cs <= 1.0).all())


@dataclass(frozen=True)
class DropletConfig:
    centers: np.ndarray  # (N, 2), inside the padded region
    radius: float
    intensity: float
    seed: int

    def __post_init__(self):
        pts = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "centers", pts)


def sample_droplets(intensity: float, radius: float, seed: int) -> DropletConfig:
    """Poisson number of centers, uniform on the padded region."""
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = generator(seed)
    side = 1.0 + 2.0 * radius
    n = rng.poisson(intensity * side * side)
    centers = rng.uniform(-radius, 1.0 + radius, size=(n, 2))
    return DropletConfig(centers, radius, intensity, seed)


def _side_touch(frame_pts: np.ndarray, half_w: float, half_h: float, radius: float):
    """Distances from disc centers (rect frame) to the two crossing sides."""
    u, v = frame_pts[:, 0], frame_pts[:, 1]
    dv = np.maximum(np.abs(v) - half_h, 0.0)
    left = np.hypot(u + half_w, dv)
    right = np.hypot(u - half_w, dv)
    return left <= radius, right <= radius


def droplet_crossing(config: DropletConfig, rect: RotatedRect) -> bool:
    """True iff a connected component of the disc union meets both crossing
    sides of the rectangle.

    Union-find over the disc-intersection graph (centers closer than two
    radii), restricted to discs meeting the rectangle, with the two sides as
    virtual nodes.
    """
    if not rect.fits_unit_square():
        raise ValueError("rectangle escapes the sampled region")
    r = config.radius
    if len(config.centers) == 0:
        return False
    frame = rect.to_frame(config.centers)
    hw, hh = rect.width / 2.0, rect.height / 2.0
    du = np.maximum(np.abs(frame[:, 0]) - hw, 0.0)
    dv = np.maximum(np.abs(frame[:, 1]) - hh, 0.0)
    keep = du * du + dv * dv <= r * r
    if not keep.any():
        return False
    frame = frame[keep]
    n = len(frame)
    touch_left, touch_right = _side_touch(frame, hw, hh, r)
    if not (touch_left.any() and touch_right.any()):
        return False

    parent = list(range(n + 2))  # n discs + virtual left, right

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    left_node, right_node = n, n + 1
    for i in np.nonzero(touch_left)[0]:
        union(int(i), left_node)
    for i in np.nonzero(touch_right)[0]:
        union(int(i), right_node)
    d2 = ((frame[:, None, :] - frame[None, :, :]) ** 2).sum(axis=2)
    ii, jj = np.nonzero(np.triu(d2 <= (2 * r) ** 2, k=1))
    for a, b in zip(ii, jj):
        union(int(a), int(b))
    return find(left_node) == find(right_node)


def critical_intensity(
    radius: float,
    schedule: SeedSchedule,
    n_samples: int = 2000,
    iterations: int = 12,
) -> float:
    """Bisect the intensity until the unit-square crossing probability is
    about 1/2; the located value is recorded with run results."""
    rect = RotatedRect(0.5, 0.5, 1.0, 1.0, 0.0)
    lo, hi = 0.0, 4.0 / (math.pi * radius * radius)
    for step in range(iterations):
        mid = 0.5 * (lo + hi)
        hits = 0
        sched = schedule.shifted(step * n_samples)
        for i in range(n_samples):
            cfg = sample_droplets(mid, radius, derive_seed(sched, i))
            hits += droplet_crossing(cfg, rect)
        if hits / n_samples < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RotationReport:
    intensity: float
    radius: float
    rect_shape: tuple[float, float]
    angles_deg: tuple
    estimates: dict  # angle -> CrossingEstimate
    max_pairwise_z: float


def rotation_invariance_report(
    intensity: float,
    radius: float,
    rect_shape: tuple[float, float],
    angles_deg,
    n_samples: int,
    schedule: SeedSchedule,
) -> RotationReport:
    """Independent crossing estimates for the same rectangle shape at each
    rotation angle, plus the largest pairwise z-score."""
    width, height = rect_shape
    estimates = {}
    for k, angle in enumerate(angles_deg):
        rect = RotatedRect(0.5, 0.5, width, height, float(angle))
        if not rect.fits_unit_square():
            raise ValueError(f"rectangle at {angle} degrees escapes the unit square")
        sched = schedule.shifted(k * n_samples)
        hits = 0
        for i in range(n_samples):
            cfg = sample_droplets(intensity, radius, derive_seed(sched, i))
            hits += droplet_crossing(cfg, rect)
        digest = _digest("droplet", intensity, radius, width, height, angle,
                         n_samples, sched.master_seed, sched.stream_index)
        estimates[float(angle)] = CrossingEstimate.from_tally(hits, n_samples, digest)
    angles = [float(a) for a in angles_deg]
    max_z = 0.0
    for a in range(len(angles)):
        for b in range(a + 1, len(angles)):
            ea, eb = estimates[angles[a]], estimates[angles[b]]
            se = math.sqrt(
                ea.p_hat * (1 - ea.p_hat) / ea.n_samples
                + eb.p_hat * (1 - eb.p_hat) / eb.n_samples
            )
            if se > 0:
                max_z = max(max_z, abs(ea.p_hat - eb.p_hat) / se)
    return RotationReport(intensity, radius, tuple(rect_shape), tuple(angles), estimates, max_z)
