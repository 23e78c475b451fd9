"""Connecting curves and their regularity statistics.

Curves are polygonal with step size delta, in macroscopic [0,1]^2
coordinates.  Both percolation kinds are handled through one "expanded"
boolean matrix: site configurations map to their occupancy grid directly;
bond configurations map to a (2*rows-1) x (2*cols-1) grid in which
even/even cells are sites (always present), odd-parity cells are bonds, and
odd/odd cells are holes.  4-adjacency on the expanded grid is exactly the
configuration's connectivity, so a single traversal routine serves both.

The lowest left-right crossing is extracted with a right-hand wall
follower: start at the lowest left-edge cell that lies on some crossing,
keep the free region below on the right hand, loop-erase revisits, stop at
the right edge.  Cells are restricted to those reachable from both the left
and right edges, which prunes dead branches that cannot carry a crossing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .lattice import Configuration, LatticeKind

# headings, counterclockwise; y grows upward (row 0 is the bottom)
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))  # E, N, W, S
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class Curve:
    vertices: np.ndarray  # (V, 2) points in [0,1]^2
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("a curve needs an (V, 2) vertex array with V >= 1")
        if len({(round(x / self.spacing * 2), round(y / self.spacing * 2)) for x, y in pts}) != len(pts):
            raise ValueError("curve is not self-avoiding")
        if len(pts) > 1:
            steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if not np.allclose(steps, self.spacing, rtol=1e-9, atol=1e-12):
                raise ValueError("consecutive vertices must be one lattice step apart")
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __len__(self) -> int:
        return len(self.vertices)

    def diameter(self) -> float:
        pts = self.vertices
        if len(pts) == 1:
            return 0.0
        # exact max pairwise distance via per-lag vectorization
        best = 0.0
        for lag in range(1, len(pts)):
            d = np.linalg.norm(pts[lag:] - pts[:-lag], axis=1).max()
            if d > best:
                best = d
        return float(best)

    def to_text(self) -> str:
        """Plain-text polyline: '# delta <spacing>' header, one 'x y' per line."""
        lines = [f"# delta {float(self.spacing)!r}"]
        lines += [f"{float(x)!r} {float(y)!r}" for x, y in self.vertices]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Curve":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# delta"):
            raise ValueError("missing '# delta' header")
        spacing = float(lines[0].split()[2])
        pts = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
        return cls(pts, spacing)


def expanded_matrix(config: Configuration) -> np.ndarray:
    """Boolean connectivity matrix indexed [y, x]; see module docstring."""
    spec = config.spec
    if spec.kind is LatticeKind.SITE:
        return config.site_grid().copy()
    m = np.zeros((2 * spec.rows - 1, 2 * spec.cols - 1), dtype=bool)
    m[::2, ::2] = True
    m[::2, 1::2] = config.east_bonds()[:, :-1]
    m[1::2, ::2] = config.north_bonds()[:-1, :]
    return m


def _cell_positions(config: Configuration, cells: Sequence[tuple[int, int]]) -> np.ndarray:
    spec = config.spec
    d = spec.spacing
    if spec.kind is LatticeKind.SITE:
        return np.array([((x + 0.5) * d, (y + 0.5) * d) for x, y in cells])
    # keep only site cells (even/even); bond cells are the steps between them
    return np.array(
        [((x // 2 + 0.5) * d, (y // 2 + 0.5) * d) for x, y in cells if x % 2 == 0 and y % 2 == 0]
    )


def _reachable(m: np.ndarray, seeds: Iterable[tuple[int, int]]) -> np.ndarray:
    """Cells 4-connected to any seed cell, via one component labeling pass."""
    labels, _ = ndimage.label(m, structure=_CROSS)
    seed_labels = {int(labels[y, x]) for x, y in seeds if m[y, x]}
    seed_labels.discard(0)
    if not seed_labels:
        return np.zeros_like(m)
    return np.isin(labels, sorted(seed_labels))


def lowest_crossing_cells(m: np.ndarray) -> list[tuple[int, int]] | None:
    """Lowest left-right crossing of a boolean matrix, as cell coordinates,
    or None when no crossing exists."""
    h, w = m.shape
    from_left = _reachable(m, ((0, y) for y in range(h)))
    if not from_left[:, -1].any():
        return None
    from_right = _reachable(m, ((w - 1, y) for y in range(h)))
    carrier = from_left & from_right
    start_rows = np.nonzero(carrier[:, 0])[0]
    x, y = 0, int(start_rows[0])
    if w == 1:
        return [(x, y)]

    path = [(x, y)]
    index = {(x, y): 0}
    heading = 0  # east
    seen_states = set()
    for _ in range(8 * h * w):
        if (x, y, heading) in seen_states:
            raise RuntimeError("wall follower cycled; malformed carrier set")
        seen_states.add((x, y, heading))
        for turn in (-1, 0, 1, 2):  # right hand on the wall below
            d = (heading + turn) % 4
            dx, dy = _STEPS[d]
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and carrier[ny, nx]:
                x, y, heading = nx, ny, d
                break
        else:
            raise RuntimeError("wall follower stuck; isolated carrier cell")
        if (x, y) in index:
            cut = index[(x, y)]
            for cell in path[cut + 1:]:
                del index[cell]
            del path[cut + 1:]
        else:
            path.append((x, y))
            index[(x, y)] = len(path) - 1
        if x == w - 1:
            return path
    raise RuntimeError("wall follower exceeded the step budget")


def extract_lowest_crossing(config: Configuration) -> Curve | None:
    """The unique boundary-hugging left-right crossing, or None."""
    cells = lowest_crossing_cells(expanded_matrix(config))
    if cells is None:
        return None
    return Curve(_cell_positions(config, cells), config.spec.spacing)


def extract_geodesic(
    config: Configuration, a: tuple[int, int], b: tuple[int, int]
) -> Curve | None:
    """Shortest occupied path between sites a and b (breadth-first, ties
    broken by the fixed E, N, W, S neighbor order), or None if disconnected."""
    spec = config.spec
    ia, ib = spec.site_index(*a), spec.site_index(*b)  # validates bounds
    m = expanded_matrix(config)
    scale = 1 if spec.kind is LatticeKind.SITE else 2
    sa = (a[0] * scale, a[1] * scale)
    sb = (b[0] * scale, b[1] * scale)
    if not (m[sa[1], sa[0]] and m[sb[1], sb[0]]):
        return None
    h, w = m.shape
    parent = {sa: None}
    queue = deque([sa])
    while queue and sb not in parent:
        x, y = queue.popleft()
        for dx, dy in _STEPS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and m[ny, nx] and (nx, ny) not in parent:
                parent[(nx, ny)] = (x, y)
                queue.append((nx, ny))
    if sb not in parent:
        return None
    cells = []
    cur = sb
    while cur is not None:
        cells.append(cur)
        cur = parent[cur]
    cells.reverse()
    return Curve(_cell_positions(config, cells), spec.spacing)


@dataclass(frozen=True)
class TortuosityProfile:
    scales: np.ndarray  # decreasing
    counts: np.ndarray  # M(s), nondecreasing as s shrinks

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        c = np.asarray(self.counts, dtype=np.int64)
        if s.shape != c.shape or s.ndim != 1:
            raise ValueError("scales and counts must be 1-d arrays of equal length")
        s.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "counts", c)


def _greedy_cover_count(pts: np.ndarray, s: float) -> int:
    """Minimal in-order cover by subsegments of diameter <= s.

    Greedy maximal extension is optimal here: any feasible cover can be
    transformed segment by segment into the greedy one without increasing
    the count (segments are intervals of the vertex order, and a subinterval
    of a diameter-bounded set keeps the bound).
    """
    n = len(pts)
    if n == 1:
        return 1
    count = 0
    start = 0
    while start < n - 1:
        count += 1
        diam = 0.0
        end = start
        while end + 1 < n:
            d = np.linalg.norm(pts[start : end + 1] - pts[end + 1], axis=1).max()
            if max(diam, d) > s:
                break
            diam = max(diam, d)
            end += 1
        if end == start:
            raise ValueError(f"scale {s} is below the lattice step; cover undefined")
        start = end  # consecutive subsegments share their split vertex
    return count


def tortuosity_profile(curve: Curve, scales: Sequence[float]) -> TortuosityProfile:
    """M(s) for each scale; scales are sorted into decreasing order."""
    s = np.asarray(sorted(scales, reverse=True), dtype=float)
    if len(s) == 0 or s[-1] <= 0.0:
        raise ValueError("scales must be positive")
    counts = np.array([_greedy_cover_count(curve.vertices, v) for v in s])
    return TortuosityProfile(s, counts)


def dyadic_scales(spacing: float, coarsest: float = 0.5) -> list[float]:
    """Dyadic scale grid 2^-1, ..., down to 8 * delta, below which lattice
    discreteness dominates."""
    scales = []
    s = coarsest
    while s >= 8.0 * spacing:
        scales.append(s)
        s /= 2.0
    return scales


def fit_tortuosity_exponent(profile: TortuosityProfile) -> tuple[float, float]:
    """Least-squares slope of log M against log(1/s) over scales with
    M >= 2, plus the prefactor exp(intercept).

    The slope estimates 1/alpha for a curve obeying M(s) <= kappa * s^(-1/alpha).
    """
    mask = profile.counts >= 2
    if mask.sum() < 3:
        raise ValueError(
            "curve too short for the scale grid: need at least 3 scales with M >= 2"
        )
    x = np.log(1.0 / profile.scales[mask])
    y = np.log(profile.counts[mask].astype(float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(np.exp(intercept))


@dataclass(frozen=True)
class KappaSample:
    delta: float
    alpha: float
    kappa: float

    def __post_init__(self):
        if self.kappa < 0 or not np.isfinite(self.kappa):
            raise ValueError("kappa must be finite and nonnegative")


def holder_kappa(curve: Curve, alpha: float) -> KappaSample:
    """Smallest constant kappa with |gamma(t_i) - gamma(t_j)| <= kappa
    |t_i - t_j|^alpha under the normalized-vertex-index parameterization
    t_i = i / (V - 1).

    Exact maximum over all vertex pairs.  Lags whose a-priori bound
    (chord <= min(path length, diameter)) cannot beat the running maximum
    are skipped, which prunes most of the O(V^2) work without affecting
    exactness.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    pts = curve.vertices
    n = len(pts)
    if n == 1:
        return KappaSample(curve.spacing, alpha, 0.0)
    diam = curve.diameter()
    denom = float(n - 1)
    best = 0.0
    for lag in range(1, n):
        bound = min(lag * curve.spacing, diam) / (lag / denom) ** alpha
        if bound <= best:
            continue
        d = np.linalg.norm(pts[lag:] - pts[:-lag], axis=1).max()
        val = d / (lag / denom) ** alpha
        if val > best:
            best = val
    return KappaSample(curve.spacing, alpha, float(best))


@dataclass(frozen=True)
class KappaTailReport:
    u_grid: np.ndarray
    tails: dict  # delta -> empirical tail P(kappa >= u) on u_grid
    envelope: np.ndarray  # pointwise max over delta: the empirical g(u)
    spread: float  # sup over u of (max - min) across the delta groups


def kappa_tail_report(
    samples: Iterable[KappaSample] | Mapping[float, Sequence[float]],
    u_grid: Sequence[float],
) -> KappaTailReport:
    """Per-spacing empirical tails of kappa plus their envelope and spread.

    A small spread across spacings is the testable content of the tightness
    claim: the kappa distribution does not drift as delta shrinks.
    """
    u = np.asarray(u_grid, dtype=float)
    if isinstance(samples, Mapping):
        groups = {float(d): np.asarray(v, dtype=float) for d, v in samples.items()}
    else:
        groups = {}
        for s in samples:
            groups.setdefault(float(s.delta), []).append(s.kappa)
        groups = {d: np.asarray(v) for d, v in groups.items()}
    if any(len(v) == 0 for v in groups.values()):
        raise ValueError("empty kappa group")
    if len(groups) < 2:
        raise ValueError("need samples at >= 2 distinct spacings")
    tails = {d: (v[None, :] >= u[:, None]).mean(axis=1) for d, v in groups.items()}
    stacked = np.stack(list(tails.values()))
    envelope = stacked.max(axis=0)
    spread = float((stacked.max(axis=0) - stacked.min(axis=0)).max())
    return KappaTailReport(u, tails, envelope, spread)
