"""Independent reference implementations used only by the tests.

Each oracle deliberately takes a different algorithmic route from the
library code it checks: sparse-graph connected components instead of
union-find, dynamic programming instead of the greedy cover, exhaustive
path enumeration instead of the wall follower, and regularized
incomplete-beta quadrature instead of the hypergeometric series.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import betainc, ellipk

from percolab.lattice import Configuration, LatticeKind
from percolab.web import expanded_matrix


def canonical_labels(config: Configuration) -> np.ndarray:
    """Per-site cluster labels (min flat site index; -1 for vacant sites)
    via scipy's connected components on the adjacency graph."""
    spec = config.spec
    n = spec.cols * spec.rows
    rows_idx, cols_idx = [], []

    def add(a, b):
        rows_idx.extend((a, b))
        cols_idx.extend((b, a))

    if spec.kind is LatticeKind.SITE:
        g = config.site_grid()
        for j in range(spec.rows):
            for i in range(spec.cols):
                if not g[j, i]:
                    continue
                if i + 1 < spec.cols and g[j, i + 1]:
                    add(j * spec.cols + i, j * spec.cols + i + 1)
                if j + 1 < spec.rows and g[j + 1, i]:
                    add(j * spec.cols + i, (j + 1) * spec.cols + i)
        active = g.ravel()
    else:
        e, nb = config.east_bonds(), config.north_bonds()
        for j in range(spec.rows):
            for i in range(spec.cols):
                if i + 1 < spec.cols and e[j, i]:
                    add(j * spec.cols + i, j * spec.cols + i + 1)
                if j + 1 < spec.rows and nb[j, i]:
                    add(j * spec.cols + i, (j + 1) * spec.cols + i)
        active = np.ones(n, dtype=bool)
    adj = sp.coo_matrix(
        (np.ones(len(rows_idx)), (rows_idx, cols_idx)), shape=(n, n)
    ).tocsr()
    _, comp = connected_components(adj, directed=False)
    labels = np.full(n, -1, dtype=np.int64)
    idx = np.arange(n)
    for c in np.unique(comp[active]):
        members = idx[(comp == c) & active]
        labels[members] = members.min()
    return labels


def dp_cover_count(points: np.ndarray, scale: float) -> int:
    """Minimal number of in-order subsegments of diameter <= scale covering
    the polyline vertices, consecutive subsegments sharing their split
    vertex.  O(n^2) dynamic program."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 1:
        return 1
    INF = n + 1
    best = [INF] * n
    best[0] = 0
    for j in range(1, n):
        hi = pts[j].copy()
        lo = pts[j].copy()
        for i in range(j - 1, -1, -1):
            hi = np.maximum(hi, pts[i])
            lo = np.minimum(lo, pts[i])
            if (hi - lo).max() > scale + 1e-12:
                break  # bbox side is a diameter lower bound: no shorter i works
            if np.linalg.norm(pts[i : j + 1, None, :] - pts[None, i : j + 1, :], axis=2).max() <= scale + 1e-12:
                best[j] = min(best[j], best[i] + 1)
    if best[-1] >= INF:
        raise ValueError("scale below lattice step")
    return best[-1]


def _crossing_paths(m: np.ndarray):
    """All self-avoiding open-cell paths from the left edge to the right
    edge of an expanded matrix (exponential; tiny grids only)."""
    h, w = m.shape
    paths = []

    def dfs(cell, path, seen):
        path.append(cell)
        if cell[1] == w - 1:
            paths.append(list(path))
        else:
            r, c = cell
            for dr, dc in ((0, 1), (1, 0), (-1, 0), (0, -1)):
                nxt = (r + dr, c + dc)
                if (
                    0 <= nxt[0] < h
                    and 0 <= nxt[1] < w
                    and m[nxt]
                    and nxt not in seen
                ):
                    seen.add(nxt)
                    dfs(nxt, path, seen)
                    seen.remove(nxt)
        path.pop()

    for r in range(h):
        if m[r, 0]:
            dfs((r, 0), [], {(r, 0)})
    return paths


def _territory_below(m: np.ndarray, path) -> frozenset:
    """Cells reachable from the bottom edge without entering the path."""
    h, w = m.shape
    blocked = set(path)
    seen = set()
    stack = [(0, c) for c in range(w) if (0, c) not in blocked]
    seen.update(stack)
    while stack:
        r, c = stack.pop()
        for dr, dc in ((0, 1), (1, 0), (-1, 0), (0, -1)):
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < h and 0 <= nxt[1] < w and nxt not in blocked and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return frozenset(seen)


def lowest_crossing_oracle(config: Configuration):
    """The inclusion-minimal below-territory crossing path, by exhaustion.

    Returns (cells, territory) of a crossing whose below-territory is a
    subset of every other crossing's, or None if there is no crossing.
    The library's wall-follower result must realize that same minimal
    territory.
    """
    m = expanded_matrix(config)
    paths = _crossing_paths(m)
    if not paths:
        return None
    terr = [_territory_below(m, p) for p in paths]
    order = sorted(range(len(paths)), key=lambda i: len(terr[i]))
    best = order[0]
    assert all(terr[best] <= t for t in terr), "territory order is not total here"
    return paths[best], terr[best]


def cardy_oracle(aspect: float) -> float:
    """Crossing probability via the regularized incomplete beta function
    I_eta(1/3, 1/3), with the cross-ratio from scipy's elliptic integrals."""

    def ratio(k):
        return 2.0 * ellipk(k * k) / ellipk(1.0 - k * k)

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < aspect:
            lo = mid
        else:
            hi = mid
    k = 0.5 * (lo + hi)
    eta = ((1.0 - k) / (1.0 + k)) ** 2
    return float(betainc(1.0 / 3.0, 1.0 / 3.0, eta))
