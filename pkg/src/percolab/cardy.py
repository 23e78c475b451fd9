"""Conformal crossing-probability oracle for rectangles.

Pipeline for a rectangle of aspect ratio r = width/height, crossed between
its two vertical sides:

1. Map the rectangle to the upper half-plane.  The Jacobi map sn(.; k)
   sends [-K, K] x [0, K'] to the half-plane with corners going to
   -1/k, -1, 1, 1/k, so the modulus k solves 2 K(k) / K'(k) = r.  K is
   computed by the arithmetic-geometric mean; k is found by bisection
   (the ratio is strictly increasing in k) to better than 1e-12: the
   tolerance is amplified by the eta^(1/3) prefactor at extreme aspects.

2. The cross-ratio of the four corner images is eta = ((1-k)/(1+k))^2.

3. Evaluate F(eta) = [Gamma(2/3)/(Gamma(1/3) Gamma(4/3))] * eta^(1/3)
   * 2F1(1/3, 2/3; 4/3; eta).  The Gauss series is summed directly for
   eta <= 1/2 (geometric-rate convergence there); for eta > 1/2 the
   reflection F(eta) = 1 - F(1 - eta) is used instead.

At aspect 1 the chain gives eta = 1/2 and F = 1/2 exactly: the crossing
event and its 90-degree rotation are exchangeable, which pins the symmetry
point, and the code returns it without round-off.
"""

from __future__ import annotations

import math

_PREFACTOR = math.gamma(2.0 / 3.0) / (math.gamma(1.0 / 3.0) * math.gamma(4.0 / 3.0))

_BISECTION_TOL = 1e-15  # eta -> F amplifies modulus error at extreme aspects
_SERIES_TOL = 1e-16
_SERIES_MAX_TERMS = 500


def ellipk_agm(m: float) -> float:
    """Complete elliptic integral K(m), parameter m = k^2, via the AGM."""
    if not 0.0 <= m < 1.0:
        raise ValueError(f"parameter must lie in [0, 1), got {m}")
    a, b = 1.0, math.sqrt(1.0 - m)
    # quadratic convergence: double precision is reached in < 10 rounds
    for _ in range(40):
        if abs(a - b) <= 4e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _aspect_ratio_of_modulus(k: float) -> float:
    return 2.0 * ellipk_agm(k * k) / ellipk_agm(1.0 - k * k)


def eta_from_aspect(aspect: float) -> float:
    """Conformal cross-ratio of the rectangle's corner images."""
    if aspect <= 0.0:
        raise ValueError(f"aspect ratio must be positive, got {aspect}")
    if aspect == 1.0:
        return 0.5
    lo, hi = 0.0, 1.0
    while hi - lo > _BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if _aspect_ratio_of_modulus(mid) < aspect:
            lo = mid
        else:
            hi = mid
    k = 0.5 * (lo + hi)
    return ((1.0 - k) / (1.0 + k)) ** 2


def hyp2f1_series(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric sum; callers must keep |z| away from 1."""
    term = 1.0
    total = 1.0
    for n in range(_SERIES_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (1.0 + n)) * z
        total += term
        if abs(term) < _SERIES_TOL * abs(total):
            return total
    raise ArithmeticError(f"hypergeometric series did not converge at z={z}")


def crossing_formula(eta: float) -> float:
    """F(eta): limiting crossing probability as a function of the cross-ratio."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"cross-ratio must lie in [0, 1], got {eta}")
    if eta == 0.5:
        return 0.5
    if eta > 0.5:
        return 1.0 - crossing_formula(1.0 - eta)
    return _PREFACTOR * eta ** (1.0 / 3.0) * hyp2f1_series(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, eta)


def cardy_crossing(aspect: float) -> float:
    """Predicted left-right crossing probability of an aspect-r rectangle
    in the scaling limit.

    Wide rectangles (aspect < 1) go through the exact 90-degree-rotation
    symmetry F(r) = 1 - F(1/r): the tall-rectangle branch has eta < 1/2,
    where the cross-ratio and the series are computed without the
    cancellation that evaluating eta near 1 would incur.
    """
    if aspect <= 0.0:
        raise ValueError(f"aspect ratio must be positive, got {aspect}")
    if aspect < 1.0:
        return 1.0 - cardy_crossing(1.0 / aspect)
    return crossing_formula(eta_from_aspect(aspect))
