# src/curves.py
"""Seeded piecewise-cubic curves x: [0, 1] -> R^n and the kink times of f along them."""
from __future__ import annotations
from dataclasses import replace
from fractions import Fraction
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from errors import DimensionError
from models import Affine, Curve, Segment, Stratum, Vector
from rational import ONE, ZERO, add, combine, dot, scale, to_sympy

logger = logging.getLogger(__name__)

Poly = List[Fraction]  # coefficients, lowest degree first
_U = sympy.Symbol("u")

ROOT_WIDTH = sympy.Rational(1, 2**52)
HERMITE_TANGENT_BOUND = Fraction(4, 27)  # max |h10|, |h11| on [0, 1]


# ---- polynomials over Fractions ---------------------------------------------------

def _trim(p: Sequence[Fraction]) -> Poly:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def poly_eval(p: Sequence, u):
    acc = 0
    for c in reversed(p):
        acc = acc * u + c
    return acc


def _strip_unit_endpoints(p: Poly) -> Poly:
    """Divide out every factor u and (u - 1); kink times at the knots are not interior."""
    while len(p) > 1 and p[0] == 0:
        p = p[1:]
    while len(p) > 1 and sum(p) == 0:
        # synthetic division by (u - 1)
        q = [ZERO] * (len(p) - 1)
        acc = ZERO
        for k in range(len(p) - 1, 0, -1):
            acc += p[k]
            q[k - 1] = acc
        p = _trim(q)
    return p


def roots_in_unit_interval(p: Sequence[Fraction]) -> List[float]:
    """Distinct real roots of p in the open interval (0, 1), isolated exactly and refined to ROOT_WIDTH."""
    p = _strip_unit_endpoints(_trim(p))
    if len(p) <= 1:
        return []
    if abs(p[0]) > sum(abs(c) for c in p[1:]):
        return []
    if len(p) == 2:
        r = -p[0] / p[1]
        return [float(r)] if 0 < r < 1 else []
    poly = sympy.Poly([to_sympy(c) for c in reversed(p)], _U, domain=sympy.QQ)
    found = poly.intervals(inf=0, sup=1, eps=ROOT_WIDTH)
    return sorted(float((a + b) / 2) for (a, b), _ in found)


# ---- curve construction ----------------------------------------------------------

def hermite_coeffs(v0: Fraction, v1: Fraction, m0: Fraction, m1: Fraction) -> Tuple[Fraction, ...]:
    """Power-basis coefficients in u of the cubic with values v0, v1 and u-derivatives m0, m1."""
    return (v0, m0, -3 * v0 - 2 * m0 + 3 * v1 - m1, 2 * v0 + m0 - 2 * v1 + m1)


def _rand(rng: np.random.Generator, bound: int, den: int = 1000) -> Fraction:
    return Fraction(int(rng.integers(-bound * den, bound * den + 1)), den)


def _dwell_data(s: Stratum, rng: np.random.Generator):
    """(v0, v1, m0, m1) in u-units of a cubic segment staying inside the relatively open stratum."""
    n = len(s.point)
    if s.dim == 0:
        zero = tuple(ZERO for _ in range(n))
        return s.point, s.point, zero, zero
    raw = [tuple(_rand(rng, 1) for _ in range(4)) for _ in s.tangent]
    size = [abs(a0) + abs(a1) + HERMITE_TANGENT_BOUND * (abs(m0) + abs(m1)) for a0, a1, m0, m1 in raw]
    factor = ONE
    for g, c in s.inequalities:
        bound = sum((sz * abs(dot(g, t)) for sz, t in zip(size, s.tangent)), ZERO)
        if bound > 0:
            margin = dot(g, s.point) + c
            factor = min(factor, margin / (2 * bound))
    coeff = [[factor * r[k] for r in raw] for k in range(4)]
    v0 = add(s.point, combine(coeff[0], s.tangent, n))
    v1 = add(s.point, combine(coeff[1], s.tangent, n))
    m0 = combine(coeff[2], s.tangent, n)
    m1 = combine(coeff[3], s.tangent, n)
    return v0, v1, m0, m1


def make_curve(n: int, seed: int, dwell: Optional[Stratum] = None, box: int = 2) -> Curve:
    """Seeded C^1 piecewise-cubic Hermite curve with 3 to 8 segments.

    With ``dwell``, one whole segment lies inside that stratum, built in its affine hull.
    """
    if dwell is not None and len(dwell.point) != n:
        raise DimensionError(f"dwell stratum lives in R^{len(dwell.point)}, curve in R^{n}")
    rng = np.random.default_rng(seed)
    nseg = int(rng.integers(3, 9))
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, 1000), size=nseg - 1, replace=False))
    knots = [ZERO] + [Fraction(c, 1000) for c in cuts] + [ONE]
    values = [tuple(_rand(rng, box) for _ in range(n)) for _ in knots]
    slopes = [tuple(_rand(rng, 3) for _ in range(n)) for _ in knots]  # d/dt
    dwell_at = None
    if dwell is not None:
        j = int(rng.integers(0, nseg))
        v0, v1, m0, m1 = _dwell_data(dwell, rng)
        h = knots[j + 1] - knots[j]
        values[j], values[j + 1] = v0, v1
        slopes[j], slopes[j + 1] = scale(1 / h, m0), scale(1 / h, m1)
        dwell_at = (j, dwell.sid)
    segments = []
    for j in range(nseg):
        t0, t1 = knots[j], knots[j + 1]
        h = t1 - t0
        coeffs = tuple(hermite_coeffs(values[j][d], values[j + 1][d], h * slopes[j][d], h * slopes[j + 1][d])
                       for d in range(n))
        segments.append(Segment(t0, t1, coeffs))
    return Curve(n, seed, tuple(segments), dwell_at)


def _segment_index(curve: Curve, t: Fraction) -> int:
    for j, seg in enumerate(curve.segments):
        if t <= seg.t1:
            return j
    return len(curve.segments) - 1


def position(curve: Curve, t) -> Vector:
    """Exact point x(t) for rational t."""
    t = Fraction(t)
    seg = curve.segments[_segment_index(curve, t)]
    u = (t - seg.t0) / (seg.t1 - seg.t0)
    return tuple(poly_eval(c, u) for c in seg.coeffs)


def velocity_fn(seg: Segment) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised x'(t) on one segment: array of t (shape (k,)) to shape (k, n)."""
    t0 = float(seg.t0)
    h = float(seg.t1 - seg.t0)
    derivs = [np.array([float(c[1]), 2.0 * float(c[2]), 3.0 * float(c[3])]) for c in seg.coeffs]

    def fn(t: np.ndarray) -> np.ndarray:
        u = (np.asarray(t, dtype=float) - t0) / h
        return np.stack([np.polynomial.polynomial.polyval(u, d) / h for d in derivs], axis=-1)

    return fn


def segment_poly(seg: Segment, h: Affine) -> Poly:
    """h(x(u)) on the segment as a cubic in u."""
    g, c = h
    coeffs = [sum((g[d] * seg.coeffs[d][k] for d in range(len(g))), ZERO) for k in range(4)]
    coeffs[0] += c
    return coeffs


def kink_times(curve: Curve, forms: Sequence[Affine]) -> Tuple[float, ...]:
    """Every t in (0, 1) where some kink-argument form changes sign along the curve."""
    times = set()
    for seg in curve.segments:
        t0, h = float(seg.t0), float(seg.t1 - seg.t0)
        for form in forms:
            p = _trim(segment_poly(seg, form))
            if not p:
                continue  # the segment dwells in this kink locus
            for u in roots_in_unit_interval(p):
                times.add(t0 + h * u)
    return tuple(sorted(times))


def with_kinks(curve: Curve, forms: Sequence[Affine]) -> Curve:
    return replace(curve, kink_times=kink_times(curve, forms))


def intervals(curve: Curve) -> List[Tuple[float, float, int]]:
    """Inter-kink intervals (a, b, segment index), split at segment knots and kink times."""
    out = []
    for j, seg in enumerate(curve.segments):
        a, b = float(seg.t0), float(seg.t1)
        cuts = [a] + [t for t in curve.kink_times if a < t < b] + [b]
        for lo, hi in zip(cuts, cuts[1:]):
            if hi > lo:
                out.append((lo, hi, j))
    return out
