# src/rational.py
"""Exact linear algebra over Fractions, with elimination done on sympy matrices,
and Wolfe's minimum-norm-point algorithm for convex hulls of finitely many points."""
from __future__ import annotations
from fractions import Fraction
from math import isqrt
from typing import List, Optional, Sequence, Tuple

import sympy

from models import Vector

ZERO = Fraction(0)
ONE = Fraction(1)


def to_fraction(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, str):
        return Fraction(text.strip())
    return Fraction(text)


def zeros(n: int) -> Vector:
    return tuple(ZERO for _ in range(n))


def unit(n: int, i: int) -> Vector:
    return tuple(ONE if k == i else ZERO for k in range(n))


def dot(u: Sequence, v: Sequence):
    return sum((a * b for a, b in zip(u, v)), ZERO)


def add(u: Sequence, v: Sequence) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def sub(u: Sequence, v: Sequence) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def scale(c, u: Sequence) -> Vector:
    return tuple(c * a for a in u)


def norm_sq(u: Sequence) -> Fraction:
    return dot(u, u)


def combine(coeffs: Sequence, vectors: Sequence[Sequence], n: int) -> Vector:
    out = [ZERO] * n
    for c, v in zip(coeffs, vectors):
        if c:
            for k in range(n):
                out[k] += c * v[k]
    return tuple(out)


def sqrt_upper(q: Fraction, denominator: int = 10**6) -> Fraction:
    """Smallest multiple of 1/denominator that is >= sqrt(q)."""
    if q <= 0:
        return ZERO
    scaled = q * denominator * denominator
    root = isqrt(scaled.numerator // scaled.denominator)
    while Fraction(root * root) < scaled:
        root += 1
    return Fraction(root, denominator)


# ---- elimination -------------------------------------------------------------

def to_sympy(q) -> sympy.Rational:
    q = Fraction(q)
    return sympy.Rational(q.numerator, q.denominator)


def from_sympy(r) -> Fraction:
    return Fraction(int(r.p), int(r.q))


def _matrix(rows: Sequence[Sequence], ncols: int) -> sympy.Matrix:
    return sympy.Matrix(len(rows), ncols, lambda i, j: to_sympy(rows[i][j]))


def rref(rows: Sequence[Sequence[Fraction]], ncols: int) -> Tuple[List[List[Fraction]], List[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    if not rows:
        return [], []
    reduced, pivots = _matrix(rows, ncols).rref()
    return [[from_sympy(v) for v in reduced.row(i)] for i in range(len(pivots))], list(pivots)


def row_basis(rows: Sequence[Sequence[Fraction]], ncols: int) -> Tuple[Vector, ...]:
    reduced, _ = rref(rows, ncols)
    return tuple(tuple(r) for r in reduced)


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> Tuple[Vector, ...]:
    """Null space basis, one vector per free column with a 1 in that column."""
    if not rows:
        return tuple(unit(ncols, k) for k in range(ncols))
    return tuple(tuple(from_sympy(c) for c in col) for col in _matrix(rows, ncols).nullspace())


def solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Optional[Vector]:
    """One solution of a x = b (free variables set to zero), or None if inconsistent."""
    if not a:
        return None if any(b) else ()
    ncols = len(a[0])
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    reduced, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [ZERO] * ncols
    for row, pc in zip(reduced, pivots):
        x[pc] = row[ncols]
    return tuple(x)


def span_coefficients(v: Sequence[Fraction], basis: Sequence[Vector]) -> Optional[Vector]:
    """Coefficients c with sum c_j basis_j = v, or None when v is outside the span."""
    n = len(v)
    if not basis:
        return () if not any(v) else None
    a = [[basis[j][i] for j in range(len(basis))] for i in range(n)]
    return solve(a, list(v))


def in_span(v: Sequence[Fraction], basis: Sequence[Vector]) -> bool:
    return span_coefficients(v, basis) is not None


def project(v: Sequence[Fraction], basis: Sequence[Vector]) -> Vector:
    """Orthogonal projection of v onto span(basis); the basis must be independent."""
    n = len(v)
    if not basis:
        return zeros(n)
    b = _matrix(basis, n).T
    coeffs = (b.T * b).LUsolve(b.T * _matrix([v], n).T)
    return tuple(from_sympy(c) for c in b * coeffs)


def subspace_contains(inner: Sequence[Vector], outer: Sequence[Vector]) -> bool:
    return all(in_span(v, outer) for v in inner)


# ---- minimum-norm point ----------------------------------------------------------

def _affine_min_norm(points: List[Vector]) -> Vector:
    """Weights (summing to one) of the min-norm point of the affine hull of affinely independent points."""
    k = len(points)
    a = [[dot(p, q) for q in points] + [ONE] for p in points]
    a.append([ONE] * k + [ZERO])
    b = [ZERO] * k + [ONE]
    sol = solve(a, b)
    return sol[:k]


def min_norm_point(points: Sequence[Vector]) -> Tuple[Vector, Vector]:
    """Exact Wolfe algorithm: (closest point of conv(points) to the origin, convex weights)."""
    pts = [tuple(p) for p in points]
    if not pts:
        raise ValueError("min_norm_point needs at least one point")
    n = len(pts[0])
    start = min(range(len(pts)), key=lambda i: (norm_sq(pts[i]), i))
    active = [start]
    weights = {start: ONE}
    x = pts[start]
    for _ in range(10 * len(pts) + 50):
        j = min(range(len(pts)), key=lambda i: (dot(x, pts[i]), i))
        if dot(x, x) <= dot(x, pts[j]) or j in active:
            break
        active.append(j)
        weights[j] = ZERO
        while True:
            alpha = _affine_min_norm([pts[i] for i in active])
            if all(a > 0 for a in alpha):
                weights = dict(zip(active, alpha))
                x = combine(alpha, [pts[i] for i in active], n)
                break
            theta = min(weights[i] / (weights[i] - a)
                        for i, a in zip(active, alpha) if a <= 0 and weights[i] - a != 0)
            weights = {i: theta * a + (1 - theta) * weights[i] for i, a in zip(active, alpha)}
            active = [i for i in active if weights[i] > 0]
            weights = {i: weights[i] for i in active}
            x = combine([weights[i] for i in active], [pts[i] for i in active], n)
    full = tuple(weights.get(i, ZERO) for i in range(len(pts)))
    return x, full
