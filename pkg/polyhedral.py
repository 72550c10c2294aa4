# src/polyhedral.py
"""Polyhedral stratification of R^n induced by a piecewise-affine expression,
tangent and normal spaces, Clarke subdifferentials and exact membership tests."""
from __future__ import annotations
from collections import deque
from fractions import Fraction
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import StratificationLimitError
from expr import affine_at, kink_argument_form, kink_nodes, node_form, nodes, sign_pattern
from lp import linprog
from models import (Affine, Expr, Membership, NormalValue, Pattern, Point, Polytope,
                    Stratification, Stratum, Vector)
from rational import (ONE, ZERO, add, combine, dot, in_span, min_norm_point, norm_sq, nullspace,
                      project, row_basis, scale, solve, span_coefficients, sub, subspace_contains, zeros)

logger = logging.getLogger(__name__)

MAX_DIM = 4
MAX_PATTERNS = 100_000


# ---- exact feasibility ------------------------------------------------------------

def relative_interior_point(n: int, equalities: Sequence[Affine] = (), stricts: Sequence[Affine] = (),
                            closed: Sequence[Affine] = (),
                            box: Optional[Tuple[Sequence, Sequence]] = None) -> Optional[Point]:
    """A point with h = 0 on equalities, h > 0 on stricts and h >= 0 on closed, or None."""
    if not stricts and not closed and box is None:
        if not equalities:
            return zeros(n)
        sol = solve([list(g) for g, _ in equalities], [-c for _, c in equalities])
        return sol
    # variables (x, t): maximise t with h(x) >= t on the strict constraints, t <= 1
    cost = [ZERO] * n + [-ONE]
    a_ub, b_ub = [], []
    for g, c in stricts:
        a_ub.append([-gi for gi in g] + [ONE])
        b_ub.append(c)
    for g, c in closed:
        a_ub.append([-gi for gi in g] + [ZERO])
        b_ub.append(c)
    a_ub.append([ZERO] * n + [ONE])
    b_ub.append(ONE)
    if box is not None:
        lo, hi = box
        for k in range(n):
            row = [ZERO] * (n + 1)
            row[k] = ONE
            a_ub.append(row)
            b_ub.append(Fraction(hi[k]))
            row = [ZERO] * (n + 1)
            row[k] = -ONE
            a_ub.append(row)
            b_ub.append(-Fraction(lo[k]))
    a_eq = [list(g) + [ZERO] for g, _ in equalities]
    b_eq = [-c for _, c in equalities]
    res = linprog(cost, a_ub, b_ub, a_eq, b_eq)
    if res.status != "optimal":
        return None
    if stricts and res.x[n] <= 0:
        return None
    return tuple(res.x[:n])


def _negate(h: Affine) -> Affine:
    return tuple(-g for g in h[0]), -h[1]


def canonical_form(h: Affine) -> Tuple[Optional[tuple], int]:
    """(key shared by all nonzero multiples of h, sign of the leading coefficient)."""
    g, c = h
    lead = next((gi for gi in g if gi != 0), None)
    if lead is None:
        return None, 0
    return (tuple(gi / lead for gi in g), c / lead), (1 if lead > 0 else -1)


def _forced_sign(h: Affine, seen: Dict[tuple, Tuple[int, int]]) -> Optional[int]:
    key, lead = canonical_form(h)
    if key is None:
        c = h[1]
        return (c > 0) - (c < 0)
    if key in seen:
        prev_sign, prev_lead = seen[key]
        return prev_sign * prev_lead * lead
    return None


# ---- stratification -------------------------------------------------------------

def stratify(e: Expr, max_patterns: int = MAX_PATTERNS) -> Stratification:
    """Enumerate activation sign-vectors breadth-first, one kink node per level;
    each feasible vector is a relatively open cell on which f is affine."""
    n = e.dim
    if n > MAX_DIM:
        raise StratificationLimitError(f"stratification supports n <= {MAX_DIM}, got n = {n}")
    order = nodes(e)
    kinks = kink_nodes(e)
    leaves = []
    checks = 0
    queue = deque([(0, {}, (), (), (), {}, zeros(n))])
    while queue:
        pos, forms, signs, eqs, stricts, seen, witness = queue.popleft()
        while pos < len(order) and not order[pos].is_kink:
            node = order[pos]
            forms[node.nid] = node_form(node, forms)
            pos += 1
        if pos == len(order):
            leaves.append((signs, eqs, stricts, witness, forms[e.nid]))
            continue
        node = order[pos]
        kink = kinks[len(signs)]
        h = kink_argument_form(kink, forms)
        forced = _forced_sign(h, seen)
        if forced is not None:
            options = [(forced, eqs, stricts, witness)]
        else:
            options = []
            for s in (-1, 0, 1):
                checks += 1
                if checks > max_patterns:
                    raise StratificationLimitError(f"more than {max_patterns} candidate patterns")
                if s == 0:
                    cand_eqs, cand_stricts = eqs + (h,), stricts
                else:
                    cand_eqs, cand_stricts = eqs, stricts + ((h if s > 0 else _negate(h)),)
                w = relative_interior_point(n, cand_eqs, cand_stricts)
                if w is not None:
                    options.append((s, cand_eqs, cand_stricts, w))
        key, lead = canonical_form(h)
        for s, cand_eqs, cand_stricts, w in options:
            next_forms = dict(forms)
            next_forms[node.nid] = node_form(node, forms, s)
            next_seen = seen if key is None or key in seen else {**seen, key: (s, lead)}
            queue.append((pos + 1, next_forms, signs + (s,), cand_eqs, cand_stricts, next_seen, w))

    cells = []
    for signs, eqs, stricts, witness, (g, c) in leaves:
        grads = [h[0] for h in eqs]
        normal = row_basis(grads, n)
        tangent = nullspace(grads, n)
        if normal:
            # the branch form is one of many that agree on the cell; keep its tangential part
            along = project(g, tangent)
            g, c = along, c + dot(sub(g, along), witness)
        cells.append((n - len(normal), signs, eqs, stricts, witness, normal, tangent, g, c))
    cells.sort(key=lambda cell: (cell[0], cell[1]))
    strata = []
    for sid, (d, signs, eqs, stricts, witness, normal, tangent, g, c) in enumerate(cells):
        strata.append(Stratum(sid=sid, signs=signs, dim=d, point=tuple(witness), tangent=tangent,
                              normal=normal, equalities=eqs, inequalities=stricts, gradient=g, offset=c))
    result = Stratification(e, kinks, strata, {s.signs: s.sid for s in strata})
    for sub_id, sup_id in incidence(result):
        result[sup_id].boundary.append(sub_id)
        result[sub_id].closure_of.append(sup_id)
    logger.info("stratified dim-%d function: %d kinks, %d strata, %d feasibility checks",
                n, len(kinks), len(strata), checks)
    return result


def refines(sub_signs: Pattern, sup_signs: Pattern) -> bool:
    return all(a == 0 or a == b for a, b in zip(sub_signs, sup_signs))


def closure_contains_point(s: Stratum, x: Sequence) -> bool:
    return (all(affine_at(h, x) == 0 for h in s.equalities)
            and all(affine_at(h, x) >= 0 for h in s.inequalities))


def contained_in_closure(inner: Stratum, outer: Stratum) -> bool:
    """Exact test of inner ⊂ cl(outer)."""
    if inner.sid == outer.sid:
        return True
    if inner.dim >= outer.dim or not refines(inner.signs, outer.signs):
        return False
    if not closure_contains_point(outer, inner.point):
        return False
    n = len(inner.point)
    for g, _ in outer.equalities:
        if any(dot(g, t) != 0 for t in inner.tangent):
            return False
    closed_inner = [(g, c) for g, c in inner.inequalities]
    a_ub = [[-gi for gi in g] for g, _ in closed_inner]
    b_ub = [c for _, c in closed_inner]
    a_eq = [list(g) for g, _ in inner.equalities]
    b_eq = [-c for _, c in inner.equalities]
    for g, c in outer.inequalities:
        if all(dot(g, t) == 0 for t in inner.tangent):
            continue  # constant on aff(inner), already checked at the witness
        res = linprog(list(g), a_ub, b_ub, a_eq, b_eq)
        if res.status != "optimal" or res.value + c < 0:
            return False
    return True


def incidence(strata: Stratification) -> List[Tuple[int, int]]:
    """All pairs (M', M) of distinct strata with M' ⊂ cl M."""
    pairs = []
    for inner in strata:
        for outer in strata:
            if contained_in_closure(inner, outer) and inner.sid != outer.sid:
                pairs.append((inner.sid, outer.sid))
    return pairs


def frontier_violations(strata: Stratification) -> List[Tuple[int, int]]:
    """Pairs (M', M) where M' meets cl M without being contained in it."""
    out = []
    n = strata.dim
    for inner in strata:
        for outer in strata:
            if inner.sid == outer.sid or not refines(inner.signs, outer.signs):
                continue
            meets = relative_interior_point(n, inner.equalities + outer.equalities,
                                            inner.inequalities, closed=outer.inequalities) is not None
            if meets and not contained_in_closure(inner, outer):
                out.append((inner.sid, outer.sid))
    return out


def normals_monotone(strata: Stratification) -> List[Tuple[int, int]]:
    """Incident pairs (M', M) violating N_M ⊂ N_M' (expected empty)."""
    bad = []
    for inner_id, outer_id in incidence(strata):
        if not subspace_contains(strata[outer_id].normal, strata[inner_id].normal):
            bad.append((inner_id, outer_id))
    return bad


def locate(strata: Stratification, x: Sequence) -> Stratum:
    signs = sign_pattern(strata.expr, x)
    return strata[strata.by_signs[signs]]


def normal_operator(strata: Stratification, x: Sequence, r=None) -> NormalValue:
    if r is not None and Fraction(r) <= 0:
        raise ValueError(f"truncation radius must be positive, got {r}")
    s = locate(strata, x)
    return NormalValue(s.sid, s.normal, Fraction(r) if r is not None else None, strata.dim)


def riemannian_gradient(s: Stratum) -> Vector:
    return project(s.gradient, s.tangent)


# ---- polytopes -------------------------------------------------------------------

def canonical_polytope(points: Sequence[Vector]) -> Polytope:
    """Distinct extreme points, sorted."""
    current = sorted({tuple(p) for p in points})
    i = 0
    while i < len(current):
        others = current[:i] + current[i + 1:]
        if others and member_sum(current[i], Polytope(tuple(others)),
                                 NormalValue(-1, (), None, len(current[i]))).member:
            current = others
        else:
            i += 1
    return Polytope(tuple(current))


def limiting_gradients(e: Expr, strata: Stratification, x: Sequence) -> List[Vector]:
    """Gradients of the full-dimensional strata whose closure contains x, sorted and distinct."""
    n = e.dim
    signs = sign_pattern(e, x)
    here = strata[strata.by_signs[signs]]
    if here.dim == n:
        return [here.gradient]
    return sorted({s.gradient for s in strata
                   if s.dim == n and refines(signs, s.signs) and closure_contains_point(s, x)})


def clarke(e: Expr, strata: Stratification, x: Sequence) -> Polytope:
    """conv of the gradients of the full-dimensional strata whose closure contains x."""
    return canonical_polytope(limiting_gradients(e, strata, x))


def tangential_consistency(e: Expr, strata: Stratification, x: Sequence) -> bool:
    """Every Clarke vertex at x has tangential part equal to the Riemannian gradient."""
    s = locate(strata, x)
    target = riemannian_gradient(s)
    return all(project(v, s.tangent) == target for v in clarke(e, strata, x).vertices)


def _separator(g: Vector, p: Polytope, basis: Sequence[Vector]) -> Tuple[Vector, Fraction]:
    """w in N-perp with |w|_inf <= 1 maximising <w, g> - max_i <w, v_i>."""
    n = len(g)
    cost = [-gi for gi in g] + [ONE]
    a_ub, b_ub = [], []
    for v in p.vertices:
        a_ub.append(list(v) + [-ONE])
        b_ub.append(ZERO)
    for k in range(n):
        row = [ZERO] * (n + 1)
        row[k] = ONE
        a_ub.append(row)
        b_ub.append(ONE)
        row = [ZERO] * (n + 1)
        row[k] = -ONE
        a_ub.append(row)
        b_ub.append(ONE)
    a_eq = [list(nu) + [ZERO] for nu in basis]
    b_eq = [ZERO] * len(basis)
    res = linprog(cost, a_ub, b_ub, a_eq, b_eq)
    return tuple(res.x[:n]), -res.value


def min_normal_part(g: Vector, p: Polytope, basis: Sequence[Vector]) -> Optional[Tuple[Vector, Vector]]:
    """Shortest nu in span(basis) with g - nu in P, as (nu, convex weights), when every
    vertex of P has the same component orthogonal to the span; None otherwise."""
    tangential = {sub(v, project(v, basis)) for v in p.vertices}
    if len(tangential) != 1:
        return None
    if sub(g, project(g, basis)) not in tangential:
        return None
    pg = project(g, basis)
    q, weights = min_norm_point([sub(pg, project(v, basis)) for v in p.vertices])
    return q, weights


def member_sum(g: Sequence, p: Polytope, nv: NormalValue) -> Membership:
    """Decide g ∈ P + N (or P + N ∩ rB when nv is truncated) exactly, with a certificate."""
    g = tuple(Fraction(v) for v in g)
    n = len(g)
    m, k = len(p.vertices), len(nv.basis)
    cost = [ZERO] * (m + k)
    a_eq = []
    for d in range(n):
        a_eq.append([v[d] for v in p.vertices] + [nu[d] for nu in nv.basis])
    a_eq.append([ONE] * m + [ZERO] * k)
    b_eq = list(g) + [ONE]
    res = linprog(cost, (), (), a_eq, b_eq, nonneg=[True] * m + [False] * k)
    if res.status != "optimal":
        w, margin = _separator(g, p, nv.basis)
        return Membership(False, separator=w, margin=margin)
    weights, coeffs = tuple(res.x[:m]), tuple(res.x[m:])
    if nv.radius is None:
        return Membership(True, weights, coeffs)
    if not nv.basis:
        return Membership(True, weights, coeffs, normal_norm_sq=ZERO)
    found = min_normal_part(g, p, nv.basis)
    if found is None:
        raise ValueError("truncated membership needs a polytope with one tangential component")
    q, weights = found
    nsq = norm_sq(q)
    coeffs = span_coefficients(q, nv.basis) or ()
    return Membership(nsq <= nv.radius * nv.radius, weights, coeffs, normal_norm_sq=nsq)


# ---- sampling and lookup ---------------------------------------------------------

def _rand_fraction(rng: np.random.Generator, lo: int, hi: int, den: int = 1000) -> Fraction:
    return Fraction(int(rng.integers(lo, hi + 1)), den)


def sample_point(s: Stratum, rng: np.random.Generator) -> Point:
    """Exact rational point of the relative interior of s."""
    if s.dim == 0:
        return s.point
    n = len(s.point)
    d = combine([_rand_fraction(rng, -1000, 1000) for _ in s.tangent], s.tangent, n)
    limit = ONE
    for h in s.inequalities:
        slope = dot(h[0], d)
        if slope < 0:
            limit = min(limit, affine_at(h, s.point) / -slope)
    return add(s.point, scale(_rand_fraction(rng, 1, 999) * limit, d))


def point_in_box(s: Stratum, lo: Sequence, hi: Sequence) -> Optional[Point]:
    return relative_interior_point(len(s.point), s.equalities, s.inequalities, box=(lo, hi))


def strata_meeting_box(strata: Stratification, lo: Sequence, hi: Sequence,
                       closed: bool = False, full_only: bool = False) -> List[Tuple[Stratum, Point]]:
    out = []
    n = strata.dim
    for s in strata:
        if full_only and s.dim != n:
            continue
        if closed:
            pt = relative_interior_point(n, s.equalities, (), closed=s.inequalities, box=(lo, hi))
        else:
            pt = point_in_box(s, lo, hi)
        if pt is not None:
            out.append((s, pt))
    return out


def whitney_probe(strata: Stratification, outer: Stratum, inner: Stratum,
                  trials: int = 20, seed: int = 0) -> dict:
    """Sample x_r in M converging to x in M' with normals y_r in N_M; check the limit lies in N_M'."""
    report = {"outer": outer.sid, "inner": inner.sid, "trials": 0, "failures": 0, "vacuous": False}
    if inner.sid == outer.sid or not contained_in_closure(inner, outer):
        report["vacuous"] = True
        return report
    rng = np.random.default_rng([seed, outer.sid, inner.sid])
    n = strata.dim
    for _ in range(trials):
        x = sample_point(inner, rng)
        toward = sub(outer.point, x)
        y = combine([_rand_fraction(rng, -1000, 1000) for _ in outer.normal], outer.normal, n)
        ok = True
        for r in (1, 10, 1000, 10**6):
            xr = add(x, scale(Fraction(1, r), toward))
            if locate(strata, xr).sid != outer.sid:
                ok = False
        # normal spaces of polyhedral strata are constant, so y_r = y and the limit is y
        if not in_span(y, inner.normal):
            ok = False
        report["trials"] += 1
        report["failures"] += 0 if ok else 1
    return report
