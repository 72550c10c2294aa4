# src/verifier.py
"""Empirical certification of conservativity along curves, plus pointwise structure checks."""
from __future__ import annotations
from fractions import Fraction
import logging
import math
import os
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import joblib
import numpy as np

from curves import intervals, make_curve, position, velocity_fn, with_kinks
from engine import Engine
from errors import ConfigError, QuadratureError
from fields import UNTRUNCATED_SCALE, draw, field_values, selection_pool
from models import ChainRuleReport, Curve, FieldSpec, NormalValue, Point, Polytope, Stratum, SuiteReport, Vector
from polyhedral import (canonical_polytope, frontier_violations, incidence, min_normal_part, member_sum,
                        normals_monotone, sample_point, strata_meeting_box, whitney_probe)
from quadrature import GaussLegendre
from rational import add, dot, norm_sq, scale, sub

logger = logging.getLogger(__name__)

TOL_ABS = 1e-8
TOL_REL = 1e-8
QUAD_TOL = 1e-10
GRAPH_LIMIT_STEPS = (10, 1000, 10**6)


def trial_seed(seed: int, index: int) -> int:
    """Per-trial seed derived from (master seed, trial index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _run_chunk(fn: Callable, context: dict, part: Sequence) -> List:
    return [fn(context, item) for item in part]


def parallel_map(fn: Callable, items: Sequence, context: dict, workers: int = 1) -> List:
    """Ordered map of ``fn(context, item)`` over independent trials.

    ``fn`` must be a module-level function. Items go to worker processes in contiguous
    chunks, so the context is pickled once per chunk; ``workers`` 0 means one per CPU.
    """
    workers = min(workers or os.cpu_count() or 1, len(items))
    if workers <= 1:
        return _run_chunk(fn, context, items)
    size = -(-len(items) // (4 * workers))
    parts = [items[i:i + size] for i in range(0, len(items), size)]
    results = joblib.Parallel(n_jobs=workers)(joblib.delayed(_run_chunk)(fn, context, part) for part in parts)
    return [r for part in results for r in part]


def _box(n: int, half_width) -> Tuple[Point, Point]:
    b = Fraction(half_width)
    if b <= 0:
        raise ConfigError(f"box half-width must be positive, got {b}")
    return tuple(-b for _ in range(n)), tuple(b for _ in range(n))


def _floats(v: Vector) -> np.ndarray:
    return np.array([float(c) for c in v])


# ---- chain rule along one curve ---------------------------------------------------

def verify_chain_rule(engine: Engine, field: FieldSpec, curve: Curve, selections: int = 4, seed: int = 0,
                      tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL,
                      quad_tol: float = QUAD_TOL) -> ChainRuleReport:
    """Compare f(x(1)) - f(x(0)) with the integral of <x'(t), g(x(t))> for seeded selections g.

    Selections are constant on every inter-kink interval; the integral is computed
    separately on each interval.
    """
    curve = with_kinks(curve, engine.kink_forms())
    increment = engine.value(position(curve, 1)) - engine.value(position(curve, 0))
    tolerance = max(tol_abs, tol_rel * abs(float(increment)))
    report = ChainRuleReport(curve_seed=curve.seed, increment=increment, tolerance=tolerance)
    pieces = intervals(curve)
    report.intervals = len(pieces)
    pools = []
    for a, b, j in pieces:
        mid = (Fraction(a) + Fraction(b)) / 2
        pools.append((a, b, j, selection_pool(engine, field, position(curve, mid))))
    velocities = [velocity_fn(seg) for seg in curve.segments]
    quad = GaussLegendre(tol=quad_tol)
    for k in range(selections):
        rng = np.random.default_rng([seed, curve.seed, k])
        total, err = 0.0, 0.0
        for a, b, j, pool in pools:
            g = draw(pool, engine.dim, rng)
            if g is None:
                report.error = f"field is empty on [{a:.17g}, {b:.17g}]"
                return report
            gf = _floats(g)
            vel = velocities[j]
            try:
                value, e = quad.integrate(lambda t: vel(t) @ gf, a, b)
            except QuadratureError as exc:
                report.error = str(exc)
                report.quad_error = exc.error or 0.0
                return report
            total += value
            err += e
        report.integrals.append(total)
        report.residuals.append(abs(total - float(increment)))
        report.quad_error = max(report.quad_error, err)
    report.worst_residual = max(report.residuals, default=0.0)
    report.passed = report.worst_residual <= tolerance
    return report


def dwell_orthogonal(curve: Curve, s: Stratum) -> bool:
    """Exact check that x'(t) is orthogonal to every normal generator of s on the dwell segment."""
    if curve.dwell is None:
        return True
    seg = curve.segments[curve.dwell[0]]
    for nu in s.normal:
        for k in (1, 2, 3):
            if sum((nu[d] * seg.coeffs[d][k] for d in range(len(nu))), Fraction(0)) != 0:
                return False
    return True


def _curve_item(index: int, curve: Curve, rep: ChainRuleReport) -> dict:
    return {
        "trial": index,
        "curve_seed": curve.seed,
        "segments": len(curve.segments),
        "dwell_stratum": curve.dwell[1] if curve.dwell else None,
        "intervals": rep.intervals,
        "increment": rep.increment,
        "integrals": rep.integrals,
        "worst_residual": rep.worst_residual,
        "quad_error": rep.quad_error,
        "tolerance": rep.tolerance,
        "verdict": rep.verdict,
        "error": rep.error,
    }


def _curve_trial(ctx: dict, entry: Tuple[int, Optional[Stratum]]) -> dict:
    index, stratum = entry
    curve = make_curve(ctx["engine"].dim, trial_seed(ctx["seed"], index), dwell=stratum)
    rep = verify_chain_rule(ctx["engine"], ctx["field"], curve, ctx["selections"], ctx["seed"],
                            ctx["tol_abs"], ctx["tol_rel"], ctx["quad_tol"])
    item = _curve_item(index, curve, rep)
    if stratum is not None:
        item["dwell_orthogonal"] = dwell_orthogonal(curve, stratum)
    return item


def verify_curves(engine: Engine, field: FieldSpec, curves: int = 20, selections: int = 4, seed: int = 0,
                  dwell: bool = False, tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL,
                  quad_tol: float = QUAD_TOL, workers: int = 1, name: str = "chain") -> SuiteReport:
    """verify_chain_rule over seeded random curves, plus one dwell curve per lower-dimensional
    stratum when ``dwell`` is set."""
    engine.kink_forms()  # build shared caches before fanning out
    n = engine.dim
    plan: List[Tuple[int, Optional[Stratum]]] = [(i, None) for i in range(curves)]
    if dwell:
        lower = [s for s in engine.strata if s.dim < n]
        plan += [(curves + j, s) for j, s in enumerate(lower)]
    context = {"engine": engine, "field": field, "selections": selections, "seed": seed,
               "tol_abs": tol_abs, "tol_rel": tol_rel, "quad_tol": quad_tol}
    items = parallel_map(_curve_trial, plan, context, workers)
    failures = [it for it in items if it["verdict"] != "PASS" or it.get("dwell_orthogonal") is False]
    summary = {
        "field": field.label,
        "curves": len(items),
        "dwell_curves": len(plan) - curves,
        "selections": selections,
        "failures": len(failures),
        "errors": sum(1 for it in items if it["verdict"] == "ERROR"),
        "worst_residual": max((it["worst_residual"] for it in items), default=0.0),
    }
    logger.info("%s on %s: %d/%d curves pass", name, field.label, len(items) - len(failures), len(items))
    return SuiteReport(name, not failures, items, summary)


def verify_conservative_sum(engine: Engine, r, curves: int = 20, selections: int = 4, seed: int = 0,
                            tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL, quad_tol: float = QUAD_TOL,
                            workers: int = 1) -> SuiteReport:
    """Chain rule for the Clarke subdifferential plus the truncated normal operator, with dwell
    curves in every lower-dimensional stratum."""
    field = FieldSpec.clarke_plus_normal(Fraction(r))
    return verify_curves(engine, field, curves, selections, seed, True, tol_abs, tol_rel, quad_tol,
                         workers, name="sum")


# ---- pointwise structure ---------------------------------------------------------

def _normal_for(engine: Engine, field: FieldSpec, x: Sequence) -> NormalValue:
    return engine.normal(x, field.radius if field.kind == "clarke+truncated-normal" else None)


def sampling_plan(engine: Engine, points: Iterable[Sequence] = (), random_points: int = 100,
                  seed: int = 0, box=2) -> List[Tuple[str, Point]]:
    """Witness and one sampled interior point of every stratum, user points, then random points."""
    rng = np.random.default_rng([seed, 1])
    plan: List[Tuple[str, Point]] = []
    for s in engine.strata:
        plan.append((f"witness:{s.sid}", s.point))
        plan.append((f"sample:{s.sid}", sample_point(s, rng)))
    for x in points:
        plan.append(("user", engine.point(x)))
    b = int(Fraction(box) * 1000)
    for _ in range(random_points):
        plan.append(("random", tuple(Fraction(int(rng.integers(-b, b + 1)), 1000) for _ in range(engine.dim))))
    return plan


def _inclusion_check(ctx: dict, entry: Tuple[str, Point]) -> Tuple[int, List[dict]]:
    engine, field = ctx["engine"], ctx["field"]
    origin, x = entry
    values = field_values(engine, field, x)
    out = []
    if not values:
        out.append({"origin": origin, "point": x, "value": None, "reason": "empty"})
    hull = engine.clarke(x)
    nv = _normal_for(engine, field, x)
    for g in values:
        m = member_sum(g, hull, nv)
        if not m.member:
            out.append({"origin": origin, "point": x, "value": g, "separator": m.separator,
                        "margin": m.margin, "normal_norm_sq": m.normal_norm_sq,
                        "reason": "outside"})
    return len(values), out


def verify_structure_inclusion(engine: Engine, field: FieldSpec, points: Iterable[Sequence] = (),
                               random_points: int = 100, seed: int = 0, box=2,
                               workers: int = 1) -> SuiteReport:
    """Every finitely represented value g of the field at every sampled x satisfies
    g ∈ ∂f(x) + N(x); violations carry the separating functional."""
    plan = sampling_plan(engine, points, random_points, seed, box)
    results = parallel_map(_inclusion_check, plan, {"engine": engine, "field": field}, workers)
    violations = [v for _, vs in results for v in vs]
    summary = {"field": field.label, "points": len(plan), "values": sum(c for c, _ in results),
               "violations": len(violations)}
    logger.info("inclusion on %s: %d points, %d violations", field.label, len(plan), len(violations))
    return SuiteReport("inclusion", not violations, violations, summary)


def _in_closed_value(engine: Engine, field: FieldSpec, g: Vector, x: Sequence) -> bool:
    if field.kind in ("policy", "custom"):
        return g in field_values(engine, field, x)
    if field.kind == "clarke":
        return member_sum(g, engine.clarke(x), NormalValue(-1, (), None, engine.dim)).member
    radius = field.radius if field.kind == "clarke+truncated-normal" else UNTRUNCATED_SCALE
    return member_sum(g, engine.clarke(x), engine.normal(x, radius)).member


def check_field_regularity(engine: Engine, field: FieldSpec, box=2) -> SuiteReport:
    """Nonempty values, a finite bound over the box, and graph-limit tests of closedness
    across every incident stratum pair meeting the box."""
    n = engine.dim
    lo, hi = _box(n, box)
    meeting = strata_meeting_box(engine.strata, lo, hi)
    items: List[dict] = []
    empty = []
    bound_sq = Fraction(0)
    for s, x in meeting:
        values = field_values(engine, field, x) if field.kind in ("policy", "custom") \
            else list(engine.clarke(x).vertices)
        if not values:
            empty.append(s.sid)
            continue
        bound_sq = max([bound_sq] + [norm_sq(g) for g in values])
    bound = math.sqrt(float(bound_sq))
    lower = [s.sid for s, _ in meeting if s.dim < n]
    locally_bounded = True
    if field.kind == "clarke+truncated-normal" and lower:
        bound += float(field.radius)
    elif field.kind == "clarke+normal" and lower:
        locally_bounded = False
        items.append({"check": "local_boundedness", "strata": lower,
                      "reason": "normal space is a nonzero subspace, values unbounded"})
    for sid in empty:
        items.append({"check": "nonempty", "stratum": sid, "reason": "empty value"})
    in_box = {s.sid: x for s, x in meeting}
    closed_failures = 0
    tested = 0
    for inner_id, outer_id in incidence(engine.strata):
        if inner_id not in in_box:
            continue
        x = in_box[inner_id]
        toward = sub(engine.strata[outer_id].point, x)
        for r in GRAPH_LIMIT_STEPS:
            xr = add(x, scale(Fraction(1, r), toward))
            for g in field_values(engine, field, xr):
                tested += 1
                if not _in_closed_value(engine, field, g, x):
                    closed_failures += 1
                    items.append({"check": "closedness", "inner": inner_id, "outer": outer_id,
                                  "point": xr, "limit": x, "value": g})
    control = None
    if field.kind == "clarke+truncated-normal":
        control = not lower  # the untruncated operator is bounded only without lower strata
    summary = {
        "field": field.label,
        "box": [list(lo), list(hi)],
        "strata_in_box": len(meeting),
        "bound": bound if locally_bounded else None,
        "bound_sq_clarke": bound_sq,
        "locally_bounded": locally_bounded,
        "graph_limit_tests": tested,
        "closedness_failures": closed_failures,
        "untruncated_control_bounded": control,
    }
    passed = locally_bounded and not empty and closed_failures == 0
    logger.info("regularity on %s: bound %s, locally bounded %s", field.label,
                summary["bound"], locally_bounded)
    return SuiteReport("regularity", passed, items, summary)


def verify_selection_truncation(engine: Engine, field: FieldSpec, box=2) -> SuiteReport:
    """Smallest r with every field value over the box inside ∂f + Φ^r_W.

    Values are constant on each stratum for the finite field kinds, so the stratum
    witnesses inside the box cover the whole box.
    """
    lo, hi = _box(engine.dim, box)
    worst = Fraction(0)
    items: List[dict] = []
    for s, x in strata_meeting_box(engine.strata, lo, hi):
        hull = engine.clarke(x)
        for g in field_values(engine, field, x):
            found = min_normal_part(g, hull, s.normal)
            if found is None:
                items.append({"stratum": s.sid, "point": x, "value": g, "reason": "outside"})
                continue
            nsq = norm_sq(found[0])
            worst = max(worst, nsq)
    summary = {"field": field.label, "radius_sq": worst, "radius": math.sqrt(float(worst)),
               "violations": len(items)}
    return SuiteReport("truncation", not items, items, summary)


# ---- oracles on the stratification ------------------------------------------------

def _ball_radius(engine: Engine, x: Point, radius: Fraction) -> Fraction:
    """Largest rho <= radius whose l-inf ball around x meets only kink hyperplanes through x."""
    rho = radius
    for g, c in engine.kink_forms():
        h = dot(g, x) + c
        l1 = sum((abs(gi) for gi in g), Fraction(0))
        if h != 0 and l1 > 0:
            rho = min(rho, abs(h) / (2 * l1))
    return rho


def verify_clarke_oracle(engine: Engine, points: int = 50, seed: int = 0, samples: int = 200,
                         radius=Fraction(1, 1000)) -> SuiteReport:
    """clarke(x) against the hull of AD gradients at ``samples`` random points of a small box around x.

    Centres cycle through the strata: witnesses first, then sampled interior points.
    """
    rng = np.random.default_rng([seed, 2])
    strata = list(engine.strata)
    n = engine.dim
    items = []
    for i in range(points):
        s = strata[i % len(strata)]
        x = s.point if i < len(strata) else sample_point(s, rng)
        rho = _ball_radius(engine, x, Fraction(radius))
        grads = set()
        for _ in range(samples):
            d = tuple(Fraction(int(rng.integers(-1000, 1001)), 1000) for _ in range(n))
            y = add(x, scale(rho, d))
            if engine.locate(y).dim == n:
                grads.add(engine.grad(y).gradient)
        sampled = canonical_polytope(sorted(grads)) if grads else Polytope(())
        exact = engine.clarke(x)
        if sampled.vertices != exact.vertices:
            items.append({"point": x, "stratum": s.sid, "radius": rho, "sampled": list(sampled.vertices),
                          "clarke": list(exact.vertices)})
    return SuiteReport("clarke", not items, items, {"points": points, "samples": samples,
                                                    "mismatches": len(items)})


def verify_whitney(engine: Engine, trials: int = 20, seed: int = 0) -> SuiteReport:
    """Whitney probes over every incident pair, plus frontier and normal-monotonicity checks."""
    pairs = incidence(engine.strata)
    items = []
    failures = 0
    for inner_id, outer_id in pairs:
        rep = whitney_probe(engine.strata, engine.strata[outer_id], engine.strata[inner_id], trials, seed)
        failures += rep["failures"]
        items.append(rep)
    frontier = frontier_violations(engine.strata)
    monotone = normals_monotone(engine.strata)
    summary = {"pairs": len(pairs), "probe_failures": failures,
               "frontier_violations": frontier, "normal_violations": monotone}
    return SuiteReport("whitney", failures == 0 and not frontier and not monotone, items, summary)
