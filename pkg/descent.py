# src/descent.py
"""Diminishing-step descent driven by a candidate field, with stationarity gaps."""
from __future__ import annotations
from fractions import Fraction
import logging
import math
from typing import Optional, Sequence

import numpy as np

from engine import Engine
from expr import make_point
from fields import primary_values
from models import DescentRun, Expr, FieldSpec, Stratification
from polyhedral import limiting_gradients, strata_meeting_box
from rational import min_norm_point, norm_sq, scale, sub

logger = logging.getLogger(__name__)

GAP_EVERY = 10
DIVERGENCE_BOUND = Fraction(10**12)


def stationarity_gap(f: Expr, strata: Stratification, x: Sequence, radius=0) -> float:
    """Distance from 0 to the Clarke subdifferential at x.

    With ``radius`` > 0 the hull is taken over the gradients of every full-dimensional
    stratum meeting the closed l-inf box of that radius around x (Goldstein-style gap).
    """
    x = make_point(x, f.dim)
    radius = Fraction(radius)
    if radius <= 0:
        gens = limiting_gradients(f, strata, x)
    else:
        lo = tuple(c - radius for c in x)
        hi = tuple(c + radius for c in x)
        gens = sorted({s.gradient for s, _ in strata_meeting_box(strata, lo, hi, closed=True, full_only=True)})
    q, _ = min_norm_point(gens)
    return math.sqrt(float(norm_sq(q)))


def step_size(alpha0: Fraction, k: int) -> Fraction:
    return alpha0 / (k + 1)


def run_descent(engine: Engine, field: FieldSpec, x0: Sequence, alpha0=Fraction(1, 2), steps: int = 200,
                seed: int = 0) -> DescentRun:
    """x_{k+1} = x_k - a_k g_k with a_k = alpha0/(k+1) and g_k a seeded choice from the field's
    raw values at x_k. Iterates are exact; gaps are reported every GAP_EVERY steps."""
    if steps < 1:
        raise ValueError("descent needs at least one step")
    alpha0 = Fraction(alpha0)
    if alpha0 <= 0:
        raise ValueError("initial step must be positive")
    x = engine.point(x0)
    run = DescentRun(engine.text, field.label, x, alpha0, steps)
    rng = np.random.default_rng(seed)
    last_step: Optional[Fraction] = None
    for k in range(steps):
        run.points.append(x)
        run.values.append(engine.value(x))
        if k % GAP_EVERY == 0:
            run.gaps[k] = _gaps(engine, x, last_step)
        values = primary_values(engine, field, x)
        if not values:
            logger.warning("field is empty at step %d, stopping", k)
            break
        g = values[int(rng.integers(0, len(values)))] if len(values) > 1 else values[0]
        run.grads.append(g)
        nxt = sub(x, scale(step_size(alpha0, k), g))
        last_step = max((abs(c) for c in sub(nxt, x)), default=Fraction(0))
        x = nxt
        if any(abs(c) > DIVERGENCE_BOUND for c in x):
            run.diverged = True
            logger.warning("iterate left the box of radius %s at step %d", DIVERGENCE_BOUND, k + 1)
            break
    run.points.append(x)
    run.values.append(engine.value(x))
    final = _gaps(engine, x, last_step)
    run.gaps[len(run.points) - 1] = final
    run.final_gap, run.final_clarke_gap = final
    logger.info("descent on %s with %s: %d steps, f = %s, gap %.3g (clarke %.3g)", engine.name, field.label,
                len(run.grads), float(run.values[-1]), run.final_gap, run.final_clarke_gap)
    return run


def _gaps(engine: Engine, x, last_step: Optional[Fraction]):
    clarke_gap = stationarity_gap(engine.f, engine.strata, x)
    if not last_step:
        return clarke_gap, clarke_gap
    return stationarity_gap(engine.f, engine.strata, x, last_step), clarke_gap
