# src/fields.py
"""Finite representations of candidate conservative fields and seeded selections from them."""
from __future__ import annotations
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from engine import Engine
from models import FieldSpec, Vector
from rational import add, combine, norm_sq, scale, sqrt_upper

# multiple of the unit normal used to represent the unbounded normal operator
UNTRUNCATED_SCALE = Fraction(1000)


def _normal_generators(engine: Engine, field: FieldSpec, x: Sequence) -> List[Vector]:
    """±c·ν for each normal basis vector ν, with |c·ν| <= r."""
    s = engine.locate(x)
    radius = field.radius if field.kind == "clarke+truncated-normal" else UNTRUNCATED_SCALE
    out = []
    for nu in s.normal:
        c = radius / sqrt_upper(norm_sq(nu))
        out.append(scale(c, nu))
        out.append(scale(-c, nu))
    return out


def primary_values(engine: Engine, field: FieldSpec, x: Sequence) -> List[Vector]:
    """What an algorithm would be handed at x: raw AD outputs for policy fields,
    Clarke vertices (plus normal generators) otherwise."""
    if field.kind == "policy":
        return sorted({engine.grad(x, p).gradient for p in field.policies})
    if field.kind == "custom":
        s = engine.locate(x)
        chosen = dict(field.selection).get(s.sid, field.default)
        if chosen is None:
            return []
        return [tuple(Fraction(v) for v in chosen)]
    verts = list(engine.clarke(x).vertices)
    if field.kind == "clarke":
        return verts
    return verts + [add(v, nu) for v in verts for nu in _normal_generators(engine, field, x)]


def field_values(engine: Engine, field: FieldSpec, x: Sequence) -> List[Vector]:
    """Finite representation of the closed field value G(x).

    A policy field is taken with its graph closure: the AD outputs at x plus the
    AD outputs on every stratum whose closure contains x.
    """
    if field.kind != "policy":
        return primary_values(engine, field, x)
    values = set(primary_values(engine, field, x))
    for s in engine.closure_strata(x)[1:]:
        for p in field.policies:
            values.add(engine.policy_grad_on(s, p))
    return sorted(values)


def _random_weights(rng: np.random.Generator, k: int) -> List[Fraction]:
    raw = [int(rng.integers(1, 1001)) for _ in range(k)]
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


@dataclass(frozen=True)
class SelectionPool:
    """Everything a seeded draw from G(x) needs, computed once per point."""
    values: Tuple[Vector, ...]
    vertices: Tuple[Vector, ...] = ()
    generators: Tuple[Vector, ...] = ()


def selection_pool(engine: Engine, field: FieldSpec, x: Sequence, closed: bool = True) -> SelectionPool:
    values = field_values(engine, field, x) if closed else primary_values(engine, field, x)
    if field.kind in ("policy", "custom"):
        return SelectionPool(tuple(values))
    verts = engine.clarke(x).vertices
    gens = () if field.kind == "clarke" else tuple(_normal_generators(engine, field, x))
    return SelectionPool(tuple(values), verts, gens)


def draw(pool: SelectionPool, n: int, rng: np.random.Generator) -> Optional[Vector]:
    """One seeded element: a generator, or a random convex combination of the Clarke
    vertices plus one of the normal generators when the pool has them."""
    if not pool.values:
        return None
    if not pool.vertices or len(pool.values) == 1 or rng.integers(0, 2) == 0:
        return pool.values[int(rng.integers(0, len(pool.values)))]
    base = combine(_random_weights(rng, len(pool.vertices)), pool.vertices, n)
    if not pool.generators:
        return base
    # a convex combination of ±c·ν stays inside the ball of radius r
    return add(base, combine(_random_weights(rng, len(pool.generators)), pool.generators, n))


def select(engine: Engine, field: FieldSpec, x: Sequence, rng: np.random.Generator,
           closed: bool = True) -> Optional[Vector]:
    return draw(selection_pool(engine, field, x, closed), engine.dim, rng)


def parse_field(name: str, dim: int, policies=(), radius=None) -> FieldSpec:
    """CLI names: policy | clarke | clarke+normal | zero."""
    if name == "policy":
        return FieldSpec.policy(policies)
    if name == "clarke":
        return FieldSpec.clarke()
    if name in ("clarke+normal", "clarke+truncated-normal"):
        return FieldSpec.clarke_plus_normal(radius)
    if name == "clarke+untruncated-normal":
        return FieldSpec.clarke_plus_normal(None)
    if name == "zero":
        return FieldSpec.zero(dim)
    raise ValueError(f"unknown field {name!r}")
