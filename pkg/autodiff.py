# src/autodiff.py
"""Forward- and reverse-mode differentiation of piecewise-affine expressions.

Every kink primitive contributes a local partial per child; at a kink point the
selection policy picks a value from the hull of the one-sided partials. Both
modes consume the same local partials, so they agree exactly.
"""
from __future__ import annotations
from fractions import Fraction
import logging
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from errors import DimensionError
from expr import kink_nodes, node_values, nodes, sign_pattern
from models import DEFAULT_POLICY, Expr, GradSample, SelectionPolicy, Vector
from rational import ONE, ZERO

logger = logging.getLogger(__name__)


def local_partials(node: Expr, vals: Mapping[int, Fraction], policy: SelectionPolicy) -> Tuple[Fraction, ...]:
    """d node / d child for each child, with the policy resolving kinks."""
    k, ch = node.kind, node.children
    if k == "add":
        return (ONE, ONE)
    if k == "sub":
        return (ONE, -ONE)
    if k == "neg":
        return (-ONE,)
    if k == "scale":
        return (node.value,)
    if k == "relu":
        a = vals[ch[0].nid]
        if a > 0:
            return (ONE,)
        if a < 0:
            return (ZERO,)
        return (policy.choice(node.nid, k),)
    if k == "abs":
        a = vals[ch[0].nid]
        if a > 0:
            return (ONE,)
        if a < 0:
            return (-ONE,)
        return (policy.choice(node.nid, k),)
    if k in ("max", "min"):
        a, b = vals[ch[0].nid], vals[ch[1].nid]
        if a == b:
            w = policy.choice(node.nid, k)
            return (w, ONE - w)
        left_wins = a > b if k == "max" else a < b
        return (ONE, ZERO) if left_wins else (ZERO, ONE)
    return ()


def _check(e: Expr, x: Sequence) -> None:
    if len(x) != e.dim:
        raise DimensionError(f"point has {len(x)} coordinates, function has dimension {e.dim}")


def grad_forward(e: Expr, x: Sequence, policy: SelectionPolicy = DEFAULT_POLICY) -> GradSample:
    _check(e, x)
    n = e.dim
    vals = node_values(e, x)
    tangents: Dict[int, Vector] = {}
    for node in nodes(e):
        if node.kind == "var":
            tangents[node.nid] = tuple(ONE if i == node.index else ZERO for i in range(n))
            continue
        if node.kind == "const":
            tangents[node.nid] = tuple(ZERO for _ in range(n))
            continue
        acc = [ZERO] * n
        for child, w in zip(node.children, local_partials(node, vals, policy)):
            if w:
                t = tangents[child.nid]
                for i in range(n):
                    acc[i] += w * t[i]
        tangents[node.nid] = tuple(acc)
    return GradSample(tuple(x), vals[e.nid], tangents[e.nid], sign_pattern(e, x, vals), policy)


def grad_reverse(e: Expr, x: Sequence, policy: SelectionPolicy = DEFAULT_POLICY) -> GradSample:
    _check(e, x)
    n = e.dim
    vals = node_values(e, x)
    order = nodes(e)
    adjoint: Dict[int, Fraction] = {node.nid: ZERO for node in order}
    adjoint[e.nid] = ONE
    grad = [ZERO] * n
    for node in reversed(order):
        adj = adjoint[node.nid]
        if not adj:
            continue
        if node.kind == "var":
            grad[node.index] += adj
            continue
        for child, w in zip(node.children, local_partials(node, vals, policy)):
            if w:
                adjoint[child.nid] += w * adj
    return GradSample(tuple(x), vals[e.nid], tuple(grad), sign_pattern(e, x, vals), policy)


def grad(e: Expr, x: Sequence, policy: SelectionPolicy = DEFAULT_POLICY, mode: str = "forward") -> GradSample:
    if mode == "reverse":
        return grad_reverse(e, x, policy)
    return grad_forward(e, x, policy)


def field_of_policy_family(e: Expr, x: Sequence, policies: Iterable[SelectionPolicy]) -> List[Vector]:
    """Distinct gradients produced by the policies at x, sorted."""
    policies = list(policies)
    if not policies:
        raise ValueError("policy family must be nonempty")
    return sorted({grad_forward(e, x, p).gradient for p in policies})


def opposite_policy(p: SelectionPolicy) -> SelectionPolicy:
    """The mirrored global choices: relu 1 - l, abs -a, ties swapped. Overrides are kept."""
    return SelectionPolicy(
        relu_at_zero=ONE - p.relu_at_zero,
        abs_at_zero=-p.abs_at_zero,
        max_at_tie=ONE - p.max_at_tie,
        min_at_tie=ONE - p.min_at_tie,
        overrides=p.overrides,
        name=f"{p.name}-opposite",
    )


def policy_family(p: SelectionPolicy) -> Tuple[SelectionPolicy, ...]:
    q = opposite_policy(p)
    return (p,) if _same_choices(p, q) else (p, q)


def _same_choices(p: SelectionPolicy, q: SelectionPolicy) -> bool:
    return (p.relu_at_zero, p.abs_at_zero, p.max_at_tie, p.min_at_tie, p.overrides) == \
        (q.relu_at_zero, q.abs_at_zero, q.max_at_tie, q.min_at_tie, q.overrides)


def resolved_choices(e: Expr, policy: SelectionPolicy) -> List[dict]:
    """Per-node selection actually used, for reports."""
    out = []
    for k in kink_nodes(e):
        w = policy.choice(k.nid, k.kind)
        if k.kind in ("max", "min"):
            label = "left" if w == 1 else "right" if w == 0 else f"blend({w})"
        else:
            label = str(w)
        out.append({"node": k.nid, "kind": k.kind, "choice": label})
    return out
