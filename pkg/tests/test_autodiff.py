from fractions import Fraction

import numpy as np
import pytest

from autodiff import (field_of_policy_family, grad, grad_forward, grad_reverse, opposite_policy, policy_family,
                      resolved_choices)
from corpus import corpus_function, corpus_ids
from errors import DimensionError, PolicyError
from expr import parse
from models import DEFAULT_POLICY, SelectionPolicy

CANCEL_F = parse("relu(-x0) + x0 - relu(x0)")


@pytest.mark.parametrize("mode", ["forward", "reverse"])
def test_ad_of_identically_zero_function_returns_one_at_origin(mode):
    sample = grad(CANCEL_F, (Fraction(0),), DEFAULT_POLICY, mode)
    assert sample.gradient == (1,)
    assert sample.value == 0
    assert sample.pattern == (0, 0)


@pytest.mark.parametrize("s", ["1e-9", "-1e-9", "1", "-1", "1e3", "-1e3"])
@pytest.mark.parametrize("mode", ["forward", "reverse"])
def test_ad_away_from_origin_is_zero(s, mode):
    assert grad(CANCEL_F, (Fraction(s),), DEFAULT_POLICY, mode).gradient == (0,)


def test_opposite_policy_flips_the_anomaly():
    assert grad(CANCEL_F, (Fraction(0),), opposite_policy(DEFAULT_POLICY)).gradient == (-1,)


def test_node_override_beats_global_rule():
    # node 6 is relu(x0); choosing 1 there cancels the +1 from x0
    p = SelectionPolicy(overrides=((6, 1),))
    assert grad(CANCEL_F, (Fraction(0),), p).gradient == (0,)


def test_blended_tie_rule():
    f = parse("max(x0, x1)")
    p = SelectionPolicy(max_at_tie=Fraction(1, 4))
    assert grad(f, (Fraction(1), Fraction(1)), p).gradient == (Fraction(1, 4), Fraction(3, 4))


def test_abs_at_zero_choice():
    f = parse("abs(x0)")
    assert grad(f, (Fraction(0),), SelectionPolicy(abs_at_zero=Fraction(1, 2))).gradient == (Fraction(1, 2),)


@pytest.mark.parametrize("kwargs", [{"relu_at_zero": 2}, {"abs_at_zero": -2}, {"max_at_tie": Fraction(-1, 2)}])
def test_policy_outside_one_sided_hull_is_rejected(kwargs):
    with pytest.raises(PolicyError):
        SelectionPolicy(**kwargs)


def test_bad_override_is_rejected_when_used():
    p = SelectionPolicy(overrides=((2, 3),))
    with pytest.raises(PolicyError):
        grad(CANCEL_F, (Fraction(0),), p)


@pytest.mark.parametrize("fid", corpus_ids())
def test_forward_and_reverse_agree(fid):
    f = corpus_function(fid)
    rng = np.random.default_rng(5)
    policies = [DEFAULT_POLICY, opposite_policy(DEFAULT_POLICY), SelectionPolicy(Fraction(1, 3), Fraction(-1, 5),
                                                                                  Fraction(2, 3), Fraction(1, 7))]
    points = [tuple(Fraction(0) for _ in range(f.dim))]
    points += [tuple(Fraction(int(rng.integers(-3, 4))) for _ in range(f.dim)) for _ in range(20)]
    for x in points:
        for p in policies:
            assert grad_forward(f, x, p) == grad_reverse(f, x, p)


def test_policy_family_field():
    family = policy_family(DEFAULT_POLICY)
    assert len(family) == 2
    assert field_of_policy_family(CANCEL_F, (Fraction(0),), family) == [(-1,), (1,)]
    with pytest.raises(ValueError):
        field_of_policy_family(CANCEL_F, (Fraction(0),), [])


def test_self_opposite_policy_has_one_member():
    half = Fraction(1, 2)
    p = SelectionPolicy(relu_at_zero=half, abs_at_zero=0, max_at_tie=half, min_at_tie=half)
    assert policy_family(p) == (p,)


def test_resolved_choices():
    f = parse("max(x0, x1)")
    assert resolved_choices(f, DEFAULT_POLICY) == [{"node": 2, "kind": "max", "choice": "left"}]


def test_wrong_point_length():
    with pytest.raises(DimensionError):
        grad(CANCEL_F, (Fraction(0), Fraction(1)))
