"""Full-size runs over the corpus; deselect with ``-m "not slow"``."""
from fractions import Fraction

import numpy as np
import pytest

from autodiff import grad_forward, grad_reverse, policy_family
from corpus import corpus_function, corpus_ids
from engine import Engine
from expr import affine_at, evaluate
from models import DEFAULT_POLICY, FieldSpec
from polyhedral import locate, stratify
from verifier import verify_clarke_oracle, verify_conservative_sum, verify_curves, verify_structure_inclusion

pytestmark = pytest.mark.slow

FIELDS = {
    "policy": FieldSpec.policy(policy_family(DEFAULT_POLICY)),
    "clarke": FieldSpec.clarke(),
    "truncated": FieldSpec.clarke_plus_normal(1),
}


@pytest.mark.parametrize("fid", corpus_ids())
@pytest.mark.parametrize("kind", sorted(FIELDS))
def test_thousand_curves_per_function_and_field(fid, kind):
    engine = Engine(corpus_function(fid), name=fid)
    report = verify_curves(engine, FIELDS[kind], curves=1000, selections=4, seed=0,
                           dwell=kind == "truncated", workers=0)
    assert report.passed, report.summary
    assert report.summary["errors"] == 0


@pytest.mark.parametrize("fid", corpus_ids())
def test_conservative_sum_with_large_radius(fid):
    assert verify_conservative_sum(Engine(corpus_function(fid)), 10, curves=200, seed=1, workers=0).passed


def test_zero_field_refuted_on_most_curves():
    report = verify_curves(Engine(corpus_function("abs1d")), FieldSpec.zero(1), curves=600, seed=2, workers=0)
    moving = [it for it in report.items if abs(float(it["increment"])) > it["tolerance"]]
    assert len(moving) >= 500
    assert report.summary["failures"] == len(moving)


@pytest.mark.parametrize("fid", corpus_ids())
def test_clarke_oracle_at_fifty_points(fid):
    assert verify_clarke_oracle(Engine(corpus_function(fid)), points=50, seed=0).passed


@pytest.mark.parametrize("fid", corpus_ids())
def test_policy_family_inclusion_at_every_stratum(fid):
    engine = Engine(corpus_function(fid))
    report = verify_structure_inclusion(engine, FieldSpec.policy(policy_family(DEFAULT_POLICY)),
                                        random_points=100, seed=0, workers=0)
    assert report.passed
    assert report.summary["points"] == 2 * len(engine.strata) + 100


def rational_points(rng, dim, count):
    return [tuple(Fraction(int(p), int(q)) for p, q in zip(rng.integers(-10**6, 10**6, size=dim),
                                                        rng.integers(1, 10**4, size=dim)))
            for _ in range(count)]


def test_cancelling_function_is_exact_at_ten_thousand_points():
    f = corpus_function("relucancel")
    rng = np.random.default_rng(10)
    for x in rational_points(rng, 1, 10_000):
        assert evaluate(f, x) == 0
        if x[0] != 0:
            assert grad_forward(f, x).gradient == (0,)


def test_forward_and_reverse_agree_at_ten_thousand_points():
    rng = np.random.default_rng(11)
    functions = [corpus_function(fid) for fid in corpus_ids()]
    for i in range(10_000):
        f = functions[i % len(functions)]
        x = tuple(Fraction(int(c), 2) for c in rng.integers(-6, 7, size=f.dim))
        assert grad_forward(f, x) == grad_reverse(f, x)


@pytest.mark.parametrize("fid", corpus_ids())
def test_strata_partition_the_space(fid):
    f = corpus_function(fid)
    strata = stratify(f)
    rng = np.random.default_rng(12)
    for _ in range(1000):
        x = tuple(Fraction(int(c), 4) for c in rng.integers(-12, 13, size=f.dim))
        owners = [s.sid for s in strata
                  if all(affine_at(h, x) == 0 for h in s.equalities)
                  and all(affine_at(h, x) > 0 for h in s.inequalities)]
        assert len(owners) == 1
        assert owners[0] == locate(strata, x).sid
