from fractions import Fraction

from autodiff import opposite_policy
from corpus import corpus_function
from engine import Engine
from models import DEFAULT_POLICY

F = Fraction


def test_strata_are_built_lazily_and_reset():
    engine = Engine(corpus_function("abs1d"), name="abs1d")
    assert engine._strata is None
    assert len(engine.strata) == 3
    engine.reset(corpus_function("l1-2d"))
    assert engine._strata is None
    assert engine.dim == 2
    assert len(engine.strata) == 9


def test_closure_strata_starts_with_own_stratum():
    engine = Engine(corpus_function("l1-2d"))
    found = engine.closure_strata((F(0), F(0)))
    assert found[0].dim == 0
    assert len(found) == 9
    assert [s.sid for s in engine.closure_strata((F(1), F(2)))] == [engine.locate((F(1), F(2))).sid]


def test_policy_gradients_per_stratum():
    engine = Engine(corpus_function("relucancel"))
    origin = engine.locate((F(0),))
    assert engine.policy_grad_on(origin, DEFAULT_POLICY) == (1,)
    assert engine.policy_grad_on(origin, opposite_policy(DEFAULT_POLICY)) == (-1,)
    assert (origin.sid, DEFAULT_POLICY) in engine._policy_grads


def test_clarke_hulls_are_cached():
    engine = Engine(corpus_function("max2d"))
    first = engine.clarke((F(1), F(1)))
    assert engine.clarke((F(3), F(3))) is first
    assert first.vertices == ((0, 1), (1, 0))


def test_membership_through_engine():
    engine = Engine(corpus_function("relucancel"))
    assert engine.member((F(1),), (F(0),)).member
    assert engine.member((F(1),), (F(0),), F(1, 2)).member is False
    assert not engine.member((F(1),), (F(1),)).member


def test_kink_forms_are_distinct():
    assert len(Engine(corpus_function("l1-2d")).kink_forms()) == 2
    # relu(-x0) and relu(x0) share one hyperplane
    assert len(Engine(corpus_function("relucancel")).kink_forms()) == 1
    assert Engine(corpus_function("affine")).kink_forms() == []
