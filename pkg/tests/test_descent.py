from fractions import Fraction
import math

import pytest

from corpus import corpus_function
from descent import GAP_EVERY, run_descent, stationarity_gap, step_size
from engine import Engine
from models import DEFAULT_POLICY, FieldSpec
from polyhedral import stratify

F = Fraction


def engine_for(fid):
    return Engine(corpus_function(fid), name=fid)


def test_step_sizes_diminish():
    assert [step_size(F(1, 2), k) for k in range(3)] == [F(1, 2), F(1, 4), F(1, 6)]


def test_l1_descent_reaches_small_gap():
    run = run_descent(engine_for("l1-2d"), FieldSpec.clarke(), (1, 1), F(1, 2), 200, seed=0)
    assert len(run.points) == 201 and len(run.grads) == 200
    assert run.final_gap <= 1e-2
    assert run.best_value <= F(1, 100)
    assert all(k % GAP_EVERY == 0 or k == 200 for k in run.gaps)


def test_ad_anomaly_moves_off_the_origin():
    run = run_descent(engine_for("relucancel"), FieldSpec.policy([DEFAULT_POLICY]), (0,), F(1, 2), 5)
    assert run.grads[0] == (1,)
    assert run.points[1] == (F(-1, 2),)
    assert all(v == 0 for v in run.values)


def test_affine_descent_in_closed_form():
    run = run_descent(engine_for("affine"), FieldSpec.clarke(), (0, 0), F(1, 2), 10)
    h10 = sum(F(1, k) for k in range(1, 11))
    assert run.points[-1] == (-h10, F(3, 2) * h10)
    assert not run.diverged


def test_descent_is_deterministic_and_prefix_stable():
    engine = engine_for("l1-2d")
    short = run_descent(engine, FieldSpec.clarke(), (1, 1), F(1, 2), 20, seed=4)
    again = run_descent(engine, FieldSpec.clarke(), (1, 1), F(1, 2), 20, seed=4)
    longer = run_descent(engine, FieldSpec.clarke(), (1, 1), F(1, 2), 40, seed=4)
    assert short.points == again.points
    assert longer.points[:21] == short.points
    assert longer.best_value <= short.best_value


def test_divergence_is_flagged():
    run = run_descent(engine_for("affine"), FieldSpec.clarke(), (0, 0), F(10**13), 50)
    assert run.diverged
    assert len(run.grads) == 1


@pytest.mark.parametrize("kwargs", [{"steps": 0}, {"alpha0": 0}, {"alpha0": -1}])
def test_bad_descent_parameters(kwargs):
    with pytest.raises(ValueError):
        run_descent(engine_for("abs1d"), FieldSpec.clarke(), (1,), **kwargs)


def test_stationarity_gaps():
    f = corpus_function("abs1d")
    strata = stratify(f)
    assert stationarity_gap(f, strata, (0,)) == 0
    assert stationarity_gap(f, strata, (1,)) == 1
    assert stationarity_gap(f, strata, (F(1, 2),), radius=1) == 0
    g = corpus_function("max2d")
    assert stationarity_gap(g, stratify(g), (1, 1)) == pytest.approx(math.sqrt(2) / 2)
