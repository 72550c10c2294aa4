from fractions import Fraction
import json
import logging

import pytest

import storage
from corpus import corpus_function
from descent import run_descent
from engine import Engine
from errors import ConfigError, PolicyError
from expr import to_text
from models import DEFAULT_POLICY, FieldSpec
from polyhedral import stratify

F = Fraction


def test_settings_file_is_created_with_defaults(tmp_path):
    path = tmp_path / "defaults.json"
    settings = storage.load_settings(str(path))
    assert settings == storage.DEFAULT_SETTINGS
    assert json.loads(path.read_text())["curves"] == 20


def test_settings_merge_known_keys(tmp_path):
    path = tmp_path / "defaults.json"
    path.write_text(json.dumps({"seed": 5, "bogus": 1}))
    settings = storage.load_settings(str(path))
    assert settings["seed"] == 5
    assert "bogus" not in settings
    assert settings["steps"] == 200


def test_malformed_settings_fall_back(tmp_path, caplog):
    path = tmp_path / "defaults.json"
    path.write_text("{not json")
    with caplog.at_level(logging.WARNING, logger="storage"):
        settings = storage.load_settings(str(path))
    assert settings == storage.DEFAULT_SETTINGS
    assert "could not read" in caplog.text


def test_threads_from_environment(monkeypatch):
    monkeypatch.delenv(storage.THREADS_ENV, raising=False)
    assert storage.threads_from_env({"threads": 3}) == 3
    monkeypatch.setenv(storage.THREADS_ENV, "4")
    assert storage.threads_from_env({"threads": 3}) == 4
    for bad in ("x", "-1"):
        monkeypatch.setenv(storage.THREADS_ENV, bad)
        with pytest.raises(ConfigError):
            storage.threads_from_env({})


def test_load_function_variants(tmp_path):
    name, f = storage.load_function("relucancel")
    assert name == "relucancel" and f.dim == 1
    custom = tmp_path / "g.fn"
    custom.write_text("dim 2;\nmax(x0, x1) - x1")
    name, g = storage.load_function(str(custom))
    assert name == "g" and g.dim == 2
    _, r = storage.load_function("rand2")
    assert to_text(r) == to_text(corpus_function("rand2"))
    with pytest.raises(ConfigError):
        storage.load_function("no-such-function")


def test_shipped_policies():
    default = storage.load_policy("default")
    assert (default.relu_at_zero, default.abs_at_zero, default.max_at_tie) == (0, 0, 1)
    other = storage.load_policy("relu-one")
    assert other.relu_at_zero == 1 and other.max_at_tie == 0
    assert [p.name for p in storage.load_policies("default, relu-one")] == ["default", "relu-one"]


def test_policy_file_with_overrides(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"relu_at_zero": "1/2", "overrides": {"6": "1", "2": "right"}}))
    p = storage.load_policy(str(path))
    assert p.relu_at_zero == F(1, 2)
    assert p.overrides == ((2, 0), (6, 1))
    assert p.name == "p"


@pytest.mark.parametrize("content", ['{"bogus": 1}', "{oops", '{"relu_at_zero": "half"}', '[1, 2]',
                                     '{"overrides": {"x": 1}}', '{"relu_at_zero": 3}'])
def test_bad_policy_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    with pytest.raises(PolicyError):
        storage.load_policy(str(path))


def test_missing_policy():
    with pytest.raises(PolicyError):
        storage.load_policy("no-such-policy")


def test_policy_json_roundtrip_keeps_choices():
    data = storage.policy_to_json(DEFAULT_POLICY)
    assert data["max_at_tie"] == "1"
    assert storage.policy_from_json(data) == DEFAULT_POLICY


def test_to_jsonable():
    assert storage.to_jsonable({"q": F(1, 3), "x": 0.1, "v": (F(1), 2), "ok": True, "none": None}) == {
        "q": "1/3", "x": "0.10000000000000001", "v": ["1", 2], "ok": True, "none": None}
    with pytest.raises(TypeError):
        storage.to_jsonable(object())


def test_strata_json(tmp_path):
    data = storage.strata_to_json(stratify(corpus_function("relucancel")))
    assert len(data["strata"]) == 3
    assert data["incidence"] == [(0, 1), (0, 2)]
    path = storage.write_json(str(tmp_path / "strata.json"), data)
    loaded = json.loads(open(path).read())
    assert loaded["strata"][0]["point"] == ["0"]
    assert loaded["kinks"][0]["kind"] == "relu"


def test_trajectory_csv(tmp_path):
    run = run_descent(Engine(corpus_function("affine")), FieldSpec.clarke(), (0, 0), F(1, 2), 3)
    path = storage.write_trajectory_csv(str(tmp_path / "trajectory.csv"), run)
    rows = storage.read_trajectory_csv(path)
    assert [r["k"] for r in rows] == ["0", "1", "2", "3"]
    assert rows[0]["x0"] == "0" and rows[0]["gap"] != ""
    assert float(rows[0]["g_norm"]) == pytest.approx(13 ** 0.5)
    assert rows[3]["g_norm"] == "" and rows[3]["gap"] != ""
    assert float(rows[1]["x0"]) == -1.0
