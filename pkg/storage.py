# src/storage.py
from __future__ import annotations
import os, json, csv
import logging
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpus import ALIASES, corpus_ids, corpus_text
from errors import ConfigError, PolicyError
from expr import parse
from models import DEFAULT_POLICY, DescentRun, Expr, SelectionPolicy, Stratification, SuiteReport
from polyhedral import incidence

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
CORPUS_DIR = os.path.join(DATA_DIR, "corpus")
POLICY_DIR = os.path.join(DATA_DIR, "policies")
SETTINGS_PATH = os.path.join(DATA_DIR, "defaults.json")
THREADS_ENV = "PATHFIELD_THREADS"

DEFAULT_SETTINGS = {
    "seed": 0,
    "curves": 20,
    "selections": 4,
    "radius": None,          # truncation radius of the normal operator, "p/q" string or null
    "tol_abs": 1e-8,
    "tol_rel": 1e-8,
    "quad_tol": 1e-10,
    "random_points": 100,
    "box": 2,
    "steps": 200,
    "alpha0": "1/2",
    "threads": 0,            # 0 = one per CPU
    "out": "out",
}

_TIE_NAMES = {"left": Fraction(1), "right": Fraction(0)}
_POLICY_KEYS = ("relu_at_zero", "abs_at_zero", "max_at_tie", "min_at_tie")


def _safe_read_json(path: str, default: Dict[str, Any]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as exc:
        logger.warning("could not read %s (%s), using defaults", path, exc)
        return default.copy()


def _safe_write_json(path: str, data: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def load_settings(path: str = SETTINGS_PATH) -> Dict[str, Any]:
    """File values merged over DEFAULT_SETTINGS; unknown keys are dropped."""
    if not os.path.exists(path):
        _safe_write_json(path, DEFAULT_SETTINGS)
    stored = _safe_read_json(path, DEFAULT_SETTINGS)
    if not isinstance(stored, dict):
        logger.warning("%s does not hold a JSON object, using defaults", path)
        stored = {}
    settings = DEFAULT_SETTINGS.copy()
    settings.update({k: v for k, v in stored.items() if k in DEFAULT_SETTINGS})
    return settings


def threads_from_env(settings: Dict[str, Any]) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return int(settings.get("threads", 0))
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if value < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {value}")
    return value


# ---- functions and policies ------------------------------------------------------

def load_function(ref: str) -> Tuple[str, Expr]:
    """A function file path, a shipped ``<id>.fn`` name, or a corpus id; returns (name, expression)."""
    name = os.path.splitext(os.path.basename(ref))[0]
    if os.path.isfile(ref):
        with open(ref, "r", encoding="utf-8") as f:
            return name, parse(f.read())
    shipped = os.path.join(CORPUS_DIR, f"{name}.fn")
    if os.path.isfile(shipped):
        with open(shipped, "r", encoding="utf-8") as f:
            return name, parse(f.read())
    if name in corpus_ids() or name in ALIASES:
        return name, parse(corpus_text(name))
    raise ConfigError(f"no function file or corpus id {ref!r}")


def _choice(key: str, raw: Any, named: bool = False) -> Fraction:
    """A rational weight; tie rules and overrides also accept "left" and "right"."""
    if named and isinstance(raw, str) and raw.strip().lower() in _TIE_NAMES:
        return _TIE_NAMES[raw.strip().lower()]
    try:
        return Fraction(str(raw).strip())
    except (ValueError, ZeroDivisionError):
        raise PolicyError(f"policy entry {key!r} is not a rational: {raw!r}")


def policy_from_json(data: Dict[str, Any], name: str = "custom") -> SelectionPolicy:
    if not isinstance(data, dict):
        raise PolicyError("policy file must hold a JSON object")
    unknown = set(data) - set(_POLICY_KEYS) - {"name", "overrides"}
    if unknown:
        raise PolicyError(f"unknown policy keys: {', '.join(sorted(unknown))}")
    kwargs = {k: _choice(k, data[k], k.endswith("_tie")) for k in _POLICY_KEYS if k in data}
    overrides = []
    for node, raw in (data.get("overrides") or {}).items():
        try:
            nid = int(node)
        except ValueError:
            raise PolicyError(f"override key {node!r} is not a node id")
        overrides.append((nid, _choice(f"override {nid}", raw, True)))
    return SelectionPolicy(overrides=tuple(overrides), name=str(data.get("name", name)), **kwargs)


def load_policy(ref: str = "default") -> SelectionPolicy:
    """A policy file path, a shipped policy name, or "default"."""
    if os.path.isfile(ref):
        path = ref
    else:
        path = os.path.join(POLICY_DIR, f"{ref}.json")
        if not os.path.isfile(path):
            if ref == "default":
                return DEFAULT_POLICY
            raise PolicyError(f"no policy file or shipped policy {ref!r}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"malformed policy file {path}: {exc}")
    return policy_from_json(data, os.path.splitext(os.path.basename(path))[0])


def load_policies(ref: str) -> List[SelectionPolicy]:
    return [load_policy(part.strip()) for part in ref.split(",") if part.strip()]


def policy_to_json(p: SelectionPolicy) -> Dict[str, Any]:
    return {
        "name": p.name,
        "relu_at_zero": frac_str(p.relu_at_zero),
        "abs_at_zero": frac_str(p.abs_at_zero),
        "max_at_tie": frac_str(p.max_at_tie),
        "min_at_tie": frac_str(p.min_at_tie),
        "overrides": {str(k): frac_str(v) for k, v in p.overrides},
    }


# ---- serialization ---------------------------------------------------------------

def frac_str(q: Fraction) -> str:
    return str(Fraction(q))


def float_str(x: float) -> str:
    return "%.17g" % float(x)


def to_jsonable(obj: Any) -> Any:
    """Rationals as "p/q", floats with 17 significant digits, tuples as lists."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return frac_str(obj)
    if isinstance(obj, (float, np.floating)):
        return float_str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, SelectionPolicy):
        return policy_to_json(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: str, data: Dict[str, Any]) -> str:
    _safe_write_json(path, to_jsonable(data))
    return path


def strata_to_json(strata: Stratification) -> Dict[str, Any]:
    return {
        "dim": strata.dim,
        "kinks": [{"node": k.nid, "kind": k.kind} for k in strata.kinks],
        "strata": [{
            "id": s.sid,
            "signs": list(s.signs),
            "dim": s.dim,
            "point": s.point,
            "gradient": s.gradient,
            "offset": s.offset,
            "tangent": s.tangent,
            "normal": s.normal,
            "equalities": [{"gradient": g, "offset": c} for g, c in s.equalities],
            "inequalities": [{"gradient": g, "offset": c} for g, c in s.inequalities],
            "boundary": sorted(s.boundary),
            "closure_of": sorted(s.closure_of),
        } for s in strata],
        "incidence": incidence(strata),
    }


def suite_to_json(report: SuiteReport) -> Dict[str, Any]:
    return {"name": report.name, "verdict": "PASS" if report.passed else "FAIL",
            "summary": report.summary, "items": report.items}


# ---- CSV -------------------------------------------------------------------------

TRIAL_COLUMNS = ["suite", "trial", "curve_seed", "segments", "dwell_stratum", "intervals",
                 "increment", "worst_residual", "quad_error", "tolerance", "verdict"]


def write_trials_csv(path: str, reports: Sequence[SuiteReport]) -> str:
    """One row per curve trial of every curve suite."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRIAL_COLUMNS)
        for rep in reports:
            for item in rep.items:
                if "curve_seed" not in item:
                    continue
                w.writerow([rep.name] + [_cell(item.get(col)) for col in TRIAL_COLUMNS[1:]])
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return frac_str(value)
    if isinstance(value, float):
        return float_str(value)
    return str(value)


def write_trajectory_csv(path: str, run: DescentRun) -> str:
    """Columns k, x coordinates, f(x_k), |g_k|, gap (every few iterations)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    n = len(run.start)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k"] + [f"x{i}" for i in range(n)] + ["f", "g_norm", "gap"])
        for k, x in enumerate(run.points):
            g_norm: Optional[float] = None
            if k < len(run.grads):
                g_norm = float(np.linalg.norm([float(c) for c in run.grads[k]]))
            gap = run.gaps[k][0] if k in run.gaps else None
            w.writerow([k] + [float_str(c) for c in x] + [float_str(run.values[k]), _cell(g_norm), _cell(gap)])
    return path


def read_trajectory_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
