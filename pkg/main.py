# src/main.py
"""Command-line entry point: grad, clarke, stratify, verify, descend."""
from __future__ import annotations
import argparse
from fractions import Fraction
import logging
import os
import re
import sys
from typing import Any, Dict, List, Optional, Sequence

from autodiff import policy_family, resolved_choices
from descent import run_descent, stationarity_gap
from engine import Engine
from errors import ConfigError, PathfieldError
from expr import parse_point
from fields import parse_field
from models import FieldSpec, RunConfig, SuiteReport
import storage
from verifier import (check_field_regularity, verify_clarke_oracle, verify_conservative_sum, verify_curves,
                      verify_selection_truncation, verify_structure_inclusion, verify_whitney)

logger = logging.getLogger("main")

FIELD_CHOICES = ("policy", "clarke", "clarke+normal", "clarke+untruncated-normal", "zero")
SUITE_CHOICES = ("all", "chain", "sum", "inclusion", "regularity", "truncation", "clarke", "whitney")
POINT_OPTIONS = ("--at", "--from", "--points")
_NEGATIVE = re.compile(r"^-[\d.]")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def attach_point_values(argv: Sequence[str]) -> List[str]:
    """Glue a negative point to its option: ``--at -1,2`` becomes ``--at=-1,2``."""
    out: List[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in POINT_OPTIONS and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def build_parser(settings: Dict[str, Any], threads: int) -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=settings["seed"], help="master seed")
    common.add_argument("--out", default=settings["out"], help="output directory for reports")
    common.add_argument("--tol-abs", type=float, default=settings["tol_abs"], help="absolute residual tolerance")
    common.add_argument("--tol-rel", type=float, default=settings["tol_rel"], help="relative residual tolerance")
    common.add_argument("--threads", type=int, default=threads,
                        help="worker processes for curve and point trials, 0 = one per CPU (env PATHFIELD_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    fn = argparse.ArgumentParser(add_help=False)
    fn.add_argument("--fn", required=True, help="function file, shipped <id>.fn, or corpus id")

    parser = argparse.ArgumentParser(prog="pathfield", formatter_class=fmt,
                                     description="Conservative fields of piecewise-affine functions.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("grad", parents=[common, fn], formatter_class=fmt,
                       help="value, AD gradient and activation pattern at a point")
    p.add_argument("--at", required=True, help="point, comma separated rationals")
    p.add_argument("--policy", default="default", help="policy file or shipped policy name")
    p.add_argument("--mode", choices=("forward", "reverse"), default="forward")

    p = sub.add_parser("clarke", parents=[common, fn], formatter_class=fmt,
                       help="Clarke subdifferential, normal space and stationarity gap at a point")
    p.add_argument("--at", required=True, help="point, comma separated rationals")

    sub.add_parser("stratify", parents=[common, fn], formatter_class=fmt,
                   help="strata, per-stratum affine pieces and incidence")

    p = sub.add_parser("verify", parents=[common, fn], formatter_class=fmt,
                       help="chain-rule, structure-inclusion and regularity suites")
    p.add_argument("--field", choices=FIELD_CHOICES, default="policy")
    p.add_argument("--suite", choices=SUITE_CHOICES, default="all")
    p.add_argument("--policy", default="default",
                   help="policy for --field policy; several comma separated replace the opposite-policy family")
    p.add_argument("--r", "--radius", dest="radius", type=_fraction, default=settings["radius"],
                   help="truncation radius of the normal operator")
    p.add_argument("--curves", type=int, default=settings["curves"], help="random curves per suite")
    p.add_argument("--selections", type=int, default=settings["selections"], help="selections per curve")
    p.add_argument("--quad-tol", type=float, default=settings["quad_tol"], help="quadrature target per interval")
    p.add_argument("--points", default="", help="extra points for inclusion, ';' separated")
    p.add_argument("--random-points", type=int, default=settings["random_points"])
    p.add_argument("--box", type=_fraction, default=settings["box"], help="half-width of the box [-b, b]^n")

    p = sub.add_parser("descend", parents=[common, fn], formatter_class=fmt,
                       help="diminishing-step descent with a field, trajectory CSV")
    p.add_argument("--from", dest="start", required=True, help="start point, comma separated rationals")
    p.add_argument("--field", choices=FIELD_CHOICES, default="clarke")
    p.add_argument("--policy", default="default")
    p.add_argument("--r", "--radius", dest="radius", type=_fraction, default=settings["radius"])
    p.add_argument("--steps", type=int, default=settings["steps"], help="iteration cap K")
    p.add_argument("--alpha0", type=_fraction, default=settings["alpha0"], help="step rule alpha0/(k+1)")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    try:
        cfg = RunConfig(subcommand=args.subcommand, fn=args.fn, seed=args.seed, out=args.out,
                        tol_abs=args.tol_abs, tol_rel=args.tol_rel, threads=args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc))
    for key in ("policy", "field", "suite", "curves", "selections", "quad_tol", "steps", "alpha0", "mode"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if getattr(args, "radius", None) is not None:
        cfg.radius = Fraction(args.radius)
    if cfg.threads < 0 or cfg.curves < 1 or cfg.selections < 1 or cfg.steps < 1 or cfg.quad_tol <= 0:
        raise ConfigError("threads must be >= 0, curves/selections/steps >= 1, quad-tol > 0")
    if cfg.radius is not None and cfg.radius <= 0:
        raise ConfigError(f"truncation radius must be positive, got {cfg.radius}")
    if cfg.alpha0 <= 0:
        raise ConfigError("--alpha0 must be positive")
    if getattr(args, "box", 1) <= 0 or getattr(args, "random_points", 0) < 0:
        raise ConfigError("--box must be positive and --random-points >= 0")
    return cfg


def _settings_block(cfg: RunConfig) -> Dict[str, Any]:
    return {"seed": cfg.seed, "tol_abs": cfg.tol_abs, "tol_rel": cfg.tol_rel, "quad_tol": cfg.quad_tol,
            "curves": cfg.curves, "selections": cfg.selections, "radius": cfg.radius,
            "threads": cfg.threads, "policy": cfg.policy, "field": cfg.field}


def _fmt_vec(v: Sequence) -> str:
    return "(" + ", ".join(storage.frac_str(c) for c in v) + ")"


def _resolve_field(cfg: RunConfig, engine: Engine) -> FieldSpec:
    policies = storage.load_policies(cfg.policy)
    if len(policies) == 1:
        policies = list(policy_family(policies[0]))
    try:
        return parse_field(cfg.field, engine.dim, policies, cfg.radius)
    except ValueError as exc:
        raise ConfigError(str(exc))


# ---- subcommands -----------------------------------------------------------------

def cmd_grad(cfg: RunConfig, engine: Engine, args: argparse.Namespace) -> int:
    x = parse_point(args.at, engine.dim)
    policy = storage.load_policy(cfg.policy)
    sample = engine.grad(x, policy, cfg.mode)
    print(f"f{_fmt_vec(x)} = {storage.frac_str(sample.value)}")
    print(f"gradient = {_fmt_vec(sample.gradient)}")
    print(f"pattern = {list(sample.pattern)}")
    print(f"policy = {policy.name}")
    for c in resolved_choices(engine.f, policy):
        print(f"  node {c['node']} ({c['kind']}): {c['choice']}")
    return 0


def cmd_clarke(cfg: RunConfig, engine: Engine, args: argparse.Namespace) -> int:
    x = parse_point(args.at, engine.dim)
    hull = engine.clarke(x)
    normal = engine.normal(x)
    gap = stationarity_gap(engine.f, engine.strata, x)
    print(f"stratum {normal.sid}, {len(hull.vertices)} vertices:")
    for v in hull.vertices:
        print(f"  {_fmt_vec(v)}")
    print("normal space: " + (", ".join(_fmt_vec(nu) for nu in normal.basis) or "{0}"))
    print(f"stationarity gap = {storage.float_str(gap)}")
    path = storage.write_json(os.path.join(cfg.out, "clarke.json"), {
        "function": engine.name, "expr": engine.text, "point": x, "stratum": normal.sid,
        "vertices": hull.vertices, "normal": normal.basis, "gap": gap})
    logger.info("wrote %s", path)
    return 0


def cmd_stratify(cfg: RunConfig, engine: Engine, args: argparse.Namespace) -> int:
    strata = engine.strata
    print(f"{len(strata)} strata")
    for s in strata:
        print(f"  [{s.sid}] dim {s.dim} signs {list(s.signs)} point {_fmt_vec(s.point)} "
              f"gradient {_fmt_vec(s.gradient)} offset {storage.frac_str(s.offset)}")
    for s in strata:
        if s.boundary:
            print(f"  cl[{s.sid}] contains {sorted(s.boundary)}")
    data = storage.strata_to_json(strata)
    data.update({"function": engine.name, "expr": engine.text})
    path = storage.write_json(os.path.join(cfg.out, "strata.json"), data)
    logger.info("wrote %s", path)
    return 0


def _parse_points(text: str, dim: int) -> List[tuple]:
    return [parse_point(p, dim) for p in text.split(";") if p.strip()]


def cmd_verify(cfg: RunConfig, engine: Engine, args: argparse.Namespace) -> int:
    field = _resolve_field(cfg, engine)
    suites: Sequence[str] = (cfg.suite,)
    if cfg.suite == "all":
        suites = ("chain", "inclusion", "regularity") + (("sum",) if cfg.radius is not None else ())
    reports: List[SuiteReport] = []
    for name in suites:
        if name == "chain":
            dwell = field.kind in ("clarke+normal", "clarke+truncated-normal")
            reports.append(verify_curves(engine, field, cfg.curves, cfg.selections, cfg.seed, dwell,
                                         cfg.tol_abs, cfg.tol_rel, cfg.quad_tol, cfg.threads))
        elif name == "sum":
            if cfg.radius is None:
                raise ConfigError("suite 'sum' needs --r")
            reports.append(verify_conservative_sum(engine, cfg.radius, cfg.curves, cfg.selections, cfg.seed,
                                                   cfg.tol_abs, cfg.tol_rel, cfg.quad_tol, cfg.threads))
        elif name == "inclusion":
            reports.append(verify_structure_inclusion(engine, field, _parse_points(args.points, engine.dim),
                                                      args.random_points, cfg.seed, args.box, cfg.threads))
        elif name == "regularity":
            reports.append(check_field_regularity(engine, field, args.box))
        elif name == "truncation":
            reports.append(verify_selection_truncation(engine, field, args.box))
        elif name == "clarke":
            reports.append(verify_clarke_oracle(engine, seed=cfg.seed))
        elif name == "whitney":
            reports.append(verify_whitney(engine, seed=cfg.seed))
    passed = all(r.passed for r in reports)
    for r in reports:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'}  {_summary_line(r)}")
    report = {"function": engine.name, "expr": engine.text, "field": field.label,
              "settings": _settings_block(cfg), "verdict": "PASS" if passed else "FAIL",
              "suites": [storage.suite_to_json(r) for r in reports]}
    path = storage.write_json(os.path.join(cfg.out, "verify.json"), report)
    csv_path = storage.write_trials_csv(os.path.join(cfg.out, "verify_trials.csv"), reports)
    logger.info("wrote %s and %s", path, csv_path)
    return 0 if passed else 1


def _summary_line(r: SuiteReport) -> str:
    parts = []
    for k, v in r.summary.items():
        if isinstance(v, (list, dict)):
            continue
        parts.append(f"{k}={storage.float_str(v) if isinstance(v, float) else v}")
    return " ".join(parts)


def cmd_descend(cfg: RunConfig, engine: Engine, args: argparse.Namespace) -> int:
    x0 = parse_point(args.start, engine.dim)
    field = _resolve_field(cfg, engine)
    run = run_descent(engine, field, x0, cfg.alpha0, cfg.steps, cfg.seed)
    print(f"steps = {len(run.grads)}{' (diverged)' if run.diverged else ''}")
    print(f"x_K = {_fmt_vec(run.points[-1])}")
    print(f"f(x_K) = {storage.float_str(run.values[-1])}, best = {storage.float_str(run.best_value)}")
    print(f"final gap = {storage.float_str(run.final_gap)} (clarke {storage.float_str(run.final_clarke_gap)})")
    csv_path = storage.write_trajectory_csv(os.path.join(cfg.out, "trajectory.csv"), run)
    path = storage.write_json(os.path.join(cfg.out, "descent.json"), {
        "function": engine.name, "expr": engine.text, "field": run.field_kind, "settings": _settings_block(cfg),
        "start": run.start, "alpha0": run.alpha0, "cap": run.cap, "steps": len(run.grads),
        "final_point": run.points[-1], "final_value": run.values[-1], "final_gap": run.final_gap,
        "final_clarke_gap": run.final_clarke_gap, "diverged": run.diverged})
    logger.info("wrote %s and %s", csv_path, path)
    return 0


COMMANDS = {"grad": cmd_grad, "clarke": cmd_clarke, "stratify": cmd_stratify,
            "verify": cmd_verify, "descend": cmd_descend}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = storage.load_settings()
        parser = build_parser(settings, storage.threads_from_env(settings))
    except PathfieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(attach_point_values(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="[%(name)s] %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(args)
        name, f = storage.load_function(cfg.fn)
        engine = Engine(f, storage.load_policy(cfg.policy.split(",")[0]), name)
        return COMMANDS[cfg.subcommand](cfg, engine, args)
    except PathfieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
