# src/models.py
from __future__ import annotations
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple

from errors import ConfigError, PolicyError

Vector = Tuple[Fraction, ...]
Point = Tuple[Fraction, ...]
Affine = Tuple[Vector, Fraction]  # (gradient, offset)
Pattern = Tuple[int, ...]         # one sign in {-1, 0, 1} per kink node

NODE_KINDS = ("const", "var", "add", "sub", "neg", "scale", "max", "min", "abs", "relu")
KINK_KINDS = ("max", "min", "abs", "relu")

FIELD_KINDS = ("policy", "clarke", "clarke+normal", "clarke+truncated-normal", "custom")


@dataclass(frozen=True, eq=False)
class Expr:
    kind: str
    children: Tuple["Expr", ...] = ()
    nid: int = 0
    dim: int = 1
    value: Optional[Fraction] = None  # constant, or the coefficient of "scale"
    index: Optional[int] = None       # variable index

    @property
    def is_kink(self) -> bool:
        return self.kind in KINK_KINDS


@dataclass(frozen=True)
class KinkNode:
    nid: int
    kind: str
    args: Tuple[Expr, ...]  # (left, right) for max/min, (argument,) for abs/relu


def _as_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class SelectionPolicy:
    """Branch choices applied at nondifferentiable points of each kink primitive.

    Tie rules are stored as the weight given to the left argument: 1 is "left",
    0 is "right", anything in between blends the two one-sided derivatives.
    """
    relu_at_zero: Fraction = Fraction(0)
    abs_at_zero: Fraction = Fraction(0)
    max_at_tie: Fraction = Fraction(1)
    min_at_tie: Fraction = Fraction(1)
    overrides: Tuple[Tuple[int, Fraction], ...] = ()
    name: str = "default"

    def __post_init__(self):
        for attr in ("relu_at_zero", "abs_at_zero", "max_at_tie", "min_at_tie"):
            object.__setattr__(self, attr, _as_fraction(getattr(self, attr)))
        object.__setattr__(self, "overrides",
                           tuple(sorted((int(k), _as_fraction(v)) for k, v in self.overrides)))
        for attr in ("relu_at_zero", "max_at_tie", "min_at_tie"):
            if not 0 <= getattr(self, attr) <= 1:
                raise PolicyError(f"{attr} must lie in [0, 1], got {getattr(self, attr)}")
        if not -1 <= self.abs_at_zero <= 1:
            raise PolicyError(f"abs_at_zero must lie in [-1, 1], got {self.abs_at_zero}")

    def choice(self, nid: int, kind: str) -> Fraction:
        for k, v in self.overrides:
            if k == nid:
                lo = -1 if kind == "abs" else 0
                if not lo <= v <= 1:
                    raise PolicyError(f"override for node {nid} ({kind}) outside [{lo}, 1]: {v}")
                return v
        if kind == "relu":
            return self.relu_at_zero
        if kind == "abs":
            return self.abs_at_zero
        if kind == "max":
            return self.max_at_tie
        if kind == "min":
            return self.min_at_tie
        raise PolicyError(f"node {nid} of kind {kind!r} has no selection rule")


DEFAULT_POLICY = SelectionPolicy()


@dataclass(frozen=True)
class GradSample:
    point: Point
    value: Fraction
    gradient: Vector
    pattern: Pattern
    policy: SelectionPolicy


@dataclass
class Stratum:
    sid: int
    signs: Pattern
    dim: int
    point: Point                      # relative-interior witness, also the affine-hull base point
    tangent: Tuple[Vector, ...]
    normal: Tuple[Vector, ...]
    equalities: Tuple[Affine, ...]    # h(x) = 0 on the stratum
    inequalities: Tuple[Affine, ...]  # h(x) > 0 on the stratum
    gradient: Vector                  # f restricted to the stratum is <gradient, x> + offset
    offset: Fraction
    boundary: List[int] = field(default_factory=list)    # strata contained in cl(self) \ self
    closure_of: List[int] = field(default_factory=list)  # strata whose closure contains self


@dataclass
class Stratification:
    expr: Expr
    kinks: Tuple[KinkNode, ...]
    strata: List[Stratum]
    by_signs: Dict[Pattern, int]

    def __iter__(self) -> Iterator[Stratum]:
        return iter(self.strata)

    def __len__(self) -> int:
        return len(self.strata)

    def __getitem__(self, sid: int) -> Stratum:
        return self.strata[sid]

    @property
    def dim(self) -> int:
        return self.expr.dim


@dataclass(frozen=True)
class Polytope:
    vertices: Tuple[Vector, ...]

    @property
    def dim(self) -> int:
        return len(self.vertices[0]) if self.vertices else 0


@dataclass(frozen=True)
class NormalValue:
    sid: int
    basis: Tuple[Vector, ...]
    radius: Optional[Fraction] = None
    dim: int = 0  # ambient dimension, needed when the basis is empty


@dataclass
class Membership:
    member: bool
    weights: Tuple[Fraction, ...] = ()         # convex weights on the polytope vertices
    coefficients: Tuple[Fraction, ...] = ()    # coefficients on the normal basis
    separator: Optional[Vector] = None         # w with <w, g> > max <w, v_i> and w orthogonal to N
    margin: Optional[Fraction] = None
    normal_norm_sq: Optional[Fraction] = None  # squared norm of the normal part, truncated case


@dataclass(frozen=True)
class Segment:
    t0: Fraction
    t1: Fraction
    coeffs: Tuple[Tuple[Fraction, Fraction, Fraction, Fraction], ...]  # per coordinate, power basis in u


@dataclass(frozen=True)
class Curve:
    dim: int
    seed: int
    segments: Tuple[Segment, ...]
    dwell: Optional[Tuple[int, int]] = None  # (segment index, stratum id)
    kink_times: Tuple[float, ...] = ()


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    policies: Tuple[SelectionPolicy, ...] = ()
    radius: Optional[Fraction] = None
    selection: Tuple[Tuple[int, Vector], ...] = ()
    default: Optional[Vector] = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"unknown field kind {self.kind!r}")
        if self.kind == "policy" and not self.policies:
            raise ConfigError("policy field needs at least one policy")
        if self.kind == "clarke+truncated-normal" and (self.radius is None or self.radius <= 0):
            raise ConfigError("truncated normal field needs a radius r > 0")

    @classmethod
    def policy(cls, policies) -> "FieldSpec":
        return cls("policy", policies=tuple(policies))

    @classmethod
    def clarke(cls) -> "FieldSpec":
        return cls("clarke")

    @classmethod
    def clarke_plus_normal(cls, radius=None) -> "FieldSpec":
        if radius is None:
            return cls("clarke+normal")
        return cls("clarke+truncated-normal", radius=_as_fraction(radius))

    @classmethod
    def custom(cls, selection: Dict[int, Vector], default: Optional[Vector] = None) -> "FieldSpec":
        return cls("custom", selection=tuple(sorted(selection.items())), default=default)

    @classmethod
    def zero(cls, dim: int) -> "FieldSpec":
        return cls.custom({}, default=tuple(Fraction(0) for _ in range(dim)))

    @property
    def label(self) -> str:
        if self.kind == "clarke+truncated-normal":
            return f"clarke+truncated-normal(r={self.radius})"
        return self.kind


@dataclass
class ChainRuleReport:
    curve_seed: int
    increment: Fraction
    integrals: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    worst_residual: float = 0.0
    quad_error: float = 0.0
    tolerance: float = 0.0
    intervals: int = 0
    passed: bool = False
    error: Optional[str] = None

    @property
    def verdict(self) -> str:
        if self.error:
            return "ERROR"
        return "PASS" if self.passed else "FAIL"


@dataclass
class SuiteReport:
    name: str
    passed: bool
    items: List[dict] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)


@dataclass
class DescentRun:
    expr_text: str
    field_kind: str
    start: Point
    alpha0: Fraction
    cap: int
    points: List[Point] = field(default_factory=list)
    grads: List[Vector] = field(default_factory=list)
    values: List[Fraction] = field(default_factory=list)
    gaps: Dict[int, Tuple[float, float]] = field(default_factory=dict)  # k -> (goldstein gap, clarke gap)
    final_gap: float = 0.0
    final_clarke_gap: float = 0.0
    diverged: bool = False

    @property
    def best_value(self) -> Fraction:
        return min(self.values)


@dataclass
class RunConfig:
    subcommand: str
    fn: str
    policy: str = "default"
    field: str = "policy"
    suite: str = "all"
    seed: int = 0
    curves: int = 20
    selections: int = 4
    radius: Optional[Fraction] = None
    tol_abs: float = 1e-8
    tol_rel: float = 1e-8
    quad_tol: float = 1e-10
    out: str = "out"
    threads: int = 0
    at: Optional[Point] = None
    start: Optional[Point] = None
    steps: int = 200
    alpha0: Fraction = Fraction(1, 2)
    mode: str = "forward"

    def __post_init__(self):
        if self.tol_abs <= 0 or self.tol_rel <= 0 or self.quad_tol <= 0:
            raise ConfigError("tolerances must be positive")
