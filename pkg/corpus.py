# src/corpus.py
"""The fixed function corpus and its seeded random piecewise-affine members."""
from __future__ import annotations
from typing import Dict, List, Tuple

import numpy as np

from expr import parse
from models import Expr

# id -> (dimension, expression text)
CORPUS: Dict[str, Tuple[int, str]] = {
    "relucancel": (1, "relu(-x0) + x0 - relu(x0)"),
    "abs1d": (1, "abs(x0)"),
    "l1-2d": (2, "abs(x0) + abs(x1)"),
    "max2d": (2, "max(x0, x1)"),
    "nested": (1, "abs(abs(x0) - 1)"),
    "cross2d": (2, "max(x0, min(x1, -x0))"),
    "affine": (2, "2*x0 - 3*x1 + 1"),
}

# alternate id -> corpus id
ALIASES: Dict[str, str] = {"paperf": "relucancel"}

# id -> (dimension, seed, kink count)
RANDOM_CORPUS: Dict[str, Tuple[int, int, int]] = {
    "rand1": (1, 101, 2),
    "rand2": (2, 202, 2),
    "rand3": (2, 303, 3),
    "rand4": (3, 404, 2),
}

_KINDS = ("max", "min", "abs", "relu")


def _affine_text(rng: np.random.Generator, dim: int) -> str:
    coeffs = [int(c) for c in rng.integers(-3, 4, size=dim)]
    if not any(coeffs):
        coeffs[int(rng.integers(0, dim))] = 1
    const = int(rng.integers(-2, 3))
    parts: List[str] = []
    for i, c in enumerate(coeffs):
        if c:
            parts.append(f"{'-' if c < 0 else '+'} {abs(c)}*x{i}")
    if const:
        parts.append(f"{'-' if const < 0 else '+'} {abs(const)}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def random_text(dim: int, seed: int, kinks: int) -> str:
    """Seeded nested expression with exactly ``kinks`` kink primitives, plus an affine term."""
    rng = np.random.default_rng(seed)

    def build(k: int) -> str:
        if k == 0:
            return _affine_text(rng, dim)
        kind = _KINDS[int(rng.integers(0, len(_KINDS)))]
        if kind in ("abs", "relu"):
            return f"{kind}({build(k - 1)})"
        return f"{kind}({build(k - 1)}, {_affine_text(rng, dim)})"

    return f"dim {dim};\n{build(kinks)} + ({_affine_text(rng, dim)})"


def corpus_ids() -> List[str]:
    return list(CORPUS) + list(RANDOM_CORPUS)


def corpus_text(fid: str) -> str:
    fid = ALIASES.get(fid, fid)
    if fid in CORPUS:
        dim, text = CORPUS[fid]
        return f"dim {dim};\n{text}"
    if fid in RANDOM_CORPUS:
        return random_text(*RANDOM_CORPUS[fid])
    raise KeyError(f"unknown corpus function {fid!r}")


def corpus_function(fid: str) -> Expr:
    return parse(corpus_text(fid))
