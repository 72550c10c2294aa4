# src/expr.py
"""Piecewise-affine expressions: parsing, printing, exact evaluation and affine restriction.

Grammar (a ``dim <n>;`` header may precede the expression, ``#`` starts a comment)::

    expr := term (("+" | "-") term)*
    term := "-" term | atom ("*" term)?
    atom := rational | "x" INT | "(" expr ")"
          | ("max" | "min") "(" expr ("," expr)+ ")"
          | ("abs" | "relu") "(" expr ")"

A product needs one constant side; n-ary max/min nest to the left.
"""
from __future__ import annotations
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from errors import DimensionError, ParseError
from models import Affine, Expr, KinkNode, Pattern, Point
from rational import ZERO, ONE, to_fraction, unit, zeros

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[-+*(),;])
""", re.VERBOSE)

FUNCTIONS = {"max", "min", "abs", "relu"}


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "ident" | "punct" | "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token], dim: int):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim
        self.next_id = 0

    # ---- node construction (post-order ids give a topological order) ----
    def node(self, kind: str, children=(), value=None, index=None) -> Expr:
        e = Expr(kind, tuple(children), self.next_id, self.dim, value, index)
        self.next_id += 1
        return e

    # ---- token helpers ----
    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def pop(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.pop()
        if tok.text != text:
            shown = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", tok.line, tok.column)
        return tok

    # ---- grammar ----
    def parse_expr(self) -> Expr:
        left = self.parse_term()
        while self.peek.text in ("+", "-"):
            op = self.pop().text
            right = self.parse_term()
            left = self.node("add" if op == "+" else "sub", (left, right))
        return left

    def parse_term(self) -> Expr:
        if self.peek.text == "-":
            self.pop()
            return self.node("neg", (self.parse_term(),))
        left = self.parse_atom()
        if self.peek.text != "*":
            return left
        star = self.pop()
        right = self.parse_term()
        if left.kind == "const":
            return self.node("scale", (right,), value=left.value)
        if right.kind == "const":
            return self.node("scale", (left,), value=right.value)
        raise ParseError("product of two non-constant expressions is not piecewise-affine",
                         star.line, star.column)

    def parse_atom(self) -> Expr:
        tok = self.pop()
        if tok.kind == "num":
            try:
                return self.node("const", value=Fraction(tok.text))
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"malformed number {tok.text!r}", tok.line, tok.column)
        if tok.text == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            if re.fullmatch(r"x\d+", tok.text):
                idx = int(tok.text[1:])
                if idx >= self.dim:
                    raise ParseError(f"variable {tok.text} out of range for dimension {self.dim}",
                                     tok.line, tok.column)
                return self.node("var", index=idx)
            if tok.text in FUNCTIONS:
                self.expect("(")
                args = [self.parse_expr()]
                while self.peek.text == ",":
                    self.pop()
                    args.append(self.parse_expr())
                close = self.expect(")")
                if tok.text in ("abs", "relu"):
                    if len(args) != 1:
                        raise ParseError(f"{tok.text} takes one argument", close.line, close.column)
                    return self.node(tok.text, args)
                if len(args) < 2:
                    raise ParseError(f"{tok.text} takes at least two arguments", close.line, close.column)
                acc = args[0]
                for arg in args[1:]:
                    acc = self.node(tok.text, (acc, arg))
                return acc
            raise ParseError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
        shown = tok.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", tok.line, tok.column)


def _read_header(tokens: List[Token]) -> Tuple[Optional[int], int]:
    if len(tokens) >= 3 and tokens[0].text == "dim":
        num, semi = tokens[1], tokens[2]
        if num.kind != "num" or not num.text.isdigit():
            raise ParseError("dimension must be a positive integer", num.line, num.column)
        if semi.text != ";":
            raise ParseError("expected ';' after dimension", semi.line, semi.column)
        n = int(num.text)
        if n < 1:
            raise ParseError("dimension must be a positive integer", num.line, num.column)
        return n, 3
    return None, 0


def parse(text: str, dim: Optional[int] = None) -> Expr:
    """Parse function text. The header wins over ``dim``; without either the
    dimension is one more than the largest variable index."""
    tokens = tokenize(text)
    declared, start = _read_header(tokens)
    if declared is not None and dim is not None and declared != dim:
        raise DimensionError(f"header declares dim {declared} but {dim} was requested")
    n = declared or dim
    if n is None:
        idx = [int(t.text[1:]) for t in tokens if t.kind == "ident" and re.fullmatch(r"x\d+", t.text)]
        n = max(idx, default=0) + 1
    p = _Parser(tokens, n)
    p.pos = start
    if p.peek.kind == "eof":
        raise ParseError("empty expression", p.peek.line, p.peek.column)
    e = p.parse_expr()
    if p.peek.kind != "eof":
        tok = p.peek
        raise ParseError(f"unexpected {tok.text!r} after expression", tok.line, tok.column)
    return e


# ---- printing -------------------------------------------------------------------

def _num_text(q: Fraction) -> str:
    return str(q)


def to_text(e: Expr, header: bool = False) -> str:
    def go(node: Expr) -> str:
        k = node.kind
        if k == "const":
            return _num_text(node.value) if node.value >= 0 else f"-{_num_text(-node.value)}"
        if k == "var":
            return f"x{node.index}"
        if k == "add":
            return f"({go(node.children[0])} + {go(node.children[1])})"
        if k == "sub":
            return f"({go(node.children[0])} - {go(node.children[1])})"
        if k == "neg":
            return f"-({go(node.children[0])})"
        if k == "scale":
            c = node.value
            body = f"{_num_text(abs(c))} * ({go(node.children[0])})"
            return body if c >= 0 else f"-({body})"
        if k in ("max", "min"):
            return f"{k}({go(node.children[0])}, {go(node.children[1])})"
        return f"{k}({go(node.children[0])})"

    body = go(e)
    return f"dim {e.dim};\n{body}" if header else body


# ---- traversal ------------------------------------------------------------------

@lru_cache(maxsize=256)
def nodes(e: Expr) -> Tuple[Expr, ...]:
    """All nodes of the DAG, children before parents."""
    seen: Dict[int, Expr] = {}
    stack = [e]
    while stack:
        node = stack.pop()
        if node.nid in seen:
            continue
        seen[node.nid] = node
        stack.extend(node.children)
    return tuple(seen[k] for k in sorted(seen))


@lru_cache(maxsize=256)
def kink_nodes(e: Expr) -> Tuple[KinkNode, ...]:
    return tuple(KinkNode(n.nid, n.kind, n.children) for n in nodes(e) if n.is_kink)


def make_point(coords: Sequence, dim: int) -> Point:
    if len(coords) != dim:
        raise DimensionError(f"point has {len(coords)} coordinates, function has dimension {dim}")
    return tuple(c if isinstance(c, float) else to_fraction(c) for c in coords)


def parse_point(text: str, dim: int) -> Point:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    try:
        return make_point([Fraction(p.strip()) for p in parts], dim)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"malformed point {text!r}")


def node_values(e: Expr, x: Sequence) -> Dict[int, Fraction]:
    if len(x) != e.dim:
        raise DimensionError(f"point has {len(x)} coordinates, function has dimension {e.dim}")
    vals: Dict[int, Fraction] = {}
    for node in nodes(e):
        k, ch = node.kind, node.children
        if k == "const":
            v = node.value
        elif k == "var":
            v = x[node.index]
        elif k == "add":
            v = vals[ch[0].nid] + vals[ch[1].nid]
        elif k == "sub":
            v = vals[ch[0].nid] - vals[ch[1].nid]
        elif k == "neg":
            v = -vals[ch[0].nid]
        elif k == "scale":
            v = node.value * vals[ch[0].nid]
        elif k == "max":
            v = max(vals[ch[0].nid], vals[ch[1].nid])
        elif k == "min":
            v = min(vals[ch[0].nid], vals[ch[1].nid])
        elif k == "abs":
            v = abs(vals[ch[0].nid])
        else:
            v = max(vals[ch[0].nid], 0)
        vals[node.nid] = v
    return vals


def evaluate(e: Expr, x: Sequence) -> Fraction:
    """Exact value of e at x (floats in, floats out)."""
    return node_values(e, x)[e.nid]


def kink_arguments(e: Expr, x: Sequence, vals: Optional[Mapping[int, Fraction]] = None) -> Tuple:
    """Value of every kink argument at x; max/min contribute left - right."""
    vals = vals if vals is not None else node_values(e, x)
    out = []
    for k in kink_nodes(e):
        if k.kind in ("max", "min"):
            out.append(vals[k.args[0].nid] - vals[k.args[1].nid])
        else:
            out.append(vals[k.args[0].nid])
    return tuple(out)


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def sign_pattern(e: Expr, x: Sequence, vals: Optional[Mapping[int, Fraction]] = None) -> Pattern:
    return tuple(_sign(v) for v in kink_arguments(e, x, vals))


# ---- affine restriction ---------------------------------------------------------

def affine_add(a: Affine, b: Affine) -> Affine:
    return tuple(p + q for p, q in zip(a[0], b[0])), a[1] + b[1]


def affine_sub(a: Affine, b: Affine) -> Affine:
    return tuple(p - q for p, q in zip(a[0], b[0])), a[1] - b[1]


def affine_scale(c: Fraction, a: Affine) -> Affine:
    return tuple(c * p for p in a[0]), c * a[1]


def affine_at(a: Affine, x: Sequence) -> Fraction:
    return sum((g * xi for g, xi in zip(a[0], x)), ZERO) + a[1]


def node_form(node: Expr, forms: Mapping[int, Affine], sign: Optional[int] = None) -> Affine:
    """Affine form of one node given its children's forms and, for kinks, the branch sign."""
    k, ch, n = node.kind, node.children, node.dim
    if k == "const":
        return zeros(n), node.value
    if k == "var":
        return unit(n, node.index), ZERO
    if k == "add":
        return affine_add(forms[ch[0].nid], forms[ch[1].nid])
    if k == "sub":
        return affine_sub(forms[ch[0].nid], forms[ch[1].nid])
    if k == "neg":
        return affine_scale(-ONE, forms[ch[0].nid])
    if k == "scale":
        return affine_scale(node.value, forms[ch[0].nid])
    if sign is None:
        raise KeyError(f"no branch sign given for kink node {node.nid}")
    if k == "relu":
        return forms[ch[0].nid] if sign > 0 else (zeros(n), ZERO)
    if k == "abs":
        return forms[ch[0].nid] if sign >= 0 else affine_scale(-ONE, forms[ch[0].nid])
    if k == "max":
        return forms[ch[0].nid] if sign >= 0 else forms[ch[1].nid]
    # min
    return forms[ch[1].nid] if sign > 0 else forms[ch[0].nid]


def kink_argument_form(kink: KinkNode, forms: Mapping[int, Affine]) -> Affine:
    if kink.kind in ("max", "min"):
        return affine_sub(forms[kink.args[0].nid], forms[kink.args[1].nid])
    return forms[kink.args[0].nid]


def _pattern_map(e: Expr, pattern: Union[Sequence[int], Mapping[int, int]]) -> Mapping[int, int]:
    if isinstance(pattern, Mapping):
        return pattern
    kinks = kink_nodes(e)
    if len(pattern) != len(kinks):
        raise ValueError(f"pattern has {len(pattern)} signs for {len(kinks)} kink nodes")
    return {k.nid: s for k, s in zip(kinks, pattern)}


def affine_forms(e: Expr, pattern: Union[Sequence[int], Mapping[int, int]]) -> Dict[int, Affine]:
    signs = _pattern_map(e, pattern)
    forms: Dict[int, Affine] = {}
    for node in nodes(e):
        forms[node.nid] = node_form(node, forms, signs.get(node.nid))
    return forms


def affine_restriction(e: Expr, pattern: Union[Sequence[int], Mapping[int, int]]) -> Affine:
    """(g, c) with e(x) = <g, x> + c on the region selected by pattern."""
    return affine_forms(e, pattern)[e.nid]
