# src/engine.py
from __future__ import annotations
import logging
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from autodiff import grad
from expr import affine_forms, evaluate, kink_argument_form, kink_nodes, make_point, to_text
from models import (Affine, DEFAULT_POLICY, Expr, GradSample, Membership, NormalValue, Polytope,
                    SelectionPolicy, Stratification, Stratum, Vector)
from polyhedral import (canonical_form, canonical_polytope, closure_contains_point, limiting_gradients,
                        locate, member_sum, normal_operator, refines, stratify)

logger = logging.getLogger(__name__)


class Engine:
    """One piecewise-affine function plus everything derived from it.

    The stratification is built on first use; per-stratum AD outputs and Clarke
    hulls are cached, since every verifier and descent step asks for them.
    """

    def __init__(self, f: Expr, policy: SelectionPolicy = DEFAULT_POLICY, name: Optional[str] = None):
        self.f = f
        self.policy = policy
        self.name = name or "f"
        self._strata: Optional[Stratification] = None
        self._policy_grads: Dict[Tuple[int, SelectionPolicy], Vector] = {}
        self._hulls: Dict[FrozenSet[Vector], Polytope] = {}
        self._kink_forms: Optional[List[Affine]] = None

    # ---- lifecycle ----
    def reset(self, f: Optional[Expr] = None, policy: Optional[SelectionPolicy] = None) -> None:
        if f is not None:
            self.f = f
        if policy is not None:
            self.policy = policy
        self._strata = None
        self._policy_grads.clear()
        self._hulls.clear()
        self._kink_forms = None

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def text(self) -> str:
        return to_text(self.f)

    @property
    def strata(self) -> Stratification:
        if self._strata is None:
            self._strata = stratify(self.f)
        return self._strata

    # ---- pointwise queries ----
    def point(self, coords: Sequence) -> tuple:
        return make_point(coords, self.dim)

    def value(self, x: Sequence):
        return evaluate(self.f, x)

    def grad(self, x: Sequence, policy: Optional[SelectionPolicy] = None, mode: str = "forward") -> GradSample:
        return grad(self.f, x, policy or self.policy, mode)

    def locate(self, x: Sequence) -> Stratum:
        return locate(self.strata, x)

    def clarke(self, x: Sequence) -> Polytope:
        gens = frozenset(limiting_gradients(self.f, self.strata, x))
        hull = self._hulls.get(gens)
        if hull is None:
            hull = canonical_polytope(gens)
            self._hulls[gens] = hull
        return hull

    def normal(self, x: Sequence, r=None) -> NormalValue:
        return normal_operator(self.strata, x, r)

    def member(self, g: Sequence, x: Sequence, r=None) -> Membership:
        """g ∈ ∂f(x) + N(x) (truncated to radius r when given)."""
        return member_sum(g, self.clarke(x), self.normal(x, r))

    # ---- per-stratum queries ----
    def closure_strata(self, x: Sequence) -> List[Stratum]:
        """Every stratum whose closure contains x, the stratum of x first."""
        here = self.locate(x)
        out = [here]
        for s in self.strata:
            if s.sid != here.sid and refines(here.signs, s.signs) and closure_contains_point(s, x):
                out.append(s)
        return out

    def policy_grad_on(self, s: Stratum, policy: SelectionPolicy) -> Vector:
        """AD output anywhere in s: it depends on the activation pattern only."""
        key = (s.sid, policy)
        g = self._policy_grads.get(key)
        if g is None:
            g = grad(self.f, s.point, policy).gradient
            self._policy_grads[key] = g
        return g

    def kink_forms(self) -> List[Affine]:
        """Distinct affine kink-argument forms over all strata (their zero sets hold every kink)."""
        if self._kink_forms is None:
            kinks = kink_nodes(self.f)
            seen = set()
            forms: List[Affine] = []
            for s in self.strata:
                if s.dim != self.dim:
                    continue
                node_forms = affine_forms(self.f, s.signs)
                for k in kinks:
                    h = kink_argument_form(k, node_forms)
                    key, _ = canonical_form(h)
                    if key is not None and key not in seen:
                        seen.add(key)
                        forms.append(h)
            self._kink_forms = forms
            logger.debug("%s: %d distinct kink forms", self.name, len(forms))
        return self._kink_forms
