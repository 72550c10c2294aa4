# src/quadrature.py
from __future__ import annotations
import logging
from typing import Callable, Sequence, Tuple

import numpy as np

from errors import QuadratureError

logger = logging.getLogger(__name__)


class GaussLegendre:
    """Adaptive Gauss–Legendre integration with breakpoint splitting.

    Parameters
    ----------
    order : int
        Nodes of the coarse rule; the error estimate compares it with the rule of
        twice the order on the same interval.
    tol : float
        Target absolute error per interval.
    max_depth : int
        Bisection depth after which the interval is declared failed.
    """

    def __init__(self, order: int = 5, tol: float = 1e-10, max_depth: int = 30):
        if order < 1:
            raise ValueError("quadrature order must be >= 1")
        self.order = order
        self.tol = tol
        self.max_depth = max_depth
        self.xg, self.wg = np.polynomial.legendre.leggauss(order)
        self.xg2, self.wg2 = np.polynomial.legendre.leggauss(2 * order)

    @staticmethod
    def _rule(fun: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
              nodes: np.ndarray, weights: np.ndarray) -> float:
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        vals = np.asarray(fun(mid + half * nodes), dtype=float)
        return float(half * np.sum(weights * vals))

    def fixed(self, fun: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> Tuple[float, float]:
        """(estimate, error estimate) of a single non-adaptive pass."""
        coarse = self._rule(fun, lo, hi, self.xg, self.wg)
        fine = self._rule(fun, lo, hi, self.xg2, self.wg2)
        return fine, abs(fine - coarse)

    def integrate(self, fun: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> Tuple[float, float]:
        """Integral of a vectorised ``fun`` over [lo, hi] and the accumulated error estimate.

        Raises QuadratureError when some subinterval cannot reach its share of ``tol``.
        """
        if hi <= lo:
            return 0.0, 0.0
        total, err = 0.0, 0.0
        stack = [(lo, hi, 0)]
        width = hi - lo
        while stack:
            a, b, depth = stack.pop()
            value, e = self.fixed(fun, a, b)
            share = self.tol * (b - a) / width
            if e <= max(share, 1e-300) or e <= 1e-15 * abs(value):
                total += value
                err += e
                continue
            if depth >= self.max_depth:
                raise QuadratureError(f"no convergence on [{a:.17g}, {b:.17g}]", error=e)
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
        logger.debug("integrated [%g, %g]: %.17g (err %.3g)", lo, hi, total, err)
        return total, err

    def integrate_pieces(self, fun: Callable[[np.ndarray], np.ndarray],
                         breakpoints: Sequence[float]) -> Tuple[float, float]:
        """Integral over [breakpoints[0], breakpoints[-1]] split at every breakpoint."""
        total, err = 0.0, 0.0
        for a, b in zip(breakpoints, breakpoints[1:]):
            v, e = self.integrate(fun, a, b)
            total += v
            err += e
        return total, err
