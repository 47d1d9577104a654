"""Load disutility functions and the per-bus dual terms built from them."""

from __future__ import annotations

import numpy as np

N_MONOTONE_SAMPLES = 1000


class CostError(ValueError):
    pass


class CostFunction:
    """Strictly convex disutility ``c(d)`` on ``[d_min, d_max]``.

    ``cost``, ``marginal`` and ``inverse_marginal`` must accept numpy arrays.
    ``inverse_marginal`` only needs to be valid on
    ``[marginal(d_min), marginal(d_max)]``; inputs are clamped to that range
    before it is called.
    """

    def __init__(self, cost, marginal, inverse_marginal, d_min, d_max, *, validate=True):
        d_min = float(d_min)
        d_max = float(d_max)
        if not (np.isfinite(d_min) and np.isfinite(d_max)):
            raise CostError("cost bounds must be finite")
        if d_min > d_max:
            raise CostError(f"lower bound {d_min} exceeds upper bound {d_max}")
        self._cost = cost
        self._marginal = marginal
        self._inverse = inverse_marginal
        self.d_min = d_min
        self.d_max = d_max
        if validate:
            self._check_monotone()

    def _check_monotone(self):
        if self.d_min == self.d_max:
            return
        grid = np.linspace(self.d_min, self.d_max, N_MONOTONE_SAMPLES)
        slopes = np.asarray(self._marginal(grid), dtype=float)
        if not np.all(np.isfinite(slopes)) or np.any(np.diff(slopes) <= 0.0):
            raise CostError("marginal cost is not strictly increasing on [d_min, d_max]")

    def __call__(self, d):
        return self._cost(d)

    def marginal(self, d):
        return self._marginal(d)

    def inverse_marginal(self, y):
        return self._inverse(y)

    def response(self, nu):
        """Clipped inverse marginal ``[c'^-1(nu)]`` projected onto the bounds."""
        nu = np.asarray(nu, dtype=float)
        if self.d_min == self.d_max:
            out = np.full_like(nu, self.d_min)
        else:
            lo = float(self._marginal(self.d_min))
            hi = float(self._marginal(self.d_max))
            out = np.clip(self._inverse(np.clip(nu, lo, hi)), self.d_min, self.d_max)
        return out if out.ndim else float(out)

    def to_dict(self):
        raise CostError("custom cost functions have no file representation")


class QuadraticCost(CostFunction):
    """``c(d) = d**2 / (2 alpha)``, so the unclipped response is ``alpha * nu``."""

    def __init__(self, alpha, d_min, d_max):
        alpha = float(alpha)
        if not (alpha > 0.0 and np.isfinite(alpha)):
            raise CostError(f"alpha must be positive, got {alpha}")
        self.alpha = alpha
        super().__init__(
            lambda d: np.square(d) / (2.0 * alpha),
            lambda d: np.asarray(d, dtype=float) / alpha,
            lambda y: alpha * np.asarray(y, dtype=float),
            d_min,
            d_max,
            validate=False,
        )

    def response(self, nu):
        out = np.clip(self.alpha * np.asarray(nu, dtype=float), self.d_min, self.d_max)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"alpha": self.alpha, "d_min": self.d_min, "d_max": self.d_max}

    def __eq__(self, other):
        if not isinstance(other, QuadraticCost):
            return NotImplemented
        return (self.alpha, self.d_min, self.d_max) == (other.alpha, other.d_min, other.d_max)

    def __hash__(self):
        return hash((self.alpha, self.d_min, self.d_max))

    def __repr__(self):
        return f"QuadraticCost(alpha={self.alpha!r}, d_min={self.d_min!r}, d_max={self.d_max!r})"


def load_response(cost: CostFunction, nu):
    """Controllable load change ``d(nu)`` commanded at frequency deviation ``nu``."""
    return cost.response(nu)


def phi_term(cost: CostFunction, D: float, P_m: float, nu):
    """Per-bus dual objective term.

    ``c(d(nu)) - nu d(nu) - D nu**2 / 2 + nu P_m``; concave in ``nu``.
    """
    d = cost.response(nu)
    nu = np.asarray(nu, dtype=float)
    out = cost(d) - nu * d - 0.5 * D * nu * nu + nu * P_m
    return out if np.ndim(out) else float(out)


def phi_derivative(cost: CostFunction, D: float, P_m: float, nu):
    """``-d(nu) - D nu + P_m``; strictly decreasing because ``D > 0``."""
    d = cost.response(nu)
    out = -d - D * np.asarray(nu, dtype=float) + P_m
    return out if np.ndim(out) else float(out)
