"""Reference functions, Bregman distances and exact subproblem steps.

The catalogue of reference functions is closed: the energy ``1/2 ||.||^2``,
its scaled variant ``c/2 ||.||^2`` and a weighted quadratic
``1/2 x^T Q x`` with Q symmetric positive definite.  Each kind supplies an
exact gradient inverse, which is what makes the two-reference block step a
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidReferenceError
from .validation import as_vector, require_same_length

ENERGY = "energy"
SCALED_ENERGY = "scaled-energy"
WEIGHTED_QUADRATIC = "weighted-quadratic"


class ReferenceFunction:
    """A strongly convex quadratic reference h with its curvature constants.

    Parameters
    ----------
    kind : str
        One of ``energy``, ``scaled-energy``, ``weighted-quadratic``.
    scale : float, optional
        The scale c for the scaled energy.
    weight : ndarray, optional
        The SPD matrix Q for the weighted quadratic.
    relative_smoothness : float
        The constant L of the (f_b, h_b) pair this reference is used with.

    Attributes
    ----------
    strong_convexity : float
        m, the strong-convexity modulus of h.
    gradient_smoothness : float
        M, the Lipschitz modulus of grad h.
    symmetry : float
        beta(h) = inf D_h(x,y)/D_h(y,x); exactly 1 for every quadratic kind.
    """

    def __init__(self, kind, scale=None, weight=None, relative_smoothness=1.0):
        self.kind = kind
        self.relative_smoothness = float(relative_smoothness)
        if self.relative_smoothness <= 0:
            raise InvalidReferenceError("relative smoothness constant must be positive")
        if kind == ENERGY:
            self.scale = 1.0
            self.weight = None
            m = M = 1.0
        elif kind == SCALED_ENERGY:
            if scale is None or not np.isfinite(scale) or scale <= 0:
                raise InvalidReferenceError(f"scaled energy needs a positive scale, got {scale}")
            self.scale = float(scale)
            self.weight = None
            m = M = self.scale
        elif kind == WEIGHTED_QUADRATIC:
            Q = np.asarray(weight, dtype=np.float64)
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
                raise InvalidReferenceError("weight must be a square matrix")
            if not np.allclose(Q, Q.T, atol=1e-12):
                raise InvalidReferenceError("weight must be symmetric")
            eigs = np.linalg.eigvalsh(Q)
            if eigs[0] <= 0:
                raise InvalidReferenceError("weight must be positive definite")
            self.scale = None
            self.weight = Q
            self._cho = np.linalg.cholesky(Q)
            m, M = float(eigs[0]), float(eigs[-1])
        else:
            raise InvalidReferenceError(f"unknown reference kind {kind!r}")
        self.strong_convexity = m
        self.gradient_smoothness = M
        self.symmetry = 1.0  # quadratic distances are symmetric

    @classmethod
    def energy(cls, relative_smoothness=1.0):
        return cls(ENERGY, relative_smoothness=relative_smoothness)

    @classmethod
    def scaled_energy(cls, scale, relative_smoothness=1.0):
        return cls(SCALED_ENERGY, scale=scale, relative_smoothness=relative_smoothness)

    @classmethod
    def weighted_quadratic(cls, Q, relative_smoothness=1.0):
        return cls(WEIGHTED_QUADRATIC, weight=Q, relative_smoothness=relative_smoothness)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.weight is None:
            return 0.5 * self.scale * float(x @ x)
        return 0.5 * float(x @ (self.weight @ x))

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.weight is None:
            return self.scale * x
        return self.weight @ x

    def grad_inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.weight is None:
            return y / self.scale
        z = np.linalg.solve(self._cho, y)
        return np.linalg.solve(self._cho.T, z)

    def distance(self, u, x):
        """D_h(u, x); closed quadratic form, free of cancellation."""
        diff = np.asarray(u, dtype=np.float64) - np.asarray(x, dtype=np.float64)
        if self.weight is None:
            return 0.5 * self.scale * float(diff @ diff)
        return 0.5 * float(diff @ (self.weight @ diff))

    def __repr__(self):
        if self.kind == SCALED_ENERGY:
            return f"ReferenceFunction(scaled-energy, c={self.scale:g})"
        return f"ReferenceFunction({self.kind})"


def bregman_distance(h, u, x):
    """D_h(u, x) = h(u) - h(x) - <grad h(x), u - x>.

    Nonnegative, and zero exactly when u == x (h is strictly convex).
    """
    u = as_vector(u, "u")
    x = as_vector(x, "x")
    require_same_length(u, x)
    return h.distance(u, x)


def bregman_step(h, x_b, g_b):
    """Exact minimizer of <g_b, d> + D_h(x_b + d, x_b).

    Equals (grad h)^{-1}(grad h(x_b) - g_b) - x_b; for the energy this is the
    plain negative gradient.
    """
    x_b = as_vector(x_b, "x_b")
    g_b = as_vector(g_b, "g_b")
    require_same_length(x_b, g_b)
    if h.weight is None:
        return -g_b / h.scale
    return -h.grad_inverse(g_b)


@dataclass(frozen=True)
class StepSizeBound:
    """The stepsize alpha* = (1+beta) m / (2 L M) maximizing the decrease factor."""

    alpha_star: float
    m: float
    M: float
    L: float
    beta: float

    def __post_init__(self):
        expected = (1.0 + self.beta) * self.m / (2.0 * self.L * self.M)
        if not np.isclose(self.alpha_star, expected, rtol=0, atol=1e-15 * max(1, abs(expected))):
            raise ValueError("alpha_star must equal (1+beta) m / (2 L M)")


def optimal_stepsize(m, M, L, beta):
    if min(m, M, L) <= 0:
        raise ValueError("m, M, L must be positive")
    alpha = (1.0 + beta) * m / (2.0 * L * M)
    return StepSizeBound(alpha_star=alpha, m=float(m), M=float(M), L=float(L), beta=float(beta))


def decrease_coefficient(h, alpha):
    """Per-step decrease factor (alpha (1+beta) m / 2)(1 - L M alpha / ((1+beta) m)).

    Multiplies the squared norm of the realized step direction in the
    sufficient-decrease inequality.  Positive for alpha below
    (1+beta) m / (L M), maximal at alpha*.
    """
    m, M = h.strong_convexity, h.gradient_smoothness
    L, beta = h.relative_smoothness, h.symmetry
    return (alpha * (1.0 + beta) * m / 2.0) * (1.0 - L * M * alpha / ((1.0 + beta) * m))


@dataclass(frozen=True)
class SmoothnessReport:
    ok: bool
    worst_excess: float
    max_ratio: float
    samples: int


def relative_smoothness_check(problem, b, L, samples=1000, rng=None, tol=1e-9):
    """Sampling validator of |f_b(y) - f_b(x) - <grad f_b(x), y - x>| <= L D_h(y, x).

    Draws feasible base points and per-block pairs; not a proof, but a
    falsifier: a single sampled violation beyond ``tol`` refutes the constant.
    """
    rng = np.random.default_rng(rng)
    sl = problem.partition.slice(b)
    worst = -np.inf
    ratio = 0.0
    for _ in range(samples):
        base = problem.sample_point(rng)
        h = problem.reference(base, b)
        x_b = base[sl].copy()
        y_b = problem.sample_block(rng, b)
        g = problem.partial_gradient(base, b)
        fx = problem.objective(base)
        trial = base.copy()
        trial[sl] = y_b
        fy = problem.objective(trial)
        lin_gap = abs(fy - fx - float(g @ (y_b - x_b)))
        dist = h.distance(y_b, x_b)
        worst = max(worst, lin_gap - L * dist)
        if dist > 0:
            ratio = max(ratio, lin_gap / dist)
    return SmoothnessReport(ok=bool(worst <= tol), worst_excess=float(worst),
                            max_ratio=float(ratio), samples=samples)


def symmetric_coefficient_estimate(h, samples=1000, rng=None, force_sample=False):
    """Estimate beta(h) = inf D_h(x,y)/D_h(y,x) over sampled pairs.

    Quadratic references have symmetric distances, so the exact value 1 is
    returned without sampling unless ``force_sample`` is set.  The sampled
    value is only an upper bound on the true infimum.
    """
    if not force_sample:
        return 1.0
    rng = np.random.default_rng(rng)
    dim = h.weight.shape[0] if h.weight is not None else 4
    best = np.inf
    for _ in range(samples):
        x = rng.standard_normal(dim)
        y = rng.standard_normal(dim)
        dxy = h.distance(x, y)
        dyx = h.distance(y, x)
        if dyx > 0:
            best = min(best, dxy / dyx)
    return float(best)
