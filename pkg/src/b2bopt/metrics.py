"""Optimality and quality measures shared by all solvers and the stopping rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidBlockError,
    InvalidReferenceError,
    SparseMatrix,
    frobenius_norm,
)
from .validation import as_vector, require_same_length


def projected_gradient(x, g):
    """Boundary-aware gradient: g_i where x_i > 0, min(0, g_i) where x_i == 0.

    Zero exactly at critical points of the nonnegativity-constrained problem.
    The case split tests x_i == 0 exactly: solvers write literal zeros via
    max-clamping, so no tolerance band is applied (coordinates that are tiny
    but nonzero count as interior).
    """
    x = as_vector(x, "x")
    g = as_vector(g, "g")
    require_same_length(x, g)
    return np.where(x > 0, g, np.minimum(g, 0.0))


def generalized_gradient(x, g, alpha):
    """Fixed-point residual (x - [x - alpha g]_+) / alpha of the projected step."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = as_vector(x, "x")
    g = as_vector(g, "g")
    require_same_length(x, g)
    return (x - np.maximum(x - alpha * g, 0.0)) / alpha


def relative_residual(A, U, V):
    """Factorization quality ||A - U V^T||_F / ||A||_F."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    nA = frobenius_norm(A)
    if nA == 0.0:
        raise ValueError("data matrix must be nonzero")
    if isinstance(A, SparseMatrix):
        G = U.T @ U
        H = V.T @ V
        sq = float(np.vdot(A.values, A.values)) - 2.0 * A.inner_with_factors(U, V) \
            + float(np.vdot(G, H))
        return float(np.sqrt(max(sq, 0.0))) / nA
    return float(np.linalg.norm(A - U @ V.T)) / nA


@dataclass
class OptimalityReport:
    """Projected gradient and its norms for one iterate."""

    proj_grad: np.ndarray
    proj_grad_norm: float
    rel_proj_grad: float
    per_block_norms: np.ndarray
    degenerate: bool = False

    @property
    def valid_blocks(self):
        """Blocks with at least one valid coordinate (nonzero projected gradient)."""
        return np.flatnonzero(self.per_block_norms > 0.0)


def optimality_report(problem, x, reference_norm=None, gradient=None):
    """Assemble the projected gradient over the flattened variable.

    ``reference_norm`` is the initial-point norm used for the relative
    measure; when omitted the report's own norm is used (rel = 1 away from
    stationarity, 0 at it).  ``gradient`` short-circuits the full-gradient
    evaluation when the caller already has it (solver sessions maintain it
    more cheaply than the stateless path).
    """
    g = problem.full_gradient(x) if gradient is None else gradient
    pg = projected_gradient(x, g)
    part = problem.partition
    norms = np.sqrt(np.add.reduceat(pg * pg, part.bounds[:-1]))
    total = float(np.linalg.norm(pg))
    if reference_norm is None:
        rel = 0.0 if total == 0.0 else 1.0
    else:
        rel = 0.0 if reference_norm == 0.0 else total / reference_norm
    degenerate = total == 0.0 and _has_degenerate_block(problem, x)
    return OptimalityReport(pg, total, rel, norms, degenerate)


def _has_degenerate_block(problem, x):
    for b in range(problem.s):
        try:
            problem.reference(x, b)
        except (InvalidBlockError, InvalidReferenceError):
            return True
    return False


@dataclass(frozen=True)
class StationarityCheck:
    agree: bool
    norm_condition: bool        # ||proj grad|| <= tol
    direction_condition: bool   # every block invalid or ||d_b|| <= tol
    fixed_point_condition: bool  # ||[x + alpha d]_+ - x|| <= tol for alpha in {0.1, 1, 10}


def stationarity_equivalence_check(problem, x, tol, alphas=(0.1, 1.0, 10.0)):
    """Cross-check the three computable stationarity certificates.

    (a) the projected-gradient norm is below tol; (b) every block is invalid
    or its exact subproblem direction is below tol; (c) the projected update
    map moves x by at most tol for each sampled stepsize.  Returns whether
    the three answers coincide.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = as_vector(x, "x")
    report = optimality_report(problem, x)
    cond_a = report.proj_grad_norm <= tol

    part = problem.partition
    d_full = np.zeros_like(x)
    cond_b = True
    for b in range(part.s):
        if report.per_block_norms[b] == 0.0:
            continue  # invalid block
        try:
            g_b = problem.partial_gradient(x, b)
            d_b = problem.direction(x, b, g_b)
        except (InvalidBlockError, InvalidReferenceError):
            continue
        x_b = x[part.slice(b)]
        valid = ((x_b > 0) & (g_b != 0)) | ((x_b == 0) & (g_b < 0))
        d_b = np.where(valid, d_b, 0.0)
        d_full[part.slice(b)] = d_b
        if np.linalg.norm(d_b) > tol:
            cond_b = False

    cond_c = True
    for alpha in alphas:
        moved = np.maximum(x + alpha * d_full, 0.0) - x
        if np.linalg.norm(moved) > tol:
            cond_c = False
            break

    agree = cond_a == cond_b == cond_c
    return StationarityCheck(agree, cond_a, cond_b, cond_c)
