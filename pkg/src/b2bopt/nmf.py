"""Nonnegative matrix factorization as a block problem.

``min 1/2 ||A - U V^T||_F^2`` over entrywise-nonnegative factors, with each
column of U and of V treated as one block: the flat variable is the R
columns of U followed by the R columns of V (s = 2R blocks).  The canonical
objective carries the 1/2 factor so block gradients match it exactly; the
unhalved squared error is exposed separately for reporting.

Each block's reference function is the scaled energy with the squared norm
of the opposite factor column as its scale, which makes the pair
(block objective, reference) relatively smooth with constant exactly 1 and
forces the optimal constant stepsize to 1.  The unit-stepsize update then
coincides with the classic HALS column update.
"""

from __future__ import annotations

import numpy as np

from .bregman import ReferenceFunction
from .core import (
    ZERO_NORM_GUARD,
    BlockPartition,
    BlockProblem,
    InvalidBlockError,
    ProblemSession,
    SparseMatrix,
)
from .metrics import optimality_report, relative_residual
from .solvers import valid_coordinates
from .validation import as_matrix


class NmfProblem(BlockProblem):
    """Factorize an M x N nonnegative matrix at rank R.

    Parameters
    ----------
    A : ndarray or SparseMatrix
        The data matrix, entrywise nonnegative.
    rank : int
        Number of components R, at most min(M, N).
    """

    def __init__(self, A, rank):
        if isinstance(A, SparseMatrix):
            if A.nnz and A.values.min() < 0:
                k = int(np.argmin(A.values))
                raise ValueError(
                    f"A must be entrywise nonnegative; entry "
                    f"({A.row_idx[k]}, {A.col_idx[k]}) is {A.values[k]}")
            self.A = A
        else:
            self.A = as_matrix(A, "A", nonnegative=True)
        self.m, self.n_cols = self.A.shape
        rank = int(rank)
        if rank < 1 or rank > min(self.m, self.n_cols):
            raise ValueError(f"rank must lie in [1, min(M, N)] = [1, {min(self.m, self.n_cols)}]")
        self.rank = rank
        sizes = [self.m] * rank + [self.n_cols] * rank
        self.partition = BlockPartition.from_sizes(sizes)
        self.norm_a = float(np.linalg.norm(self.A.values)) if isinstance(self.A, SparseMatrix) \
            else float(np.linalg.norm(self.A))

    # flat layout helpers ---------------------------------------------------

    def factors(self, x):
        """Views (U, V) of the flat variable; writes through to x."""
        m, n, r = self.m, self.n_cols, self.rank
        U = x[: m * r].reshape(r, m).T
        V = x[m * r:].reshape(r, n).T
        return U, V

    def flatten(self, U, V):
        return np.concatenate([np.asarray(U).T.ravel(), np.asarray(V).T.ravel()])

    def is_u_block(self, b):
        return b < self.rank

    def block_scale(self, x, b):
        """Squared norm of the opposite factor column (the reference scale)."""
        U, V = self.factors(x)
        col = V[:, b] if self.is_u_block(b) else U[:, b - self.rank]
        return float(col @ col)

    # BlockProblem contract -------------------------------------------------

    def objective(self, x):
        U, V = self.factors(np.asarray(x, dtype=np.float64))
        if isinstance(self.A, SparseMatrix):
            G = U.T @ U
            H = V.T @ V
            sq = self.norm_a ** 2 - 2.0 * self.A.inner_with_factors(U, V) + float(np.vdot(G, H))
            return 0.5 * max(sq, 0.0)
        R = self.A - U @ V.T
        return 0.5 * float(np.vdot(R, R))

    def fro_error_squared(self, x):
        """The unhalved squared Frobenius error ||A - U V^T||_F^2."""
        return 2.0 * self.objective(x)

    def partial_gradient(self, x, b):
        x = np.asarray(x, dtype=np.float64)
        U, V = self.factors(x)
        if isinstance(self.A, SparseMatrix):
            if self.is_u_block(b):
                return U @ (V.T @ V[:, b]) - self.A.matvec(V[:, b])
            j = b - self.rank
            return V @ (U.T @ U[:, j]) - self.A.rmatvec(U[:, j])
        E = self.A - U @ V.T
        if self.is_u_block(b):
            return -(E @ V[:, b])
        return -(E.T @ U[:, b - self.rank])

    def full_gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        U, V = self.factors(x)
        if isinstance(self.A, SparseMatrix):
            GU = U @ (V.T @ V) - self.A.matmat(V)
            GV = V @ (U.T @ U) - self.A.rmatmat(U)
        else:
            E = self.A - U @ V.T
            GU = -(E @ V)
            GV = -(E.T @ U)
        return np.concatenate([GU.T.ravel(), GV.T.ravel()])

    def reference(self, x, b):
        c = self.block_scale(np.asarray(x, dtype=np.float64), b)
        if c <= ZERO_NORM_GUARD:
            raise InvalidBlockError(
                f"block {b} has a degenerate reference (opposite column squared "
                f"norm {c:.3e}); schedules never select it")
        return ReferenceFunction.scaled_energy(c, relative_smoothness=1.0)

    def direction(self, x, b, g_b=None):
        x = np.asarray(x, dtype=np.float64)
        if g_b is None:
            g_b = self.partial_gradient(x, b)
        c = self.block_scale(x, b)
        if c <= ZERO_NORM_GUARD:
            raise InvalidBlockError(f"block {b} is degenerate")
        return -g_b / c

    def quality(self, x):
        U, V = self.factors(np.asarray(x, dtype=np.float64))
        return relative_residual(self.A, U, V)

    def relative_smoothness_bound(self):
        return 1.0

    def optimal_stepsize_hint(self, x):
        # (1+beta) m_b / (2 L_b M_b) = 2c / (2c) = 1 for every block and state
        return 1.0

    def start(self, x0):
        if isinstance(self.A, SparseMatrix):
            return SparseNmfState(self, x0)
        return NmfState(self, x0)


class NmfState(ProblemSession):
    """Dense-data session with a maintained residual E = A - U V^T.

    Block writes correct E by a rank-one update; a full recomputation every
    ``recompute_every`` writes bounds floating-point drift.
    """

    def __init__(self, problem, x0, recompute_every=100):
        super().__init__(problem, x0)
        self.U, self.V = problem.factors(self.x)
        self.E = problem.A - self.U @ self.V.T
        self.recompute_every = recompute_every
        self._writes = 0

    def objective(self):
        return 0.5 * float(np.vdot(self.E, self.E))

    def partial_gradient(self, b):
        if self.problem.is_u_block(b):
            return -(self.E @ self.V[:, b])
        return -(self.E.T @ self.U[:, b - self.problem.rank])

    def full_gradient(self):
        GU = -(self.E @ self.V)
        GV = -(self.E.T @ self.U)
        return np.concatenate([GU.T.ravel(), GV.T.ravel()])

    def objective_with_block(self, b, trial_values):
        sl = self.partition.slice(b)
        delta = np.asarray(trial_values, dtype=np.float64) - self.x[sl]
        g = self.partial_gradient(b)
        c = self.problem.block_scale(self.x, b)
        return self.objective() + float(g @ delta) + 0.5 * c * float(delta @ delta)

    def apply_block(self, b, new_values):
        sl = self.partition.slice(b)
        old = self.x[sl].copy()
        self.x[sl] = new_values
        delta = self.x[sl] - old
        if self.problem.is_u_block(b):
            self.E -= np.outer(delta, self.V[:, b])
        else:
            self.E -= np.outer(self.U[:, b - self.problem.rank], delta)
        self._writes += 1
        if self.recompute_every and self._writes >= self.recompute_every:
            self.recompute()

    def recompute(self):
        self.E = self.problem.A - self.U @ self.V.T
        self._writes = 0

    def set_all(self, values):
        self.x[:] = values
        self.recompute()

    def residual_drift(self):
        """||E - (A - U V^T)||_F, for drift monitoring."""
        return float(np.linalg.norm(self.E - (self.problem.A - self.U @ self.V.T)))

    def quality(self):
        return float(np.linalg.norm(self.E)) / self.problem.norm_a


class SparseNmfState(ProblemSession):
    """Sparse-data session: Gram and cross-product caches, never densifies A."""

    def __init__(self, problem, x0, recompute_every=100):
        super().__init__(problem, x0)
        self.U, self.V = problem.factors(self.x)
        self.recompute_every = recompute_every
        self._writes = 0
        self.recompute()

    def recompute(self):
        A = self.problem.A
        self.UtU = self.U.T @ self.U
        self.VtV = self.V.T @ self.V
        self.AV = A.matmat(self.V)      # M x R
        self.AtU = A.rmatmat(self.U)    # N x R
        self._writes = 0

    def objective(self):
        sq = self.problem.norm_a ** 2 - 2.0 * float(np.vdot(self.U, self.AV)) \
            + float(np.vdot(self.UtU, self.VtV))
        return 0.5 * max(sq, 0.0)

    def partial_gradient(self, b):
        if self.problem.is_u_block(b):
            return self.U @ self.VtV[:, b] - self.AV[:, b]
        j = b - self.problem.rank
        return self.V @ self.UtU[:, j] - self.AtU[:, j]

    def full_gradient(self):
        GU = self.U @ self.VtV - self.AV
        GV = self.V @ self.UtU - self.AtU
        return np.concatenate([GU.T.ravel(), GV.T.ravel()])

    def objective_with_block(self, b, trial_values):
        sl = self.partition.slice(b)
        delta = np.asarray(trial_values, dtype=np.float64) - self.x[sl]
        g = self.partial_gradient(b)
        c = self.problem.block_scale(self.x, b)
        return self.objective() + float(g @ delta) + 0.5 * c * float(delta @ delta)

    def apply_block(self, b, new_values):
        sl = self.partition.slice(b)
        self.x[sl] = new_values
        A = self.problem.A
        if self.problem.is_u_block(b):
            col = self.U[:, b]
            self.UtU[:, b] = self.U.T @ col
            self.UtU[b, :] = self.UtU[:, b]
            self.AtU[:, b] = A.rmatvec(col)
        else:
            j = b - self.problem.rank
            col = self.V[:, j]
            self.VtV[:, j] = self.V.T @ col
            self.VtV[j, :] = self.VtV[:, j]
            self.AV[:, j] = A.matvec(col)
        self._writes += 1
        if self.recompute_every and self._writes >= self.recompute_every:
            self.recompute()

    def set_all(self, values):
        self.x[:] = values
        self.recompute()

    def quality(self):
        return float(np.sqrt(2.0 * self.objective())) / self.problem.norm_a


# ---------------------------------------------------------------------------
# module-level operations mirroring the solver path


def nmf_block_update(state, b):
    """Unit-stepsize closed-form update of one block, maintaining the residual.

    Replaces the block by the clamped exact minimizer of its subproblem
    (the HALS column update); raises on degenerate blocks.
    """
    problem = state.problem
    c = problem.block_scale(state.x, b)
    if c <= ZERO_NORM_GUARD:
        raise InvalidBlockError(f"block {b} is degenerate")
    g = state.partial_gradient(b)
    x_b = state.x[state.partition.slice(b)]
    d = np.where(valid_coordinates(x_b, g), -g / c, 0.0)
    state.apply_block(b, np.maximum(x_b + d, 0.0))
    return state


def nmf_valid_blocks(problem, x):
    """Indices of blocks with a nondegenerate reference and >= 1 valid coordinate."""
    out = []
    for b in range(problem.s):
        if problem.block_scale(x, b) <= ZERO_NORM_GUARD:
            continue
        g = problem.partial_gradient(x, b)
        if np.any(valid_coordinates(x[problem.partition.slice(b)], g)):
            out.append(b)
    return out


def nmf_full_projected_gradient(problem, x, reference_norm=None):
    return optimality_report(problem, x, reference_norm=reference_norm)
