"""Matrix substrate, block partitions and the abstract block problem.

Everything downstream (solvers, metrics, the NMF instantiation) is written
against the small set of contracts in this module: dense matrices are plain
float64 ndarrays, sparse data matrices are :class:`SparseMatrix`, and a
composite objective over a nonnegativity-constrained blocked variable is a
:class:`BlockProblem`.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .validation import as_vector, require_finite, require_same_length

ZERO_NORM_GUARD = 1e-30  # squared-norm threshold below which a block scale is degenerate


class InvalidReferenceError(ValueError):
    """A reference function is degenerate (e.g. zero or indefinite scale)."""


class InvalidBlockError(ValueError):
    """A block cannot be updated (degenerate reference, never selected by schedules)."""


class LineSearchError(RuntimeError):
    """Backtracking exhausted its budget; signals a non-descent direction or gradient bug."""


class DescentViolationError(RuntimeError):
    """A per-step descent or rate inequality failed beyond tolerance."""

    def __init__(self, message, block=None, iteration=None):
        super().__init__(message)
        self.block = block
        self.iteration = iteration


class ConfigError(ValueError):
    """Invalid solver or experiment configuration."""


def orthogonal_project_nonneg(v):
    """Componentwise projection onto the nonnegative orthant, max(v, 0)."""
    arr = as_vector(v, "v")
    return np.maximum(arr, 0.0)


def frobenius_norm(M):
    """Frobenius norm of a dense ndarray or a :class:`SparseMatrix`."""
    if isinstance(M, SparseMatrix):
        return float(np.linalg.norm(M.values))
    arr = np.asarray(M, dtype=np.float64)
    require_finite(arr, "M")
    return float(np.linalg.norm(arr.ravel()))


def residual_update(E, u, v_old, v_new):
    """Rank-one residual correction E + u (v_old - v_new)^T.

    Keeps a maintained residual E = A - U V^T consistent after one factor
    column moves from ``v_old`` to ``v_new``.
    """
    E = np.asarray(E, dtype=np.float64)
    u = as_vector(u, "u")
    v_old = as_vector(v_old, "v_old")
    v_new = as_vector(v_new, "v_new")
    require_same_length(v_old, v_new, "v_old/v_new")
    if E.shape != (u.shape[0], v_old.shape[0]):
        raise ValueError(
            f"residual shape {E.shape} not conformable with u ({u.shape[0]}) "
            f"and v ({v_old.shape[0]})"
        )
    return E + np.outer(u, v_old - v_new)


@dataclass(frozen=True)
class SparseMatrix:
    """COO sparse matrix in canonical (row-major sorted) order.

    Invariants enforced at construction: indices in range, no duplicate
    (row, col) pairs, values finite and nonzero.
    """

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_idx = np.asarray(self.row_idx, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if not (row_idx.shape == col_idx.shape == values.shape) or row_idx.ndim != 1:
            raise ValueError("row_idx, col_idx, values must be equal-length 1-D arrays")
        if row_idx.size:
            if row_idx.min() < 0 or row_idx.max() >= self.rows:
                raise ValueError("row index out of range")
            if col_idx.min() < 0 or col_idx.max() >= self.cols:
                raise ValueError("column index out of range")
        require_finite(values, "sparse values")
        if np.any(values == 0.0):
            raise ValueError("explicit zero entries are not stored")
        order = np.lexsort((col_idx, row_idx))
        row_idx, col_idx, values = row_idx[order], col_idx[order], values[order]
        flat = row_idx * self.cols + col_idx
        if flat.size and np.any(np.diff(flat) == 0):
            k = int(np.flatnonzero(np.diff(flat) == 0)[0])
            raise ValueError(
                f"duplicate entry at ({row_idx[k]}, {col_idx[k]})"
            )
        object.__setattr__(self, "row_idx", row_idx)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return int(self.values.size)

    def matvec(self, v):
        """A @ v for a length-``cols`` vector."""
        v = np.asarray(v, dtype=np.float64)
        return np.bincount(
            self.row_idx, weights=self.values * v[self.col_idx], minlength=self.rows
        )

    def rmatvec(self, u):
        """A.T @ u for a length-``rows`` vector."""
        u = np.asarray(u, dtype=np.float64)
        return np.bincount(
            self.col_idx, weights=self.values * u[self.row_idx], minlength=self.cols
        )

    def matmat(self, V):
        """A @ V for a (cols, k) matrix."""
        V = np.asarray(V, dtype=np.float64)
        out = np.empty((self.rows, V.shape[1]))
        for k in range(V.shape[1]):
            out[:, k] = self.matvec(V[:, k])
        return out

    def rmatmat(self, U):
        """A.T @ U for a (rows, k) matrix."""
        U = np.asarray(U, dtype=np.float64)
        out = np.empty((self.cols, U.shape[1]))
        for k in range(U.shape[1]):
            out[:, k] = self.rmatvec(U[:, k])
        return out

    def inner_with_factors(self, U, V):
        """<A, U V^T> without densifying A."""
        return float(
            np.sum(self.values * np.einsum("ij,ij->i", U[self.row_idx], V[self.col_idx]))
        )

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.row_idx, self.col_idx] = self.values
        return out


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous, disjoint intervals covering all n coordinates."""

    bounds: np.ndarray  # shape (s+1,), strictly increasing, bounds[0] == 0

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.int64)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("partition needs at least one block")
        if b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValueError("block intervals must be nonempty, contiguous and start at 0")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def from_sizes(cls, sizes):
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(np.concatenate([[0], np.cumsum(sizes)]))

    @property
    def s(self):
        return int(self.bounds.size - 1)

    @property
    def n(self):
        return int(self.bounds[-1])

    def slice(self, b):
        return slice(int(self.bounds[b]), int(self.bounds[b + 1]))

    def size(self, b):
        return int(self.bounds[b + 1] - self.bounds[b])


@dataclass
class BlockedIterate:
    """A feasible (entrywise nonnegative) point with its block structure."""

    values: np.ndarray
    partition: BlockPartition

    def __post_init__(self):
        self.values = as_vector(self.values, "values")
        if self.values.size != self.partition.n:
            raise ValueError(
                f"iterate length {self.values.size} != partition size {self.partition.n}"
            )
        if self.values.size and self.values.min() < 0:
            raise ValueError("iterate must be entrywise nonnegative")

    def block(self, b):
        return self.values[self.partition.slice(b)]

    def copy(self):
        return BlockedIterate(self.values.copy(), self.partition)


class BlockProblem(ABC):
    """Composite objective f over a blocked nonnegative variable.

    Concrete problems provide the objective, per-block partial gradients and
    per-block reference functions; the regularizer is fixed to the indicator
    of the nonnegative orthant.
    """

    partition: BlockPartition

    @property
    def n(self):
        return self.partition.n

    @property
    def s(self):
        return self.partition.s

    @abstractmethod
    def objective(self, x) -> float:
        """f(x) for a flat feasible point."""

    @abstractmethod
    def partial_gradient(self, x, b) -> np.ndarray:
        """Gradient of f restricted to block b, evaluated at x."""

    @abstractmethod
    def reference(self, x, b):
        """Reference function for block b at the point x."""

    def full_gradient(self, x):
        out = np.empty(self.n)
        for b in range(self.s):
            out[self.partition.slice(b)] = self.partial_gradient(x, b)
        return out

    def direction(self, x, b, g_b=None):
        """Exact minimizer of <g_b, d> + D_h(x_b + d, x_b) over d."""
        from .bregman import bregman_step

        if g_b is None:
            g_b = self.partial_gradient(x, b)
        return bregman_step(self.reference(x, b), x[self.partition.slice(b)], g_b)

    def quality(self, x):
        """Optional problem-specific quality measure (None if undefined)."""
        return None

    def sample_point(self, rng):
        return rng.uniform(0.0, 1.0, self.n)

    def sample_block(self, rng, b):
        return rng.uniform(0.0, 1.0, self.partition.size(b))

    def relative_smoothness_bound(self):
        """Upper bound on max_b L_b; concrete problems may tighten it."""
        return 1.0

    def optimal_stepsize_hint(self, x):
        """min_b (1 + beta_b) m_b / (2 L_b M_b) evaluated at x, skipping degenerate blocks."""
        best = np.inf
        for b in range(self.s):
            try:
                h = self.reference(x, b)
            except (InvalidBlockError, InvalidReferenceError):
                continue
            best = min(best, (1.0 + h.symmetry) * h.strong_convexity
                       / (2.0 * h.relative_smoothness * h.gradient_smoothness))
        if not np.isfinite(best):
            raise ConfigError("no block admits a reference function at this point")
        return float(best)

    def start(self, x0):
        """Open a single-run session owning a private copy of x0."""
        return ProblemSession(self, x0)


class ProblemSession:
    """Mutable per-run view of a problem: owns the iterate, brokers updates.

    The default implementation recomputes everything from the flat iterate;
    problems with maintained caches (NMF's residual) override ``start`` to
    return a faster session with identical semantics.
    """

    def __init__(self, problem, x0):
        self.problem = problem
        self.x = np.array(x0, dtype=np.float64, copy=True)
        if self.x.min() < 0:
            raise ValueError("initial point must be feasible (entrywise >= 0)")

    @property
    def partition(self):
        return self.problem.partition

    def objective(self):
        return self.problem.objective(self.x)

    def partial_gradient(self, b):
        return self.problem.partial_gradient(self.x, b)

    def full_gradient(self):
        return self.problem.full_gradient(self.x)

    def reference(self, b):
        return self.problem.reference(self.x, b)

    def direction(self, b, g_b=None):
        return self.problem.direction(self.x, b, g_b)

    def objective_with_block(self, b, trial_values):
        trial = self.x.copy()
        trial[self.partition.slice(b)] = trial_values
        return self.problem.objective(trial)

    def objective_at(self, values):
        return self.problem.objective(values)

    def apply_block(self, b, new_values):
        self.x[self.partition.slice(b)] = new_values

    def set_all(self, values):
        self.x[:] = values

    def quality(self):
        return self.problem.quality(self.x)
