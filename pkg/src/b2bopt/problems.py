"""Small concrete problems used for validation and as API examples."""

from __future__ import annotations

import numpy as np

from .bregman import ReferenceFunction
from .core import BlockPartition, BlockProblem
from .validation import as_matrix, as_vector


class SeparableQuadratic(BlockProblem):
    """f(x) = sum_b c_b/2 ||x_b - t_b||^2 over the nonnegative orthant.

    Each block's reference is the scaled energy with the block's own
    curvature, so the pair is relatively smooth with constant exactly 1.
    """

    def __init__(self, targets, sizes=None, curvatures=None):
        self.target = as_vector(np.asarray(targets, dtype=np.float64), "targets")
        sizes = [self.target.size] if sizes is None else list(sizes)
        self.partition = BlockPartition.from_sizes(sizes)
        if self.partition.n != self.target.size:
            raise ValueError("block sizes must cover the target vector")
        self.curvatures = np.ones(self.partition.s) if curvatures is None \
            else np.asarray(curvatures, dtype=np.float64)
        if self.curvatures.size != self.partition.s or np.any(self.curvatures <= 0):
            raise ValueError("one positive curvature per block required")

    def objective(self, x):
        x = np.asarray(x, dtype=np.float64)
        total = 0.0
        for b in range(self.s):
            sl = self.partition.slice(b)
            diff = x[sl] - self.target[sl]
            total += 0.5 * self.curvatures[b] * float(diff @ diff)
        return total

    def partial_gradient(self, x, b):
        sl = self.partition.slice(b)
        return self.curvatures[b] * (np.asarray(x, dtype=np.float64)[sl] - self.target[sl])

    def reference(self, x, b):
        return ReferenceFunction.scaled_energy(self.curvatures[b], relative_smoothness=1.0)

    def solution(self):
        return np.maximum(self.target, 0.0)


class LeastSquaresProblem(BlockProblem):
    """f(x) = 1/2 ||W x - y||^2 over the nonnegative orthant, with coupled blocks.

    Per-block references default to the scaled energy at the top eigenvalue
    of the block Gram matrix (relative smoothness 1); ``reference_kind``
    may instead request the full weighted quadratic W_b^T W_b + ridge I,
    exercising the generic gradient-inverse path.
    """

    def __init__(self, W, y, sizes, reference_kind="scaled-energy", ridge=1e-8):
        self.W = as_matrix(W, "W")
        self.y = as_vector(y, "y")
        if self.W.shape[0] != self.y.size:
            raise ValueError("W and y are not conformable")
        self.partition = BlockPartition.from_sizes(sizes)
        if self.partition.n != self.W.shape[1]:
            raise ValueError("block sizes must cover the columns of W")
        if reference_kind not in ("scaled-energy", "weighted-quadratic"):
            raise ValueError(f"unknown reference kind {reference_kind!r}")
        self.reference_kind = reference_kind
        self.ridge = float(ridge)
        self._refs = []
        for b in range(self.s):
            Wb = self.W[:, self.partition.slice(b)]
            G = Wb.T @ Wb
            if reference_kind == "scaled-energy":
                top = float(np.linalg.eigvalsh(G)[-1])
                self._refs.append(ReferenceFunction.scaled_energy(
                    max(top, 1e-12), relative_smoothness=1.0))
            else:
                Q = G + self.ridge * np.eye(G.shape[0])
                self._refs.append(ReferenceFunction.weighted_quadratic(
                    Q, relative_smoothness=1.0))

    def objective(self, x):
        r = self.W @ np.asarray(x, dtype=np.float64) - self.y
        return 0.5 * float(r @ r)

    def partial_gradient(self, x, b):
        r = self.W @ np.asarray(x, dtype=np.float64) - self.y
        return self.W[:, self.partition.slice(b)].T @ r

    def reference(self, x, b):
        return self._refs[b]

    def relative_smoothness_bound(self):
        return 1.0
