"""Input validation helpers shared by the estimator, solvers and harness."""

import numpy as np


def as_vector(v, name="v"):
    """Coerce to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    require_finite(arr, name)
    return arr


def as_matrix(M, name="M", nonnegative=False):
    """Coerce to a 2-D float64 array; optionally require entrywise >= 0."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    require_finite(arr, name)
    if nonnegative and arr.size and arr.min() < 0:
        i, j = np.unravel_index(int(np.argmin(arr)), arr.shape)
        raise ValueError(
            f"{name} must be entrywise nonnegative; entry ({i}, {j}) is {arr[i, j]}"
        )
    return arr


def require_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values (NaN or Inf)")


def require_same_length(u, x, what="vectors"):
    if u.shape != x.shape:
        raise ValueError(f"{what} have mismatched shapes {u.shape} vs {x.shape}")
