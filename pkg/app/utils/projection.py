"""
Euclidean projection onto the positive simplex {x >= 0, sum(x) = s}.
"""
from typing import Optional

import numpy as np


def euclidean_proj_simplex_rows(v: np.ndarray, mask: Optional[np.ndarray] = None, s: float = 1.0) -> np.ndarray:
    """
    Project every row of ``v`` onto the simplex of radius ``s`` restricted
    to the entries where ``mask`` is set; masked-out entries come back as 0.

    Args:
        v: 2-D array, one point per row
        mask: boolean array of the same shape, at least one entry set per row
        s: radius, strictly positive

    Returns:
        Row-wise closest points of the (restricted) simplex.
    """
    assert s > 0, f"radius must be strictly positive, got {s}"
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    assert mask.any(axis=1).all(), "every row needs an admissible entry"

    masked = np.where(mask, v, -np.inf)
    u = -np.sort(-masked, axis=1)
    cssv = np.cumsum(u, axis=1)
    ranks = np.arange(1, v.shape[1] + 1)
    with np.errstate(invalid="ignore"):
        support = u * ranks > cssv - s
    rho = v.shape[1] - 1 - np.argmax(support[:, ::-1], axis=1)
    theta = (cssv[np.arange(v.shape[0]), rho] - s) / (rho + 1.0)
    return np.where(mask, np.clip(v - theta[:, None], 0.0, None), 0.0)


def euclidean_proj_simplex(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Project the 1-D array ``v`` onto the simplex of radius ``s``."""
    v = np.asarray(v, dtype=float)
    if v.sum() == s and np.all(v >= 0):
        return v.copy()
    return euclidean_proj_simplex_rows(v[None, :], s=s)[0]
