"""Descriptor pooling over dense feature grids.

Must stay numerically equivalent to the mapping engine's pooling: the
full-resolution mask is sampled at grid-cell centers
(``mask[i*stride + stride//2, j*stride + stride//2]``), covered cells are
averaged, and the mean is L2-normalized.
"""

from __future__ import annotations

import numpy as np


def pool_mask_features(feature_grid: np.ndarray, mask: np.ndarray, stride: int) -> np.ndarray | None:
    """Unit-norm pooled descriptor, or None when the mask covers no cell."""
    grid = np.asarray(feature_grid, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    gh, gw = grid.shape[0], grid.shape[1]
    small = mask[stride // 2 :: stride, stride // 2 :: stride][:gh, :gw]
    if not small.any():
        return None
    mean = grid[small].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        return None
    return mean / norm
