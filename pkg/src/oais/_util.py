from __future__ import annotations

import numpy as np


def as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to shape ``(n, dim)``; the flag says whether it was a single point.

    For ``dim == 1`` a flat array of length n is read as n scalar points.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if dim == 1 and arr.shape[0] != 1:
            return arr.reshape(-1, 1), False
        if arr.shape[0] != dim:
            raise ValueError(f"point has length {arr.shape[0]}, expected {dim}")
        return arr.reshape(1, dim), True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of shape (n, {dim}), got {arr.shape}")
    return arr, False
