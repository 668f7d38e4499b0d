"""Input checks shared by the estimator wrappers and the CLI."""
from __future__ import annotations

import numpy as np

from .core import MVPC, TriangleMesh
from .exceptions import EmptyInputError, MvpcError


def check_mvpc(obj, name: str = "input") -> MVPC:
    if not isinstance(obj, MVPC):
        raise TypeError(f"{name} must be an MVPC, got {type(obj).__name__}")
    return obj


def check_mesh(obj, name: str = "mesh") -> TriangleMesh:
    if not isinstance(obj, TriangleMesh):
        raise TypeError(f"{name} must be a TriangleMesh, got {type(obj).__name__}")
    if len(obj.triangles) == 0:
        raise EmptyInputError(f"{name} has no triangles")
    return obj


def check_points(points, name: str = "points", allow_empty: bool = True) -> np.ndarray:
    """Coerce to a finite float64 (n, 3) array."""
    p = np.asarray(points, dtype=np.float64)
    if p.size == 0:
        if not allow_empty:
            raise EmptyInputError(f"{name} is empty")
        return p.reshape(0, 3)
    if p.ndim != 2 or p.shape[1] != 3:
        raise MvpcError(f"{name} must have shape (n, 3), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise MvpcError(f"{name} contains non-finite values")
    return p


def check_view_count(n) -> int:
    if n not in (4, 6, 8):
        raise MvpcError(f"view count must be 4, 6 or 8, got {n}")
    return int(n)
