from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_points(points, d: int | None = None, *, name: str = "points", allow_empty: bool = True) -> np.ndarray:
    """Validate an ``(n, d)`` array of finite coordinates."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1 and points.size == 0:
        points = points.reshape(0, d or 0)
    if points.shape[0] == 0:
        if not allow_empty:
            raise ValueError(f"{name} must not be empty")
        if points.ndim != 2 or (d is not None and points.shape[1] not in (0, d)):
            raise ValueError(f"{name} must have shape (n, {d}), got {points.shape}")
        return points.reshape(0, d if d is not None else points.shape[1])
    points = check_array(points, dtype=np.float64, ensure_2d=True, input_name=name)
    if d is not None and points.shape[1] != d:
        raise ValueError(f"{name} must have {d} columns, got {points.shape[1]}")
    return points


def check_dims(dims) -> tuple[int, ...]:
    """Image dimensions in (x, y[, z]) order."""
    dims = tuple(int(s) for s in dims)
    if len(dims) not in (2, 3):
        raise ValueError(f"dims must have 2 or 3 entries, got {len(dims)}")
    if any(s < 1 for s in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    return dims


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_fraction(value, name: str, *, low_open: bool = True) -> float:
    value = float(value)
    ok = (0 < value <= 1) if low_open else (0 <= value <= 1)
    if not ok:
        raise ValueError(f"{name} must be in {'(0' if low_open else '[0'}, 1], got {value}")
    return value
