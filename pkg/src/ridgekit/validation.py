"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

#: slack applied when checking that inputs lie in the closed unit ball
UNIT_BALL_TOL = 1e-9


def as_float_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got shape {arr.shape}")
    return arr


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


def check_unit_ball(points: np.ndarray, name: str = "x") -> None:
    """Reject points outside the closed Euclidean unit ball.

    Inputs outside the domain are rejected rather than clamped: the
    approximation guarantees only hold inside the ball.
    """
    norms = np.linalg.norm(np.atleast_2d(points), axis=1)
    worst = float(np.max(norms)) if norms.size else 0.0
    if worst > 1.0 + UNIT_BALL_TOL:
        raise ValueError(
            f"{name} must lie in the unit ball; largest norm was {worst:.6g}"
        )


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a float copy marked read-only (models are immutable values)."""
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out
