"""Uniform-mesh hat functions and the ReLU quasi-interpolation operator.

The mesh for resolution ``N`` has ``2N+3`` nodes ``t_i = -1 + (i-2)/N``
(``i = 1..2N+3`` in math indexing), so the inner nodes ``t_2..t_{2N+2}``
cover ``[-1, 1]`` with spacing ``1/N`` and one guard node on each side.

The operator reconstructs a function from its samples at the inner nodes
as a sum of hat functions, each of which is a second difference of three
shifted ReLUs.  ``second_difference`` converts the node samples into the
coefficients of the corresponding plain-ReLU expansion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SplineGrid:
    """Uniform mesh on ``[-1 - 1/N, 1 + 1/N]`` with step ``1/N``.

    Parameters
    ----------
    N : int
        Mesh resolution; there are ``2N+3`` nodes and ``2N+1`` inner nodes.
    """

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("grid resolution must be a positive integer")

    @property
    def nodes(self) -> np.ndarray:
        """All nodes; ``nodes[k]`` is the math node ``t_{k+1}``."""
        return -1.0 + (np.arange(1, 2 * self.N + 4) - 2.0) / self.N

    @property
    def inner_nodes(self) -> np.ndarray:
        """The ``2N+1`` sample sites ``t_2..t_{2N+2}``, spanning ``[-1, 1]``."""
        return self.nodes[1:-1]


def hat(grid: SplineGrid, i: int, u):
    """Evaluate the hat function centered at math node ``t_i``.

    Parameters
    ----------
    grid : SplineGrid
    i : int
        Math index in ``2..2N+2``.
    u : float or ndarray
        Evaluation points.

    Returns
    -------
    float or ndarray
        ``N * (relu(u - t_{i-1}) - 2 relu(u - t_i) + relu(u - t_{i+1}))``,
        the piecewise-linear bump that is 1 at ``t_i`` and 0 outside
        ``(t_{i-1}, t_{i+1})``.
    """
    if not 2 <= i <= 2 * grid.N + 2:
        raise ValueError(f"hat index {i} outside 2..{2 * grid.N + 2}")
    t = grid.nodes
    left, center, right = t[i - 2], t[i - 1], t[i]
    u = np.asarray(u, dtype=float)
    val = grid.N * (
        np.maximum(u - left, 0.0)
        - 2.0 * np.maximum(u - center, 0.0)
        + np.maximum(u - right, 0.0)
    )
    return float(val) if val.ndim == 0 else val


def quasi_interpolate(grid: SplineGrid, values, u):
    """Evaluate the hat-function expansion of node samples at ``u``.

    Parameters
    ----------
    grid : SplineGrid
    values : array_like
        ``2N+1`` samples of the target function at the inner nodes.
    u : float or ndarray
        Points in ``[-1, 1]``.

    Returns
    -------
    float or ndarray
        ``sum_i values[i] * hat_i(u)``.  The operator never exceeds
        ``max |values|`` on ``[-1, 1]`` and reproduces affine functions.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (2 * grid.N + 1,):
        raise ValueError(
            f"expected {2 * grid.N + 1} node values, got {values.shape}"
        )
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size and (u.min() < -1.0 - 1e-9 or u.max() > 1.0 + 1e-9):
        raise ValueError("evaluation points must lie in [-1, 1]")
    relu = np.maximum(u[:, None] - grid.nodes[None, :], 0.0)
    hats = grid.N * (relu[:, :-2] - 2.0 * relu[:, 1:-1] + relu[:, 2:])
    out = hats @ values
    return float(out[0]) if scalar else out


def second_difference(values) -> np.ndarray:
    """Map ``2N+1`` node samples to the ``2N+3`` plain-ReLU coefficients.

    The interior entries are second differences of the samples; the four
    boundary entries absorb the one-sided terms so that

    ``quasi_interpolate(grid, v, u) == N * sum_i out[i] * relu(u - t_i)``

    holds identically on ``[-1, 1]``.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) < 3 or len(v) % 2 == 0:
        raise ValueError("expected an odd number (>= 3) of node samples")
    out = np.empty(len(v) + 2)
    out[0] = v[0]
    out[1] = v[1] - 2.0 * v[0]
    out[2:-2] = v[2:] - 2.0 * v[1:-1] + v[:-2]
    out[-2] = v[-2] - 2.0 * v[-1]
    out[-1] = v[-1]
    return out
