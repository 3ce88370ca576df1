"""Seeded sampling from the Euclidean unit ball."""

from __future__ import annotations

import numpy as np


def sample_unit_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Draw ``n`` points uniformly from the unit ball in ``R^d``.

    Uses a normalized Gaussian direction scaled by a U^(1/d) radius, so
    the draw count per point is fixed and streams are reproducible.
    """
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(0.0, 1.0, n) ** (1.0 / d)
    return g / norms * radii[:, None]
