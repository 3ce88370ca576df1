"""Hard instance families for the lower-bound side of the rate analysis.

The construction partitions ``[-1, 1]`` into equal cells, puts a compactly
supported Lipschitz-alpha bump in each, and switches bumps on or off with
the bits of well-separated binary codewords.  Every resulting function is
an additive ridge target with one component along the first coordinate.
Responses live on two points ``{-T, +T}`` with conditional masses
``(T +- f(x)) / 2T``, which makes the KL divergence between two such
models explicitly computable and quadratically bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ridge import RidgeComponent, RidgeSpec
from .serialize import SchemaError, get_field, to_json_text


class PackingSearchError(RuntimeError):
    """Code search missed the guaranteed cardinality; carries the best found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best or []


def bump(u, alpha: float, sup_bound: float, lipschitz: float):
    """The reference bump ``kappa * (1/2 - |u|)_+^alpha`` on ``[-1/2, 1/2]``.

    ``kappa = min(2^alpha * G, L/2)`` keeps the sup norm at most ``G`` and
    the Lipschitz-alpha constant at most ``L/2``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if sup_bound <= 0 or lipschitz <= 0:
        raise ValueError("sup_bound and lipschitz must be positive")
    kappa = min(2.0**alpha * sup_bound, lipschitz / 2.0)
    u = np.asarray(u, dtype=float)
    val = kappa * np.maximum(0.5 - np.abs(u), 0.0) ** alpha
    return float(val) if val.ndim == 0 else val


def bump_l2_norm_sq(alpha: float, sup_bound: float, lipschitz: float) -> float:
    """Closed-form squared Lebesgue L2 norm of the reference bump."""
    kappa = min(2.0**alpha * sup_bound, lipschitz / 2.0)
    return kappa**2 * 0.5 ** (2.0 * alpha) / (2.0 * alpha + 1.0)


@dataclass(frozen=True, eq=False)
class PackingFamily:
    """Cells, centers, and codewords of one lower-bound instance family."""

    n_cells: int
    alpha: float
    sup_bound: float
    lipschitz: float
    codewords: tuple
    centers: np.ndarray

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("n_cells must be positive")
        words = tuple(str(w) for w in self.codewords)
        need_dist = required_distance(self.n_cells)
        if len(words) < required_count(self.n_cells):
            raise ValueError(
                f"family needs at least {required_count(self.n_cells)} codewords, "
                f"got {len(words)}"
            )
        for w in words:
            if len(w) != self.n_cells or set(w) - {"0", "1"}:
                raise ValueError(f"codeword '{w}' is not a length-{self.n_cells} bit string")
        for i in range(len(words)):
            for j in range(i + 1, len(words)):
                if hamming(words[i], words[j]) < need_dist:
                    raise ValueError(
                        f"codewords {i} and {j} are closer than Hamming {need_dist}"
                    )
        centers = np.asarray(self.centers, dtype=float)
        expected = cell_centers(self.n_cells)
        if centers.shape != expected.shape or not np.allclose(centers, expected, atol=1e-12):
            raise ValueError("centers must be the equal-cell midpoints of [-1, 1]")
        object.__setattr__(self, "codewords", words)
        object.__setattr__(self, "centers", expected)


def cell_centers(n_cells: int) -> np.ndarray:
    """Midpoints of the ``n_cells`` equal-length cells partitioning [-1, 1]."""
    k = np.arange(1, n_cells + 1)
    return -1.0 + (2.0 * k - 1.0) / n_cells


def hamming(a: str, b: str) -> int:
    return sum(x != y for x, y in zip(a, b))


def required_distance(n_cells: int) -> int:
    return max(1, math.ceil(n_cells / 8.0))


def required_count(n_cells: int) -> int:
    return math.ceil(2.0 ** (n_cells / 8.0))


def varshamov_gilbert_code(n_cells: int, seed: int) -> list:
    """Greedy binary code with pairwise Hamming distance >= n_cells/8.

    Exhaustive greedy scan for ``n_cells <= 20``; seeded randomized greedy
    with restarts beyond that.  Returns at least ``2^(n_cells/8)`` words or
    raises PackingSearchError carrying the best list found.
    """
    if n_cells < 8:
        raise ValueError("need n_cells >= 8")
    dist = required_distance(n_cells)
    target = required_count(n_cells)

    def _greedy(candidates):
        kept = []
        for word in candidates:
            if all(hamming(word, k) >= dist for k in kept):
                kept.append(word)
                if len(kept) >= target:
                    break
        return kept

    if n_cells <= 20:
        kept = _greedy(
            format(v, f"0{n_cells}b") for v in range(2**n_cells)
        )
        if len(kept) >= target:
            return kept
        raise PackingSearchError(
            f"exhaustive greedy found {len(kept)} of {target} codewords", kept
        )

    rng = np.random.default_rng(seed)
    best = []
    for _ in range(20):  # restarts
        kept = []
        for _ in range(400 * target):
            bits = rng.integers(0, 2, n_cells)
            word = "".join("1" if b else "0" for b in bits)
            if all(hamming(word, k) >= dist for k in kept):
                kept.append(word)
                if len(kept) >= target:
                    return kept
        if len(kept) > len(best):
            best = kept
    raise PackingSearchError(
        f"randomized greedy found {len(best)} of {target} codewords", best
    )


def make_family(
    n_cells: int, alpha: float, sup_bound: float, lipschitz: float, seed: int
) -> PackingFamily:
    return PackingFamily(
        n_cells=n_cells,
        alpha=alpha,
        sup_bound=sup_bound,
        lipschitz=lipschitz,
        codewords=tuple(varshamov_gilbert_code(n_cells, seed)),
        centers=cell_centers(n_cells),
    )


def cell_bump(k: int, family: PackingFamily, u):
    """The cell-``k`` bump: scaled copy of the reference bump in cell ``k``.

    ``k`` is 1-based.  The value is ``n_cells^(-alpha)`` times the
    reference bump evaluated at ``n_cells * (u - center_k) / 2``, so the
    support is exactly cell ``k``.
    """
    if not 1 <= k <= family.n_cells:
        raise ValueError(f"cell index {k} outside 1..{family.n_cells}")
    u = np.asarray(u, dtype=float)
    scaled = family.n_cells * (u - family.centers[k - 1]) / 2.0
    val = family.n_cells ** (-family.alpha) * bump(
        scaled, family.alpha, family.sup_bound, family.lipschitz
    )
    return float(val) if np.ndim(val) == 0 else val


def pattern_values(omega: str, family: PackingFamily, u):
    """Sum of the bumps whose codeword bit is set, evaluated on the line."""
    if len(omega) != family.n_cells:
        raise ValueError("pattern length must equal the cell count")
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape if u.ndim else ())
    for k, bit in enumerate(omega, start=1):
        if bit == "1":
            total = total + cell_bump(k, family, u)
    return float(total) if np.ndim(total) == 0 else total


def pattern_function(omega: str, family: PackingFamily, x):
    """The pattern target on ``R^d``: depends on the first coordinate only."""
    x = np.asarray(x, dtype=float)
    first = x[..., 0] if x.ndim else x
    return pattern_values(omega, family, first)


def as_ridge_spec(omega: str, family: PackingFamily, d: int) -> RidgeSpec:
    """Package a pattern function as a one-component ridge spec along e1."""
    if d < 1:
        raise ValueError("d must be positive")
    e1 = np.zeros(d)
    e1[0] = 1.0
    return RidgeSpec(
        (
            RidgeComponent(
                direction=e1,
                g=lambda u: pattern_values(omega, family, u),
                alpha=family.alpha,
                lipschitz=family.lipschitz,
                sup_bound=family.sup_bound,
            ),
        )
    )


def _midpoint_grid(quadrature_n: int) -> np.ndarray:
    if quadrature_n < 2:
        raise ValueError("quadrature_n must be >= 2")
    step = 2.0 / quadrature_n
    return -1.0 + (np.arange(quadrature_n) + 0.5) * step


def lebesgue_l2_sq(f, quadrature_n: int) -> float:
    """Midpoint quadrature of ``integral of f(u)^2 du`` over [-1, 1]."""
    grid = _midpoint_grid(quadrature_n)
    vals = np.asarray(f(grid), dtype=float)
    return float(np.mean(vals**2) * 2.0)


def conditional_masses(f_value, T: float):
    """The two response masses ``(T + f)/2T`` and ``(T - f)/2T``."""
    f_value = np.asarray(f_value, dtype=float)
    return (T + f_value) / (2.0 * T), (T - f_value) / (2.0 * T)


@dataclass(frozen=True)
class TwoPointKl:
    kl: float
    quadratic_bound: float


def kl_two_point(f_i, f_j, T: float, quadrature_n: int) -> TwoPointKl:
    """KL divergence between two two-point response models.

    Both models share the uniform marginal on ``[-1, 1]`` (density 1/2) and
    put mass ``(T +- f(x))/2T`` on responses ``+-T``.  Returns the midpoint
    quadrature of the explicit integrand together with the quadratic upper
    bound ``16/(15 T^2) * ||f_i - f_j||^2`` in the same marginal; the bound
    is meaningful for families with ``|f| <= T/4``.  Raises if either
    function reaches ``|f| >= T`` anywhere on the grid (the conditional
    masses would stop being probabilities).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    grid = _midpoint_grid(quadrature_n)
    fi = np.asarray(f_i(grid), dtype=float)
    fj = np.asarray(f_j(grid), dtype=float)
    if np.max(np.abs(fi)) >= T or np.max(np.abs(fj)) >= T:
        raise ValueError("|f| reaches T on the grid; the response model is invalid")
    pi_plus, pi_minus = conditional_masses(fi, T)
    pj_plus, pj_minus = conditional_masses(fj, T)
    integrand = pi_plus * np.log(pi_plus / pj_plus) + pi_minus * np.log(
        pi_minus / pj_minus
    )
    # uniform marginal: integral against mu is the plain grid average
    kl = float(np.mean(integrand))
    dist_sq = float(np.mean((fi - fj) ** 2))
    return TwoPointKl(kl=kl, quadratic_bound=16.0 / (15.0 * T**2) * dist_sq)


def suggested_cell_count(
    n: int, alpha: float, m: int, sup_bound: float, lipschitz: float, tau1: float = 1.0
) -> int:
    """Cell count rule ``floor(c * n^(1/(2*alpha+1)))`` from the rate proof.

    ``c = 2304 * tau1 * ||K||_2^2 / (15 T^2) + 1`` with ``T = 4 m G``; the
    marginal density bound ``tau1`` defaults to the uniform value 1.
    """
    T = 4.0 * m * sup_bound
    c = 2304.0 * tau1 * bump_l2_norm_sq(alpha, sup_bound, lipschitz) / (15.0 * T**2) + 1.0
    return int(math.floor(c * n ** (1.0 / (2.0 * alpha + 1.0))))


def family_to_json(family: PackingFamily) -> str:
    doc = {
        "N_hat": family.n_cells,
        "alpha": float(family.alpha),
        "G": float(family.sup_bound),
        "L": float(family.lipschitz),
        "codewords": list(family.codewords),
        "centers": family.centers.tolist(),
    }
    return to_json_text(doc) + "\n"


def family_from_dict(doc: dict) -> PackingFamily:
    ctx = "packing file"
    n_cells = get_field(doc, "N_hat", int, ctx)
    alpha = float(get_field(doc, "alpha", (int, float), ctx))
    G = float(get_field(doc, "G", (int, float), ctx))
    L = float(get_field(doc, "L", (int, float), ctx))
    codewords = tuple(get_field(doc, "codewords", list, ctx))
    centers = np.asarray(get_field(doc, "centers", list, ctx), dtype=float)
    try:
        return PackingFamily(
            n_cells=n_cells, alpha=alpha, sup_bound=G, lipschitz=L,
            codewords=codewords, centers=centers,
        )
    except ValueError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc
