"""Finite real sequences, their convolution algebra, and short-filter factorization.

A filter is a real sequence supported on ``{0, ..., K}``.  Its symbol is the
polynomial ``sum_j coeffs[j] z^j``; convolving filters multiplies symbols, so
splitting a long filter into factors of support at most ``S`` is polynomial
factorization.  Roots are found by simultaneous (Aberth) iteration, paired
into real quadratics, and greedily packed into factors of degree at most ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import readonly

#: iteration budget and step tolerance for the simultaneous root iteration
_MAX_ITER = 1000
_STEP_TOL = 1e-12
#: relative imaginary part below which a root is snapped to the real axis
_REAL_SNAP = 1e-10


class RootFindingError(RuntimeError):
    """Root iteration or factorization failed; carries the best residuals."""

    def __init__(self, message, roots=None, residuals=None):
        super().__init__(message)
        self.roots = roots
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class FilterSequence:
    """A real sequence supported on ``{0, ..., K}``.

    ``coeffs[j]`` is the value at index ``j``.  Trailing zeros are trimmed on
    construction, so the last stored coefficient is nonzero unless the
    sequence is identically zero (stored as an empty array).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if arr.ndim != 1:
            raise ValueError("filter coefficients must be one-dimensional")
        arr = np.trim_zeros(arr, "b")
        object.__setattr__(self, "coeffs", readonly(arr))

    @classmethod
    def delta(cls) -> "FilterSequence":
        """The unit sequence: 1 at index 0, zero elsewhere."""
        return cls(np.array([1.0]))

    @property
    def degree(self) -> int:
        """Largest support index K; -1 for the zero sequence."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def l1_norm(self) -> float:
        return float(np.abs(self.coeffs).sum()) if len(self.coeffs) else 0.0

    def symbol_at(self, z):
        """Evaluate the symbol polynomial at ``z`` (scalar or array, complex ok)."""
        acc = np.zeros_like(np.asarray(z, dtype=complex))
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc

    def padded(self, length: int) -> np.ndarray:
        """Coefficients zero-extended to the given length."""
        if len(self.coeffs) > length:
            raise ValueError(
                f"filter support {self.degree} exceeds padded length {length - 1}"
            )
        out = np.zeros(length)
        out[: len(self.coeffs)] = self.coeffs
        return out


def convolve(a: FilterSequence, b: FilterSequence) -> FilterSequence:
    """Convolution of two filters: ``(a*b)_i = sum_k a_{i-k} b_k``."""
    if a.is_zero or b.is_zero:
        return FilterSequence(np.array([]))
    return FilterSequence(np.convolve(a.coeffs, b.coeffs))


def convolve_all(filters) -> FilterSequence:
    out = FilterSequence.delta()
    for f in filters:
        out = convolve(out, f)
    return out


def cauchy_bound(w: FilterSequence) -> float:
    """Root radius ``1 + max_j |w_j|`` of a monic symbol.

    Requires the sequence to be normalized with last coefficient exactly 1
    and degree at least 1; every complex root of the symbol has modulus at
    most the returned value.
    """
    if w.degree < 1:
        raise ValueError("cauchy_bound requires degree >= 1")
    if w.coeffs[-1] != 1.0:
        raise ValueError("cauchy_bound requires a monic sequence; normalize first")
    return 1.0 + float(np.max(np.abs(w.coeffs[:-1])))


def _aberth(monic: np.ndarray, phase: float = 0.41) -> np.ndarray:
    """Simultaneous root iteration for a monic polynomial (increasing powers)."""
    deg = len(monic) - 1
    radius = 1.0 + float(np.max(np.abs(monic[:-1])))
    # initial guesses spread on the Cauchy circle, off-axis to break symmetry
    angles = 2.0 * np.pi * (np.arange(deg) + 0.25) / deg + phase
    z = radius * np.exp(1j * angles)
    deriv = monic[1:] * np.arange(1, deg + 1)

    def _eval(coeffs, pts):
        acc = np.zeros_like(pts)
        for c in coeffs[::-1]:
            acc = acc * pts + c
        return acc

    for _ in range(_MAX_ITER):
        p = _eval(monic, z)
        dp = _eval(deriv, z)
        newton = np.where(dp != 0, p / np.where(dp == 0, 1, dp), 0)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = (1.0 / diff).sum(axis=1)
        denom = 1.0 - newton * repulsion
        step = np.where(denom != 0, newton / np.where(denom == 0, 1, denom), newton)
        z = z - step
        if np.max(np.abs(step)) < _STEP_TOL * max(1.0, float(np.max(np.abs(z)))):
            break
    # Newton polishing sharpens simple roots to machine precision
    for _ in range(3):
        p = _eval(monic, z)
        dp = _eval(deriv, z)
        ok = dp != 0
        z = np.where(ok, z - p / np.where(ok, dp, 1), z)
    return z


def _pair_conjugates(roots: np.ndarray) -> list:
    """Snap near-real roots and average conjugate partners exactly."""
    scale = np.maximum(1.0, np.abs(roots))
    real_mask = np.abs(roots.imag) <= _REAL_SNAP * scale
    fixed = [complex(r.real, 0.0) for r in roots[real_mask]]
    rest = sorted(roots[~real_mask], key=lambda r: (r.real, r.imag))
    used = [False] * len(rest)
    for i, r in enumerate(rest):
        if used[i] or r.imag < 0:
            continue
        best, best_dist = None, np.inf
        for j, s in enumerate(rest):
            if used[j] or j == i or s.imag > 0:
                continue
            dist = abs(s - r.conjugate())
            if dist < best_dist:
                best, best_dist = j, dist
        if best is None:
            # unmatched complex root; keep it real-snapped, residual check decides
            fixed.append(complex(r.real, 0.0))
            used[i] = True
            continue
        mean = (r + rest[best].conjugate()) / 2.0
        fixed.extend([mean, mean.conjugate()])
        used[i] = used[best] = True
    for j, s in enumerate(rest):
        if not used[j] and s.imag < 0:
            fixed.append(complex(s.real, 0.0))
    return fixed


def find_roots(w: FilterSequence, tol: float = 1e-10) -> list:
    """All complex roots (with multiplicity) of the symbol of ``w``.

    Every returned root r satisfies ``|p(r)| <= tol * (1+|r|)^K * max|w_j|``;
    conjugate pairing is enforced after iteration.  A stalled iteration is
    retried from rotated starting configurations; if every attempt misses
    the residual criterion a RootFindingError carrying the residuals is
    raised.
    """
    if w.is_zero or w.degree < 1:
        raise ValueError("find_roots requires a nonzero sequence of degree >= 1")
    coeffs = np.asarray(w.coeffs, dtype=float)
    # exact leading zeros are roots at the origin; strip them for stability
    lead = int(np.nonzero(coeffs != 0.0)[0][0])
    core = coeffs[lead:]
    if len(core) == 1:
        return [0j] * lead
    monic = core / core[-1]
    degree = w.degree
    scale = float(np.max(np.abs(coeffs)))
    worst = None
    for phase in (0.41, 1.13, 2.71):
        roots = [0j] * lead
        roots.extend(_pair_conjugates(_aberth(monic, phase)))
        roots_arr = np.asarray(roots, dtype=complex)
        residuals = np.abs(w.symbol_at(roots_arr))
        limit = tol * (1.0 + np.abs(roots_arr)) ** degree * scale
        if np.all(residuals <= limit):
            return list(roots_arr)
        margin = float(np.max(residuals / limit))
        if worst is None or margin < worst[0]:
            worst = (margin, list(roots_arr), list(residuals))
    raise RootFindingError(
        "root iteration did not converge to the residual tolerance",
        roots=worst[1],
        residuals=worst[2],
    )


def _expand_real_items(roots) -> list:
    """Group roots into real linear/quadratic factor coefficient arrays."""
    items = []
    reals = sorted(r.real for r in roots if r.imag == 0.0)
    for r in reals:
        items.append(np.array([-r, 1.0]))
    complexes = sorted(
        (r for r in roots if r.imag > 0.0), key=lambda r: (r.real, r.imag)
    )
    for r in complexes:
        # (z - r)(z - conj r) expanded with exactly real coefficients
        items.append(np.array([abs(r) ** 2, -2.0 * r.real, 1.0]))
    return items


def _derivative(coeffs: np.ndarray, order: int) -> np.ndarray:
    out = np.asarray(coeffs, dtype=float)
    for _ in range(order):
        out = out[1:] * np.arange(1, len(out))
    return out


def _merge_root_clusters(roots, radius: float, monic: np.ndarray) -> list:
    """Collapse root clusters to one refined center with multiplicity.

    A k-fold root scatters the iterates over a disc of radius about
    eps^(1/k), but it is a simple root of the (k-1)-th derivative, so a
    Newton run on that derivative recovers the center to full precision.
    Merging is proposed only; the caller keeps a merge iff the factor
    round trip passes.
    """
    roots = list(roots)
    n = len(roots)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) <= radius * (1.0 + abs(roots[i])):
                parent[find(i)] = find(j)
    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(roots[i])

    merged = []
    for members in clusters.values():
        k = len(members)
        if k == 1:
            merged.append(members[0])
            continue
        center = sum(members) / k
        if abs(center.imag) <= radius * (1.0 + abs(center)):
            center = complex(center.real, 0.0)
        deriv = _derivative(monic, k - 1)
        dderiv = _derivative(monic, k)
        z = center
        for _ in range(60):
            dp = _eval_poly(dderiv, z)
            if dp == 0:
                break
            step = _eval_poly(deriv, z) / dp
            z = z - step
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                break
        # keep the refinement only if it stayed near the cluster
        if abs(z - center) <= 4.0 * radius * (1.0 + abs(center)):
            center = z if abs(z.imag) > 0 else complex(z.real, 0.0)
        if abs(center.imag) <= 1e-12 * (1.0 + abs(center)):
            center = complex(center.real, 0.0)
        merged.extend([center] * k)
    return merged


def _eval_poly(coeffs, z):
    acc = 0j
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


def _pack_factors(roots, S: int, lead_scale: float) -> list:
    # Greedy packing: quadratics first, then linears, each factor filled to
    # degree <= S.  Every closed factor except possibly the last has degree
    # >= S-1, which yields the ceil(degree/(S-1)) factor-count bound.
    items = _expand_real_items(roots)
    items.sort(key=lambda a: -(len(a) - 1))
    factors = []
    current = np.array([1.0])
    for item in items:
        if (len(current) - 1) + (len(item) - 1) <= S:
            current = np.convolve(current, item)
        else:
            factors.append(current)
            current = item
    factors.append(current)
    factors[0] = factors[0] * lead_scale
    return [FilterSequence(f) for f in factors]


def _roundtrip_error(factors, w: FilterSequence) -> float:
    recon = convolve_all(factors)
    return float(np.max(np.abs(recon.padded(w.degree + 1) - w.coeffs)))


#: cluster radii tried when the direct factorization misses the round trip
_MERGE_RADII = (1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.4)


def factorize_filter(w: FilterSequence, S: int) -> list:
    """Split ``w`` into at most ``ceil(degree/(S-1))`` filters of support <= S.

    The returned filters convolve back to ``w`` within 1e-8 relative sup
    norm (verified; RootFindingError otherwise).  The leading scalar of
    ``w`` is folded into the first factor, so the remaining factors come
    from a monic factorization.

    Multiple roots scatter the iterates, so when the direct factorization
    misses the round-trip tolerance, nearby roots are merged into refined
    centers with multiplicity at increasing cluster radii; the first
    merging whose factors pass the round trip wins.
    """
    if S < 2:
        raise ValueError("factorize_filter requires S >= 2")
    if w.is_zero:
        raise ValueError("cannot factorize the zero sequence")
    if w.degree <= S:
        return [w]

    lead_scale = float(w.coeffs[-1])
    monic_full = np.asarray(w.coeffs, dtype=float) / lead_scale
    roots = find_roots(w)
    scale = float(np.max(np.abs(w.coeffs)))

    best = None
    for radius in (None,) + _MERGE_RADII:
        candidates = (
            roots if radius is None
            else _pair_conjugates(
                np.asarray(_merge_root_clusters(roots, radius, monic_full))
            )
        )
        factors = _pack_factors(candidates, S, lead_scale)
        err = _roundtrip_error(factors, w)
        if best is None or err < best[0]:
            best = (err, factors)
        if err <= 1e-8 * scale:
            break
    err, factors = best
    if err > 1e-8 * scale:
        raise RootFindingError(
            f"factorization round-trip error {err:.3e} exceeds 1e-8 relative",
            roots=roots,
        )
    if len(factors) > math.ceil(w.degree / (S - 1)):
        raise RootFindingError("factor packing exceeded the guaranteed count")
    return factors
