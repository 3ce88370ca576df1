"""Additive ridge targets and the constructive network builder.

A ridge spec is ``f(x) = sum_j g_j(<xi_j, x>)`` with unit-or-shorter
directions and Lipschitz-alpha components.  ``build_network`` produces a
network whose output equals the sum of quasi-interpolants of the ``g_j``
along the projections, certifying the ``sum_j L_j N^(-alpha_j)`` sup-norm
approximation bound on the unit ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .filters import FilterSequence, factorize_filter
from .network import ConvLayer, ConvNetModel, forward_batch, toeplitz_apply
from .sampling import sample_unit_ball
from .serialize import SchemaError, get_field
from .spline import SplineGrid, second_difference
from .validation import as_float_vector


@dataclass(frozen=True, eq=False)
class RidgeComponent:
    """One additive term: direction, univariate function, and class constants.

    ``alpha``, ``lipschitz`` and ``sup_bound`` are declared (they describe
    the smoothness class the component claims to live in) and are only
    spot-checked, since they are not computable from a black-box callable.
    """

    direction: np.ndarray
    g: object
    alpha: float
    lipschitz: float
    sup_bound: float
    node_values: np.ndarray | None = None
    node_resolution: int | None = None

    def __post_init__(self):
        xi = as_float_vector(self.direction, "direction")
        norm = float(np.linalg.norm(xi))
        if not 0.0 < norm <= 1.0 + 1e-12:
            raise ValueError(
                f"direction norm must be in (0, 1], got {norm:.6g}"
            )
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.lipschitz < 0 or self.sup_bound < 0:
            raise ValueError("lipschitz and sup_bound must be nonnegative")
        xi = np.array(xi)
        xi.setflags(write=False)
        object.__setattr__(self, "direction", xi)


@dataclass(frozen=True, eq=False)
class RidgeSpec:
    """Target function ``sum_j g_j(<xi_j, x>)`` on the unit ball."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a ridge spec needs at least one component")
        dims = {len(c.direction) for c in comps}
        if len(dims) != 1:
            raise ValueError("all directions must share one dimension")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return len(self.components[0].direction)

    @property
    def sup_bound(self) -> float:
        """Largest declared component sup bound (the class constant G)."""
        return max(c.sup_bound for c in self.components)

    def directions(self) -> np.ndarray:
        return np.array([c.direction for c in self.components])

    def value(self, x):
        """Evaluate the target at one point or an ``(n, d)`` batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        total = np.zeros(len(X))
        for comp in self.components:
            total += np.asarray(comp.g(X @ comp.direction), dtype=float)
        return float(total[0]) if single else total

    def validate(self, seed: int = 0, pairs: int = 1000) -> None:
        """Spot-check the declared sup and Lipschitz-alpha constants.

        Draws ``pairs`` random point pairs in ``[-1, 1]`` per component and
        verifies ``|g| <= G`` and ``|g(u)-g(v)| <= L |u-v|^alpha`` up to a
        small floating-point allowance; raises on violation.
        """
        rng = np.random.default_rng(seed)
        for idx, comp in enumerate(self.components, start=1):
            u = rng.uniform(-1.0, 1.0, pairs)
            v = rng.uniform(-1.0, 1.0, pairs)
            gu = np.asarray(comp.g(u), dtype=float)
            gv = np.asarray(comp.g(v), dtype=float)
            sup = max(float(np.max(np.abs(gu))), float(np.max(np.abs(gv))))
            if sup > comp.sup_bound * (1.0 + 1e-9) + 1e-12:
                raise ValueError(
                    f"component {idx}: |g| reaches {sup:.6g}, above the "
                    f"declared bound {comp.sup_bound:.6g}"
                )
            allowed = comp.lipschitz * np.abs(u - v) ** comp.alpha
            excess = np.abs(gu - gv) - allowed * (1.0 + 1e-9) - 1e-12
            if np.any(excess > 0):
                worst = float(np.max(excess))
                raise ValueError(
                    f"component {idx}: Lipschitz-{comp.alpha:g} spot check "
                    f"failed by {worst:.3g}"
                )


def _interleave(dirs, d: int) -> FilterSequence:
    w = np.zeros(len(dirs) * d)
    for j, xi in enumerate(dirs, start=1):
        if not np.any(xi != 0.0):
            raise ValueError(f"component {j}: direction is identically zero")
        w[(j - 1) * d : j * d] = xi[::-1]
    return FilterSequence(w)


def interleave_directions(spec: RidgeSpec, d: int | None = None) -> FilterSequence:
    """Stack all directions into the single long filter the builder factorizes.

    Block ``j`` holds direction ``j`` reversed: entry ``(j-1)d + (d-i)`` is
    component ``i`` of direction ``j`` (math indexing).  Trailing zeros are
    trimmed, so the support ends at the first nonzero entry of the last
    direction.
    """
    if d is None:
        d = spec.d
    if d != spec.d:
        raise ValueError(f"spec has dimension {spec.d}, requested {d}")
    return _interleave([c.direction for c in spec.components], d)


def build_biases(filters, d: int, S: int) -> list:
    """Bias vectors that keep every ReLU affine on unit-ball inputs.

    Layer 1 gets the constant ``-||w1||_1``; layer ``j`` combines the row
    sums of its Toeplitz matrix scaled by the product of earlier filter
    l1 norms with the next product as offset.  Middle entries are written
    from one shared value, so the equal-middle restriction holds exactly.
    """
    biases = []
    running = 1.0  # product of l1 norms of layers handled so far
    width = d
    for j, filt in enumerate(filters, start=1):
        norm1 = filt.l1_norm()
        width_out = width + S
        if j == 1:
            bias = np.full(width_out, -norm1)
        else:
            row_sums = toeplitz_apply(filt, np.ones(width), S)
            bias = running * row_sums - (running * norm1) * np.ones(width_out)
            mid_lo, mid_hi = S, width_out - S
            if mid_hi > mid_lo:
                mid_value = running * float(filt.coeffs.sum()) - running * norm1
                bias[mid_lo:mid_hi] = mid_value
        biases.append(bias)
        running *= norm1
        width = width_out
    return biases


def feature_offset(model: ConvNetModel) -> float:
    """Product of the filter l1 norms, the constant added to every tap.

    Large values flag precision loss: the fully connected layer subtracts
    this constant back out, so its magnitude controls cancellation error.
    """
    running = 1.0
    for layer in model.layers:
        running *= layer.filt.l1_norm()
    return running


def conv_layer_count(m: int, d: int, S: int) -> int:
    return math.ceil((m * d - 1) / (S - 1))


def build_feature_network(
    directions, S: int, N: int, M: float
) -> ConvNetModel:
    """Network computing the features ``relu(<xi_j, x> - t_i)``; zero coefficients.

    The conv stack realizes every projection simultaneously: the interleaved
    direction filter is factorized into ``J`` short filters (identity filters
    pad the tail), and the bias cascade keeps all ReLUs affine so the taps
    carry ``<xi_j, x>`` plus the shared offset, which the fully connected
    bias removes again.
    """
    dirs = [as_float_vector(x, "direction") for x in directions]
    m = len(dirs)
    d = len(dirs[0])
    if d < 3:
        raise ValueError("input dimension must be at least 3")
    if not 2 <= S <= d:
        raise ValueError("need 2 <= S <= d")
    if N < 1:
        raise ValueError("mesh resolution N must be positive")
    interleaved = _interleave(dirs, d)
    factors = factorize_filter(interleaved, S)
    J = conv_layer_count(m, d, S)
    # identity filters pad the tail so the depth matches the layer count rule
    factors = factors + [FilterSequence.delta()] * (J - len(factors))
    biases = build_biases(factors, d, S)
    layers = tuple(ConvLayer(f, b) for f, b in zip(factors, biases))

    offset = 1.0
    for f in factors:
        offset *= f.l1_norm()
    grid = SplineGrid(N)
    fc_bias = np.tile(offset + grid.nodes, m)
    width = m * (2 * N + 3)
    return ConvNetModel(
        d=d, S=S, m=m, N=N, M=float(M),
        layers=layers, fc_bias=fc_bias, c=np.zeros(width),
    )


def build_network(spec: RidgeSpec, S: int, N: int, M: float) -> ConvNetModel:
    """Construct the network realizing the spec's quasi-interpolant exactly.

    The coefficient block for component ``j`` is ``N`` times the second
    difference of its node samples, so the output equals the sum of the
    component quasi-interpolants along the projections.  The sup error on
    the unit ball is therefore at most ``sum_j L_j N^(-alpha_j)``.
    """
    spec.validate()
    model = build_feature_network(
        [c.direction for c in spec.components], S, N, M
    )
    grid = SplineGrid(N)
    blocks = []
    for idx, comp in enumerate(spec.components, start=1):
        if comp.node_values is not None:
            if comp.node_resolution != N:
                raise ValueError(
                    f"component {idx}: table supplies values for N="
                    f"{comp.node_resolution}, build requested N={N}"
                )
            samples = np.asarray(comp.node_values, dtype=float)
        else:
            samples = np.asarray(comp.g(grid.inner_nodes), dtype=float)
        blocks.append(N * second_difference(samples))
    return replace(model, c=np.concatenate(blocks))


def certified_bound(spec: RidgeSpec, N: int) -> float:
    """The proven sup-norm approximation bound ``sum_j L_j N^(-alpha_j)``."""
    return float(sum(c.lipschitz * N ** (-c.alpha) for c in spec.components))


def sup_error(
    model: ConvNetModel, spec: RidgeSpec, n_probe: int, seed: int
) -> float:
    """Largest |network - target| over seeded random unit-ball probes."""
    if n_probe < 1:
        raise ValueError("n_probe must be >= 1")
    rng = np.random.default_rng(seed)
    X = sample_unit_ball(rng, n_probe, model.d)
    return float(np.max(np.abs(forward_batch(model, X) - spec.value(X))))


# ---------------------------------------------------------------------------
# spec files


def _g_from_doc(gdoc: dict, ctx: str):
    kind = get_field(gdoc, "kind", str, ctx)
    params = gdoc.get("params", {})
    if kind == "abs":
        scale = float(params.get("scale", 1.0))
        shift = float(params.get("shift", 0.0))
        return (lambda u: scale * np.abs(np.asarray(u, dtype=float) - shift)), None
    if kind == "sin":
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        phase = float(params.get("phase", 0.0))
        return (lambda u: amp * np.sin(freq * np.asarray(u, dtype=float) + phase)), None
    if kind == "poly":
        coeffs = [float(c) for c in get_field(params, "coeffs", list, ctx)]
        return (lambda u: np.polynomial.polynomial.polyval(
            np.asarray(u, dtype=float), coeffs)), None
    if kind == "table":
        values = np.asarray(get_field(params, "values", list, ctx), dtype=float)
        if len(values) < 3 or len(values) % 2 == 0:
            raise SchemaError(f"{ctx}: field 'values' must have odd length >= 3")
        N = (len(values) - 1) // 2
        nodes = SplineGrid(N).inner_nodes
        # off-node evaluation interpolates linearly between the declared
        # values; the builder itself consumes the exact table
        return (lambda u: np.interp(np.asarray(u, dtype=float), nodes, values)), (values, N)
    raise SchemaError(f"{ctx}: unknown g kind '{kind}'")


def spec_from_dict(doc: dict) -> RidgeSpec:
    ctx = "spec file"
    m = get_field(doc, "m", int, ctx)
    d = get_field(doc, "d", int, ctx)
    comp_docs = get_field(doc, "components", list, ctx)
    if len(comp_docs) != m:
        raise SchemaError(f"{ctx}: field 'm' disagrees with components length")
    comps = []
    for i, cdoc in enumerate(comp_docs, start=1):
        cctx = f"{ctx}: components[{i - 1}]"
        xi = np.asarray(get_field(cdoc, "xi", list, cctx), dtype=float)
        if len(xi) != d:
            raise SchemaError(f"{cctx}: field 'xi' has length {len(xi)}, expected {d}")
        g, table = _g_from_doc(get_field(cdoc, "g", dict, cctx), cctx)
        try:
            comps.append(
                RidgeComponent(
                    direction=xi,
                    g=g,
                    alpha=float(get_field(cdoc, "alpha", (int, float), cctx)),
                    lipschitz=float(get_field(cdoc, "L", (int, float), cctx)),
                    sup_bound=float(get_field(cdoc, "G", (int, float), cctx)),
                    node_values=None if table is None else table[0],
                    node_resolution=None if table is None else table[1],
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{cctx}: {exc}") from exc
    return RidgeSpec(tuple(comps))


def load_spec(path: str) -> RidgeSpec:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"spec file: invalid JSON ({exc})") from exc
    return spec_from_dict(doc)


