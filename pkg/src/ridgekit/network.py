"""Toeplitz convolutional layers, forward evaluation, and membership checks.

A model is ``J`` convolutional layers with shared filter length ``S``
(layer widths ``d + jS``), followed by a sparse fully connected layer
whose 0/1 block matrix is implicit: block ``j`` of its output reads the
input component at flat position ``j*d`` (math indexing) and broadcasts
it over ``2N+3`` rows.  The prediction is the inner product of the
coefficient vector with the last ReLU layer.

Toeplitz matrices are never materialized in the forward pass; a dense
assembly exists only as an oracle for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterSequence
from .serialize import SchemaError, atomic_write_text, get_field, to_json_text
from .validation import as_float_matrix, as_float_vector, check_unit_ball, readonly

_LOG_DBL_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True, eq=False)
class ConvLayer:
    """One convolutional layer: a short filter and its bias vector."""

    filt: FilterSequence
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bias", readonly(as_float_vector(self.bias, "bias")))


@dataclass(frozen=True, eq=False)
class ConvNetModel:
    """Immutable network value: conv layers, implicit FC layer, coefficients.

    Fields
    ------
    d, S, m, N : int
        Input dimension, filter length parameter, additive block count,
        and mesh resolution of the final layer.
    M : float
        Clipping level used when predictions are reported.
    layers : tuple of ConvLayer
        Layer ``j`` (1-based) must have bias length ``d + j*S``.
    fc_bias, c : ndarray
        Both of length ``m * (2N+3)``.
    """

    d: int
    S: int
    m: int
    N: int
    M: float
    layers: tuple
    fc_bias: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.S < 2:
            raise ValueError("filter length parameter S must be >= 2")
        if self.d < 1 or self.m < 1 or self.N < 1:
            raise ValueError("d, m, N must be positive")
        layers = tuple(self.layers)
        for j, layer in enumerate(layers, start=1):
            if layer.filt.degree > self.S:
                raise ValueError(
                    f"layer {j}: filter support {layer.filt.degree} exceeds S={self.S}"
                )
            expected = self.d + j * self.S
            if len(layer.bias) != expected:
                raise ValueError(
                    f"layer {j}: bias length {len(layer.bias)}, expected {expected}"
                )
        width = self.m * (2 * self.N + 3)
        fc_bias = readonly(as_float_vector(self.fc_bias, "fc_bias"))
        coeff = readonly(as_float_vector(self.c, "c"))
        if len(fc_bias) != width:
            raise ValueError(f"fc_bias length {len(fc_bias)}, expected {width}")
        if len(coeff) != width:
            raise ValueError(f"c length {len(coeff)}, expected {width}")
        if self.m * self.d > self.d + len(layers) * self.S:
            raise ValueError(
                "fully connected taps exceed the last layer width; "
                "need m*d <= d + J*S"
            )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "fc_bias", fc_bias)
        object.__setattr__(self, "c", coeff)

    @property
    def J(self) -> int:
        return len(self.layers)

    @property
    def fc_width(self) -> int:
        return self.m * (2 * self.N + 3)


def toeplitz_apply(filt: FilterSequence, x, S: int):
    """Apply the Toeplitz matrix of a filter without materializing it.

    ``out_i = sum_k w_{i-k} x_k`` for ``i = 1..D+S`` (math indexing); the
    filter is treated as supported on ``{0..S}``, so the output is always
    ``S`` longer than the input.  Accepts a vector or an ``(n, D)`` batch.
    """
    w = filt.padded(S + 1)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.convolve(w, x)
    n, D = x.shape
    out = np.zeros((n, D + S))
    for lag in range(S + 1):
        if w[lag] != 0.0:
            out[:, lag : lag + D] += w[lag] * x
    return out


def toeplitz_matrix(filt: FilterSequence, S: int, D: int) -> np.ndarray:
    """Dense ``(D+S) x D`` Toeplitz assembly; test oracle only."""
    w = filt.padded(S + 1)
    T = np.zeros((D + S, D))
    for i in range(D + S):
        for k in range(D):
            if 0 <= i - k <= S:
                T[i, k] = w[i - k]
    return T


def _fc_taps(model: ConvNetModel, h_last):
    cols = [k * model.d - 1 for k in range(1, model.m + 1)]
    if h_last.ndim == 1:
        return h_last[cols]
    return h_last[:, cols]


def forward(model: ConvNetModel, x, capture: bool = False):
    """Evaluate the network at one point of the unit ball.

    Returns the scalar prediction, or ``(prediction, activations)`` with
    the list of all intermediate layers when ``capture`` is set.
    """
    x = as_float_vector(x, "x")
    if len(x) != model.d:
        raise ValueError(f"input has dimension {len(x)}, model expects {model.d}")
    check_unit_ball(x)
    activations = []
    h = x
    for j, layer in enumerate(model.layers, start=1):
        z = toeplitz_apply(layer.filt, h, model.S)
        if len(z) != len(layer.bias):
            raise ValueError(f"layer {j}: activation/bias length mismatch")
        h = np.maximum(z - layer.bias, 0.0)
        if capture:
            activations.append(h)
    taps = np.repeat(_fc_taps(model, h), 2 * model.N + 3)
    h_fc = np.maximum(taps - model.fc_bias, 0.0)
    if capture:
        activations.append(h_fc)
    pred = float(model.c @ h_fc)
    return (pred, activations) if capture else pred


def forward_batch(model: ConvNetModel, X) -> np.ndarray:
    """Vectorized forward over an ``(n, d)`` batch of unit-ball points."""
    X = as_float_matrix(X, "X")
    if X.shape[1] != model.d:
        raise ValueError(f"inputs have dimension {X.shape[1]}, model expects {model.d}")
    check_unit_ball(X)
    h = X
    for layer in model.layers:
        z = toeplitz_apply(layer.filt, h, model.S)
        h = np.maximum(z - layer.bias[None, :], 0.0)
    taps = np.repeat(_fc_taps(model, h), 2 * model.N + 3, axis=1)
    h_fc = np.maximum(taps - model.fc_bias[None, :], 0.0)
    return h_fc @ model.c


@dataclass
class ConstraintCheck:
    name: str
    passed: bool
    measured: float
    bound: float
    slack: float
    log_bound: float = math.nan
    overflow: bool = False


@dataclass
class MembershipReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def named(self, name: str) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "measured": c.measured,
                    "bound": c.bound if math.isfinite(c.bound) else None,
                    "slack": c.slack if math.isfinite(c.slack) else None,
                    "log_bound": c.log_bound if not math.isnan(c.log_bound) else None,
                    "overflow": c.overflow,
                }
                for c in self.checks
            ],
        }


def _norm_check(name, measured, log_bound) -> ConstraintCheck:
    # bounds grow like ((S+1)B)^j; compare in log space when they overflow
    if log_bound > _LOG_DBL_MAX:
        return ConstraintCheck(
            name, True, measured, math.inf, math.inf, log_bound=log_bound, overflow=True
        )
    bound = math.exp(log_bound)
    return ConstraintCheck(
        name, measured <= bound, measured, bound, bound - measured, log_bound=log_bound
    )


def validate_membership(model: ConvNetModel, B: float) -> MembershipReport:
    """Check every norm and structure constraint of the hypothesis class.

    Verifies, with measured values and slack per entry: filter sup-norms
    against ``B``, bias sup-norms against ``2((S+1)B)^j`` (fc bias counts
    as layer ``J+1``), coefficient sup-norm against ``N*B``, the
    equal-middle-entries bias restriction, and the implicit 0/1 block
    structure of the last layer.  Failures are report entries, not errors.
    """
    if B <= 0:
        raise ValueError("B must be positive")
    report = MembershipReport()
    growth = math.log((model.S + 1) * B)
    for j, layer in enumerate(model.layers, start=1):
        w_norm = float(np.max(np.abs(layer.filt.coeffs))) if not layer.filt.is_zero else 0.0
        report.checks.append(
            ConstraintCheck(f"filter_norm[{j}]", w_norm <= B, w_norm, B, B - w_norm)
        )
        b_norm = float(np.max(np.abs(layer.bias)))
        report.checks.append(_norm_check(f"bias_norm[{j}]", b_norm, math.log(2.0) + j * growth))
        mid = layer.bias[model.S : len(layer.bias) - model.S]
        deviation = float(np.max(np.abs(mid - mid[0]))) if len(mid) else 0.0
        report.checks.append(
            ConstraintCheck(
                f"bias_restriction[{j}]", deviation == 0.0, deviation, 0.0, -deviation
            )
        )
    fc_norm = float(np.max(np.abs(model.fc_bias)))
    report.checks.append(
        _norm_check("fc_bias_norm", fc_norm, math.log(2.0) + (model.J + 1) * growth)
    )
    c_norm = float(np.max(np.abs(model.c)))
    c_bound = model.N * B
    report.checks.append(
        ConstraintCheck("coeff_norm", c_norm <= c_bound, c_norm, c_bound, c_bound - c_norm)
    )
    # the 0/1 block matrix is implicit; structural validity means the taps
    # exist and the block widths agree with the stored vectors
    structural = model.m * model.d <= model.d + model.J * model.S and (
        len(model.c) == len(model.fc_bias) == model.fc_width
    )
    report.checks.append(
        ConstraintCheck("fc_structure", structural, 0.0 if structural else 1.0, 0.0, 0.0)
    )
    return report


def log_perturbation_drift_constant(m: int, d: int, S: int, N: int, B: float) -> float:
    """Natural log of the parameter-perturbation drift constant."""
    if min(m, d, N) < 1 or S < 2 or B <= 0:
        raise ValueError("need m, d, N >= 1, S >= 2, B > 0")
    return (
        math.log(150.0)
        + 3.0 * math.log(m)
        + 2.0 * math.log(d)
        + 2.0 * math.log(N)
        + m * d * math.log((S + 1) * B)
    )


def perturbation_drift_constant(m: int, d: int, S: int, N: int, B: float) -> float:
    """Sup-norm output drift per unit parameter perturbation.

    Returns ``150 m^3 d^2 N^2 ((S+1)B)^(m d)``: perturbing every parameter
    of a valid model by at most ``delta`` moves the output function by at
    most this constant times ``delta`` in sup norm.
    """
    log_value = log_perturbation_drift_constant(m, d, S, N, B)
    if log_value > _LOG_DBL_MAX:
        raise OverflowError(
            "drift constant overflows a double; use "
            "log_perturbation_drift_constant for log-space evaluation"
        )
    return 150.0 * m**3 * d**2 * N**2 * ((S + 1.0) * B) ** (m * d)


_MODEL_VERSION = 1


def model_to_json(model: ConvNetModel) -> str:
    doc = {
        "version": _MODEL_VERSION,
        "d": model.d,
        "S": model.S,
        "J": model.J,
        "m": model.m,
        "N": model.N,
        "M": float(model.M),
        "filters": [layer.filt.padded(model.S + 1).tolist() for layer in model.layers],
        "biases": [layer.bias.tolist() for layer in model.layers],
        "fc_bias": model.fc_bias.tolist(),
        "c": model.c.tolist(),
    }
    return to_json_text(doc) + "\n"


def model_from_dict(doc: dict) -> ConvNetModel:
    ctx = "model file"
    version = get_field(doc, "version", int, ctx)
    if version != _MODEL_VERSION:
        raise SchemaError(f"{ctx}: unsupported version {version}")
    d = get_field(doc, "d", int, ctx)
    S = get_field(doc, "S", int, ctx)
    J = get_field(doc, "J", int, ctx)
    m = get_field(doc, "m", int, ctx)
    N = get_field(doc, "N", int, ctx)
    M = float(get_field(doc, "M", (int, float), ctx))
    filters = get_field(doc, "filters", list, ctx)
    biases = get_field(doc, "biases", list, ctx)
    if len(filters) != J or len(biases) != J:
        raise SchemaError(f"{ctx}: field 'J' disagrees with filters/biases length")
    layers = tuple(
        ConvLayer(FilterSequence(np.asarray(f, dtype=float)), np.asarray(b, dtype=float))
        for f, b in zip(filters, biases)
    )
    fc_bias = np.asarray(get_field(doc, "fc_bias", list, ctx), dtype=float)
    c = np.asarray(get_field(doc, "c", list, ctx), dtype=float)
    try:
        return ConvNetModel(d=d, S=S, m=m, N=N, M=M, layers=layers, fc_bias=fc_bias, c=c)
    except ValueError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def save_model(model: ConvNetModel, path: str) -> None:
    atomic_write_text(path, model_to_json(model))


def load_model(path: str) -> ConvNetModel:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file: invalid JSON ({exc})") from exc
    return model_from_dict(doc)
