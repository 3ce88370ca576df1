"""Regression data, the clipped least-squares estimator, and rate experiments.

Exact empirical risk minimization over the whole hypothesis class is
intractable, so two fitting routes are provided:

* ``fit_coefficients`` keeps the constructed conv/FC layers fixed (they only
  depend on the directions) and solves the convex least-squares problem over
  the coefficient vector.  This is a faithful sub-case: the fitted function
  stays inside the hypothesis class realized by the construction.
* ``fit_full_gd`` is mini-batch gradient descent over all parameters, an
  explicitly labeled heuristic that is NOT the analyzed estimator.

``rate_experiment`` sweeps sample sizes with the resolution rule
``N = ceil(n^(1/(1+2*alpha)))`` and fits the log-log slope of the mean
squared error, the desk-scale check of the learning-rate prediction.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bounds import choose_resolution
from .network import ConvNetModel, forward_batch, toeplitz_apply
from .ridge import RidgeSpec, build_feature_network
from .sampling import sample_unit_ball
from .serialize import fmt_float_short
from .spline import SplineGrid
from .validation import as_float_matrix, check_unit_ball


class SingularSystemError(RuntimeError):
    """The normal equations are singular; retry with ridge_eps > 0."""


class DivergenceError(RuntimeError):
    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True, eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    seed: int

    def __post_init__(self):
        xs = as_float_matrix(self.xs, "xs")
        ys = np.asarray(self.ys, dtype=float)
        if len(xs) != len(ys):
            raise ValueError("xs and ys must have equal length")
        check_unit_ball(xs, "xs")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return len(self.ys)


def sample_dataset(
    spec: RidgeSpec, n: int, noise_level: float, seed: int, M: float
) -> Dataset:
    """Draw ``n`` unit-ball inputs and noisy responses from the spec.

    Noise is uniform on ``[-noise_level, noise_level]``: mean zero and
    bounded, so ``|y| <= M`` holds exactly when ``m*G + noise_level <= M``.
    Identical seeds give bit-identical datasets.
    """
    if noise_level < 0:
        raise ValueError("noise_level must be nonnegative")
    ceiling = spec.m * spec.sup_bound + noise_level
    if ceiling > M:
        raise ValueError(
            f"M={M:g} too small: responses can reach {ceiling:g}; "
            "raise M or lower the noise level"
        )
    rng = np.random.default_rng(seed)
    xs = sample_unit_ball(rng, n, spec.d)
    noise = rng.uniform(-noise_level, noise_level, n) if noise_level > 0 else np.zeros(n)
    return Dataset(xs=xs, ys=spec.value(xs) + noise, seed=seed)


def clip(v, M: float):
    """Project values onto ``[-M, M]``; scalar in, scalar out."""
    if M <= 0:
        raise ValueError("clipping level M must be positive")
    out = np.minimum(M, np.maximum(-M, np.asarray(v, dtype=float)))
    return float(out) if out.ndim == 0 else out


def feature_map(directions, N: int, X) -> np.ndarray:
    """The last-layer features ``relu(<xi_j, x> - t_i)`` as a design matrix.

    Column block ``j`` matches the constructed network's final activations
    exactly (up to float roundoff from the conv cascade).
    """
    X = as_float_matrix(X, "X")
    t = SplineGrid(N).nodes
    proj = X @ np.asarray(directions, dtype=float).T
    feats = np.maximum(proj[:, :, None] - t[None, None, :], 0.0)
    return feats.reshape(len(X), -1)


def fit_coefficients(
    directions, S: int, N: int, M: float, data: Dataset, ridge_eps: float = 0.0
) -> ConvNetModel:
    """Least-squares over the coefficient vector with the layers held fixed.

    Solves ``min_c sum_i (c . h(x_i) - y_i)^2 + ridge_eps ||c||^2`` through
    the normal equations with a symmetric positive (semi)definite solve.
    Requires the directions (oracle-features mode).  Predictions from the
    returned model should be reported through ``clip(., M)``.
    """
    if ridge_eps < 0:
        raise ValueError("ridge_eps must be nonnegative")
    model = build_feature_network(directions, S, N, M)
    Phi = feature_map(directions, N, data.xs)
    A = Phi.T @ Phi
    A[np.diag_indices_from(A)] += ridge_eps
    b = Phi.T @ data.ys
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        if ridge_eps == 0.0:
            raise SingularSystemError(
                "normal equations are singular; pass ridge_eps > 0"
            ) from exc
        raise SingularSystemError(
            f"normal equations not positive definite at ridge_eps={ridge_eps:g}; "
            "increase ridge_eps"
        ) from exc
    coeffs = np.linalg.solve(A, b)
    return replace(model, c=coeffs)


def l2_error(model: ConvNetModel, spec: RidgeSpec, n_test: int, seed: int) -> float:
    """Monte Carlo squared error of the clipped model against the target."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    rng = np.random.default_rng(seed)
    X = sample_unit_ball(rng, n_test, model.d)
    pred = clip(forward_batch(model, X), model.M)
    return float(np.mean((pred - spec.value(X)) ** 2))


# ---------------------------------------------------------------------------
# flat parameter view (tied middle bias entries) and explicit gradients


def _bias_slices(model):
    """Per-layer (head, mid_len, tail) structure of the tied bias vector."""
    out = []
    for j in range(1, model.J + 1):
        width = model.d + j * model.S
        mid = max(0, width - 2 * model.S)
        head = min(model.S, width)
        tail = width - head - mid
        out.append((head, mid, tail))
    return out


def model_parameters(model: ConvNetModel) -> np.ndarray:
    """Flatten trainable scalars: filters, tied biases, fc bias, coefficients."""
    parts = []
    for (head, mid, tail), layer in zip(_bias_slices(model), model.layers):
        parts.append(layer.filt.padded(model.S + 1))
        b = layer.bias
        parts.append(b[:head])
        if mid:
            parts.append(b[head : head + 1])
        parts.append(b[len(b) - tail :] if tail else np.empty(0))
    parts.append(model.fc_bias)
    parts.append(model.c)
    return np.concatenate(parts)


def with_parameters(model: ConvNetModel, theta) -> ConvNetModel:
    """Rebuild a model from a flat parameter vector (inverse of the above)."""
    from .filters import FilterSequence
    from .network import ConvLayer

    theta = np.asarray(theta, dtype=float)
    pos = 0
    layers = []
    for head, mid, tail in _bias_slices(model):
        filt = FilterSequence(theta[pos : pos + model.S + 1])
        pos += model.S + 1
        width = head + mid + tail
        bias = np.empty(width)
        bias[:head] = theta[pos : pos + head]
        pos += head
        if mid:
            bias[head : head + mid] = theta[pos]
            pos += 1
        if tail:
            bias[head + mid :] = theta[pos : pos + tail]
            pos += tail
        layers.append(ConvLayer(filt, bias))
    width = model.fc_width
    fc_bias = theta[pos : pos + width]
    pos += width
    c = theta[pos : pos + width]
    pos += width
    if pos != len(theta):
        raise ValueError(f"parameter vector has length {len(theta)}, expected {pos}")
    return replace(model, layers=tuple(layers), fc_bias=fc_bias, c=c)


def empirical_risk(model: ConvNetModel, X, y) -> float:
    pred = forward_batch(model, X)
    return float(np.mean((pred - np.asarray(y, dtype=float)) ** 2))


def risk_gradient(model: ConvNetModel, X, y):
    """Empirical risk and its gradient in the flat parameterization.

    Explicit backward pass through the ReLU layers; the subgradient at a
    kink is taken to be 0.
    """
    X = as_float_matrix(X, "X")
    y = np.asarray(y, dtype=float)
    n = len(X)
    pre, post = [], []
    h = X
    for layer in model.layers:
        z = toeplitz_apply(layer.filt, h, model.S) - layer.bias[None, :]
        pre.append(z)
        h = np.maximum(z, 0.0)
        post.append(h)
    cols = [k * model.d - 1 for k in range(1, model.m + 1)]
    block = 2 * model.N + 3
    taps = np.repeat(h[:, cols], block, axis=1)
    z_fc = taps - model.fc_bias[None, :]
    h_fc = np.maximum(z_fc, 0.0)
    pred = h_fc @ model.c
    resid = pred - y
    risk = float(np.mean(resid**2))

    dpred = 2.0 * resid / n
    grad_c = h_fc.T @ dpred
    d_hfc = np.outer(dpred, model.c) * (z_fc > 0)
    grad_fc_bias = -d_hfc.sum(axis=0)
    dh = np.zeros_like(h)
    for i, col in enumerate(cols):
        dh[:, col] = d_hfc[:, i * block : (i + 1) * block].sum(axis=1)

    grads = []
    slices = _bias_slices(model)
    for j in range(model.J - 1, -1, -1):
        dz = dh * (pre[j] > 0)
        db = -dz.sum(axis=0)
        head, mid, tail = slices[j]
        tied = [db[:head]]
        if mid:
            tied.append(np.array([db[head : head + mid].sum()]))
        if tail:
            tied.append(db[len(db) - tail :])
        h_prev = post[j - 1] if j > 0 else X
        D = h_prev.shape[1]
        dw = np.array(
            [np.sum(dz[:, lag : lag + D] * h_prev) for lag in range(model.S + 1)]
        )
        grads.append((dw, np.concatenate(tied)))
        w = model.layers[j].filt.padded(model.S + 1)
        dh = np.zeros_like(h_prev)
        for lag in range(model.S + 1):
            if w[lag] != 0.0:
                dh += w[lag] * dz[:, lag : lag + D]
    flat = []
    for dw, db in reversed(grads):
        flat.extend([dw, db])
    flat.extend([grad_fc_bias, grad_c])
    return risk, np.concatenate(flat)


def fit_full_gd(
    init: ConvNetModel,
    data: Dataset,
    lr: float,
    epochs: int,
    seed: int,
    batch_size: int = 32,
) -> ConvNetModel:
    """Mini-batch gradient descent over every parameter.

    Heuristic demonstrator only; it is not the estimator the learning-rate
    analysis speaks about.  Tracks the best full-data risk seen, so the
    returned model never does worse than ``init``.  Raises DivergenceError
    (with the epoch index) if the risk exceeds 10x its initial value.
    """
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    if lr == 0.0 or epochs == 0:
        return init
    rng = np.random.default_rng(seed)
    theta = model_parameters(init)
    risk0 = empirical_risk(init, data.xs, data.ys)
    ceiling = 10.0 * max(risk0, 1e-300)
    best_risk, best_theta = risk0, theta.copy()
    model = init
    for epoch in range(epochs):
        order = rng.permutation(data.n)
        for start in range(0, data.n, batch_size):
            batch = order[start : start + batch_size]
            batch_risk, grad = risk_gradient(model, data.xs[batch], data.ys[batch])
            # a blown-up step can kill every ReLU and look calm again by
            # epoch end, so divergence is checked per batch as well
            if not math.isfinite(batch_risk) or batch_risk > ceiling:
                raise DivergenceError(
                    f"batch risk {batch_risk:.3g} exceeded 10x initial "
                    f"at epoch {epoch}",
                    epoch,
                )
            theta = theta - lr * grad
            model = with_parameters(init, theta)
        risk = empirical_risk(model, data.xs, data.ys)
        if not math.isfinite(risk) or risk > ceiling:
            raise DivergenceError(
                f"risk {risk:.3g} exceeded 10x initial at epoch {epoch}", epoch
            )
        if risk < best_risk:
            best_risk, best_theta = risk, theta.copy()
    return with_parameters(init, best_theta)


# ---------------------------------------------------------------------------
# rate experiment


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one learning-rate sweep.

    ``ridge_eps`` is a small stabilizer for the normal equations (edge
    features have little sample support at small n); it is orders of
    magnitude below the Gram matrix scale.  ``test_seed`` defaults to
    ``base_seed + 10**6`` so every trial scores on one common test sample.
    """

    spec: RidgeSpec
    sizes: tuple
    trials: int
    alpha: float
    noise_level: float
    base_seed: int
    M: float
    S: int
    ridge_eps: float = 1e-2
    n_test: int = 16384
    out_path: str | None = None
    spec_path: str | None = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sizes must be strictly increasing and nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "sizes", sizes)

    @property
    def test_seed(self) -> int:
        return self.base_seed + 10**6


@dataclass
class RateExperimentResult:
    rows: list  # (n, trial, mse), sorted
    fitted_slope: float
    slope_stderr: float
    slope_skipped: bool = False
    failures: list = field(default_factory=list)  # (n, trial, message)


def _thread_count() -> int:
    raw = os.environ.get("RIDGEKIT_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return os.cpu_count() or 1


def _run_trial(config: ExperimentConfig, n: int, trial: int):
    data = sample_dataset(
        config.spec, n, config.noise_level, config.base_seed + trial, config.M
    )
    model = fit_coefficients(
        [c.direction for c in config.spec.components],
        config.S,
        choose_resolution(n, config.alpha),
        config.M,
        data,
        ridge_eps=config.ridge_eps,
    )
    return l2_error(model, config.spec, config.n_test, config.test_seed)


def rate_experiment(config: ExperimentConfig) -> RateExperimentResult:
    """Sweep sample sizes, fit coefficients per trial, regress the log errors.

    Per-trial failures are recorded and skipped unless every trial of a
    size fails.  If all mean errors are at float-noise level the slope fit
    is skipped with an explicit flag.  Trials may run in parallel
    (``RIDGEKIT_THREADS`` caps the worker count); results are aggregated
    in sorted order, so the output is identical either way.
    """
    jobs = [(n, t) for n in config.sizes for t in range(config.trials)]
    rows, failures = [], []

    def _one(job):
        n, t = job
        try:
            return (n, t, _run_trial(config, n, t), None)
        except (SingularSystemError, np.linalg.LinAlgError) as exc:
            return (n, t, math.nan, str(exc))

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one, jobs))
    else:
        outcomes = [_one(job) for job in jobs]
    for n, t, mse, err in outcomes:
        if err is None:
            rows.append((n, t, mse))
        else:
            failures.append((n, t, err))
    rows.sort(key=lambda r: (r[0], r[1]))
    failures.sort(key=lambda r: (r[0], r[1]))

    means = []
    for n in config.sizes:
        vals = [mse for nn, _, mse in rows if nn == n]
        if not vals:
            raise RuntimeError(f"all {config.trials} trials failed at n={n}")
        means.append((n, float(np.mean(vals))))

    if all(mean <= 1e-12 for _, mean in means):
        return RateExperimentResult(rows, math.nan, math.nan, True, failures)

    log_n = np.log([n for n, _ in means])
    log_e = np.log([mean for _, mean in means])
    design = np.vstack([np.ones_like(log_n), log_n]).T
    coef, *_ = np.linalg.lstsq(design, log_e, rcond=None)
    slope = float(coef[1])
    k = len(means)
    if k > 2:
        resid = log_e - design @ coef
        sigma2 = float(resid @ resid) / (k - 2)
        cov = sigma2 * np.linalg.inv(design.T @ design)
        stderr = math.sqrt(cov[1, 1])
    else:
        stderr = math.nan
    return RateExperimentResult(rows, slope, stderr, False, failures)


def rate_csv_text(result: RateExperimentResult) -> str:
    """CSV rows plus the trailing slope comment, 10 significant digits."""
    lines = ["n,trial,mse"]
    for n, trial, mse in result.rows:
        lines.append(f"{n},{trial},{fmt_float_short(mse)}")
    lines.append(
        f"# slope={fmt_float_short(result.fitted_slope)} "
        f"stderr={fmt_float_short(result.slope_stderr)}"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# sklearn-style front end


class ConvRidgeRegressor(RegressorMixin, BaseEstimator):
    """Coefficient-stage estimator with the sklearn fit/predict protocol.

    Parameters
    ----------
    directions : array-like of shape (m, d)
        The ridge directions (oracle-features mode: they are inputs, not
        learned).
    S : int
        Filter length parameter of the underlying conv stack.
    N : int or None
        Mesh resolution of the feature layer; when None it is set at fit
        time by the ``ceil(n^(1/(1+2*alpha)))`` rule.
    alpha : float
        Smoothness exponent used by the automatic resolution rule.
    M : float
        Clipping level applied to predictions.
    ridge_eps : float
        Ridge stabilizer for the normal equations.
    """

    def __init__(self, directions=None, S=2, N=None, alpha=1.0, M=1.0, ridge_eps=0.0):
        self.directions = directions
        self.S = S
        self.N = N
        self.alpha = alpha
        self.M = M
        self.ridge_eps = ridge_eps

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.directions is None:
            raise ValueError("directions must be provided before fitting")
        resolution = self.N if self.N is not None else choose_resolution(
            len(y), self.alpha
        )
        data = Dataset(xs=X, ys=y, seed=0)
        self.model_ = fit_coefficients(
            self.directions, self.S, resolution, self.M, data, self.ridge_eps
        )
        self.n_features_in_ = X.shape[1]
        self.resolution_ = resolution
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return clip(forward_batch(self.model_, X), self.M)
