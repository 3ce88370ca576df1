"""Closed-form evaluation of every constant and bound used in the analysis.

Naming table (the source statements drift between primed variants, so one
convention is fixed here):

* ``C``         entropy coefficient ``5(m^2 d + 2m) + (md-1)(mdS + md + S + 1)``
* ``C_prime``   ``2C + 5m``
* ``C_dprime``  ``3 m d C log(153 m d (S+1) B) + C_prime``

``covering_log_bound`` pairs ``C`` with ``log(1/delta)`` and ``C_dprime``
with ``N log N``.  All logs are natural.  Values that overflow doubles are
reported in log space with an overflow flag instead of saturating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import (
    log_perturbation_drift_constant,
    perturbation_drift_constant,
)
from .serialize import to_json_text


def param_count(S: int, d: int, m: int, N: int) -> int:
    """Free-parameter budget ``(3S+2) ceil((md-1)/(S-1)) + m(2N+2)``."""
    _check_dims(S, d, m)
    if N < 1:
        raise ValueError("N must be positive")
    return (3 * S + 2) * math.ceil((m * d - 1) / (S - 1)) + m * (2 * N + 2)


def _check_dims(S: int, d: int, m: int) -> None:
    if d < 3:
        raise ValueError("d must be at least 3")
    if not 2 <= S <= d:
        raise ValueError("need 2 <= S <= d")
    if m < 1:
        raise ValueError("m must be positive")


def filter_magnitude_bound(xi_m, S: int, G: float) -> float:
    """The filter sup-norm budget ``max(2^S (1 + 1/|xi_l|)^S, 4G)``.

    ``xi_l`` is the first nonzero entry of the last direction; it controls
    the root radius of the monic interleaved filter.
    """
    xi = np.asarray(xi_m, dtype=float)
    nz = np.nonzero(xi != 0.0)[0]
    if len(nz) == 0:
        raise ValueError("the last direction must have a nonzero entry")
    first = abs(float(xi[nz[0]]))
    return max(2.0**S * (1.0 + 1.0 / first) ** S, 4.0 * G)


def covering_constants(S: int, d: int, m: int, B: float):
    """The entropy constants ``(C, C_prime, C_dprime)``; see module table."""
    _check_dims(S, d, m)
    if B <= 0:
        raise ValueError("B must be positive")
    C = 5 * (m**2 * d + 2 * m) + (m * d - 1) * (m * d * S + m * d + S + 1)
    C_prime = 2 * C + 5 * m
    C_dprime = 3.0 * m * d * C * math.log(153.0 * m * d * (S + 1) * B) + C_prime
    return C, C_prime, C_dprime


def covering_log_bound(delta: float, N: int, constants) -> float:
    """Metric-entropy bound ``C N log(1/delta) + C_dprime N log N``."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if N < 1:
        raise ValueError("N must be positive")
    C, _, C_dprime = constants
    return C * N * math.log(1.0 / delta) + C_dprime * N * math.log(N)


def oracle_failure_prob(
    delta: float,
    n: int,
    n1: float,
    n2: float,
    h_inf: float,
    approx_err: float,
    M: float,
    C1: float,
    C2: float,
) -> float:
    """Failure probability of the oracle inequality, clamped to [0, 1].

    ``approx_err`` is the population-norm distance of the comparator to the
    regression function (the bound uses ``6 approx_err^2 + delta``); ``n1``
    and ``n2`` are the abstract capacity parameters, both instantiated as
    the mesh resolution in the rate analysis.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    exponent1 = (
        C1 * n1 * math.log(16.0 * M / delta)
        - C2 * n2 * math.log(n2)
        - 3.0 * n * delta / (512.0 * M**2)
    )
    # a nonnegative exponent already makes the bound vacuous after clamping
    term1 = math.inf if exponent1 > 700.0 else math.exp(exponent1)
    term2 = math.exp(
        -3.0
        * n
        * delta**2
        / (16.0 * (3.0 * M + h_inf) ** 2 * (6.0 * approx_err**2 + delta))
    )
    return min(1.0, max(0.0, term1 + term2))


@dataclass(frozen=True)
class RatePrediction:
    lower: float
    upper_with_log: float
    N_choice: int


def choose_resolution(n: int, alpha: float) -> int:
    """``ceil(n^(1/(1+2*alpha)))`` with a nudge against float pow noise."""
    if n < 1 or alpha <= 0:
        raise ValueError("need n >= 1 and alpha > 0")
    return max(1, math.ceil(n ** (1.0 / (1.0 + 2.0 * alpha)) - 1e-10))


def rate_predictions(alpha: float, n: int) -> RatePrediction:
    """Rate exponents at sample size ``n`` (absolute constants omitted).

    ``lower`` is the minimax floor ``n^(-2 alpha/(2 alpha+1))``;
    ``upper_with_log`` is the matching upper rate ``n^(-2a/(1+2a)) log n``;
    ``N_choice`` is the resolution that balances the two error terms.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be positive")
    exponent = -2.0 * alpha / (2.0 * alpha + 1.0)
    lower = float(n) ** exponent
    return RatePrediction(
        lower=lower,
        upper_with_log=lower * math.log(n),
        N_choice=choose_resolution(n, alpha),
    )


@dataclass(frozen=True)
class BoundEntry:
    name: str
    value: float
    formula: str
    log_value: float = math.nan
    overflow: bool = False


@dataclass
class BoundReport:
    entries: list

    def named(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_json(self) -> str:
        doc = {
            "entries": [
                {
                    "name": e.name,
                    "value": e.value if math.isfinite(e.value) else None,
                    "formula": e.formula,
                    "log_value": None if math.isnan(e.log_value) else e.log_value,
                    "overflow": e.overflow,
                }
                for e in self.entries
            ]
        }
        return to_json_text(doc) + "\n"


def bound_report(S: int, d: int, m: int, N: int, B: float) -> BoundReport:
    """Evaluate the standard bound set for one architecture configuration."""
    C, C_prime, C_dprime = covering_constants(S, d, m, B)
    entries = [
        BoundEntry(
            "param_count",
            float(param_count(S, d, m, N)),
            "(3S+2)*ceil((m*d-1)/(S-1)) + m*(2N+2)",
        ),
        BoundEntry("covering_C", float(C), "5(m^2 d + 2m) + (md-1)(mdS + md + S + 1)"),
        BoundEntry("covering_C_prime", float(C_prime), "2C + 5m"),
        BoundEntry(
            "covering_C_dprime", C_dprime, "3mdC*log(153 m d (S+1) B) + C_prime"
        ),
        BoundEntry(
            "covering_log_bound_at_half",
            covering_log_bound(0.5, N, (C, C_prime, C_dprime)),
            "C*N*log(1/delta) + C_dprime*N*log(N), delta=1/2",
        ),
    ]
    log_drift = log_perturbation_drift_constant(m, d, S, N, B)
    try:
        drift = perturbation_drift_constant(m, d, S, N, B)
        entries.append(
            BoundEntry(
                "perturbation_drift",
                drift,
                "150 m^3 d^2 N^2 ((S+1)B)^(m d)",
                log_value=log_drift,
            )
        )
    except OverflowError:
        entries.append(
            BoundEntry(
                "perturbation_drift",
                math.inf,
                "150 m^3 d^2 N^2 ((S+1)B)^(m d)",
                log_value=log_drift,
                overflow=True,
            )
        )
    return BoundReport(entries)
