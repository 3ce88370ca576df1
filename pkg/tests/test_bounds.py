import json
import math

import numpy as np
import pytest

from ridgekit.bounds import (
    bound_report,
    choose_resolution,
    covering_constants,
    covering_log_bound,
    filter_magnitude_bound,
    oracle_failure_prob,
    param_count,
    rate_predictions,
)


class TestParamCount:
    def test_reference_values(self):
        assert param_count(2, 4, 1, 5) == 36
        assert param_count(3, 3, 1, 1) == 11 * 1 + 4

    def test_bit_reproducible(self):
        assert param_count(2, 4, 1, 5) == param_count(2, 4, 1, 5)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            param_count(1, 4, 1, 5)
        with pytest.raises(ValueError):
            param_count(2, 2, 1, 5)
        with pytest.raises(ValueError):
            param_count(5, 4, 1, 5)


class TestFilterBound:
    def test_unit_axis_direction(self):
        assert filter_magnitude_bound([1.0, 0.0, 0.0], 2, 1.0) == 16.0

    def test_sup_term_dominates(self):
        assert filter_magnitude_bound([0.5, 0.1], 2, 10.0) == 40.0

    def test_first_nonzero_entry_used(self):
        assert filter_magnitude_bound([0.0, 0.5, 0.9], 2, 1.0) == pytest.approx(
            max(4.0 * (1 + 2.0) ** 2, 4.0)
        )

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            filter_magnitude_bound([0.0, 0.0], 2, 1.0)

    def test_dominates_constructed_filters(self):
        from ridgekit.ridge import build_network
        from tests.test_ridge import random_spec

        rng = np.random.default_rng(8)
        for _ in range(100):
            m, d = int(rng.integers(1, 3)), int(rng.integers(3, 6))
            spec = random_spec(rng, m, d)
            model = build_network(spec, S=2, N=2, M=8.0)
            B = filter_magnitude_bound(spec.components[-1].direction, 2, spec.sup_bound)
            for layer in model.layers:
                assert np.max(np.abs(layer.filt.coeffs)) <= B + 1e-9


class TestCoveringConstants:
    def test_reference_values(self):
        C, C_prime, _ = covering_constants(2, 3, 1, 1.0)
        assert C == 49 and C_prime == 103

    def test_second_reference(self):
        C, _, _ = covering_constants(3, 3, 1, 1.0)
        assert C == 57

    def test_dprime_cross_check(self):
        # independent evaluation of the same closed form
        S, d, m, B = 2, 3, 1, 1.0
        _, _, C_dprime = covering_constants(S, d, m, B)
        expected = 9 * 49 * math.log(1377.0) + 103
        assert C_dprime == pytest.approx(expected, rel=1e-12)

    def test_log_bound_cases(self):
        constants = covering_constants(2, 3, 1, 1.0)
        C, _, C_dprime = constants
        N = 7
        assert covering_log_bound(1.0, N, constants) == pytest.approx(
            C_dprime * N * math.log(N)
        )
        assert covering_log_bound(0.3, 1, constants) == pytest.approx(
            C * math.log(1 / 0.3)
        )
        # isolate the log(1/delta) term by differencing in delta: it must
        # scale exactly linearly in N
        gap_4 = covering_log_bound(0.25, 4, constants) - covering_log_bound(0.5, 4, constants)
        gap_8 = covering_log_bound(0.25, 8, constants) - covering_log_bound(0.5, 8, constants)
        assert gap_8 == pytest.approx(2 * gap_4, rel=1e-12)

    def test_monotonicity(self):
        constants = covering_constants(2, 4, 2, 2.0)
        values_n = [covering_log_bound(0.5, N, constants) for N in (2, 4, 8, 16)]
        assert values_n == sorted(values_n)
        values_d = [covering_log_bound(dlt, 4, constants) for dlt in (1.0, 0.5, 0.1)]
        assert values_d == sorted(values_d)


class TestOracleFailureProb:
    @staticmethod
    def duplicate(delta, n, n1, n2, h_inf, approx_err, M, C1, C2):
        e1 = C1 * n1 * math.log(16 * M / delta) - C2 * n2 * math.log(n2) - 3 * n * delta / (512 * M * M)
        t1 = math.inf if e1 > 700 else math.exp(e1)
        t2 = math.exp(-3 * n * delta**2 / (16 * (3 * M + h_inf) ** 2 * (6 * approx_err**2 + delta)))
        return min(1.0, max(0.0, t1 + t2))

    def test_matches_independent_reimplementation(self):
        args = dict(delta=0.1, n=1000, n1=5, n2=5, h_inf=1.0, approx_err=0.1, M=1.0, C1=1.0, C2=1.0)
        assert oracle_failure_prob(**args) == pytest.approx(self.duplicate(**args), rel=1e-12)

    def test_random_instances_match(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            args = dict(
                delta=float(rng.uniform(0.01, 2.0)),
                n=int(rng.integers(10, 10_000)),
                n1=float(rng.uniform(1, 20)),
                n2=float(rng.uniform(2, 20)),
                h_inf=float(rng.uniform(0.1, 3)),
                approx_err=float(rng.uniform(0.0, 1.0)),
                M=float(rng.uniform(0.5, 4)),
                C1=float(rng.uniform(0.1, 2)),
                C2=float(rng.uniform(0.1, 2)),
            )
            assert oracle_failure_prob(**args) == pytest.approx(
                self.duplicate(**args), rel=1e-12
            )

    def test_vanishes_for_large_delta(self):
        vals = [
            oracle_failure_prob(delta, 2000, 3, 3, 1.0, 0.1, 1.0, 1.0, 1.0)
            for delta in (1.0, 10.0, 100.0, 1000.0)
        ]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] < 1e-6

    def test_vanishes_for_large_n(self):
        vals = [
            oracle_failure_prob(0.5, n, 3, 3, 1.0, 0.1, 1.0, 1.0, 1.0)
            for n in (10, 100, 10_000, 1_000_000)
        ]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] < 1e-9

    def test_clamped_to_unit_interval(self):
        v = oracle_failure_prob(1e-6, 10, 50, 2, 1.0, 0.1, 1.0, 5.0, 0.1)
        assert 0.0 <= v <= 1.0


class TestRatePredictions:
    def test_alpha_one_reference(self):
        pred = rate_predictions(1.0, 1000)
        assert pred.lower == pytest.approx(0.01, rel=1e-15)
        assert pred.N_choice == 10

    def test_alpha_half_reference(self):
        assert rate_predictions(0.5, 10_000).lower == pytest.approx(0.01, rel=1e-15)

    def test_n_one(self):
        pred = rate_predictions(1.0, 1)
        assert pred.lower == 1.0
        assert pred.N_choice == 1
        assert pred.upper_with_log == 0.0

    def test_bit_reproducible(self):
        a = rate_predictions(0.7, 12345)
        b = rate_predictions(0.7, 12345)
        assert (a.lower, a.upper_with_log, a.N_choice) == (
            b.lower,
            b.upper_with_log,
            b.N_choice,
        )

    def test_resolution_rule_near_integer_powers(self):
        assert choose_resolution(27, 1.0) == 3
        assert choose_resolution(28, 1.0) == 4
        assert choose_resolution(1000, 1.0) == 10


class TestBoundReport:
    def test_entries_present_and_json(self):
        report = bound_report(2, 4, 1, 5, 1.0)
        assert report.named("param_count").value == 36.0
        doc = json.loads(report.to_json())
        names = [e["name"] for e in doc["entries"]]
        assert "covering_C" in names and "perturbation_drift" in names
        for entry in doc["entries"]:
            assert entry["formula"]

    def test_overflow_flagged_not_saturated(self):
        report = bound_report(3, 100, 4, 5, 50.0)
        drift = report.named("perturbation_drift")
        assert drift.overflow and math.isinf(drift.value)
        assert math.isfinite(drift.log_value)

    def test_drift_upper_bounds_measured_norms(self):
        # boundscalc values dominate the measured network norms
        from ridgekit.network import validate_membership
        from ridgekit.ridge import build_network
        from tests.test_ridge import random_spec

        rng = np.random.default_rng(10)
        for _ in range(10):
            spec = random_spec(rng, 1, 4)
            model = build_network(spec, S=2, N=3, M=4.0)
            B = filter_magnitude_bound(spec.components[-1].direction, 2, spec.sup_bound)
            report = validate_membership(model, B)
            assert report.passed
            for check in report.checks:
                if math.isfinite(check.bound):
                    assert check.slack >= 0.0 or not check.passed
