"""Metric suite: exact identities, oracles, and formatting."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fairadjust.errors import SchemaError
from fairadjust.estimators import fit_components
from fairadjust.metrics import (
    GroupPair,
    avg_kl_to_ml,
    aa_metric,
    binned_sym_kl,
    bernoulli_kl,
    demographic_parity_kl,
    eo_metric,
    evaluate_predictor,
    format_metric_table,
    predictive_score,
    reports_to_json,
)
from fairadjust.predictors import build_all, build_eo, build_ml
from fairadjust.simulate import ScmParams, SimSpec, simulate
from fairadjust.tabular import Dataset

from conftest import minimal_schema, ref_sigmoid, two_sensitive_dataset

PAIR = GroupPair("sex", "m", "f")


@pytest.fixture(scope="module")
def fitted(sim5000):
    predictors = build_all(sim5000)
    g = predictors["aa"].components.g
    return sim5000, predictors, g


class TestEoMetric:
    def test_zero_for_opportunity_equal_kinds(self, fitted):
        data, predictors, _ = fitted
        assert eo_metric(predictors["eo"], data, PAIR) == 0.0
        assert eo_metric(predictors["ftu"], data, PAIR) == 0.0

    def test_ml_with_true_parameters_matches_quadrature(self):
        # with shift = 0 the score column is Uniform[0, 1], so the expected
        # gap integrates sigmoid(-1 + 2a + 1) - sigmoid(-1 + 2a) over [0, 1]
        from fairadjust.cli import true_components

        params = ScmParams(beta_a=2.0, beta_s=1.0, shift=0.0)
        test = simulate(SimSpec(params, 40_000, 3))
        ml = build_ml(true_components(params))
        oracle, _ = integrate.quad(
            lambda a: ref_sigmoid(2 * a) - ref_sigmoid(2 * a - 1), 0.0, 1.0
        )
        value = eo_metric(ml, test, PAIR)
        # gap values have sd < 0.03 across rows; 40k rows
        assert value == pytest.approx(oracle, abs=4 * 0.03 / math.sqrt(40_000))

    def test_schema_mismatch_rejected(self, fitted):
        data, predictors, _ = fitted
        other = two_sensitive_dataset(100, 1)
        with pytest.raises(SchemaError):
            eo_metric(predictors["ml"], other, GroupPair("sex", "m", "f"))

    def test_unknown_pair_level_rejected(self, fitted):
        data, predictors, _ = fitted
        with pytest.raises(SchemaError):
            eo_metric(predictors["ml"], data, GroupPair("sex", "x", "f"))


class TestAaMetric:
    def test_zero_for_residual_kinds(self, fitted):
        data, predictors, g = fitted
        assert abs(aa_metric(predictors["aa"], data, PAIR, g)) <= 1e-12
        assert abs(aa_metric(predictors["fairlearning"], data, PAIR, g)) <= 1e-12

    def test_ml_positive_when_committee_favors_advantaged(self, fitted):
        data, predictors, g = fitted
        assert aa_metric(predictors["ml"], data, PAIR, g) > 0.0

    def test_multi_sensitive_pairs(self):
        data = two_sensitive_dataset(4000, 9)
        predictors = build_all(data)
        g = predictors["aa"].components.g
        for pair in (GroupPair("race", "w", "nw"), GroupPair("sex", "m", "f")):
            assert abs(aa_metric(predictors["aa"], data, pair, g)) <= 1e-12
            assert eo_metric(predictors["eo"], data, pair) == 0.0


class TestDemographicParityKl:
    def test_zero_for_identical_score_multisets(self):
        # mirrored rows: each score value appears once per group
        schema = minimal_schema()
        scores = np.linspace(0.1, 0.9, 50)
        data = Dataset(
            schema,
            {
                "sex": np.array(["f"] * 50 + ["m"] * 50),
                "score": np.concatenate([scores, scores]),
                "admit": np.concatenate([np.zeros(50), np.zeros(50)]) ,
            },
        )
        train = simulate(SimSpec(ScmParams(), 3000, 4))
        eo = build_eo(fit_components(train))
        assert demographic_parity_kl(eo, data, PAIR) == 0.0

    def test_nonnegative(self, fitted):
        data, predictors, _ = fitted
        for kind, p in predictors.items():
            assert demographic_parity_kl(p, data, PAIR) >= 0.0

    def test_empty_group_rejected(self, fitted):
        data, predictors, _ = fitted
        females = data.subset(np.flatnonzero(data.columns["sex"] == "f"))
        with pytest.raises(SchemaError, match="no rows"):
            demographic_parity_kl(predictors["ml"], females, PAIR)

    def test_corrected_predictor_far_below_ml(self):
        train = simulate(SimSpec(ScmParams(beta_s=2.0, shift=0.1), 5000, 21))
        test = simulate(SimSpec(ScmParams(beta_s=2.0, shift=0.1), 10_000, 22))
        predictors = build_all(train)
        kl_aa = demographic_parity_kl(predictors["aa"], test, PAIR)
        kl_ml = demographic_parity_kl(predictors["ml"], test, PAIR)
        assert kl_aa <= 0.05
        assert kl_ml >= 10 * kl_aa

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_binned_sym_kl_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=rng.integers(5, 200))
        b = rng.normal(loc=rng.uniform(-1, 1), size=rng.integers(5, 200))
        assert binned_sym_kl(a, b) >= 0.0

    def test_bin_count_validation(self):
        with pytest.raises(ValueError):
            binned_sym_kl(np.ones(5), np.ones(5), bins=1)


class TestPredictiveScore:
    def test_perfect_predictor(self, fitted):
        data, predictors, _ = fitted

        class Oracle:
            schema = data.schema
            kind = "oracle"

            def score_batch(self, d):
                return data.decisions

        assert predictive_score(Oracle(), data) == 1.0

    def test_constant_half_on_balanced_labels(self):
        schema = minimal_schema()
        data = Dataset(
            schema,
            {
                "sex": np.array(["f", "m"] * 50),
                "score": np.full(100, 0.5),
                "admit": np.array([0.0, 1.0] * 50),
            },
        )

        class Half:
            schema = data.schema
            kind = "half"

            def score_batch(self, d):
                return np.full(100, 0.5)

        assert predictive_score(Half(), data) == 0.5

    def test_rmse_for_real_valued(self):
        from fairadjust.tabular import (
            AttributeColumn,
            DecisionColumn,
            Schema,
            SensitiveColumn,
        )

        schema = Schema(
            sensitive=(SensitiveColumn("s", ("a", "b")),),
            attributes=(AttributeColumn("x", "numeric", (), correctable=True),),
            decision=DecisionColumn("y", "real"),
        )
        data = Dataset(
            schema,
            {
                "s": np.array(["a", "b"]),
                "x": np.array([0.0, 0.0]),
                "y": np.array([1.0, 3.0]),
            },
        )

        class Two:
            kind = "two"

            def score_batch(self, d):
                return np.array([2.0, 2.0])

        Two.schema = schema

        # residuals (-1, 1): rmse = 1
        assert predictive_score(Two(), data) == 1.0

    def test_missing_decisions_rejected(self, fitted):
        data, predictors, _ = fitted
        scoring_only = Dataset(
            data.schema,
            {k: v for k, v in data.columns.items() if k != "admit"},
        )
        with pytest.raises(SchemaError, match="no decision"):
            predictive_score(predictors["ml"], scoring_only)


class TestAvgKlToMl:
    def test_self_divergence_zero(self, fitted):
        data, predictors, _ = fitted
        assert avg_kl_to_ml(predictors["ml"], predictors["ml"], data) == 0.0

    def test_identical_scores_zero(self):
        p = np.full(10, 0.5)
        assert np.all(bernoulli_kl(p, p) == 0.0)

    def test_clipping_guards_saturated_scores(self):
        assert np.isfinite(bernoulli_kl(np.array([1.0]), np.array([0.0]))[0])

    def test_asymmetric_but_nonnegative(self, fitted):
        data, predictors, _ = fitted
        kl = avg_kl_to_ml(predictors["eo"], predictors["ml"], data)
        assert kl > 0.0


class TestPermutationInvariance:
    def test_metrics_invariant_under_row_shuffle(self, fitted):
        data, predictors, g = fitted
        rng = np.random.default_rng(0)
        shuffled = data.subset(rng.permutation(data.n_rows))
        p = predictors["ml"]
        assert eo_metric(p, shuffled, PAIR) == pytest.approx(
            eo_metric(p, data, PAIR), abs=1e-14
        )
        assert aa_metric(p, shuffled, PAIR, g) == pytest.approx(
            aa_metric(p, data, PAIR, g), abs=1e-14
        )
        assert demographic_parity_kl(p, shuffled, PAIR) == pytest.approx(
            demographic_parity_kl(p, data, PAIR), abs=1e-12
        )
        assert predictive_score(p, shuffled) == predictive_score(p, data)


class TestReporting:
    def test_report_fields_and_json(self, fitted):
        data, predictors, g = fitted
        report = evaluate_predictor(predictors["ml"], data, PAIR, g)
        assert report.predictor == "ml"
        assert report.sym_kl >= 0.0
        assert 0.0 <= report.predictive_score <= 1.0
        doc = json.loads(reports_to_json([report]))
        assert doc[0]["eo_metric"] == report.eo_metric

    def test_table_layout(self, fitted):
        data, predictors, g = fitted
        reports = [
            evaluate_predictor(predictors[k], data, PAIR, g) for k in predictors
        ]
        text = format_metric_table(reports, "Metrics (x10^2) on simulated data")
        lines = text.splitlines()
        assert lines[1].split() == ["EO", "AA", "KL", "Prediction"]
        # conventional row order, scaled by 100 with one decimal
        assert [ln.split()[0] for ln in lines[2:7]] == [
            "f_ml", "FTU", "f_eo", "FL", "f_aa",
        ]
        ml_row = lines[2].split()
        assert ml_row[1] == f"{100 * reports[0].eo_metric:.1f}"
