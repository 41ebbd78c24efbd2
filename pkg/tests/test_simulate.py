"""Generator behavior: distributional checks against independent oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from fairadjust.simulate import (
    ScmParams,
    SimSpec,
    derive_seed,
    sigmoid,
    simulate,
    sweep_specs,
)

from conftest import ref_sigmoid


def clamp_mean_oracle(shift: float) -> float:
    """E[clamp(shift + U, 0, 1)] by quadrature, U ~ Uniform[0, 1]."""
    value, _ = integrate.quad(lambda u: max(0.0, min(shift + u, 1.0)), 0.0, 1.0)
    return value


class TestSigmoid:
    def test_zero_is_half(self):
        assert sigmoid(0.0) == 0.5

    def test_value_at_1_7(self):
        # oracle: direct evaluation with math.exp
        assert sigmoid(1.7) == pytest.approx(ref_sigmoid(1.7), abs=1e-15)
        assert round(sigmoid(1.7), 4) == 0.8455

    @given(st.floats(-700, 700, allow_nan=False))
    def test_complement_identity(self, x):
        assert sigmoid(-x) == pytest.approx(1.0 - sigmoid(x), abs=1e-12)

    @given(st.floats(-1e4, 1e4, allow_nan=False))
    def test_bounded(self, x):
        assert 0.0 <= sigmoid(x) <= 1.0

    def test_monotone(self):
        xs = np.linspace(-20, 20, 2001)
        assert np.all(np.diff(sigmoid(xs)) > 0)

    def test_vectorized_matches_scalar(self):
        xs = np.array([-3.0, 0.0, 2.5])
        np.testing.assert_allclose(sigmoid(xs), [ref_sigmoid(x) for x in xs], atol=1e-15)


class TestScmParams:
    def test_defaults(self):
        p = ScmParams()
        assert (p.beta_a, p.beta_s, p.shift, p.intercept, p.p_male) == (
            2.0, 1.0, 0.02, -1.0, 0.5,
        )

    def test_invalid_p_male(self):
        with pytest.raises(ValueError):
            ScmParams(p_male=1.0)

    def test_invalid_shift(self):
        with pytest.raises(ValueError):
            ScmParams(shift=1.5)

    def test_group_mean_matches_quadrature(self):
        for shift in (0.0, 0.02, 0.3, 0.8):
            p = ScmParams(shift=shift)
            assert p.group_score_mean(True) == pytest.approx(
                clamp_mean_oracle(shift), abs=1e-12
            )
            assert p.group_score_mean(False) == pytest.approx(0.5, abs=1e-12)


class TestSimulate:
    def test_male_fraction_and_score_gap(self):
        # defaults: beta_a=2, beta_s=1, shift=0.02, p_male=0.5
        spec = SimSpec(ScmParams(), 5000, 42)
        data = simulate(spec)
        male = data.columns["sex"] == "m"
        assert abs(male.mean() - 0.5) <= 3 * math.sqrt(0.25 / 5000)
        gap = data.columns["score"][male].mean() - data.columns["score"][~male].mean()
        oracle = clamp_mean_oracle(0.02) - 0.5
        # score sd is ~sqrt(1/12); two groups of ~2500 rows
        mc_sd = math.sqrt((1 / 12) * (1 / 2500 + 1 / 2500))
        assert abs(gap - oracle) <= 4 * mc_sd

    def test_no_effect_means_rate_independent_of_sex(self):
        spec = SimSpec(ScmParams(beta_s=0.0, shift=0.0), 20000, 7)
        data = simulate(spec)
        male = data.columns["sex"] == "m"
        admit = data.columns["admit"]
        counts = np.array([admit[male].sum(), admit[~male].sum()])
        nobs = np.array([male.sum(), (~male).sum()])
        p_pool = counts.sum() / nobs.sum()
        z = (counts[0] / nobs[0] - counts[1] / nobs[1]) / math.sqrt(
            p_pool * (1 - p_pool) * (1 / nobs[0] + 1 / nobs[1])
        )
        p_value = 2 * (1 - stats.norm.cdf(abs(z)))
        assert p_value > 0.01

    def test_single_row(self):
        data = simulate(SimSpec(ScmParams(), 1, 3))
        assert data.n_rows == 1
        assert data.columns["sex"][0] in ("f", "m")
        assert 0.0 <= data.columns["score"][0] <= 1.0
        assert data.columns["admit"][0] in (0.0, 1.0)

    def test_same_seed_bit_identical(self):
        a = simulate(SimSpec(ScmParams(), 1000, 9))
        b = simulate(SimSpec(ScmParams(), 1000, 9))
        for name in ("sex", "score", "admit"):
            np.testing.assert_array_equal(a.columns[name], b.columns[name])

    def test_ranges_across_specs(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            params = ScmParams(
                beta_a=float(rng.uniform(-3, 3)),
                beta_s=float(rng.uniform(-3, 3)),
                shift=float(rng.uniform(0, 1)),
                p_male=float(rng.uniform(0.1, 0.9)),
            )
            data = simulate(SimSpec(params, 500, int(rng.integers(1 << 30))))
            assert np.all((data.columns["score"] >= 0) & (data.columns["score"] <= 1))
            assert set(np.unique(data.columns["admit"])) <= {0.0, 1.0}

    def test_admit_rate_monotone_in_score_bins(self):
        # coarse-bin monotonicity within each group at large n
        data = simulate(SimSpec(ScmParams(beta_a=2.0, shift=0.0), 100_000, 17))
        score = data.columns["score"]
        admit = data.columns["admit"]
        for level in ("f", "m"):
            mask = data.columns["sex"] == level
            bins = np.clip((score[mask] * 5).astype(int), 0, 4)
            rates = [admit[mask][bins == b].mean() for b in range(5)]
            assert all(r2 >= r1 for r1, r2 in zip(rates, rates[1:]))

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            SimSpec(ScmParams(), 0, 1)


class TestSweepSpecs:
    def test_cross_product(self):
        specs = sweep_specs(ScmParams(), "beta_s", [0.0, 1.0, 2.0], 2, seed=5)
        assert [s.params.beta_s for s in specs] == [0.0, 0.0, 1.0, 1.0, 2.0, 2.0]
        assert len({s.seed for s in specs}) == 6

    def test_lambda_grid_stored_normalized(self):
        specs = sweep_specs(ScmParams(), "lambda", [0.0, 0.4, 0.8], 1, seed=5)
        assert [s.params.shift for s in specs] == [0.0, 0.4, 0.8]

    def test_single_cell_keeps_base(self):
        base = ScmParams(beta_a=2.0, beta_s=1.0, shift=0.02)
        (spec,) = sweep_specs(base, "lambda", [0.5], 1, seed=1)
        assert spec.params.shift == 0.5
        assert spec.params.beta_a == base.beta_a
        assert spec.params.beta_s == base.beta_s

    def test_unknown_vary_key(self):
        with pytest.raises(ValueError, match="unknown sweep parameter"):
            sweep_specs(ScmParams(), "beta_a", [0.0], 1, seed=1)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            sweep_specs(ScmParams(), "beta_s", [], 1, seed=1)

    def test_subseed_derivation_reproducible(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        again = sweep_specs(ScmParams(), "beta_s", [0.0, 1.0], 3, seed=99)
        first = sweep_specs(ScmParams(), "beta_s", [0.0, 1.0], 3, seed=99)
        assert [s.seed for s in first] == [s.seed for s in again]
