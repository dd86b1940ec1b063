"""Feature families, the averaged approximant, and the least-squares fitter."""

import math

import numpy as np
import pytest

from rf_lab.features import (
    IllConditionedSystemError,
    LinearCombination,
    approximant_from_g,
    concentration_experiment,
    coupling_family,
    feature_matrix,
    least_squares_fit,
    relu,
    ridge_family,
    sample_features,
    sup_error_estimate,
)
from rf_lab.legendre import MultiIndex, build_monomial_table
from rf_lab.numerics import (
    Measure,
    RandomSource,
    uniform_ball,
    uniform_cube,
    uniform_sphere,
)
from rf_lab.poly_repr import (
    LegendreExpansion,
    SparsePolynomial,
    construct_g,
    exp_activation,
    integral_feature_expectation,
)


def identity(z):
    return np.asarray(z, dtype=float)


class TestSampling:
    def test_cube_support(self):
        d = 9
        sample = sample_features(ridge_family(relu, uniform_cube()), d, 100, RandomSource(1))
        assert np.all(np.abs(sample.weights) <= 1.0 / 3.0)

    def test_sphere_support(self):
        sample = sample_features(ridge_family(relu, uniform_sphere(5.0)), 5, 50, RandomSource(2))
        norms = np.linalg.norm(sample.weights, axis=1)
        assert np.max(np.abs(norms - 5.0)) < 1e-12

    def test_fixed_seed_reproducible(self):
        fam = ridge_family(relu, uniform_cube())
        a = sample_features(fam, 4, 10, RandomSource(3, 1))
        b = sample_features(fam, 4, 10, RandomSource(3, 1))
        assert np.array_equal(a.weights, b.weights)

    def test_nested_prefix_property(self):
        fam = ridge_family(relu, uniform_cube())
        small = sample_features(fam, 4, 10, RandomSource(3, 1))
        big = sample_features(fam, 4, 30, RandomSource(3, 1))
        assert np.array_equal(big.weights[:10], small.weights)


class TestFeatureMatrix:
    def test_identity_ridge_is_linear_form(self):
        sample = sample_features(ridge_family(identity, uniform_cube()), 3, 5, RandomSource(4))
        X = uniform_ball(3, 7, RandomSource(5).generator())
        assert np.allclose(feature_matrix(sample, X), X @ sample.weights.T)

    def test_relu_at_origin_is_zero(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 3, 1, RandomSource(6))
        assert feature_matrix(sample, np.zeros((1, 3))) == pytest.approx(0.0)

    def test_coupling_gates(self):
        d, r = 3, 4
        sample = sample_features(coupling_family(uniform_cube()), d, r, RandomSource(7))
        assert sample.n_features == r * d
        X = uniform_ball(d, 20, RandomSource(8).generator())
        F = feature_matrix(sample, X)
        gates = X @ sample.weights.T >= 0
        for i in range(r):
            block = F[:, i * d : (i + 1) * d]
            # gate off -> whole block zero; gate on -> block equals x
            assert np.allclose(block[~gates[:, i]], 0.0)
            assert np.allclose(block[gates[:, i]], X[gates[:, i]])

    def test_dimension_mismatch(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 3, 2, RandomSource(9))
        with pytest.raises(ValueError):
            feature_matrix(sample, np.zeros((1, 4)))

    def test_affine_ridge_applies_bias(self):
        from rf_lab.features import affine_ridge_family

        fam = affine_ridge_family(identity, uniform_cube(), bias_interval=(0.0, 1.0))
        sample = sample_features(fam, 3, 6, RandomSource(40))
        assert sample.biases is not None
        assert np.all((sample.biases >= 0.0) & (sample.biases <= 1.0))
        X = uniform_ball(3, 5, RandomSource(41).generator())
        assert np.allclose(feature_matrix(sample, X), X @ sample.weights.T + sample.biases)

    def test_gaussian_weight_distribution(self):
        from rf_lab.numerics import gaussian_scaled

        fam = ridge_family(relu, gaussian_scaled(0.5))
        sample = sample_features(fam, 4, 4000, RandomSource(42))
        assert np.std(sample.weights) == pytest.approx(0.5, rel=0.05)


@pytest.fixture(scope="module")
def g_and_act():
    act = exp_activation()
    P = SparsePolynomial(2, {MultiIndex((1, 1)): 1.0})
    table = build_monomial_table(4)
    return P, construct_g(P, act, table), act


class TestApproximant:
    def test_constant_g_gives_uniform_weights(self):
        g = LegendreExpansion(2, {MultiIndex((0, 0)): 4.5})
        sample = sample_features(ridge_family(np.exp, uniform_cube()), 2, 8, RandomSource(10))
        combo = approximant_from_g(g, exp_activation(), sample)
        assert np.allclose(combo.weights, 4.5 / 8)

    def test_single_feature_weight(self, g_and_act):
        from rf_lab.poly_repr import eval_g

        _, g, act = g_and_act
        sample = sample_features(ridge_family(np.exp, uniform_cube()), 2, 1, RandomSource(11))
        combo = approximant_from_g(g, act, sample)
        assert combo.weights[0] == pytest.approx(float(eval_g(g, sample.weights[0])))

    def test_requires_cube_ridge_features(self, g_and_act):
        _, g, act = g_and_act
        sample = sample_features(ridge_family(np.exp, uniform_sphere(1.0)), 2, 4, RandomSource(12))
        with pytest.raises(ValueError):
            approximant_from_g(g, act, sample)

    def test_weight_bound_exact(self, g_and_act):
        from rf_lab.poly_repr import eval_g, max_abs_g

        _, g, act = g_and_act
        rng = RandomSource(13)
        c = max_abs_g(g, 10_000, rng.derive(0))
        for trial in range(5):
            sample = sample_features(ridge_family(np.exp, uniform_cube()), 2, 64, rng.derive(trial))
            combo = approximant_from_g(g, act, sample)
            c = max(c, float(np.max(np.abs(eval_g(g, sample.weights)))))
            assert np.all(np.abs(combo.weights) <= c / 64 + 0.0)

    def test_resampling_mean_matches_integral(self, g_and_act):
        # oracle: quadrature value of the feature expectation at fixed probes
        _, g, act = g_and_act
        rng = RandomSource(14)
        probes = uniform_ball(2, 5, rng.generator(999))
        f_vals = integral_feature_expectation(g, act.evaluate, probes, 8)
        preds = np.zeros((200, 5))
        for t in range(200):
            sample = sample_features(ridge_family(act.evaluate, uniform_cube()), 2, 64, rng.derive(t))
            preds[t] = approximant_from_g(g, act, sample).predict(sample, probes)
        mean = preds.mean(axis=0)
        se = preds.std(axis=0, ddof=1) / math.sqrt(200)
        assert np.all(np.abs(mean - f_vals) < 4 * se + 1e-12)


class TestSupError:
    def test_zero_against_self(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 2, 3, RandomSource(15))
        combo = LinearCombination(np.array([0.5, -1.0, 2.0]))
        probes = uniform_ball(2, 50, RandomSource(16).generator())
        target = lambda X: combo.predict(sample, X)  # noqa: E731
        assert sup_error_estimate(combo, sample, target, probes) == 0.0

    def test_constant_shift(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 2, 3, RandomSource(17))
        combo = LinearCombination(np.array([0.5, -1.0, 2.0]))
        probes = uniform_ball(2, 50, RandomSource(18).generator())
        target = lambda X: combo.predict(sample, X) + 0.25  # noqa: E731
        assert sup_error_estimate(combo, sample, target, probes) == pytest.approx(0.25)

    def test_empty_probe_set_rejected(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 2, 1, RandomSource(19))
        combo = LinearCombination(np.ones(1))
        with pytest.raises(ValueError):
            sup_error_estimate(combo, sample, lambda X: np.zeros(len(X)), np.zeros((0, 2)))

    def test_probes_outside_ball_rejected(self):
        sample = sample_features(ridge_family(relu, uniform_cube()), 2, 1, RandomSource(20))
        combo = LinearCombination(np.ones(1))
        with pytest.raises(ValueError):
            sup_error_estimate(combo, sample, lambda X: np.zeros(len(X)), np.array([[2.0, 0.0]]))


class TestLeastSquares:
    def test_realizable_target_recovered(self):
        sample = sample_features(ridge_family(relu, uniform_sphere(1.0)), 10, 20, RandomSource(21))
        target = lambda X: 2.0 * feature_matrix(sample, X)[:, 0]  # noqa: E731
        combo, err, max_u = least_squares_fit(sample, target, 400, RandomSource(22))
        assert err < 1e-6
        expected = np.zeros(20)
        expected[0] = 2.0
        assert np.allclose(combo.weights, expected, atol=1e-4)
        assert max_u == pytest.approx(2.0, abs=1e-4)

    def test_orthogonal_target_error_is_target_norm(self):
        # constant target vs odd (linear) features: best fit is u = 0
        sample = sample_features(ridge_family(identity, uniform_sphere(1.0)), 6, 10, RandomSource(23))
        target = lambda X: np.ones(len(X))  # noqa: E731
        _, err, _ = least_squares_fit(sample, target, 2000, RandomSource(24))
        assert err == pytest.approx(1.0, abs=0.1)

    def test_relu_features_beat_zero_predictor_on_neuron(self):
        d = 10
        sample = sample_features(ridge_family(relu, uniform_sphere(1.0)), d, 20, RandomSource(25))
        w_star = np.zeros(d)
        w_star[0] = 1.0
        target = lambda X: np.maximum(X @ w_star, 0.0)  # noqa: E731
        _, err, _ = least_squares_fit(sample, target, 2000, RandomSource(26))
        assert err < 0.5  # zero predictor has error ||target||^2 = 1/2

    def test_fit_is_a_local_minimum_of_training_objective(self):
        sample = sample_features(ridge_family(relu, uniform_sphere(1.0)), 5, 12, RandomSource(27))
        target = lambda X: np.sin(X[:, 0])  # noqa: E731
        n_train = 300
        lam = 1e-6
        combo, _, _ = least_squares_fit(sample, target, n_train, RandomSource(28), ridge_lambda=lam)
        X = RandomSource(28).generator(0).standard_normal((n_train, 5))
        F = feature_matrix(sample, X)
        y = target(X)

        def objective(u):
            resid = F @ u - y
            return float(resid @ resid + lam * (u @ u))

        base = objective(combo.weights)
        gen = RandomSource(29).generator()
        for _ in range(20):
            direction = gen.standard_normal(12)
            direction /= np.linalg.norm(direction)
            for s in (1e-3, -1e-3):
                assert objective(combo.weights + s * direction) >= base

    def test_training_error_monotone_in_nested_r(self):
        fam = ridge_family(relu, uniform_sphere(1.0))
        target = lambda X: np.tanh(X @ np.arange(1.0, 6.0))  # noqa: E731
        X = RandomSource(31).generator(0).standard_normal((500, 5))
        y = target(X)
        prev = np.inf
        for r in (5, 10, 20, 40):
            sample = sample_features(fam, 5, r, RandomSource(30, 2))
            combo, _, _ = least_squares_fit(sample, target, 500, RandomSource(31))
            train_err = float(np.mean((combo.predict(sample, X) - y) ** 2))
            assert train_err <= prev + 1e-12
            prev = train_err

    def test_singular_system_without_ridge_raises(self):
        # duplicate features make the Gram exactly singular
        fam = ridge_family(identity, uniform_cube())
        sample = sample_features(fam, 2, 4, RandomSource(32))
        dup = sample.weights.copy()
        dup[1] = dup[0]
        sample = type(sample)(fam, 2, 4, dup, None, 0, 0)
        target = lambda X: X[:, 0]  # noqa: E731
        with pytest.raises(IllConditionedSystemError):
            least_squares_fit(sample, target, 100, RandomSource(33), ridge_lambda=0.0)


@pytest.fixture(scope="module")
def result():
    P = SparsePolynomial(2, {MultiIndex((1, 1)): 1.0})
    return concentration_experiment(
        P, exp_activation(), [64, 256, 1024], trials=5, probes=500, rng=RandomSource(77)
    )


class TestConcentration:

    def test_deterministic(self, result):
        P = SparsePolynomial(2, {MultiIndex((1, 1)): 1.0})
        again = concentration_experiment(
            P, exp_activation(), [64, 256, 1024], trials=5, probes=500, rng=RandomSource(77)
        )
        assert again.rows == result.rows

    def test_envelope_holds_per_trial(self, result):
        for row in result.rows:
            assert row[2] <= result.envelope(row[0], 0.01)

    def test_error_decreases_with_r(self, result):
        means = result.mean_errors()
        assert np.all(np.diff(means) < 0)

    def test_parallel_matches_serial(self, result):
        P = SparsePolynomial(2, {MultiIndex((1, 1)): 1.0})
        par = concentration_experiment(
            P, exp_activation(), [64, 256, 1024], trials=5, probes=500,
            rng=RandomSource(77), jobs=2,
        )
        assert par.rows == result.rows
