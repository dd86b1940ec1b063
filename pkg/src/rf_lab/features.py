"""Random feature families, the concentration experiment, and least squares.

A feature family fixes how the random parameters are drawn and how a
feature evaluates a point:

* ``ridge``: f_i(x) = sigma(<w_i, x>)
* ``affine_ridge``: f_i(x) = sigma(<w_i, x> + b_i)
* ``coupling``: one feature per (neuron i, coordinate j) pair,
  f_{i,j}(x) = x_j * 1[<w_i, x> >= 0], exposed as a flat list of r*d
  features.

Only the linear coefficients on top of the features are ever learned;
the feature parameters are sampled once, obliviously of the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import Measure, RandomSource, sample_measure, uniform_ball
from .poly_repr import (
    AnalyticActivation,
    LegendreExpansion,
    SparsePolynomial,
    construct_g,
    eval_g,
    integral_feature_expectation,
    max_abs_g,
)
from .legendre import build_monomial_table


def relu(z):
    return np.maximum(z, 0.0)


class IllConditionedSystemError(np.linalg.LinAlgError):
    """Unregularized normal equations are numerically singular; use ridge_lambda > 0."""


@dataclass(frozen=True)
class FeatureFamily:
    kind: str  # ridge | affine_ridge | coupling
    weight_dist: Measure
    activation: Callable[[np.ndarray], np.ndarray] | None = None
    bias_interval: tuple | None = None  # uniform (lo, hi) bias for affine_ridge


def ridge_family(activation, weight_dist: Measure) -> FeatureFamily:
    return FeatureFamily("ridge", weight_dist, activation)


def affine_ridge_family(activation, weight_dist: Measure, bias_interval=(0.0, 1.0)) -> FeatureFamily:
    return FeatureFamily("affine_ridge", weight_dist, activation, bias_interval)


def coupling_family(weight_dist: Measure) -> FeatureFamily:
    return FeatureFamily("coupling", weight_dist)


@dataclass(frozen=True)
class FeatureSample:
    """Sampled feature parameters: r neurons in dimension d plus provenance."""

    family: FeatureFamily
    d: int
    r: int
    weights: np.ndarray  # (r, d)
    biases: np.ndarray | None
    seed: int
    stream_id: int

    def __post_init__(self):
        self.weights.setflags(write=False)
        if self.biases is not None:
            self.biases.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.r * self.d if self.family.kind == "coupling" else self.r


def sample_features(family: FeatureFamily, d: int, r: int, rng: RandomSource) -> FeatureSample:
    """Draw the feature parameters; deterministic given rng."""
    if r < 1 or d < 1:
        raise ValueError("need r >= 1 and d >= 1")
    gen = rng.generator()
    weights = sample_measure(family.weight_dist, d, r, gen)
    biases = None
    if family.kind == "affine_ridge":
        lo, hi = family.bias_interval
        biases = gen.uniform(lo, hi, size=r)
    return FeatureSample(family, d, r, weights, biases, rng.seed, rng.stream_id)


def feature_matrix(sample: FeatureSample, X) -> np.ndarray:
    """Feature values, shape (len(X), n_features); entry (t, i) = f_i(x_t)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != sample.d:
        raise ValueError(f"points have dimension {X.shape[1]}, features expect {sample.d}")
    kind = sample.family.kind
    if kind == "ridge":
        return np.asarray(sample.family.activation(X @ sample.weights.T))
    if kind == "affine_ridge":
        return np.asarray(sample.family.activation(X @ sample.weights.T + sample.biases))
    if kind == "coupling":
        gates = (X @ sample.weights.T >= 0.0).astype(float)  # (m, r)
        # feature (i, j) = x_j * gate_i, flattened with neuron-major order
        out = gates[:, :, None] * X[:, None, :]  # (m, r, d)
        return out.reshape(X.shape[0], sample.r * sample.d)
    raise ValueError(f"unknown family kind: {kind!r}")


@dataclass(frozen=True)
class LinearCombination:
    """Prediction sum_i u_i f_i(x) + intercept over a feature sample."""

    weights: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        self.weights.setflags(write=False)

    def predict(self, sample: FeatureSample, X) -> np.ndarray:
        F = feature_matrix(sample, X)
        if F.shape[1] != len(self.weights):
            raise ValueError("weight length does not match feature count")
        return F @ self.weights + self.intercept

    @property
    def max_abs_weight(self) -> float:
        return float(np.max(np.abs(self.weights))) if len(self.weights) else 0.0


def approximant_from_g(
    g: LegendreExpansion, act: AnalyticActivation, sample: FeatureSample
) -> LinearCombination:
    """The averaged-feature approximant with u_i = g(w_i) / r.

    Requires cube-sampled ridge features; the expectation of the resulting
    predictor over resampling is the integral the weight function g
    represents.
    """
    if sample.family.kind != "ridge" or sample.family.weight_dist.kind != "uniform_cube":
        raise ValueError("approximant_from_g needs ridge features with cube-sampled weights")
    u = eval_g(g, sample.weights) / sample.r
    return LinearCombination(np.asarray(u, dtype=float))


def sup_error_estimate(
    combo: LinearCombination, sample: FeatureSample, target, probe_points
) -> float:
    """max_t |predict(x_t) - target(x_t)| over the probe set (a sup-norm lower bound)."""
    probe_points = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if probe_points.shape[0] == 0:
        raise ValueError("probe set must be nonempty")
    norms = np.linalg.norm(probe_points, axis=1)
    if np.any(norms > 1.0 + 1e-12):
        raise ValueError("probe points must lie in the unit ball")
    pred = combo.predict(sample, probe_points)
    tvals = np.asarray(target(probe_points), dtype=float)
    return float(np.max(np.abs(pred - tvals)))


def least_squares_fit(
    sample: FeatureSample,
    target,
    n_train: int,
    rng: RandomSource,
    ridge_lambda: float | None = None,
):
    """Fit the linear coefficients by regularized normal equations.

    Training and held-out points are standard Gaussian draws; the returned
    population error is the held-out (10x n_train) estimate of
    E[(sum_i u_i f_i(x) - target(x))^2].

    Returns (LinearCombination, population_error, max_abs_u).
    """
    p = sample.n_features
    gen_train = rng.generator(0)
    gen_test = rng.generator(1)
    X = gen_train.standard_normal((n_train, sample.d))
    F = feature_matrix(sample, X)
    y = np.asarray(target(X), dtype=float)
    gram = F.T @ F
    if ridge_lambda is None:
        ridge_lambda = 1e-10 * float(np.trace(gram)) / p
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    if ridge_lambda == 0.0:
        try:
            chol = np.linalg.cholesky(gram)
            u = np.linalg.solve(gram, F.T @ y)
            del chol
        except np.linalg.LinAlgError as exc:
            raise IllConditionedSystemError(
                "normal equations are singular with ridge_lambda = 0; pass ridge_lambda > 0"
            ) from exc
    else:
        u = np.linalg.solve(gram + ridge_lambda * np.eye(p), F.T @ y)
    combo = LinearCombination(u)
    Xh = gen_test.standard_normal((10 * n_train, sample.d))
    resid = combo.predict(sample, Xh) - np.asarray(target(Xh), dtype=float)
    pop_error = float(np.mean(resid**2))
    return combo, pop_error, combo.max_abs_weight


# ---------------------------------------------------------------------------
# concentration experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationResult:
    """Per-trial sup errors plus the explicit high-probability envelope."""

    r_values: tuple
    rows: tuple  # (r, trial, sup_error, max_abs_u, seed)
    lipschitz_L: float
    weight_sup_C: float

    def mean_errors(self) -> np.ndarray:
        means = []
        for r in self.r_values:
            errs = [row[2] for row in self.rows if row[0] == r]
            means.append(float(np.mean(errs)))
        return np.asarray(means)

    def std_errors(self) -> np.ndarray:
        stds = []
        for r in self.r_values:
            errs = [row[2] for row in self.rows if row[0] == r]
            stds.append(float(np.std(errs, ddof=1)) if len(errs) > 1 else 0.0)
        return np.asarray(stds)

    def envelope(self, r: int, delta: float) -> float:
        """(L C / sqrt(r)) * (4 + sqrt(2 ln(1/delta)))."""
        return (
            self.lipschitz_L
            * self.weight_sup_C
            / math.sqrt(r)
            * (4.0 + math.sqrt(2.0 * math.log(1.0 / delta)))
        )

    def loglog_slope(self) -> float:
        """Least-squares slope of log(mean sup error) against log r."""
        means = self.mean_errors()
        return float(np.polyfit(np.log(np.asarray(self.r_values, float)), np.log(means), 1)[0])


def concentration_experiment(
    P: SparsePolynomial,
    act: AnalyticActivation,
    r_values,
    trials: int,
    probes: int,
    rng: RandomSource,
    jobs: int = 1,
) -> ConcentrationResult:
    """Sup-error of the averaged-feature approximant against its expectation.

    For each feature count r and trial, samples cube features, forms the
    u_i = g(w_i)/r approximant, and measures max_t |f_hat(x_t) - f(x_t)|
    over a fixed probe set in the unit ball, where f is the quadrature value
    of the feature expectation (full activation).  Deterministic given rng;
    trials may fan out over a worker pool without changing results.
    """
    r_values = tuple(int(r) for r in r_values)
    table = build_monomial_table(max(P.degree, 1))
    g = construct_g(P, act, table)
    probe_pts = uniform_ball(P.dimension, probes, rng.generator(0))
    f_vals = integral_feature_expectation(g, act.evaluate, probe_pts, P.degree + 6)
    grid_c = max_abs_g(g, 10_000, rng.derive(2))
    family = ridge_family(act.evaluate, Measure("uniform_cube"))

    rows = []
    sup_c = grid_c
    cells = [(ri, r, t) for ri, r in enumerate(r_values) for t in range(trials)]

    def run_cell(cell):
        ri, r, t = cell
        sample = sample_features(family, P.dimension, r, rng.derive(1, ri, t))
        combo = approximant_from_g(g, act, sample)
        pred = combo.predict(sample, probe_pts)
        sup_err = float(np.max(np.abs(pred - f_vals)))
        return (r, t, sup_err, combo.max_abs_weight, rng.seed), float(np.max(np.abs(eval_g(g, sample.weights))))

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        packed = [
            (P.to_json(), act.name, rng.seed, rng.stream_id, probes, cell) for cell in cells
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_runner, packed))
    else:
        results = [run_cell(cell) for cell in cells]
    for row, sample_sup in results:
        rows.append(row)
        sup_c = max(sup_c, sample_sup)
    return ConcentrationResult(r_values, tuple(rows), act.lipschitz_L, sup_c)


def _cell_runner(packed):
    """Process-pool worker; rebuilds the experiment state from picklable parts."""
    P_json, act_name, seed, stream, probes, cell = packed
    from .poly_repr import activation_by_name

    P = SparsePolynomial.from_json(P_json)
    act = activation_by_name(act_name)
    rng = RandomSource(seed, stream)
    table = build_monomial_table(max(P.degree, 1))
    g = construct_g(P, act, table)
    probe_pts = uniform_ball(P.dimension, probes, rng.generator(0))
    f_vals = integral_feature_expectation(g, act.evaluate, probe_pts, P.degree + 6)
    family = ridge_family(act.evaluate, Measure("uniform_cube"))
    ri, r, t = cell
    sample = sample_features(family, P.dimension, r, rng.derive(1, ri, t))
    combo = approximant_from_g(g, act, sample)
    pred = combo.predict(sample, probe_pts)
    sup_err = float(np.max(np.abs(pred - f_vals)))
    return (r, t, sup_err, combo.max_abs_weight, rng.seed), float(np.max(np.abs(eval_g(g, sample.weights))))
