"""Hard-instance toolkit: the periodic triangle function, subspace residuals,
correlation decay, and single-neuron inapproximability sweeps.

The central object is the piecewise-linear function

    psi(x) = [x + a]_+ + sum_{n=1}^{a} 2 (-1)^n [x + a - 2n]_+ - 1,

with a = 6 d^2 + 1 (odd).  On [-a, a] it is an odd triangle wave of period
4 and unit amplitude: kinks with alternating slopes +-1 sit at the odd
integers, zeros at the even integers.  Outside the window it follows the
definition as written: constant -1 to the left, decreasing affinely to the
right.  Evaluation locates the surrounding kink pair in closed form rather
than summing the ~6d^2 ReLU terms; the term-by-term sum is kept as a test
oracle (``ReluDecomposition.evaluate``).

Composed with a random direction, x -> psi(<w, x>) with ||w|| = d
oscillates too fast for any fixed low-norm feature family to track, which
is what the correlation-decay and inapproximability sweeps measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureFamily, feature_matrix, least_squares_fit, sample_features
from .numerics import RandomSource, gauss_legendre_rule, gaussian_expectation_1d


@dataclass(frozen=True)
class PsiFunction:
    """Hard-instance function parameterized by the input dimension d."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def a(self) -> int:
        return 6 * self.d * self.d + 1

    @property
    def kinks(self) -> np.ndarray:
        """ReLU kink positions -a + 2n, n = 0..a (the odd integers in [-a, a])."""
        return np.arange(-self.a, self.a + 1, 2, dtype=float)


def psi_eval(psi: PsiFunction, x):
    """Exact piecewise-linear evaluation of psi (scalar or array input)."""
    x = np.asarray(x, dtype=float)
    a = float(psi.a)
    h = x + a
    m = np.floor(h / 2.0)
    t = h - 2.0 * m  # offset in [0, 2) from the kink below
    sign = 1.0 - 2.0 * (np.asarray(m, dtype=np.int64) % 2)  # +1 for even m
    core = sign * (t - 1.0)
    out = np.where(x < -a, -1.0, np.where(x >= a, 1.0 - (x - a), core))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ReluNeuron:
    """Target neuron x -> [<w*, x> + b*]_+."""

    w_star: np.ndarray
    b_star: float

    def __post_init__(self):
        self.w_star.setflags(write=False)

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.maximum(X @ self.w_star + self.b_star, 0.0)


@dataclass(frozen=True)
class ReluDecomposition:
    """psi as an explicit sum of ReLU terms plus a constant."""

    coefficients: np.ndarray  # a_j
    offsets: np.ndarray  # c_j
    constant: float

    def __post_init__(self):
        self.coefficients.setflags(write=False)
        self.offsets.setflags(write=False)

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    def evaluate(self, x):
        """Naive term-by-term sum; the oracle for the closed-form evaluator.

        Accumulates in extended precision where the platform provides it:
        the ~6 d^2 alternating terms have magnitude ~2a, so a float64 sum
        would carry several 1e-12 of rounding at d >= 5.
        """
        x = np.asarray(x, dtype=np.longdouble)
        rect = np.maximum(x[..., None] + self.offsets.astype(np.longdouble), 0.0)
        out = (rect @ self.coefficients.astype(np.longdouble) + np.longdouble(self.constant)).astype(float)
        return out if out.ndim else float(out)


def psi_relu_decomposition(psi: PsiFunction) -> ReluDecomposition:
    """Read the a+1 ReLU terms (plus constant -1) off the definition."""
    a = psi.a
    coeffs = np.empty(a + 1)
    offsets = np.empty(a + 1)
    coeffs[0] = 1.0
    offsets[0] = float(a)
    for n in range(1, a + 1):
        coeffs[n] = 2.0 * (-1.0) ** n
        offsets[n] = float(a - 2 * n)
    return ReluDecomposition(coeffs, offsets, -1.0)


def _interval_integral_psi_sq(psi: PsiFunction, lo: float, hi: float) -> float:
    """Exact integral of psi^2 over [lo, hi] inside [-a, a].

    psi^2 is piecewise quadratic between kinks, so panelwise Simpson is
    exact.
    """
    cuts = [lo] + [float(c) for c in psi.kinks if lo < c < hi] + [hi]
    total = 0.0
    for left, right in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (left + right)
        f = psi_eval(psi, np.array([left, mid, right])) ** 2
        total += (right - left) / 6.0 * (f[0] + 4.0 * f[1] + f[2])
    return total


@dataclass(frozen=True)
class PsiReport:
    """Grid residuals and exact integrals certifying psi's claimed shape."""

    d: int
    oddness_residual: float
    periodicity_residual: float
    interval_integrals: tuple  # (n, integral of psi^2 over [n, n+2]) samples
    max_interval_deviation: float  # from the exact per-interval value 2/3
    max_abs_value: float
    decomposition_residual: float
    gaussian_norm_at_d: float

    @property
    def passed(self) -> bool:
        return (
            self.oddness_residual < 1e-12
            and self.periodicity_residual < 1e-12
            and self.max_interval_deviation < 1e-10
            and self.max_abs_value <= 1.0 + 1e-12
            and self.decomposition_residual < 1e-12
            and self.gaussian_norm_at_d >= 1.0 / 6.0
        )


def psi_properties_check(psi: PsiFunction, grid_points: int = 10_000, norm_order: int = 16) -> PsiReport:
    """Certify oddness, 4-periodicity, per-interval energy 2/3, amplitude,
    ReLU-decomposition agreement, and the Gaussian norm at ||w|| = d."""
    a = psi.a
    x = np.linspace(-a, a, grid_points)
    vals = psi_eval(psi, x)
    odd = float(np.max(np.abs(vals + psi_eval(psi, -x))))
    xp = np.linspace(-a, a - 4, grid_points)
    per = float(np.max(np.abs(psi_eval(psi, xp + 4.0) - psi_eval(psi, xp))))
    # integer-aligned length-2 intervals; sample up to 40 across the window
    starts = list(range(-a, a - 1, max(2, (2 * a - 2) // 40)))
    integrals = tuple((n, _interval_integral_psi_sq(psi, float(n), float(n + 2))) for n in starts)
    dev = max(abs(v - 2.0 / 3.0) for _, v in integrals)
    deco = psi_relu_decomposition(psi)
    deco_res = float(np.max(np.abs(deco.evaluate(x) - vals)))
    norm = psi_gaussian_norm(psi, float(psi.d), norm_order)
    return PsiReport(
        d=psi.d,
        oddness_residual=odd,
        periodicity_residual=per,
        interval_integrals=integrals,
        max_interval_deviation=float(dev),
        max_abs_value=float(np.max(np.abs(vals))),
        decomposition_residual=deco_res,
        gaussian_norm_at_d=norm,
    )


def psi_gaussian_norm(psi: PsiFunction, w_norm: float, order: int = 16) -> float:
    """||psi(<w, x>)||^2 = E[psi(z)^2], z ~ N(0, w_norm^2), by kink-split quadrature."""
    if w_norm < 0:
        raise ValueError("w_norm must be >= 0")
    return gaussian_expectation_1d(
        lambda z: psi_eval(psi, z) ** 2, w_norm, order, kinks=psi.kinks
    )


# ---------------------------------------------------------------------------
# linear warm-up: subspace residual of a random feature span
# ---------------------------------------------------------------------------


def linear_residual(d: int, r: int, rng: RandomSource, trials: int, jobs: int = 1) -> np.ndarray:
    """Exact squared distance of a random unit target from span{w_1..w_r}.

    Per trial, draws r spherically-symmetric feature directions and a unit
    w*, orthonormalizes the span, and returns ||w* - proj w*||^2.  This is
    the exact least-squares error of fitting the linear predictor
    <w*, x> with the features <w_i, x> under the Gaussian norm.
    """
    if not (0 <= r <= d):
        raise ValueError("need 0 <= r <= d")
    cells = [(d, r, rng.seed, rng.stream_id, t) for t in range(trials)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            vals = list(pool.map(_linear_residual_cell, cells))
    else:
        vals = [_linear_residual_cell(c) for c in cells]
    return np.asarray(vals)


def _linear_residual_cell(cell) -> float:
    d, r, seed, stream, t = cell
    gen = RandomSource(seed, stream).generator(t)
    w_star = gen.standard_normal(d)
    w_star /= np.linalg.norm(w_star)
    if r == 0:
        return 1.0
    W = gen.standard_normal((d, r))
    Q, _ = np.linalg.qr(W)
    resid = w_star - Q @ (Q.T @ w_star)
    return float(resid @ resid)


# ---------------------------------------------------------------------------
# correlation decay of psi with a fixed function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationDecayRow:
    d: int
    mean_sq: float  # mean over w draws of <f, psi_w>^2, normalized by ||f||^2
    std_err: float
    n_w: int
    mc_samples: int


def correlation_decay(
    f_factory,
    d_values,
    trials: int,
    mc_samples: int,
    rng: RandomSource,
    chunk: int = 100_000,
    jobs: int = 1,
):
    """Monte-Carlo estimate of E_w <f, psi_w>^2 / ||f||^2 per dimension.

    ``f_factory(d, gen)`` builds the fixed test function for each d (called
    once per d; must accept an (n, d) batch).  For each of ``trials`` draws
    of w uniform on the radius-d sphere, <f, psi_w> is estimated over
    ``mc_samples`` Gaussian points shared across draws, then squared and
    averaged.  The squared sample mean carries an upward noise-floor bias of
    Var(f psi_w)/mc_samples, so decay trends flatten there.
    """
    cells = [(int(d), f_factory, trials, mc_samples, rng.seed, rng.stream_id, chunk) for d in d_values]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_correlation_cell, cells))
    else:
        rows = [_correlation_cell(c) for c in cells]
    return rows


def _correlation_cell(cell) -> CorrelationDecayRow:
    d, f_factory, trials, mc_samples, seed, stream, chunk = cell
    rng = RandomSource(seed, stream)
    psi = PsiFunction(d)
    f = f_factory(d, rng.generator(d, 0))
    gen_w = rng.generator(d, 1)
    ws = gen_w.standard_normal((trials, d))
    ws *= d / np.linalg.norm(ws, axis=1, keepdims=True)
    gen_x = rng.generator(d, 2)
    inner_sums = np.zeros(trials)
    f_sq_sum = 0.0
    done = 0
    while done < mc_samples:
        m = min(chunk, mc_samples - done)
        X = gen_x.standard_normal((m, d))
        fx = np.asarray(f(X), dtype=float)
        f_sq_sum += float(fx @ fx)
        proj = X @ ws.T  # (m, trials)
        inner_sums += fx @ psi_eval(psi, proj)
        done += m
    inners = inner_sums / mc_samples
    f_norm_sq = f_sq_sum / mc_samples
    sq = inners**2 / f_norm_sq
    return CorrelationDecayRow(
        d=d,
        mean_sq=float(np.mean(sq)),
        std_err=float(np.std(sq, ddof=1) / math.sqrt(trials)),
        n_w=trials,
        mc_samples=mc_samples,
    )


@dataclass(frozen=True)
class RidgeReluNetFactory:
    """Per-dimension test function builder: an r-feature ReLU combination
    with unit-sphere directions and N(0, 1/r) output weights.

    A picklable callable, so correlation sweeps can fan out across worker
    processes.
    """

    r: int = 50

    def __call__(self, d: int, gen: np.random.Generator):
        W = gen.standard_normal((self.r, d))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        u = gen.standard_normal(self.r) / self.r

        def f(X):
            return np.maximum(X @ W.T, 0.0) @ u

        return f


# ---------------------------------------------------------------------------
# single-neuron inapproximability sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    d: int
    target: str  # control | psi | neuron | neuron_gd_baseline
    normalized_error: float
    r_max_abs_u: float


def default_neuron_target(d: int) -> ReluNeuron:
    """The scaled hard neuron: w* = d^3 e_1, b* from the dominant ReLU offset
    (a - 2, the first coefficient-2 term) scaled by d^2."""
    psi = PsiFunction(d)
    w_star = np.zeros(d)
    w_star[0] = float(d) ** 3
    return ReluNeuron(w_star, float(psi.a - 2) * d * d)


def _candidate_biases(psi: PsiFunction) -> list:
    """A small spread of decomposition offsets (scaled by d^2) to try as b*."""
    a = psi.a
    picks = sorted({1, max(1, a // 4), max(1, a // 2), max(1, (3 * a) // 4), a})
    return [float(a - 2 * n) * psi.d * psi.d for n in picks]


def train_single_neuron(
    target: ReluNeuron,
    d: int,
    rng: RandomSource,
    steps: int = 400,
    lr: float = 0.4,
    batch: int = 4096,
    n_eval: int = 50_000,
) -> float:
    """Fit one ReLU neuron to the target by plain SGD on the squared loss.

    Returns the held-out normalized error E[(model - target)^2] / E[target^2].
    The realizable problem is well conditioned once the neuron is active, so
    a few hundred steps suffice even for d^3-scale target weights.
    """
    gen = rng.generator(0)
    w = 0.01 * gen.standard_normal(d)
    b = 1.0  # start active; a dead neuron has zero gradient
    for _ in range(steps):
        X = gen.standard_normal((batch, d))
        y = target.evaluate(X)
        z = X @ w + b
        active = z >= 0.0
        err = np.where(active, z, 0.0) - y
        grad_common = 2.0 * err * active
        gw = (X * grad_common[:, None]).mean(axis=0)
        gb = grad_common.mean()
        w -= lr * gw
        b -= lr * gb
    gen_eval = rng.generator(1)
    Xh = gen_eval.standard_normal((n_eval, d))
    yh = target.evaluate(Xh)
    mh = np.maximum(Xh @ w + b, 0.0)
    return float(np.mean((mh - yh) ** 2) / np.mean(yh**2))


def neuron_inapprox_sweep(
    family: FeatureFamily,
    r: int,
    d_values,
    n_train: int,
    rng: RandomSource,
    include_baseline: bool = True,
    jobs: int = 1,
):
    """Least-squares error of oblivious features against the hard targets.

    Per dimension d: sample r features first (obliviously), then fit them to
    (a) a realizable control (one of the sampled features), (b) the psi
    target psi(<d e_1, x>), and (c) the scaled neuron target, reporting the
    max normalized error over a small set of candidate biases b*.  Errors
    are normalized by the target's squared norm on the same held-out
    sample.  Optionally adds the directly-trained single-neuron baseline on
    target (c).
    """
    cells = [
        (family, r, int(d), n_train, rng.seed, rng.stream_id, include_baseline)
        for d in d_values
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_sweep_cell, cells))
    else:
        groups = [_sweep_cell(c) for c in cells]
    return [row for group in groups for row in group]


def _normalized_fit(sample, target_fn, n_train, rng):
    """(normalized error, r * max|u|, target norm^2) on the fit's held-out set."""
    combo, pop_err, max_u = least_squares_fit(sample, target_fn, n_train, rng)
    gen = rng.generator(1)  # the same held-out stream used inside the fit
    Xh = gen.standard_normal((10 * n_train, sample.d))
    t_norm = float(np.mean(np.asarray(target_fn(Xh), dtype=float) ** 2))
    normalized = pop_err / t_norm if t_norm > 0.0 else math.inf
    return normalized, sample.r * max_u, t_norm


def _sweep_cell(cell):
    family, r, d, n_train, seed, stream, include_baseline = cell
    rng = RandomSource(seed, stream)
    sample = sample_features(family, d, r, rng.derive(d, 0))
    psi = PsiFunction(d)
    rows = []

    control_col = feature_matrix(sample, np.zeros((1, d))).shape[1] // 2
    control = lambda X: feature_matrix(sample, X)[:, control_col]  # noqa: E731
    err, rmu, _ = _normalized_fit(sample, control, n_train, rng.derive(d, 1))
    rows.append(SweepRow(d, "control", err, rmu))

    w_dir = np.zeros(d)
    w_dir[0] = float(d)
    psi_target = lambda X: psi_eval(psi, np.asarray(X) @ w_dir)  # noqa: E731
    err, rmu, _ = _normalized_fit(sample, psi_target, n_train, rng.derive(d, 2))
    rows.append(SweepRow(d, "psi", err, rmu))

    worst = (-1.0, 0.0)
    w_star = np.zeros(d)
    w_star[0] = float(d) ** 3
    for b_idx, b_star in enumerate(_candidate_biases(psi)):
        neuron = ReluNeuron(w_star, b_star)
        err, rmu, t_norm = _normalized_fit(sample, neuron.evaluate, n_train, rng.derive(d, 3, b_idx))
        if t_norm == 0.0:  # neuron dead on the whole sample; nothing to fit
            continue
        if err > worst[0]:
            worst = (err, rmu)
    rows.append(SweepRow(d, "neuron", worst[0], worst[1]))

    if include_baseline:
        baseline_err = train_single_neuron(default_neuron_target(d), d, rng.derive(d, 4))
        rows.append(SweepRow(d, "neuron_gd_baseline", baseline_err, 0.0))
    return rows


# ---------------------------------------------------------------------------
# the exp-through-ReLU integral identity
# ---------------------------------------------------------------------------


def relu_exp_identity_check(z_values, order: int = 40) -> float:
    """Max error of the ReLU integral identity against e^z on |z| <= 1.

    For each z, evaluates

        int_0^1 ( [z-b]_+ e^b + [-z-b]_+ e^{-b} + c z e^b + c e^b ) db,
        c = 1/(e - 1),

    by Gauss-Legendre split at the kink b = |z|, and compares to e^z.  Only
    one of the two ReLU terms is active for a given sign of z: the first
    integrates to e^z - z - 1 for z >= 0, the mirrored one (which must enter
    with a plus sign, or the z < 0 branch comes out as 2z + 2 - e^z) to
    e^z - z - 1 for z < 0; the linear and constant terms contribute z + 1.
    """
    c = 1.0 / (math.e - 1.0)
    rule = gauss_legendre_rule(order)
    worst = 0.0
    for z in np.atleast_1d(np.asarray(z_values, dtype=float)):
        if abs(z) > 1.0:
            raise ValueError(f"identity only holds for |z| <= 1, got {z}")

        def integrand(b):
            return (
                np.maximum(z - b, 0.0) * np.exp(b)
                + np.maximum(-z - b, 0.0) * np.exp(-b)
                + c * z * np.exp(b)
                + c * np.exp(b)
            )

        total = 0.0
        for lo, hi in ((0.0, abs(z)), (abs(z), 1.0)):
            if hi - lo <= 0:
                continue
            mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            total += half * float(rule.weights @ integrand(mid + half * rule.nodes))
        worst = max(worst, abs(total - math.exp(z)))
    return worst
