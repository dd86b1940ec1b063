"""Two-layer network, hinge loss, and the fresh-sample SGD procedure.

The network is N(x) = sum_i u_i sigma(<w_i, x>) with no bias inside the
activation; inner rows initialize uniformly on [-1/sqrt(d), 1/sqrt(d)]^d
and the outer layer at zero.  Each SGD step draws a fresh example and takes
a hinge-loss subgradient step on both layers simultaneously:

    dU_i = -y * 1[1 - y N(x) >= 0] * sigma(<w_i, x>)
    dW_i = -y * 1[1 - y N(x) >= 0] * u_i * sigma'(<w_i, x>) * x

(the indicator takes the nonzero branch at the kink).  The loop runs on a
compiled kernel when the extension module is importable and the activation
is one it knows (exp, identity); otherwise a NumPy fallback with identical
semantics is used.  ``kernel_backend()`` reports the choice.

Per-step diagnostics (loss, running average, ||W_t - W_0||_F, ||U_t||,
||W_t||_F; Frobenius norms throughout) are recorded for every step so drift
bounds can be checked after the fact with ``drift_check``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .numerics import RandomSource
from .poly_repr import AnalyticActivation

from . import _sgd_numpy

try:  # compiled kernel is optional
    from . import _sgd_cy
except ImportError:  # pragma: no cover - depends on build environment
    _sgd_cy = None

_COMPILED_ACT_CODES = {"exp": 0, "identity": 1}


def kernel_backend(act_name: str | None = None) -> str:
    """Name of the kernel that would run ('compiled' or 'numpy')."""
    if _sgd_cy is not None and (act_name is None or act_name in _COMPILED_ACT_CODES):
        return "compiled"
    return "numpy"


@dataclass
class TwoLayerNet:
    """Mutable while its run owns it; snapshot with ``copy`` for checkpoints."""

    W: np.ndarray  # (r, d)
    U: np.ndarray  # (r,)
    activation: AnalyticActivation

    @property
    def r(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "TwoLayerNet":
        return TwoLayerNet(self.W.copy(), self.U.copy(), self.activation)


def xavier_init(d: int, r: int, rng: RandomSource, act: AnalyticActivation) -> TwoLayerNet:
    """Rows of W uniform on the cube [-1/sqrt(d), 1/sqrt(d)]^d; U = 0."""
    if d < 1 or r < 1:
        raise ValueError("need d >= 1 and r >= 1")
    gen = rng.generator()
    half = 1.0 / math.sqrt(d)
    W = gen.uniform(-half, half, size=(r, d))
    return TwoLayerNet(W, np.zeros(r), act)


def forward(net: TwoLayerNet, x) -> float | np.ndarray:
    """N(x) = sum_i u_i sigma(<w_i, x>); x is one point (d,) or a batch (m, d)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.d:
        raise ValueError(f"input dimension {x.shape[-1]} != network dimension {net.d}")
    if x.ndim == 1:
        return float(net.U @ net.activation.evaluate(net.W @ x))
    return np.asarray(net.activation.evaluate(x @ net.W.T)) @ net.U


def hinge_loss(y_hat: float, y: float) -> float:
    """l(y_hat, y) = max(0, 1 - y_hat * y) for labels y in {-1, +1}."""
    if y not in (-1.0, 1.0, -1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    return max(0.0, 1.0 - y_hat * y)


def gradients(net: TwoLayerNet, x, y):
    """Hinge-loss subgradients (dW, dU) at one example."""
    x = np.asarray(x, dtype=float)
    if y not in (-1.0, 1.0, -1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    z = net.W @ x
    s = np.asarray(net.activation.evaluate(z))
    n_val = float(net.U @ s)
    if 1.0 - y * n_val < 0.0:
        return np.zeros_like(net.W), np.zeros_like(net.U)
    ds = np.asarray(net.activation.derivative(z))
    dU = -y * s
    dW = (-y * net.U * ds)[:, None] * x[None, :]
    return dW, dU


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters; ``guarantee_params`` fills them from the guarantee."""

    epsilon: float
    delta: float
    degree: int
    coeff_bound: float
    r: int
    eta: object  # float for practical runs, exact Fraction from guarantee_params
    steps: int
    beta: object | None = None
    seed: int = 0
    infeasible_at_desk_scale: bool = False


@dataclass
class TrainTrace:
    """Per-step diagnostics; arrays have length steps + 1 (entry 0 = init)."""

    loss: np.ndarray
    run_avg_loss: np.ndarray
    w_drift: np.ndarray
    u_norm: np.ndarray
    w_norm: np.ndarray


@dataclass
class SGDResult:
    net: TwoLayerNet  # best validation checkpoint
    best_step: int
    best_val_loss: float
    final_net: TwoLayerNet
    val_history: list  # (step, validation hinge loss)
    trace: TrainTrace
    backend: str


def _validation_loss(net: TwoLayerNet, X_val, y_val) -> float:
    preds = forward(net, X_val)
    return float(np.mean(np.maximum(0.0, 1.0 - y_val * preds)))


def sgd_train(
    d: int,
    sampler: Callable[[int, np.random.Generator], tuple],
    config: TrainConfig,
    rng: RandomSource,
    act: AnalyticActivation,
    n_val: int = 2000,
    n_checkpoints: int = 100,
) -> SGDResult:
    """Run T fresh-sample SGD steps and return the best validation checkpoint.

    ``sampler(n, gen)`` must return (X, y) with ||x|| <= 1 and y in {-1, +1};
    it is called once for the training stream and once for the held-out
    validation set, on independent sub-generators of ``rng``, so identical
    (rng, config) reproduce identical traces.
    """
    T = int(config.steps)
    eta = float(config.eta)
    net = xavier_init(d, config.r, rng.derive(0), act)
    W0 = net.W.copy()
    X, y = sampler(T + 1, rng.generator(1))
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    if X.shape != (T + 1, d):
        raise ValueError(f"sampler returned X of shape {X.shape}, expected {(T + 1, d)}")
    if np.any(np.linalg.norm(X, axis=1) > 1.0 + 1e-9):
        raise ValueError("sampler produced points outside the unit ball")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("sampler produced labels outside {-1, +1}")
    X_val, y_val = sampler(n_val, rng.generator(2))
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)

    loss = np.zeros(T + 1)
    drift = np.zeros(T + 1)
    unorm = np.zeros(T + 1)
    wnorm = np.zeros(T + 1)
    wnorm[0] = np.linalg.norm(net.W)

    backend = kernel_backend(act.name)
    if backend == "compiled":
        kernel = lambda start, count: _sgd_cy.run_steps(  # noqa: E731
            net.W, net.U, W0, X, y, eta, _COMPILED_ACT_CODES[act.name],
            loss, drift, unorm, wnorm, start, count,
        )
    else:
        kernel = lambda start, count: _sgd_numpy.run_steps(  # noqa: E731
            net.W, net.U, W0, X, y, eta, act.evaluate, act.derivative,
            loss, drift, unorm, wnorm, start, count,
        )

    best_loss = _validation_loss(net, X_val, y_val)
    best_step = 0
    best_net = net.copy()
    val_history = [(0, best_loss)]
    chunk = max(1, T // n_checkpoints)
    done = 0
    while done < T:
        count = min(chunk, T - done)
        kernel(done, count)
        done += count
        val = _validation_loss(net, X_val, y_val)
        finite = (
            np.all(np.isfinite(loss[done - count : done]))
            and np.isfinite(wnorm[done])
            and np.isfinite(unorm[done])
            and math.isfinite(val)
        )
        if not finite:
            raise RuntimeError(
                f"non-finite loss or weights at step {done}; "
                f"eta={eta} is likely too large for this activation"
            )
        val_history.append((done, val))
        if val < best_loss:
            best_loss = val
            best_step = done
            best_net = net.copy()
    # final entry: loss of the last drawn example at the final parameters
    loss[T] = hinge_loss(forward(net, X[T]), float(y[T]))
    run_avg = np.cumsum(loss) / np.arange(1, T + 2)
    trace = TrainTrace(loss, run_avg, drift, unorm, wnorm)
    return SGDResult(best_net, best_step, best_loss, net, val_history, trace, backend)


def guarantee_params(
    epsilon: float, delta: float, d: int, k: int, alpha: float, act: AnalyticActivation
) -> TrainConfig:
    """Exact guarantee-scale hyperparameters (arbitrary-magnitude arithmetic).

    beta = alpha^k (A/a)^k (12 d)^{2 k^2}, r >= 64 beta^6 L^2 / eps^4 * ln(1/delta),
    eta = eps / (8 r), T = ceil(4 beta^2 / eps^2).  The values overflow doubles
    for all but trivial settings, so everything is carried as Fractions/ints;
    runs with r > 1e8 are flagged infeasible at desk scale.
    """
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if k < 1:
        raise ValueError("degree k must be >= 1")
    a, A = act.taylor_bounds(k)
    eps = Fraction(epsilon)
    beta = (
        Fraction(max(1.0, alpha)) ** k
        * (Fraction(A) / Fraction(a)) ** k
        * Fraction(12 * d) ** (2 * k * k)
    )
    L2 = Fraction(act.lipschitz_L) ** 2
    log_term = Fraction(math.log(1.0 / delta))
    r = math.ceil(64 * beta**6 * L2 / eps**4 * log_term)
    eta = eps / (8 * r)
    steps = math.ceil(4 * beta**2 / eps**2)
    return TrainConfig(
        epsilon=epsilon,
        delta=delta,
        degree=k,
        coeff_bound=alpha,
        r=r,
        eta=eta,
        steps=steps,
        beta=beta,
        infeasible_at_desk_scale=r > 10**8,
    )


@dataclass(frozen=True)
class DriftReport:
    """Outcome of checking the norm-cap and drift inequalities on a trace."""

    b_value: float
    cap_epsilon: float
    cap_steps: int
    norms_ok: bool
    drift_ok: bool
    min_drift_margin: float
    max_norm: float

    @property
    def passed(self) -> bool:
        return self.norms_ok and self.drift_ok


def finite_dataset_sampler(X, y):
    """Sampler over a fixed dataset: examples drawn uniformly with replacement.

    Training against this stream optimizes the empirical average loss on
    (X, y) instead of a population; the fresh-sample stream stays the
    default.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) != len(y) or len(X) == 0:
        raise ValueError("dataset must be nonempty with matching lengths")

    def sampler(n: int, gen: np.random.Generator):
        idx = gen.integers(0, len(X), size=n)
        return X[idx], y[idx]

    return sampler


def finite_difference_check(net: TwoLayerNet, x, y, h: float = 1e-5) -> float:
    """Error of the analytic gradients against central finite differences,
    relative to the gradient's largest component.

    Meaningful only away from the hinge kink (|1 - y N(x)| not tiny), where
    the loss is differentiable.  (Per-component relative errors are
    meaningless for near-zero components, where the h^-1-amplified rounding
    of the difference quotient dominates.)
    """
    x = np.asarray(x, dtype=float)
    dW, dU = gradients(net, x, y)
    num = np.zeros(net.r + net.r * net.d)
    ana = np.concatenate([dU, dW.ravel()])
    flat_idx = 0

    def loss_at(W, U):
        z = W @ x
        return max(0.0, 1.0 - y * float(U @ net.activation.evaluate(z)))

    for i in range(net.r):
        U_p, U_m = net.U.copy(), net.U.copy()
        U_p[i] += h
        U_m[i] -= h
        num[flat_idx] = (loss_at(net.W, U_p) - loss_at(net.W, U_m)) / (2 * h)
        flat_idx += 1
    for i in range(net.r):
        for j in range(net.d):
            W_p, W_m = net.W.copy(), net.W.copy()
            W_p[i, j] += h
            W_m[i, j] -= h
            num[flat_idx] = (loss_at(W_p, net.U) - loss_at(W_m, net.U)) / (2 * h)
            flat_idx += 1
    scale = max(float(np.max(np.abs(num))), float(np.max(np.abs(ana))), 1e-8)
    return float(np.max(np.abs(ana - num)) / scale)


def margin_filtered_sampler(P, margin: float):
    """Sampler factory for polynomial-sign data with a margin filter.

    Draws x uniformly from the unit ball, labels y = sign(P(x)), and rejects
    points with |P(x)| < margin so the comparator polynomial attains near-zero
    hinge loss.  ``P`` should already be scaled so sup_ball |P| = 1.
    """

    def sampler(n: int, gen: np.random.Generator):
        xs = []
        got = 0
        while got < n:
            batch = max(2 * n, 64)
            g = gen.standard_normal((batch, P.dimension))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            g *= gen.random((batch, 1)) ** (1.0 / P.dimension)
            keep = np.abs(P.evaluate(g)) >= margin
            xs.append(g[keep])
            got += int(keep.sum())
        X = np.vstack(xs)[:n]
        y = np.sign(P.evaluate(X))
        return X, y

    return sampler


def drift_check(trace: TrainTrace, config: TrainConfig, act: AnalyticActivation) -> DriftReport:
    """Verify ||W_t - W_0||_F <= t * eta * L * (B+1) at every recorded step,
    and ||W_t||, ||U_t|| <= B + 1 inside the norm-cap window t <= B / (2 eps).

    B = max(2, ||W_0||, ||U_0||) and eps is read off the step-size relation
    eta = eps / (L B^2) that the window is stated for.
    """
    L = act.lipschitz_L
    eta = float(config.eta)
    B = max(2.0, float(trace.w_norm[0]), float(trace.u_norm[0]))
    cap_eps = eta * L * B * B
    cap_steps = int(B / (2.0 * cap_eps)) if cap_eps > 0 else len(trace.w_drift) - 1
    cap_steps = min(cap_steps, len(trace.w_drift) - 1)
    t = np.arange(len(trace.w_drift), dtype=float)
    bound = t * eta * L * (B + 1.0)
    margins = bound - trace.w_drift
    drift_ok = bool(np.all(margins >= -1e-9))
    window = slice(0, cap_steps + 1)
    max_norm = float(max(np.max(trace.w_norm[window]), np.max(trace.u_norm[window])))
    norms_ok = max_norm <= B + 1.0 + 1e-9
    return DriftReport(
        b_value=B,
        cap_epsilon=cap_eps,
        cap_steps=cap_steps,
        norms_ok=norms_ok,
        drift_ok=drift_ok,
        min_drift_margin=float(np.min(margins)),
        max_norm=max_norm,
    )
