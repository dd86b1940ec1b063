"""Representing polynomials as cube-expectations of activation features.

Given an analytic activation sigma and a sparse polynomial P on R^d with
deg(P) <= k, this module constructs a weight function

    g(w) = sum_{|J| <= k} c_J * p_J(sqrt(d) * w)

on the cube [-1/sqrt(d), 1/sqrt(d)]^d such that

    c_d * int_cube sigma_k(<w, x>) g(w) dw = P(x),        c_d = (sqrt(d)/2)^d,

holds exactly for the degree-k Taylor truncation sigma_k of the activation.
Expanding <w, x>^i over monomials and projecting onto the tensor Legendre
basis turns this into a triangular linear system in the c_J, solved in
ascending degree order:

    (1/2)^d * a_{|J|} * (|J|! / J!) * d^{-|J|/2}
        * sum_{J' <= J} c_{J'} * e_{J,J'} * ||p_{J'}||^2  =  alpha_J,

where a_i are the Taylor coefficients, e_{J,J'} the monomial-to-Legendre
expansion coefficients and alpha_J the coefficients of P.  The multinomial
factor |J|!/J! comes from expanding the inner product power and is required
for the quadrature check below to vanish.

The construction is verified, never trusted: ``verify_representation``
recomputes the cube integral by tensor Gauss-Legendre quadrature and
returns the per-point residuals.  With the truncated activation the
integrand is a polynomial and the residuals are at rounding level; with the
full activation the residual measures the Taylor tail of order > k, which
is reported rather than asserted away.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .legendre import (
    MonomialExpansionTable,
    MultiIndex,
    iter_multi_indices,
    multi_expansion_coeff,
    multi_legendre_eval,
    multi_norm_sq,
    tensor_grid,
)
from .numerics import RandomSource, gauss_legendre_rule


class UnrepresentableMonomialError(ValueError):
    """P has a monomial whose degree is missing from the activation's Taylor series."""


@dataclass(frozen=True)
class SparsePolynomial:
    """P(x) = sum_J alpha_J x^J with a sparse coefficient map."""

    dimension: int
    coefficients: Mapping[MultiIndex, float]

    def __post_init__(self):
        for J in self.coefficients:
            if J.dim != self.dimension:
                raise ValueError(f"multi-index {J} does not match dimension {self.dimension}")

    @property
    def degree(self) -> int:
        degs = [J.degree for J, a in self.coefficients.items() if a != 0.0]
        return max(degs) if degs else 0

    @property
    def coeff_bound(self) -> float:
        vals = [abs(a) for a in self.coefficients.values()]
        return max(vals) if vals else 0.0

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pts = x[None, :] if squeeze else x
        out = np.zeros(pts.shape[0])
        for J, a in self.coefficients.items():
            if a == 0.0:
                continue
            term = np.full(pts.shape[0], a)
            for axis, j in enumerate(J.entries):
                if j:
                    term = term * pts[:, axis] ** j
            out += term
        return float(out[0]) if squeeze else out

    def to_json(self) -> str:
        return json.dumps({str(J): a for J, a in self.coefficients.items()})

    @classmethod
    def from_json(cls, text: str) -> "SparsePolynomial":
        raw = json.loads(text)
        if not raw:
            raise ValueError("polynomial JSON must contain at least one multi-index key")
        coeffs = {MultiIndex.from_string(key): float(val) for key, val in raw.items()}
        dims = {J.dim for J in coeffs}
        if len(dims) != 1:
            raise ValueError("all multi-index keys must have the same length")
        return cls(dims.pop(), coeffs)


@dataclass(frozen=True)
class AnalyticActivation:
    """Activation with evaluator, derivative, and Taylor coefficient access.

    ``lipschitz_L`` is a Lipschitz constant valid on [-1, 1] with
    sigma(0) <= L.  ``taylor_bounds(k)`` returns (a, A) bracketing the
    magnitudes of the nonzero Taylor coefficients a_1, ..., a_k.
    """

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    taylor_coeff: Callable[[int], float]
    lipschitz_L: float

    def taylor_bounds(self, k: int) -> tuple:
        mags = [abs(self.taylor_coeff(i)) for i in range(1, k + 1)]
        mags = [m for m in mags if m != 0.0]
        if not mags:
            return (1.0, 1.0)
        return (min(mags), max(mags))

    def truncated(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        """Degree-k Taylor truncation sigma_k(z) = sum_{i<=k} a_i z^i."""
        coeffs = [self.taylor_coeff(i) for i in range(k + 1)]

        def sigma_k(z):
            z = np.asarray(z, dtype=float)
            out = np.zeros_like(z)
            for a in reversed(coeffs):
                out = out * z + a
            return out

        return sigma_k


def exp_activation() -> AnalyticActivation:
    """exp(z): every Taylor coefficient 1/i!, Lipschitz constant e on [-1, 1]."""
    return AnalyticActivation(
        name="exp",
        evaluate=np.exp,
        derivative=np.exp,
        taylor_coeff=lambda i: 1.0 / math.factorial(i),
        lipschitz_L=math.e,
    )


def identity_activation() -> AnalyticActivation:
    return AnalyticActivation(
        name="identity",
        evaluate=lambda z: np.asarray(z, dtype=float),
        derivative=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        taylor_coeff=lambda i: 1.0 if i == 1 else 0.0,
        lipschitz_L=1.0,
    )


def activation_by_name(name: str) -> AnalyticActivation:
    """Look up a built-in activation (used to rebuild state in worker processes)."""
    factories = {"exp": exp_activation, "identity": identity_activation}
    if name not in factories:
        raise ValueError(f"unknown activation {name!r}; expected one of {sorted(factories)}")
    return factories[name]()


@dataclass(frozen=True)
class LegendreExpansion:
    """g(w) = sum_{|J| <= k} c_J p_J(sqrt(d) w) on the cube [-1/sqrt(d), 1/sqrt(d)]^d."""

    dimension: int
    coefficients: Mapping[MultiIndex, float]

    @property
    def normalizer(self) -> float:
        """Cube normalization constant c_d = (sqrt(d)/2)^d (1/volume of the cube)."""
        return (math.sqrt(self.dimension) / 2.0) ** self.dimension

    @property
    def degree(self) -> int:
        degs = [J.degree for J, c in self.coefficients.items() if c != 0.0]
        return max(degs) if degs else 0


def _multinomial(J: MultiIndex) -> float:
    out = math.factorial(J.degree)
    for j in J.entries:
        out //= math.factorial(j)
    return float(out)


def construct_g(
    P: SparsePolynomial,
    act: AnalyticActivation,
    table: MonomialExpansionTable,
    degree: int | None = None,
) -> LegendreExpansion:
    """Solve the triangular system for the c_J of the weight function g.

    ``degree`` fixes the size k of the system (default: deg(P)); the system
    is linear in P's coefficients at fixed k.  Indices J with a_{|J|} = 0
    get c_J = 0 (their Taylor term contributes nothing, so the coefficient
    is free and zero is the minimal choice); if P carries a nonzero alpha_J
    at such a degree the polynomial is not representable and an error is
    raised.
    """
    d = P.dimension
    k = P.degree if degree is None else degree
    if k < P.degree:
        raise ValueError(f"degree {k} is below deg(P) = {P.degree}")
    if k > table.max_degree:
        raise ValueError(f"table max_degree {table.max_degree} < polynomial degree {k}")
    half_pow = 0.5**d
    coeffs: dict[MultiIndex, float] = {}
    indices = list(iter_multi_indices(d, k))
    for J in indices:
        alpha = float(P.coefficients.get(J, 0.0))
        a_deg = float(act.taylor_coeff(J.degree))
        if a_deg == 0.0:
            if alpha != 0.0:
                raise UnrepresentableMonomialError(
                    f"monomial x^{J} has coefficient {alpha} but the activation's "
                    f"Taylor coefficient a_{J.degree} is zero"
                )
            coeffs[J] = 0.0
            continue
        scale = half_pow * a_deg * _multinomial(J) / (math.sqrt(d) ** J.degree)
        acc = 0.0
        for Jp in indices:
            if Jp == J or Jp.degree > J.degree:
                continue
            if not (Jp <= J):
                continue
            c = coeffs[Jp]
            if c != 0.0:
                acc += c * multi_expansion_coeff(J, Jp, table) * multi_norm_sq(Jp)
        diag = multi_expansion_coeff(J, J, table) * multi_norm_sq(J)
        coeffs[J] = (alpha / scale - acc) / diag
    return LegendreExpansion(d, coeffs)


def eval_g(g: LegendreExpansion, w) -> np.ndarray:
    """Evaluate g at cube points w of shape (d,) or (m, d)."""
    w = np.asarray(w, dtype=float)
    half = 1.0 / math.sqrt(g.dimension)
    if np.any(np.abs(w) > half + 1e-12):
        raise ValueError(f"point outside the cube [-{half:.6g}, {half:.6g}]^{g.dimension}")
    scaled = w * math.sqrt(g.dimension)
    squeeze = scaled.ndim == 1
    pts = scaled[None, :] if squeeze else scaled
    out = np.zeros(pts.shape[0])
    for J, c in g.coefficients.items():
        if c != 0.0:
            out += c * multi_legendre_eval(J, pts)
    return float(out[0]) if squeeze else out


def max_abs_g(g: LegendreExpansion, n_points: int, rng: RandomSource) -> float:
    """Max of |g| over n_points uniform samples of the cube."""
    gen = rng.generator()
    half = 1.0 / math.sqrt(g.dimension)
    pts = gen.uniform(-half, half, size=(n_points, g.dimension))
    return float(np.max(np.abs(eval_g(g, pts))))


def g_magnitude_bound(P: SparsePolynomial, act: AnalyticActivation) -> float:
    """The a-priori bound alpha^k (A/a)^k (12 d)^{2 k^2} on max |g|."""
    k = P.degree
    alpha = max(1.0, P.coeff_bound)
    a, A = act.taylor_bounds(k)
    return alpha**k * (A / a) ** k * (12.0 * P.dimension) ** (2 * k * k)


def cube_quadrature(d: int, order: int):
    """Tensor Gauss-Legendre nodes/weights mapped to the cube [-1/sqrt(d), 1/sqrt(d)]^d.

    Weights are for the flat measure dw on the cube, so they sum to (2/sqrt(d))^d.
    """
    rule = gauss_legendre_rule(order)
    pts, wts = tensor_grid(rule.nodes, rule.weights, d)
    scale = 1.0 / math.sqrt(d)
    return pts * scale, wts * scale**d


def integral_feature_expectation(
    g: LegendreExpansion, sigma: Callable[[np.ndarray], np.ndarray], x_points, order: int
) -> np.ndarray:
    """f(x) = c_d * int_cube sigma(<w, x>) g(w) dw at each x, by quadrature."""
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    w_pts, w_wts = cube_quadrature(g.dimension, order)
    g_vals = eval_g(g, w_pts)
    weighted = w_wts * g_vals * g.normalizer
    sig_vals = np.asarray(sigma(x_points @ w_pts.T))  # (n_x, n_nodes)
    return sig_vals @ weighted


def verify_representation(
    P: SparsePolynomial,
    g: LegendreExpansion,
    act: AnalyticActivation,
    x_points,
    quad_order: int | None = None,
    truncate: bool = True,
) -> np.ndarray:
    """Residuals c_d * int sigma(<w, x>) g(w) dw - P(x) at each probe point.

    ``truncate=True`` uses the degree-k Taylor truncation of the activation,
    for which the construction is exact and the quadrature (order >= k+1
    per axis) introduces no error beyond rounding.  ``truncate=False`` uses
    the full activation; the residual then reports the Taylor tail.
    """
    k = P.degree
    if quad_order is None:
        quad_order = k + 4
    if quad_order < k + 2:
        raise ValueError(f"quad_order must be >= degree + 2 = {k + 2}")
    sigma = act.truncated(k) if truncate else act.evaluate
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    values = integral_feature_expectation(g, sigma, x_points, quad_order)
    return values - P.evaluate(x_points)


def forward_coefficients(
    g: LegendreExpansion, act: AnalyticActivation, table: MonomialExpansionTable, k: int
) -> dict:
    """Recompute the monomial coefficients produced by g through the forward sum.

    Inverse check for :func:`construct_g`: the result should equal P's
    coefficient map.
    """
    d = g.dimension
    out: dict[MultiIndex, float] = {}
    indices = list(iter_multi_indices(d, k))
    for J in indices:
        a_deg = float(act.taylor_coeff(J.degree))
        if a_deg == 0.0:
            out[J] = 0.0
            continue
        scale = (0.5**d) * a_deg * _multinomial(J) / (math.sqrt(d) ** J.degree)
        acc = 0.0
        for Jp in indices:
            if Jp.degree <= J.degree and Jp <= J:
                c = float(g.coefficients.get(Jp, 0.0))
                if c != 0.0:
                    acc += c * multi_expansion_coeff(J, Jp, table) * multi_norm_sq(Jp)
        out[J] = scale * acc
    return out
