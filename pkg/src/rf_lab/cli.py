"""Batch experiment CLI.

Every subcommand runs one reproducible pipeline, writes CSV outputs plus a
manifest (config echo, version, timestamps, sha256 per output file) under
``<out>/<subcommand>/``, and validates its module invariants before
exiting.  Exit codes: 0 success, 1 usage or config error, 2 validation
failure.

Config files are flat JSON objects with the same keys as the command
flags; explicit flags override file values, and unknown keys are rejected.
The default seed comes from the RF_LAB_SEED environment variable when
neither a flag nor the config provides one.  CSV floats are written with 17
significant digits, so reruns with equal seeds produce byte-identical
files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .features import concentration_experiment, relu, ridge_family
from .hardness import (
    PsiFunction,
    RidgeReluNetFactory,
    correlation_decay,
    linear_residual,
    neuron_inapprox_sweep,
    psi_properties_check,
    relu_exp_identity_check,
)
from .legendre import build_monomial_table, legendre_eval, legendre_norm_sq
from .numerics import RandomSource, gauss_legendre_rule, uniform_ball, uniform_sphere
from .poly_repr import (
    SparsePolynomial,
    construct_g,
    exp_activation,
    g_magnitude_bound,
    max_abs_g,
    verify_representation,
)
from .trainer import (
    TrainConfig,
    drift_check,
    finite_difference_check,
    forward,
    margin_filtered_sampler,
    sgd_train,
    guarantee_params,
    xavier_init,
)


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    """An asserted invariant was violated; maps to exit code 2."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Effective, fully-typed parameters of one run."""

    name: str
    params: dict
    seed: int
    out_dir: str
    jobs: int

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "params": self.params, "seed": self.seed,
             "out_dir": self.out_dir, "jobs": self.jobs},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        return cls(raw["name"], raw["params"], raw["seed"], raw["out_dir"], raw["jobs"])


def _parse_int_list(value) -> list:
    """Comma-separated string from the command line, or a JSON list from a config."""
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(p) for p in str(value).split(",") if p != ""]


# parameter spec: name -> (parser, default, help)
_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "int_list": _parse_int_list,
}

COMMANDS: dict[str, dict] = {
    "legendre-check": {
        "help": "orthogonality, vanishing pattern, and reconstruction of the Legendre machinery",
        "params": {"max_degree": ("int", 12, "largest degree checked")},
    },
    "represent-poly": {
        "help": "construct the weight function for a polynomial and verify by quadrature",
        "params": {
            "poly": ("str", '{"1,1": 1.0}', "polynomial as JSON multi-index map"),
            "probes": ("int", 20, "number of unit-ball probe points"),
            "quad_order": ("int", 0, "per-axis quadrature order (0 = degree + 4)"),
        },
    },
    "concentration": {
        "help": "sup-error of averaged random features vs their expectation across r",
        "params": {
            "poly": ("str", '{"1,1": 1.0}', "polynomial as JSON multi-index map"),
            "r": ("int_list", [64, 128, 256, 512, 1024, 2048, 4096], "feature counts"),
            "trials": ("int", 20, "independent feature draws per r"),
            "probes": ("int", 2000, "unit-ball probe points"),
            "delta": ("float", 0.01, "failure probability in the envelope"),
        },
    },
    "learn-poly": {
        "help": "SGD on a two-layer net against margin-filtered polynomial-sign data",
        "params": {
            "d": ("int", 3, "input dimension"),
            "poly": ("str", '{"1,1,0": 2.0}', "scaled polynomial (sup over ball = 1)"),
            "margin": ("float", 0.3, "margin filter on |P(x)|"),
            "r": ("int", 1000, "hidden width"),
            "eta": ("float", 0.01, "learning rate"),
            "steps": ("int", 200_000, "SGD steps"),
            "comparator_scale": ("float", 3.0, "scale of the explicit polynomial predictor"),
            "n_val": ("int", 2000, "validation set size"),
        },
    },
    "params": {
        "help": "exact guarantee-scale hyperparameters (reported, never used to train)",
        "params": {
            "epsilon": ("float", 0.1, "target excess loss"),
            "delta": ("float", 0.1, "failure probability"),
            "d": ("int", 3, "input dimension"),
            "k": ("int", 2, "polynomial degree"),
            "alpha": ("float", 1.0, "coefficient bound"),
        },
    },
    "psi-check": {
        "help": "certify the periodic hard-instance function",
        "params": {
            "d": ("int", 3, "dimension parameter (a = 6 d^2 + 1)"),
            "grid": ("int", 10_000, "grid points for residuals"),
            "order": ("int", 16, "quadrature order per segment"),
        },
    },
    "linear-residual": {
        "help": "squared distance of a random unit target from a random feature span",
        "params": {
            "d": ("int", 100, "ambient dimension"),
            "r": ("int", 50, "number of random directions"),
            "trials": ("int", 500, "independent trials"),
        },
    },
    "correlation-decay": {
        "help": "decay of the squared correlation between a fixed net and psi ridges",
        "params": {
            "d_values": ("int_list", [2, 4, 6, 8, 10, 12], "dimensions"),
            "trials": ("int", 64, "w draws per dimension"),
            "mc_samples": ("int", 100_000, "Monte-Carlo x samples"),
            "f_r": ("int", 50, "feature count of the fixed test network"),
        },
    },
    "neuron-inapprox": {
        "help": "least-squares error of oblivious ReLU features on the hard targets",
        "params": {
            "d_values": ("int_list", [4, 10, 15, 20], "dimensions"),
            "r": ("int", 200, "feature count"),
            "n_train": ("int", 4000, "training sample size"),
            "baseline": ("int", 1, "1 = include the directly-trained neuron baseline"),
        },
    },
    "exp-identity": {
        "help": "check the exp-through-ReLU integral identity on a z grid",
        "params": {
            "grid": ("int", 41, "number of z points in [-1, 1]"),
            "order": ("int", 40, "quadrature order per segment"),
        },
    },
}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_config(path: str) -> dict:
    """Flat JSON config; raises UsageError with line/column on parse failure."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(
            f"config {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must contain a JSON object")
    return raw


def _resolve_config(name: str, args: argparse.Namespace) -> ExperimentConfig:
    spec = COMMANDS[name]["params"]
    file_values = load_config(args.config) if args.config else {}
    reserved = {"seed", "out", "jobs"}
    unknown = set(file_values) - set(spec) - reserved
    if unknown:
        raise UsageError(f"unknown config key {sorted(unknown)[0]!r} for {name} "
                         f"(known: {sorted(set(spec) | reserved)})")
    params = {}
    for key, (kind, default, _help) in spec.items():
        flag_val = getattr(args, key.replace("-", "_"))
        if flag_val is not None:
            params[key] = flag_val
        elif key in file_values:
            try:
                params[key] = _PARSERS[kind](file_values[key])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        else:
            params[key] = default
    if args.seed is not None:
        seed = args.seed
    elif "seed" in file_values:
        seed = int(file_values["seed"])
    else:
        seed = int(os.environ.get("RF_LAB_SEED", "0"))
    out_dir = args.out if args.out is not None else str(file_values.get("out", "rf_lab_out"))
    if args.jobs is not None:
        jobs = args.jobs
    elif "jobs" in file_values:
        jobs = int(file_values["jobs"])
    else:
        jobs = os.cpu_count() or 1
    return ExperimentConfig(name, params, seed, out_dir, jobs)


# ---------------------------------------------------------------------------
# command implementations: each returns (outputs, summary_lines, failures)
# outputs: {filename: (header, rows)} or {filename: ("json", text)}
# ---------------------------------------------------------------------------


def _cmd_legendre_check(cfg: ExperimentConfig):
    kmax = cfg.params["max_degree"]
    table = build_monomial_table(kmax)
    rule = gauss_legendre_rule(max(20, kmax + 8))
    rows = []
    failures = []
    worst_orth = worst_recon = 0.0
    for m in range(kmax + 1):
        pm = legendre_eval(m, rule.nodes)
        for n in range(kmax + 1):
            inner = float(rule.weights @ (pm * legendre_eval(n, rule.nodes)))
            expected = legendre_norm_sq(n) if m == n else 0.0
            err = abs(inner - expected)
            worst_orth = max(worst_orth, err)
            rows.append(("orthogonality", m, n, inner, expected, err))
            if m < n or (m + n) % 2 == 1:
                e = table.e(m, n)
                rows.append(("vanishing", m, n, e, 0.0, abs(e)))
                if e != 0.0:
                    failures.append(f"e({m},{n}) = {e} should vanish exactly")
    grid = np.linspace(-1.0, 1.0, 200)
    for m in range(kmax + 1):
        recon = np.zeros_like(grid)
        for n in range(m + 1):
            e = table.e(m, n)
            if e:
                recon += e * legendre_eval(n, grid)
        err = float(np.max(np.abs(recon - grid**m)))
        worst_recon = max(worst_recon, err)
        rows.append(("reconstruction", m, -1, err, 0.0, err))
    if worst_orth >= 1e-12:
        failures.append(f"orthogonality residual {worst_orth:.3e} >= 1e-12")
    if worst_recon >= 1e-10:
        failures.append(f"reconstruction residual {worst_recon:.3e} >= 1e-10")
    summary = [
        f"orthogonality residual: {worst_orth:.3e} (< 1e-12)",
        f"reconstruction residual: {worst_recon:.3e} (< 1e-10)",
    ]
    header = ("check", "m", "n", "observed", "expected", "abs_error")
    return {"legendre_check.csv": (header, rows)}, summary, failures


def _cmd_represent_poly(cfg: ExperimentConfig):
    P = SparsePolynomial.from_json(cfg.params["poly"])
    act = exp_activation()
    table = build_monomial_table(max(P.degree, 1))
    g = construct_g(P, act, table)
    rng = RandomSource(cfg.seed)
    xs = uniform_ball(P.dimension, cfg.params["probes"], rng.generator(0))
    order = cfg.params["quad_order"] or P.degree + 4
    res_t = verify_representation(P, g, act, xs, order, truncate=True)
    res_f = verify_representation(P, g, act, xs, max(order, P.degree + 6), truncate=False)
    g_max = max_abs_g(g, 10_000, rng.derive(1))
    bound = g_magnitude_bound(P, act)
    rows = [(i, float(res_t[i]), float(res_f[i])) for i in range(len(xs))]
    failures = []
    if float(np.max(np.abs(res_t))) >= 1e-8:
        failures.append(f"truncated-mode residual {np.max(np.abs(res_t)):.3e} >= 1e-8")
    if g_max > bound:
        failures.append(f"max |g| = {g_max:.3e} exceeds the a-priori bound {bound:.3e}")
    summary = [
        f"max truncated residual: {np.max(np.abs(res_t)):.3e} (< 1e-8)",
        f"max full-activation residual (Taylor tail, reported): {np.max(np.abs(res_f)):.3e}",
        f"max |g| on grid: {g_max:.6g} vs bound {bound:.6g}",
    ]
    header = ("point", "truncated_residual", "full_residual")
    return {"represent_poly.csv": (header, rows)}, summary, failures


def _cmd_concentration(cfg: ExperimentConfig):
    P = SparsePolynomial.from_json(cfg.params["poly"])
    act = exp_activation()
    result = concentration_experiment(
        P, act, cfg.params["r"], cfg.params["trials"], cfg.params["probes"],
        RandomSource(cfg.seed), jobs=cfg.jobs,
    )
    delta = cfg.params["delta"]
    rows = list(result.rows)
    header = ("r", "trial", "sup_error", "max_abs_u", "seed")
    means = result.mean_errors()
    stds = result.std_errors()
    sum_rows = [
        (r, float(m), float(s), result.envelope(r, delta))
        for r, m, s in zip(result.r_values, means, stds)
    ]
    failures = []
    violations = [row for row in rows if row[2] > result.envelope(row[0], delta)]
    if violations:
        failures.append(f"{len(violations)} trials exceed the concentration envelope")
    summary = [f"weight sup C = {result.weight_sup_C:.6g}, L = {result.lipschitz_L:.6g}"]
    if len(result.r_values) >= 4:
        slope = result.loglog_slope()
        summary.append(f"log-log slope of mean sup error: {slope:.4f} (theory -0.5)")
        if not (-0.65 <= slope <= -0.35):
            failures.append(f"log-log slope {slope:.4f} outside [-0.65, -0.35]")
    return (
        {
            "concentration.csv": (header, rows),
            "concentration_summary.csv": (("r", "mean_sup_error", "std", "envelope"), sum_rows),
        },
        summary,
        failures,
    )


def _cmd_learn_poly(cfg: ExperimentConfig):
    p = cfg.params
    P = SparsePolynomial.from_json(p["poly"])
    if P.dimension != p["d"]:
        raise UsageError(f"polynomial dimension {P.dimension} != --d {p['d']}")
    act = exp_activation()
    sampler = margin_filtered_sampler(P, p["margin"])
    config = TrainConfig(
        epsilon=0.1, delta=0.1, degree=P.degree, coeff_bound=P.coeff_bound,
        r=p["r"], eta=p["eta"], steps=p["steps"], seed=cfg.seed,
    )
    rng = RandomSource(cfg.seed)
    result = sgd_train(p["d"], sampler, config, rng, act, n_val=p["n_val"])
    X_val, y_val = sampler(p["n_val"], rng.generator(2))
    comp_pred = p["comparator_scale"] * P.evaluate(X_val)
    comparator = float(np.mean(np.maximum(0.0, 1.0 - y_val * comp_pred)))

    # gradient spot-check away from the kink
    gen = rng.generator(3)
    probe_net = xavier_init(p["d"], 20, rng.derive(3), act)
    probe_net.U = gen.standard_normal(20) * 0.1
    worst_fd = 0.0
    checked = 0
    while checked < 20:
        x = gen.standard_normal(p["d"])
        x /= max(1.0, float(np.linalg.norm(x)))
        y = float(gen.choice((-1.0, 1.0)))
        if abs(1.0 - y * forward(probe_net, x)) < 1e-3:
            continue
        worst_fd = max(worst_fd, finite_difference_check(probe_net, x, y))
        checked += 1

    report = drift_check(result.trace, config, act)
    t = result.trace
    trace_rows = [
        (s, float(t.loss[s]), float(t.run_avg_loss[s]), float(t.w_drift[s]), float(t.u_norm[s]))
        for s in range(len(t.loss))
    ]
    best = result.net
    checkpoint = {
        "d": best.d, "r": best.r, "activation": act.name, "seed": cfg.seed,
        "best_step": result.best_step,
        "W": [float(v) for v in best.W.ravel()],
        "U": [float(v) for v in best.U],
    }
    failures = []
    if worst_fd >= 1e-6:
        failures.append(f"gradient finite-difference relative error {worst_fd:.3e} >= 1e-6")
    if not report.drift_ok:
        failures.append(f"drift bound violated (min margin {report.min_drift_margin:.3e})")
    if not report.norms_ok:
        failures.append(f"norm cap violated within the drift-check window (max {report.max_norm:.3e})")
    if result.best_val_loss > result.val_history[0][1] + 1e-12:
        failures.append("best checkpoint is worse than the initial validation loss")
    gap_ok = result.best_val_loss <= comparator + 0.1
    summary = [
        f"backend: {result.backend}",
        f"best validation hinge loss: {result.best_val_loss:.6f} at step {result.best_step}",
        f"comparator ({p['comparator_scale']:g} * P) loss: {comparator:.6f}; "
        f"target bound {comparator + 0.1:.6f}; within bound: {gap_ok}",
        f"gradient FD max relative error: {worst_fd:.3e}",
        f"drift check: ok={report.passed} (B={report.b_value:.4g}, min margin {report.min_drift_margin:.3e})",
    ]
    sum_header = (
        "best_step", "best_val_loss", "comparator_loss", "bound", "within_bound",
        "grad_fd_max_rel_err", "drift_ok", "backend",
    )
    sum_row = [(
        result.best_step, result.best_val_loss, comparator, comparator + 0.1,
        gap_ok, worst_fd, report.passed, result.backend,
    )]
    return (
        {
            "learn_poly_trace.csv": (("step", "loss", "run_avg_loss", "w_drift", "u_norm"), trace_rows),
            "learn_poly_summary.csv": (sum_header, sum_row),
            "learn_poly_checkpoint.json": ("json", json.dumps(checkpoint)),
        },
        summary,
        failures,
    )


def _cmd_params(cfg: ExperimentConfig):
    p = cfg.params
    config = guarantee_params(p["epsilon"], p["delta"], p["d"], p["k"], p["alpha"], exp_activation())
    beta_float = float(config.beta) if config.beta < 10**300 else math.inf
    payload = {
        "epsilon": p["epsilon"],
        "delta": p["delta"],
        "d": p["d"],
        "k": p["k"],
        "alpha": p["alpha"],
        "beta": str(config.beta),
        "beta_float": beta_float,
        "r": str(config.r),
        "eta": f"{config.eta.numerator}/{config.eta.denominator}",
        "steps": str(config.steps),
        "infeasible_at_desk_scale": config.infeasible_at_desk_scale,
    }
    summary = [
        f"beta = {config.beta} (~{beta_float:.6g})",
        f"r >= {config.r}",
        f"eta = {payload['eta']}",
        f"T = {config.steps}",
        f"infeasible at desk scale: {config.infeasible_at_desk_scale}",
    ]
    return {"params.json": ("json", json.dumps(payload, indent=2))}, summary, []


def _cmd_psi_check(cfg: ExperimentConfig):
    psi = PsiFunction(cfg.params["d"])
    report = psi_properties_check(psi, cfg.params["grid"], cfg.params["order"])
    checks = [
        ("oddness_residual", report.oddness_residual, "< 1e-12", report.oddness_residual < 1e-12),
        ("periodicity_residual", report.periodicity_residual, "< 1e-12", report.periodicity_residual < 1e-12),
        ("interval_integral_max_dev_from_2/3", report.max_interval_deviation, "< 1e-10", report.max_interval_deviation < 1e-10),
        ("max_abs_value", report.max_abs_value, "<= 1", report.max_abs_value <= 1.0 + 1e-12),
        ("relu_decomposition_residual", report.decomposition_residual, "< 1e-12", report.decomposition_residual < 1e-12),
        ("gaussian_norm_at_w=d", report.gaussian_norm_at_d, ">= 1/6", report.gaussian_norm_at_d >= 1.0 / 6.0),
    ]
    rows = [(name, float(val), req, ok) for name, val, req, ok in checks]
    failures = [f"{name} = {val:.6e} fails requirement {req}" for name, val, req, ok in checks if not ok]
    summary = [f"a = {psi.a}; all checks passed: {report.passed}"]
    header = ("property", "observed", "requirement", "passed")
    return {"psi_properties.csv": (header, rows)}, summary, failures


def _cmd_linear_residual(cfg: ExperimentConfig):
    p = cfg.params
    res = linear_residual(p["d"], p["r"], RandomSource(cfg.seed), p["trials"], jobs=cfg.jobs)
    rows = [(t, float(v), cfg.seed) for t, v in enumerate(res)]
    mean = float(np.mean(res))
    frac = float(np.mean(res >= 0.25))
    failures = []
    if np.any(res < -1e-9) or np.any(res > 1.0 + 1e-9):
        failures.append("residuals escaped [0, 1]")
    if p["r"] <= p["d"] // 2 and mean < 0.25:
        failures.append(f"mean residual {mean:.4f} < 1/4 despite r <= d/2")
    summary = [
        f"mean residual: {mean:.4f} (population value {1 - p['r'] / p['d']:.4f})",
        f"fraction >= 1/4: {frac:.4f}",
    ]
    return {"linear_residual.csv": (("trial", "residual", "seed"), rows)}, summary, failures


def _cmd_correlation_decay(cfg: ExperimentConfig):
    p = cfg.params
    rows_out = correlation_decay(
        RidgeReluNetFactory(p["f_r"]), p["d_values"], p["trials"], p["mc_samples"],
        RandomSource(cfg.seed), jobs=cfg.jobs,
    )
    rows = [(r.d, r.mean_sq, r.std_err, r.n_w, r.mc_samples) for r in rows_out]
    failures = []
    if any((not math.isfinite(r.mean_sq)) or r.mean_sq < 0 for r in rows_out):
        failures.append("normalized squared correlations must be finite and nonnegative")
    summary = [
        f"d={r.d}: {r.mean_sq:.4e} +- {r.std_err:.1e}" for r in rows_out
    ]
    header = ("d", "mean_sq_normalized", "std_err", "n_w", "mc_samples")
    return {"correlation_decay.csv": (header, rows)}, summary, failures


def _cmd_neuron_inapprox(cfg: ExperimentConfig):
    p = cfg.params
    family = ridge_family(relu, uniform_sphere(1.0))
    rows_out = neuron_inapprox_sweep(
        family, p["r"], p["d_values"], p["n_train"], RandomSource(cfg.seed),
        include_baseline=bool(p["baseline"]), jobs=cfg.jobs,
    )
    rows = [(r.d, r.target, r.normalized_error, r.r_max_abs_u) for r in rows_out]
    failures = []
    for r in rows_out:
        if r.target == "control" and not r.normalized_error < 1e-6:
            failures.append(f"realizable control at d={r.d} has error {r.normalized_error:.3e} >= 1e-6")
    summary = [f"d={r.d} {r.target}: err={r.normalized_error:.4f}" for r in rows_out]
    header = ("d", "target", "normalized_error", "r_max_abs_u")
    return {"neuron_inapprox.csv": (header, rows)}, summary, failures


def _cmd_exp_identity(cfg: ExperimentConfig):
    p = cfg.params
    zs = np.linspace(-1.0, 1.0, p["grid"])
    rows = []
    worst = 0.0
    for z in zs:
        err = relu_exp_identity_check([float(z)], p["order"])
        worst = max(worst, err)
        rows.append((float(z), err))
    failures = []
    if worst >= 1e-8:
        failures.append(f"identity error {worst:.3e} >= 1e-8")
    summary = [f"max |LHS - e^z| over {p['grid']} points: {worst:.3e}"]
    return {"exp_identity.csv": (("z", "abs_error"), rows)}, summary, failures


_RUNNERS = {
    "legendre-check": _cmd_legendre_check,
    "represent-poly": _cmd_represent_poly,
    "concentration": _cmd_concentration,
    "learn-poly": _cmd_learn_poly,
    "params": _cmd_params,
    "psi-check": _cmd_psi_check,
    "linear-residual": _cmd_linear_residual,
    "correlation-decay": _cmd_correlation_decay,
    "neuron-inapprox": _cmd_neuron_inapprox,
    "exp-identity": _cmd_exp_identity,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rf-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rf-lab {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, spec in COMMANDS.items():
        sub = subs.add_parser(name, help=spec["help"], description=spec["help"])
        for key, (kind, default, help_text) in spec["params"].items():
            sub.add_argument(
                f"--{key.replace('_', '-')}",
                dest=key.replace("-", "_"),
                type=_PARSERS[kind],
                default=None,
                help=f"{help_text} (default: {default})",
            )
        sub.add_argument("--config", default=None, help="JSON config file (flags override)")
        sub.add_argument("--seed", type=int, default=None, help="root seed (default: $RF_LAB_SEED or 0)")
        sub.add_argument("--out", default=None, help="output directory (default: rf_lab_out)")
        sub.add_argument("--jobs", type=int, default=None, help="worker pool size (default: CPU count)")
    return parser


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def run(argv) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        cfg = _resolve_config(args.command, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    started = datetime.now(timezone.utc).isoformat()
    out_dir = Path(cfg.out_dir) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        outputs, summary, failures = _RUNNERS[cfg.name](cfg)
    except (UsageError, ValueError) as exc:  # bad parameter values
        print(f"error: {exc}", file=sys.stderr)
        return 1

    checksums = {}
    for filename, payload in outputs.items():
        path = out_dir / filename
        if payload[0] == "json":
            path.write_text(payload[1] + "\n", encoding="utf-8", newline="\n")
        else:
            header, rows = payload
            write_csv(path, header, rows)
        checksums[filename] = _sha256(path)
    manifest = {
        "command": cfg.name,
        "version": __version__,
        "config": json.loads(cfg.to_json()),
        "config_hash": hashlib.sha256(cfg.to_json().encode()).hexdigest(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": checksums,
        "validation_failures": failures,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )

    for line in summary:
        print(line)
    if failures:
        for failure in failures:
            print(f"VALIDATION FAILURE: {failure}", file=sys.stderr)
        return 2
    print(f"ok: outputs in {out_dir}")
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
