"""Experiment drivers and command-line interface.

Each subcommand sweeps momentum-SGD runs over a (gamma, alpha) grid on a
generated problem family, repeats every cell over independent replications,
and writes per-cell CSV files plus a summary table and a resolved-config
echo file. Replication r regenerates its problem and batch stream from
seed_base + r, so any cell reruns bit-identically in isolation and serial
and parallel execution produce the same aggregates.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .inference import (
    chi_square_quantile,
    confidence_interval,
    confidence_region_statistic,
    ks_normality,
    plug_in_covariance,
    z_statistic,
)
from .optimizer import DivergedError, choose_burn_in, resolve_gamma, run
from .problems import generate_logistic, generate_quadratic
from .rand import GENERATOR_NAME, RngStream
from .spectrum import (
    GammaMode,
    HessianSpectrum,
    MomentumConfig,
    build_gamma_matrix,
    optimal_hyperparameters,
    spectral_radius_closed_form,
    verify_power_bound,
)

__all__ = [
    "ExperimentConfig",
    "RunSummary",
    "parse_config",
    "run_experiment",
    "read_csv",
    "main",
    "THREADS_ENV_VAR",
]

THREADS_ENV_VAR = "SGDMLAB_THREADS"
Z_CRIT = 1.959963984540054

EXPERIMENTS = (
    "convergence",
    "averaged",
    "sensitivity",
    "coverage",
    "spectrum-map",
    "power-bound",
)

_DESK = {"n": 4000, "reps": 100}
_PAPER = {"n": 20000, "reps": 200}
_ITERS_DEFAULT = {
    "convergence": 1000,
    "averaged": 2000,
    "sensitivity": 500,
    "coverage": 2000,
    "power-bound": 200,
    "spectrum-map": 0,
}
_GAMMA_DEFAULT = {
    "convergence": ["0", "0.9", "adaptive"],
    "averaged": ["0", "0.9", "adaptive"],
    "sensitivity": ["0", "0.8", "0.9"],
    "coverage": ["adaptive"],
}
_DYADIC_ALPHAS = [2.0**k for k in range(1, -7, -1)]


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description (defaults and file values
    already folded in)."""

    experiment: str
    problem: str = "quadratic"
    n: int = 4000
    dim: int = 10
    rho: float = 1.0
    shift: float = 10.0
    nu: float = 0.0
    gammas: list = field(default_factory=lambda: ["0"])
    alphas: list = field(default_factory=lambda: [0.001])
    batch: int = 800
    iters: int = 1000
    n0: object = 0
    reps: int = 100
    seed: int = 42
    out: str = "sgdmlab_out"
    paper_scale: bool = False
    threads: int = 1
    offset: float = 1.0
    mu: float = 1.0
    ell: float = 5.0
    grid: int = 200
    alpha_range: tuple = (0.02, 0.8)
    gamma_range: tuple = (0.0, 0.6)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.problem not in ("quadratic", "logistic"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        for a in self.alphas:
            if not a > 0:
                raise ValueError("alpha values must be positive")
        for g in self.gammas:
            if g != "adaptive" and not 0.0 <= float(g) < 1.0:
                raise ValueError("gamma must lie in [0,1)")
        if self.n0 != "auto" and not 0 <= int(self.n0):
            raise ValueError("n0 must be 'auto' or a nonnegative integer")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def header(self) -> dict:
        return {
            "experiment": self.experiment,
            "problem": self.problem,
            "n": self.n,
            "dim": self.dim,
            "rho": self.rho,
            "shift": self.shift,
            "nu": self.nu,
            "batch": self.batch,
            "iters": self.iters,
            "n0": self.n0,
            "reps": self.reps,
            "seed": self.seed,
            "offset": self.offset,
            "generator": GENERATOR_NAME,
        }


@dataclass
class RunSummary:
    """Aggregates per (gamma, alpha) cell plus the emitted file list."""

    experiment: str
    out_dir: str
    cells: list
    files: list
    divergent_total: int = 0


# ---------------------------------------------------------------------------
# CSV plumbing

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        # cast first: numpy scalars subclass float but repr unparseably
        return repr(float(v))
    return str(v)


def _write_csv(path: str, header: dict, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        for key, val in header.items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv(path: str) -> tuple[dict, list]:
    """Parse a harness CSV back into (header-metadata dict, row dicts).

    Numeric fields come back as int or float ('inf' and 'nan' included);
    everything else stays a string.
    """
    meta: dict = {}
    with open(path) as fh:
        lines = fh.readlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val
            body_start = i + 1
        else:
            break
    rows = []
    reader = csv.DictReader(lines[body_start:])
    for raw in reader:
        row = {}
        for key, val in raw.items():
            try:
                row[key] = int(val)
            except (TypeError, ValueError):
                try:
                    row[key] = float(val)
                except (TypeError, ValueError):
                    row[key] = val
        rows.append(row)
    return meta, rows


# ---------------------------------------------------------------------------
# single-replication execution

def _make_problem(cfg: ExperimentConfig, rep: int):
    seed = cfg.seed + rep
    if cfg.problem == "quadratic":
        return generate_quadratic(cfg.n, cfg.dim, cfg.rho, cfg.shift, seed)
    x_true = np.ones(cfg.dim) / math.sqrt(cfg.dim)
    return generate_logistic(cfg.n, cfg.dim, x_true, cfg.nu, seed)


def _momentum_config(cfg: ExperimentConfig, gamma_token: str, alpha: float) -> MomentumConfig:
    if gamma_token == "adaptive":
        return MomentumConfig(alpha=alpha, gamma=0.0, batch_size=cfg.batch,
                              gamma_mode=GammaMode.ADAPTIVE)
    return MomentumConfig(alpha=alpha, gamma=float(gamma_token), batch_size=cfg.batch)


def _resolve_n0(cfg: ExperimentConfig, lam: float) -> int:
    if cfg.n0 != "auto":
        return min(int(cfg.n0), cfg.iters - 1)
    if 0.0 < lam < 1.0:
        return min(choose_burn_in(lam, cfg.batch), max(cfg.iters // 2, 1))
    return max(cfg.iters // 2, 1)


def _single_run(cfg: ExperimentConfig, problem, gamma_token: str, alpha: float,
                rep: int) -> dict:
    mcfg = _momentum_config(cfg, gamma_token, alpha)
    gamma_res = resolve_gamma(problem, mcfg)
    report = spectral_radius_closed_form(
        problem.tuning_spectrum(), replace(mcfg, gamma=gamma_res,
                                           gamma_mode=GammaMode.FIXED)
    )
    n0 = _resolve_n0(cfg, report.lam)
    stream = RngStream(cfg.seed + rep, stream=1)
    x_init = None
    if cfg.offset > 0.0:
        x_init = problem.x_star + cfg.offset * stream.normal_vector(cfg.dim)
    stride = max(1, cfg.iters // 1000)
    rec = {
        "rep": rep,
        "gamma_resolved": gamma_res,
        "lam": report.lam,
        "n0": n0,
        "diverged": False,
    }
    try:
        state, avg, traj = run(
            problem, mcfg, cfg.iters, stream, n0=n0,
            record_stride=stride, x_init=x_init,
        )
    except DivergedError as exc:
        rec["diverged"] = True
        rec["diverged_step"] = exc.step
        rec["final_err"] = math.inf
        rec["best_err"] = math.inf
        return rec

    rec["steps"] = traj.steps.tolist()
    rec["err_last"] = traj.err_last.tolist()
    rec["err_avg"] = traj.err_avg.tolist()
    rec["final_err"] = float(traj.err_last[-1])
    rec["best_err"] = float(np.min(traj.err_last))
    rec["final_err_avg"] = float(traj.err_avg[-1])

    if cfg.experiment == "coverage":
        cov = plug_in_covariance(problem)
        omega_dir = np.ones(cfg.dim) / math.sqrt(cfg.dim)
        xbar = avg.mean
        z = z_statistic(xbar, problem.x_star, omega_dir, cov,
                        cfg.iters, n0, cfg.batch)
        lo, hi = confidence_interval(xbar, omega_dir, cov,
                                     cfg.iters, n0, cfg.batch)
        target = float(omega_dir @ problem.x_star)
        stat = confidence_region_statistic(xbar, problem.x_star, cov,
                                           cfg.iters, n0, cfg.batch)
        rec["z"] = z
        rec["ci_lo"] = lo
        rec["ci_hi"] = hi
        rec["covered"] = bool(lo <= target <= hi)
        rec["region_stat"] = stat
        rec["region_covered"] = bool(stat <= chi_square_quantile(cfg.dim, 0.05))
    return rec


def _parallel_task(payload) -> tuple:
    cfg_dict, gamma_token, alpha, cell_idx, rep = payload
    cfg = ExperimentConfig(**cfg_dict)
    problem = _make_problem(cfg, rep)
    return cell_idx, rep, _single_run(cfg, problem, gamma_token, alpha, rep)


# ---------------------------------------------------------------------------
# sweep execution and aggregation

def _cfg_dict(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment, "problem": cfg.problem, "n": cfg.n,
        "dim": cfg.dim, "rho": cfg.rho, "shift": cfg.shift, "nu": cfg.nu,
        "gammas": cfg.gammas, "alphas": cfg.alphas, "batch": cfg.batch,
        "iters": cfg.iters, "n0": cfg.n0, "reps": cfg.reps, "seed": cfg.seed,
        "out": cfg.out, "paper_scale": cfg.paper_scale, "threads": cfg.threads,
        "offset": cfg.offset, "mu": cfg.mu, "ell": cfg.ell, "grid": cfg.grid,
        "alpha_range": tuple(cfg.alpha_range),
        "gamma_range": tuple(cfg.gamma_range),
    }


def _execute_cells(cfg: ExperimentConfig, cells: list) -> dict:
    """Run reps x cells, returning {cell_idx: [record per rep]} with records
    ordered by replication index regardless of execution order."""
    results: dict = {i: [None] * cfg.reps for i in range(len(cells))}
    if cfg.threads > 1:
        payloads = [
            (_cfg_dict(cfg), tok, alpha, ci, rep)
            for ci, (tok, alpha) in enumerate(cells)
            for rep in range(cfg.reps)
        ]
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for cell_idx, rep, rec in pool.map(_parallel_task, payloads, chunksize=4):
                results[cell_idx][rep] = rec
    else:
        for rep in range(cfg.reps):
            problem = _make_problem(cfg, rep)
            for ci, (tok, alpha) in enumerate(cells):
                results[ci][rep] = _single_run(cfg, problem, tok, alpha, rep)
    return results


def _tag(value) -> str:
    if value == "adaptive":
        return "adaptive"
    return f"{float(value):g}"


def _mean(values: list) -> float:
    return float(np.mean(values)) if values else math.inf


def _cell_summary(cfg: ExperimentConfig, gamma_token: str, alpha: float,
                  recs: list) -> dict:
    alive = [r for r in recs if not r["diverged"]]
    row = {
        "experiment": cfg.experiment,
        "problem": cfg.problem,
        "gamma": gamma_token,
        "alpha": alpha,
        "batch": cfg.batch,
        "iters": cfg.iters,
        "reps": len(recs),
        "divergent": len(recs) - len(alive),
        "gamma_resolved_mean": _mean([r["gamma_resolved"] for r in recs]),
        "lam_mean": _mean([r["lam"] for r in recs]),
        "n0": recs[0]["n0"],
        "final_err_mean": _mean([r["final_err"] for r in alive]),
        "final_err_median": (
            float(np.median([r["final_err"] for r in alive])) if alive else math.inf
        ),
        "best_err_mean": _mean([r["best_err"] for r in alive]),
        "final_err_avg_mean": _mean(
            [r["final_err_avg"] for r in alive if "final_err_avg" in r]
        ),
        "steady_mse": math.nan,
        "iters_to_threshold": math.nan,
        "coverage": math.nan,
        "p_abs_z": math.nan,
        "region_coverage": math.nan,
        "ks_stat": math.nan,
        "ks_pass": math.nan,
    }
    if alive and "steps" in alive[0]:
        err = np.array([r["err_last"] for r in alive])
        mean_curve = err.mean(axis=0)
        tail = mean_curve[-max(1, len(mean_curve) // 4):]
        row["steady_mse"] = float(np.mean(tail**2))
        thr = 2.0 * math.sqrt(row["steady_mse"])
        below = np.nonzero(mean_curve <= thr)[0]
        steps = np.array(alive[0]["steps"])
        row["iters_to_threshold"] = (
            int(steps[below[0]]) if below.size else math.inf
        )
    if cfg.experiment == "coverage" and alive:
        zs = np.array([r["z"] for r in alive])
        row["coverage"] = float(np.mean([r["covered"] for r in alive]))
        row["p_abs_z"] = float(np.mean(np.abs(zs) < Z_CRIT))
        row["region_coverage"] = float(np.mean([r["region_covered"] for r in alive]))
        if zs.size >= 100:
            stat, ok = ks_normality(zs)
            row["ks_stat"] = stat
            row["ks_pass"] = float(ok)
    return row


_SUMMARY_COLUMNS = [
    "experiment", "problem", "gamma", "alpha", "batch", "iters", "n0", "reps",
    "divergent", "gamma_resolved_mean", "lam_mean", "final_err_mean",
    "final_err_median", "best_err_mean", "final_err_avg_mean", "steady_mse",
    "iters_to_threshold", "coverage", "p_abs_z", "region_coverage",
    "ks_stat", "ks_pass",
]


def _write_cell_files(cfg: ExperimentConfig, cells, results) -> tuple[list, list]:
    files, summary_rows = [], []
    for ci, (tok, alpha) in enumerate(cells):
        recs = results[ci]
        alive = [r for r in recs if not r["diverged"]]
        header = dict(cfg.header(), gamma=tok, alpha=alpha)
        name = f"{cfg.experiment}_g{_tag(tok)}_a{_tag(alpha)}.csv"
        path = os.path.join(cfg.out, name)
        if cfg.experiment == "coverage":
            columns = ["rep", "gamma_resolved", "z", "ci_lo", "ci_hi",
                       "covered", "region_stat", "region_covered"]
            rows = [
                {c: r[c] if c in r else math.inf for c in columns}
                for r in alive
            ]
            _write_csv(path, header, columns, rows)
        elif cfg.experiment == "sensitivity":
            columns = ["rep", "diverged", "final_err", "best_err"]
            rows = [{c: r.get(c, math.inf) for c in columns} for r in recs]
            _write_csv(path, header, columns, rows)
        else:
            columns = ["step", "err_last_mean", "err_last_median",
                       "err_avg_mean", "err_avg_median"]
            rows = []
            if alive:
                steps = alive[0]["steps"]
                last = np.array([r["err_last"] for r in alive])
                avg = np.array([r["err_avg"] for r in alive])
                for j, step in enumerate(steps):
                    rows.append({
                        "step": step,
                        "err_last_mean": float(last[:, j].mean()),
                        "err_last_median": float(np.median(last[:, j])),
                        "err_avg_mean": float(avg[:, j].mean()),
                        "err_avg_median": float(np.median(avg[:, j])),
                    })
            _write_csv(path, header, columns, rows)
        files.append(path)
        summary_rows.append(_cell_summary(cfg, tok, alpha, recs))
    return files, summary_rows


# ---------------------------------------------------------------------------
# grid and bound experiments (no problem instances involved)

def _spectrum_map(cfg: ExperimentConfig) -> RunSummary:
    spectrum = HessianSpectrum.from_extremes(cfg.mu, cfg.ell)
    alphas = np.linspace(cfg.alpha_range[0], cfg.alpha_range[1], cfg.grid)
    gammas = np.linspace(cfg.gamma_range[0], cfg.gamma_range[1], cfg.grid)
    rows = []
    best = (math.inf, math.nan, math.nan)
    for g in gammas:
        for a in alphas:
            rep = spectral_radius_closed_form(
                spectrum, MomentumConfig(alpha=float(a), gamma=float(g))
            )
            rows.append({"alpha": float(a), "gamma": float(g),
                         "lam": rep.lam, "admissible": int(rep.admissible)})
            if rep.lam < best[0]:
                best = (rep.lam, float(a), float(g))
    path = os.path.join(cfg.out, "spectrum_map.csv")
    _write_csv(path, cfg.header(), ["alpha", "gamma", "lam", "admissible"], rows)
    a_opt, g_opt, lam_opt = optimal_hyperparameters(spectrum)
    cell = {
        "experiment": cfg.experiment, "mu": cfg.mu, "ell": cfg.ell,
        "grid": cfg.grid, "lam_min": best[0], "alpha_at_min": best[1],
        "gamma_at_min": best[2], "alpha_opt": a_opt, "gamma_opt": g_opt,
        "lam_opt": lam_opt,
    }
    spath = os.path.join(cfg.out, "summary.csv")
    _write_csv(spath, cfg.header(), list(cell.keys()), [cell])
    return RunSummary(cfg.experiment, cfg.out, [cell], [path, spath])


def _power_bound(cfg: ExperimentConfig) -> RunSummary:
    stream = RngStream(cfg.seed, stream=3)
    rows = []
    failures = 0
    attempts = 0
    while len(rows) < cfg.reps and attempts < 100 * cfg.reps:
        attempts += 1
        mu = 10.0 ** float(stream.uniform() * 2.0 - 1.0)
        ell = mu * 10.0 ** float(stream.uniform() * 2.0)
        gamma = float(stream.uniform() * 0.95)
        alpha_cap = 2.0 * (1.0 + gamma) / ((1.0 - gamma) * ell)
        alpha = float(0.05 + 0.9 * stream.uniform()) * alpha_cap
        spectrum = HessianSpectrum.from_extremes(mu, ell)
        mcfg = MomentumConfig(alpha=alpha, gamma=gamma)
        rep = spectral_radius_closed_form(spectrum, mcfg)
        if not rep.admissible or rep.delta <= 1e-6 or not math.isfinite(rep.big_m):
            continue
        G = build_gamma_matrix(spectrum, mcfg)
        res = verify_power_bound(G, rep.big_m, rep.lam, cfg.iters)
        if not res.ok:
            failures += 1
        rows.append({
            "mu": mu, "ell": ell, "alpha": alpha, "gamma": gamma,
            "lam": rep.lam, "big_m": rep.big_m, "delta": rep.delta,
            "ok": int(res.ok), "max_ratio": res.max_ratio,
            "steps_done": res.steps_done, "partial": int(res.partial),
        })
    path = os.path.join(cfg.out, "power_bound.csv")
    columns = ["mu", "ell", "alpha", "gamma", "lam", "big_m", "delta",
               "ok", "max_ratio", "steps_done", "partial"]
    _write_csv(path, cfg.header(), columns, rows)
    cell = {
        "experiment": cfg.experiment, "configs": len(rows),
        "horizon": cfg.iters, "failures": failures,
        "max_ratio": max((r["max_ratio"] for r in rows), default=math.nan),
    }
    spath = os.path.join(cfg.out, "summary.csv")
    _write_csv(spath, cfg.header(), list(cell.keys()), [cell])
    return RunSummary(cfg.experiment, cfg.out, [cell], [path, spath])


# ---------------------------------------------------------------------------
# top-level driver

def _echo_config(cfg: ExperimentConfig) -> str:
    path = os.path.join(cfg.out, "config.json")
    payload = dict(_cfg_dict(cfg), generator=GENERATOR_NAME)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    """Execute one experiment sweep and write its artifacts under cfg.out."""
    os.makedirs(cfg.out, exist_ok=True)
    echo = _echo_config(cfg)
    if cfg.experiment == "spectrum-map":
        summary = _spectrum_map(cfg)
        summary.files.append(echo)
        return summary
    if cfg.experiment == "power-bound":
        summary = _power_bound(cfg)
        summary.files.append(echo)
        return summary

    cells = [(tok, alpha) for tok in cfg.gammas for alpha in cfg.alphas]
    results = _execute_cells(cfg, cells)
    files, summary_rows = _write_cell_files(cfg, cells, results)
    spath = os.path.join(cfg.out, "summary.csv")
    _write_csv(spath, cfg.header(), _SUMMARY_COLUMNS, summary_rows)
    files.extend([spath, echo])
    divergent = sum(row["divergent"] for row in summary_rows)
    return RunSummary(cfg.experiment, cfg.out, summary_rows, files, divergent)


# ---------------------------------------------------------------------------
# CLI

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdmlab",
        description="Momentum-SGD experiment sweeps (CSV artifacts).",
    )
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS,
                        help="experiment to run (may come from --config instead)")
    parser.add_argument("--config", help="JSON file of config keys (flags win)")
    parser.add_argument("--problem", choices=["quadratic", "logistic"])
    parser.add_argument("--n", type=int, help="sample count")
    parser.add_argument("--dim", type=int, help="parameter dimension")
    parser.add_argument("--rho", type=float, help="quadratic curvature scale")
    parser.add_argument("--shift", type=float, help="quadratic diagonal shift")
    parser.add_argument("--nu", type=float, help="logistic l2 penalty")
    parser.add_argument("--gamma", nargs="+",
                        help="momentum weights: numbers in [0,1) and/or 'adaptive'")
    parser.add_argument("--alpha", nargs="+", type=float, help="step sizes")
    batch_group = parser.add_mutually_exclusive_group()
    batch_group.add_argument("--batch", type=int, help="batch size")
    batch_group.add_argument("--batch-frac", type=float,
                             help="batch size as a fraction of n")
    parser.add_argument("--iters", type=int, help="steps per run")
    parser.add_argument("--n0", help="burn-in: integer or 'auto'")
    parser.add_argument("--reps", type=int, help="replications per cell")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--paper-scale", action="store_true",
                        help="full-size sweep (n=20000, reps=200)")
    parser.add_argument("--threads", type=int,
                        help=f"worker processes (default ${THREADS_ENV_VAR} or 1)")
    parser.add_argument("--offset", type=float,
                        help="initial point scale: x* + offset * N(0, I)")
    parser.add_argument("--mu", type=float, help="spectrum-map smallest curvature")
    parser.add_argument("--ell", type=float, help="spectrum-map largest curvature")
    parser.add_argument("--grid", type=int, help="spectrum-map grid side")
    parser.add_argument("--alpha-range", nargs=2, type=float, metavar=("LO", "HI"))
    parser.add_argument("--gamma-range", nargs=2, type=float, metavar=("LO", "HI"))
    return parser


_CONFIG_KEYS = {
    "experiment", "problem", "n", "dim", "rho", "shift", "nu", "gammas",
    "alphas", "batch", "batch_frac", "iters", "n0", "reps", "seed", "out",
    "paper_scale", "threads", "offset", "mu", "ell", "grid", "alpha_range",
    "gamma_range",
}


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    aliases = {"gamma": "gammas", "alpha": "alphas"}
    out = {}
    for key, val in data.items():
        key = aliases.get(key, key)
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r} in {path}")
        out[key] = val
    return out


def _coerce_gammas(raw) -> list:
    if isinstance(raw, (str, float, int)):
        raw = [raw]
    toks = []
    for g in raw:
        if isinstance(g, str) and g.strip().lower() == "adaptive":
            toks.append("adaptive")
            continue
        try:
            val = float(g)
        except (TypeError, ValueError):
            raise ValueError(
                f"gamma expects numbers in [0,1) or 'adaptive', got {g!r}"
            ) from None
        if not 0.0 <= val < 1.0:
            raise ValueError("gamma must lie in [0,1)")
        toks.append(f"{val:g}")
    return toks


def parse_config(argv=None) -> ExperimentConfig:
    """Resolve CLI flags, optional JSON config file, and defaults into an
    ExperimentConfig (precedence: flags, then file, then defaults)."""
    args = _build_parser().parse_args(argv)
    merged: dict = {}
    if args.config:
        merged.update(_load_config_file(args.config))
    cli = {
        "experiment": args.experiment, "problem": args.problem, "n": args.n,
        "dim": args.dim, "rho": args.rho, "shift": args.shift, "nu": args.nu,
        "gammas": args.gamma, "alphas": args.alpha, "batch": args.batch,
        "batch_frac": args.batch_frac, "iters": args.iters, "n0": args.n0,
        "reps": args.reps, "seed": args.seed, "out": args.out,
        "threads": args.threads, "offset": args.offset, "mu": args.mu,
        "ell": args.ell, "grid": args.grid, "alpha_range": args.alpha_range,
        "gamma_range": args.gamma_range,
    }
    merged.update({k: v for k, v in cli.items() if v is not None})
    if args.paper_scale:
        merged["paper_scale"] = True

    experiment = merged.get("experiment")
    if experiment is None:
        raise ValueError("no experiment given (positional argument or config file)")
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")

    scale = _PAPER if merged.get("paper_scale") else _DESK
    n = int(merged.get("n", scale["n"]))
    reps = int(merged.get("reps", scale["reps"]))
    problem = merged.get("problem", "quadratic")
    if "batch" in merged and "batch_frac" in merged:
        raise ValueError("give either batch or batch_frac, not both")
    if "batch" in merged:
        batch = int(merged["batch"])
    else:
        batch = max(1, int(round(float(merged.get("batch_frac", 0.2)) * n)))
    if batch < 1:
        raise ValueError("batch must be >= 1")

    gammas = _coerce_gammas(
        merged.get("gammas", _GAMMA_DEFAULT.get(experiment, ["0"]))
    )
    if "alphas" in merged:
        alphas = [float(a) for a in np.atleast_1d(merged["alphas"])]
    elif experiment == "sensitivity":
        alphas = list(_DYADIC_ALPHAS)
    else:
        alphas = [0.5] if problem == "logistic" else [0.001]

    n0_raw = merged.get("n0", "auto" if experiment in ("averaged", "coverage") else 0)
    if isinstance(n0_raw, str) and n0_raw.strip().lower() == "auto":
        n0 = "auto"
    else:
        try:
            n0 = int(n0_raw)
        except (TypeError, ValueError):
            raise ValueError(
                f"n0 expects an integer or 'auto', got {n0_raw!r}"
            ) from None

    threads = merged.get("threads")
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV_VAR, "1"))

    alpha_range = merged.get("alpha_range", (0.02, 0.8))
    gamma_range = merged.get("gamma_range", (0.0, 0.6))

    return ExperimentConfig(
        experiment=experiment,
        problem=problem,
        n=n,
        dim=int(merged.get("dim", 10)),
        rho=float(merged.get("rho", 1.0)),
        shift=float(merged.get("shift", 10.0)),
        nu=float(merged.get("nu", 0.0)),
        gammas=gammas,
        alphas=alphas,
        batch=batch,
        iters=int(merged.get("iters", _ITERS_DEFAULT[experiment])),
        n0=n0,
        reps=reps,
        seed=int(merged.get("seed", 42)),
        out=str(merged.get("out", "sgdmlab_out")),
        paper_scale=bool(merged.get("paper_scale", False)),
        threads=int(threads),
        offset=float(merged.get("offset", 1.0)),
        mu=float(merged.get("mu", 1.0)),
        ell=float(merged.get("ell", 5.0)),
        grid=int(merged.get("grid", 200)),
        alpha_range=(float(alpha_range[0]), float(alpha_range[1])),
        gamma_range=(float(gamma_range[0]), float(gamma_range[1])),
    )


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ValueError as exc:
        print(f"error: {exc}")
        return 2
    summary = run_experiment(cfg)
    print(
        f"{summary.experiment}: {len(summary.cells)} cell(s), "
        f"{summary.divergent_total} divergent run(s), "
        f"artifacts in {summary.out_dir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
