"""Command-line front end: regime classification, mild-solution runs with
verification artifacts, the kernel property suite, and parameter sweeps.

Exit codes: 0 success, 1 configuration or usage error, 2 solver divergence,
3 step rejection.  ``FRACSYS_THREADS`` caps sweep workers.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import verify
from .config import ConfigError, ExperimentConfig, parse_config, sha256_file, write_manifest
from .exponents import (DeltaOutsideWindow, REGIME_NO_GUARANTEE, SystemParams, classify)
from .kernels import (KernelSpec, SpectralGrid, check_monotone_domination, check_scaling,
                      eval_density_grid, grid_mass, lp_norm_slope, semigroup_residual,
                      tail_mass_bound)
from .solver import solve, write_snapshot

SUMMARY_COLUMNS = ("run_id", "regime", "sup_scaled_u1", "sup_scaled_u2",
                   "slope_u1", "slope_u2", "env_k", "env_c", "verdict")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _worker_count() -> int:
    env = os.environ.get("FRACSYS_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# regime

def cmd_regime(args) -> int:
    cfg = parse_config(args.config)
    delta = args.delta if args.delta is not None else cfg.delta
    report = classify(cfg.params, delta=delta)
    for key, value in report.flat_items():
        print(f"{key} = {value}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        items = report.flat_items()
        path = out / "regime.csv"
        with open(path, "w", newline="") as fh:
            fh.write(",".join(k for k, _ in items) + "\n")
            fh.write(",".join(v for _, v in items) + "\n")
        print(f"# wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# solve

def _append_summary(path: Path, row: dict):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        if new:
            fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        fh.write(",".join(_fmt(row.get(col)) for col in SUMMARY_COLUMNS) + "\n")


def run_experiment(cfg: ExperimentConfig, out_base: Path, delta=None,
                   append_summary: bool = True):
    """Classify, solve, verify and write all artifacts for one experiment.

    Returns (exit_code, summary_row, solve_result).
    """
    delta = delta if delta is not None else cfg.delta
    report = classify(cfg.params, delta=delta)
    run_dir = out_base / cfg.run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    exponents = report if report.s is not None else None
    result = solve(cfg.run_config(), exponents)

    artifacts = {}
    norms_path = run_dir / "norms.csv"
    result.norms.write_csv(norms_path)
    artifacts["norms.csv"] = sha256_file(norms_path)
    for idx, snap in enumerate(result.snapshots):
        name = f"snap_{idx:06d}.bin"
        write_snapshot(run_dir / name, snap, cfg.grid, cfg.params)
        artifacts[name] = sha256_file(run_dir / name)

    lines = [f"{k} = {v}" for k, v in report.flat_items()]
    lines.append(f"status = {result.status.kind}")
    lines.append(f"status_time = {_fmt(result.status.time)}")
    for key, value in sorted(result.diagnostics.items()):
        lines.append(f"{key} = {_fmt(value) if isinstance(value, float) else value}")

    row = {"run_id": cfg.run_id, "regime": report.regime, "verdict": ""}
    verdicts = []
    if result.status.completed and exponents is not None:
        try:
            decays = verify.decay_report(result.norms, report)
            for d in decays:
                lines.append(f"decay_sup_scaled_u{d.component} = {_fmt(d.sup_scaled)}")
                lines.append(f"decay_slope_u{d.component} = {_fmt(d.fitted_slope)}")
                lines.append(f"decay_slope_target_u{d.component} = {_fmt(d.slope_target)}")
                lines.append(f"decay_verdict_u{d.component} = {str(d.verdict).lower()}")
                verdicts.append(d.verdict)
            row.update(sup_scaled_u1=decays[0].sup_scaled, sup_scaled_u2=decays[1].sup_scaled,
                       slope_u1=decays[0].fitted_slope, slope_u2=decays[1].fitted_slope)
        except verify.InsufficientData as exc:
            lines.append(f"decay_skipped = {exc}")
        try:
            for b in verify.linf_bound_check(result.norms, cfg.params, report):
                lines.append(f"linf_exponent_u{b.component} = {_fmt(b.exponent)}")
                lines.append(f"linf_max_excess_u{b.component} = {_fmt(b.max_excess)}")
                lines.append(f"linf_verdict_u{b.component} = {str(b.verdict).lower()}")
                verdicts.append(b.verdict)
        except verify.RegimeMismatch:
            pass
        if report.theorem3_applicable and cfg.init.kind == "stable_kernel":
            try:
                envs = verify.selfsimilar_envelope_check(result.snapshots, cfg.params,
                                                         cfg.init.epsilon, cfg.grid)
                for e in envs:
                    lines.append(f"env_k_u{e.component} = {_fmt(e.fitted_k)}")
                    lines.append(f"env_c_u{e.component} = {_fmt(e.fitted_c)}")
                    lines.append(f"env_violation_u{e.component} = {_fmt(e.max_ratio_violation)}")
                    lines.append(f"env_verdict_u{e.component} = {str(e.verdict).lower()}")
                    verdicts.append(e.verdict)
                row.update(env_k=envs[0].fitted_k, env_c=envs[0].fitted_c)
            except verify.InsufficientData as exc:
                lines.append(f"envelope_skipped = {exc}")
    if verdicts:
        row["verdict"] = str(all(verdicts)).lower()

    report_path = run_dir / "verification.txt"
    report_path.write_text("\n".join(lines) + "\n")
    artifacts["verification.txt"] = sha256_file(report_path)
    write_manifest(run_dir / "manifest.txt", cfg, artifacts)
    if append_summary:
        _append_summary(out_base / "summary.csv", row)

    if result.status.kind == "diverged":
        return 2, row, result
    if result.status.kind == "step_rejected":
        return 3, row, result
    return 0, row, result


def cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    if args.seed_id:
        cfg = replace(cfg, run_id=args.seed_id)
    out_base = Path(args.out) if args.out else Path(cfg.output_dir)
    code, row, result = run_experiment(cfg, out_base, delta=args.delta)
    print(f"run_id = {cfg.run_id}")
    print(f"regime = {row['regime']}")
    print(f"status = {result.status.kind}")
    print(f"status_time = {_fmt(result.status.time)}")
    if result.status.kind == "diverged":
        print(f"# divergence signal near t = {_fmt(result.status.time)} (exploratory; not a blow-up proof)")
    return code


# ---------------------------------------------------------------------------
# verify-kernel

def _kernel_checks(alpha: float, dim: int):
    """Property suite for one (alpha, dim): yields (name, value, bound, ok)."""
    quad = alpha not in (1.0, 2.0)
    tol_ident = 1e-6 if quad else 1e-12
    spec = KernelSpec(alpha, dim)
    radii = np.linspace(0.0, 8.0, 33)

    err = check_scaling(spec, 2.0, 0.7, radii)
    yield "scaling_rel_err", err, tol_ident, err <= tol_ident

    _, margin = check_monotone_domination(spec, 1.5, 0.6, radii)
    yield "domination_min_margin", margin, -1e-12, margin >= -1e-12

    n = {1: 512, 2: 128, 3: 64}[dim]
    L = {1: 30.0, 2: 20.0, 3: 15.0}[dim]
    grid = SpectralGrid(dim, n, L)
    res = semigroup_residual(spec, 1.0, 0.5, grid)
    yield "semigroup_residual", res, 1e-6, res <= 1e-6

    fld = eval_density_grid(spec, 1.0, grid)
    mass_err = abs(grid_mass(fld, grid) - 1.0)
    mass_tol = 2.0 * tail_mass_bound(spec, 1.0, L) + 1e-9
    yield "mass_err", mass_err, mass_tol, mass_err <= mass_tol

    peak_idx = (n // 2,) * dim
    unimodal = float(fld.max()) <= float(fld[peak_idx]) * (1.0 + 1e-12)
    yield "unimodal", 0.0 if unimodal else 1.0, 0.0, unimodal
    mirrored = np.roll(np.flip(fld), 1, axis=tuple(range(dim)))
    sym = float(np.abs(fld - mirrored).max()) / float(fld.max())
    yield "symmetry_rel_err", sym, 1e-14, sym <= 1e-14

    slope = lp_norm_slope(spec, 2.0, [1.0, 2.0, 4.0, 8.0])
    target = -(dim / alpha) * 0.5
    rel = abs(slope - target) / abs(target)
    yield "l2_slope_rel_err", rel, 5e-3, rel <= 5e-3


def cmd_verify_kernel(args) -> int:
    alphas = [float(v) for v in args.alpha.split(",") if v] if args.alpha else []
    dims = [int(v) for v in args.dims.split(",") if v] if args.dims else []
    failures = 0
    total = 0
    for alpha in alphas:
        for dim in dims:
            for name, value, bound, ok in _kernel_checks(alpha, dim):
                total += 1
                status = "PASS" if ok else "FAIL"
                if not ok:
                    failures += 1
                print(f"[{status}] alpha={alpha:g} d={dim} {name} = {value:.6e} (bound {bound:.6e})")
    print(f"# {total - failures}/{total} checks passed")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# sweep

_SWEEP_PAIRS = {"alpha", "beta", "rho", "sigma"}
_SWEEP_SINGLES = {"alpha1", "alpha2", "beta1", "beta2", "rho1", "rho2",
                  "sigma1", "sigma2", "dim", "epsilon", "delta"}


def _apply_sweep(cfg: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    p = cfg.params
    if name in _SWEEP_PAIRS:
        kw = {name: (value, value)}
        params = SystemParams(**{**_params_kw(p), **kw})
        return replace(cfg, params=params)
    if name in ("alpha1", "alpha2", "beta1", "beta2", "rho1", "rho2", "sigma1", "sigma2"):
        base = name[:-1]
        idx = int(name[-1]) - 1
        pair = list(getattr(p, base))
        pair[idx] = value
        params = SystemParams(**{**_params_kw(p), base: tuple(pair)})
        return replace(cfg, params=params)
    if name == "dim":
        params = SystemParams(**{**_params_kw(p), "dim": int(value)})
        if int(value) <= 3:
            # classification works in any dimension; only grids are capped
            return replace(cfg, params=params,
                           grid=SpectralGrid(int(value), cfg.grid.n, cfg.grid.half_length))
        return replace(cfg, params=params)
    if name == "epsilon":
        return replace(cfg, init=replace(cfg.init, epsilon=value))
    if name == "delta":
        return replace(cfg, delta=value)
    raise ConfigError(f"unsupported sweep parameter {name!r}")


def _params_kw(p: SystemParams) -> dict:
    return {"alpha": p.alpha, "beta": p.beta, "rho": p.rho, "sigma": p.sigma, "dim": p.dim}


SWEEP_COLUMNS = ("index", "sweep_param", "sweep_value",
                 "alpha1", "alpha2", "beta1", "beta2", "rho1", "rho2",
                 "sigma1", "sigma2", "dim",
                 "window_lo", "window_hi", "delta", "regime", "theorem3",
                 "status", "sup_scaled_u1", "sup_scaled_u2",
                 "slope_u1", "slope_u2", "env_k", "env_c", "verdict", "error")


def sweep_point(task) -> dict:
    """One sweep point; runs in a worker process when dynamics are on."""
    idx, cfg, name, value, with_dynamics, out_base = task
    row = {"index": idx, "sweep_param": name, "sweep_value": value, "error": ""}
    try:
        point_cfg = _apply_sweep(cfg, name, value)
        point_cfg = replace(point_cfg, run_id=f"{cfg.run_id}-p{idx:04d}")
        p = point_cfg.params
        row.update(alpha1=p.alpha[0], alpha2=p.alpha[1], beta1=p.beta[0], beta2=p.beta[1],
                   rho1=p.rho[0], rho2=p.rho[1], sigma1=p.sigma[0], sigma2=p.sigma[1],
                   dim=p.dim)
        report = classify(p, delta=point_cfg.delta)
        row.update(window_lo=report.window.lo, window_hi=report.window.hi,
                   delta=report.delta, regime=report.regime,
                   theorem3=str(report.theorem3_applicable).lower())
        if with_dynamics and report.regime != REGIME_NO_GUARANTEE:
            # workers never touch the shared summary; the sweep CSV is merged
            # by the coordinator
            code, run_row, _ = run_experiment(point_cfg, Path(out_base),
                                              append_summary=False)
            row["status"] = {0: "completed", 2: "diverged", 3: "step_rejected"}[code]
            for key in ("sup_scaled_u1", "sup_scaled_u2", "slope_u1", "slope_u2",
                        "env_k", "env_c", "verdict"):
                row[key] = run_row.get(key)
    except Exception as exc:  # single-point failure must not kill the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _row_text(row: dict) -> str:
    return ",".join(_fmt(row.get(col)) for col in SWEEP_COLUMNS) + "\n"


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if args.seed_id:
        cfg = replace(cfg, run_id=args.seed_id)
    if not cfg.sweep_param or not cfg.sweep_values:
        raise ConfigError(f"{args.config}: sweep needs sweep_param and sweep_values")
    if cfg.sweep_param not in (_SWEEP_PAIRS | _SWEEP_SINGLES):
        raise ConfigError(f"unsupported sweep parameter {cfg.sweep_param!r}")
    out_base = Path(args.out) if args.out else Path(cfg.output_dir)
    points_dir = out_base / "points"
    points_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for idx, value in enumerate(cfg.sweep_values):
        point_path = points_dir / f"point_{idx:04d}.csv"
        if point_path.exists():
            continue  # resumable: keep finished points
        tasks.append((idx, cfg, cfg.sweep_param, value, args.with_dynamics, str(out_base)))

    if tasks:
        if args.with_dynamics and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(_worker_count(), len(tasks))) as pool:
                rows = list(pool.map(sweep_point, tasks))
        else:
            rows = [sweep_point(t) for t in tasks]
        for task, row in zip(tasks, rows):
            (points_dir / f"point_{task[0]:04d}.csv").write_text(_row_text(row))

    merged = out_base / "sweep.csv"
    with open(merged, "w", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for idx in range(len(cfg.sweep_values)):
            fh.write((points_dir / f"point_{idx:04d}.csv").read_text())
    print(f"# wrote {merged} ({len(cfg.sweep_values)} points)")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracsys",
                                     description="numerical laboratory for weakly coupled "
                                                 "fractional diffusion systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_regime = sub.add_parser("regime", help="classify a parameter set")
    p_regime.add_argument("--config", required=True)
    p_regime.add_argument("--out", default="")
    p_regime.add_argument("--delta", type=float, default=None)
    p_regime.set_defaults(func=cmd_regime)

    p_solve = sub.add_parser("solve", help="run the mild-solution solver")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default="")
    p_solve.add_argument("--delta", type=float, default=None)
    p_solve.add_argument("--seed-id", default="", dest="seed_id")
    p_solve.set_defaults(func=cmd_solve)

    p_vk = sub.add_parser("verify-kernel", help="run the kernel property suite")
    p_vk.add_argument("--alpha", default="1,1.5,2")
    p_vk.add_argument("--dims", default="1,2")
    p_vk.set_defaults(func=cmd_verify_kernel)

    p_sweep = sub.add_parser("sweep", help="classify (and optionally run) a parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default="")
    p_sweep.add_argument("--with-dynamics", action="store_true", dest="with_dynamics")
    p_sweep.add_argument("--seed-id", default="", dest="seed_id")
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DeltaOutsideWindow, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
