"""Experiment runner binding every experiment to reproducible file outputs.

Subcommands: simulate, phase-scan, stationary-points, dual-basin, nse-verify,
ou-check.  Each takes a strict JSON config (--config, unknown keys rejected),
an optional --seed override and an optional --out path prefix.  Exit codes:
0 success, 2 configuration error, 3 numerical blow-up, 4 verification
failure.  Floats are written with 17 significant digits so every value
round-trips exactly; identical (config, seed) produce byte-identical files
regardless of the worker count (set via the environment variable
MINEA_ERGO_WORKERS only).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .errors import (
    BlowUpError,
    ConfigError,
    InvalidParameterError,
    InvalidStateError,
)
from .measure_lab import (
    EmpiricalMeasure1D,
    dual_basin_experiment,
    iter_phase_scan,
    ks_critical_value,
    ks_distance,
    point_mass_distance,
)
from .minea_core import (
    MineaParams,
    drift,
    simulate,
    stationary_points,
    uniqueness_regime,
)
from .noise import make_stream, ou_stationary_law, ou_step
from .spectral_nse import (
    NseParams,
    eigenmode_consistency,
    identity_suite,
    random_field,
    small_noise_convergence,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4
EXIT_INTERRUPT = 130

# One-step deviation threshold of the forced-amplitude consistency check,
# as a multiple of dt (first-order noise-scale mismatch of the scheme).
CONSISTENCY_DT_FACTOR = 5.0

_FLOAT_FMT = "%.17g"

_MISSING = object()


def _fmt(x) -> str:
    return _FLOAT_FMT % float(x)


def _take(section: dict, where: str, key: str, conv, default=_MISSING):
    if key in section:
        raw = section.pop(key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"{where}.{key}: {err}") from None
    if default is _MISSING:
        raise ConfigError(f"missing required config key {where}.{key}")
    return default


def _done(section: dict, where: str) -> None:
    if section:
        raise ConfigError(f"unknown config keys in {where}: {', '.join(sorted(section))}")


def _section(cfg: dict, key: str) -> dict:
    raw = cfg.pop(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {key!r} must be a JSON object")
    return dict(raw)


def _real(x) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {x!r}")
    return x


def _positive(x) -> float:
    x = _real(x)
    if x <= 0:
        raise ValueError(f"expected a positive number, got {x}")
    return x


def _nonneg(x) -> float:
    x = _real(x)
    if x < 0:
        raise ValueError(f"expected a nonnegative number, got {x}")
    return x


def _unit_interval(x) -> float:
    x = _real(x)
    if not 0 <= x < 1:
        raise ValueError(f"expected a number in [0, 1), got {x}")
    return x


def _int_value(x) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValueError(f"expected an integer, got {x!r}")
    return x


def _count(x) -> int:
    x = _int_value(x)
    if x < 1:
        raise ValueError(f"expected a count >= 1, got {x}")
    return x


def _seed_value(x) -> int:
    x = _int_value(x)
    if x < 0:
        raise ValueError(f"expected a nonnegative seed, got {x}")
    return x


def _triple(x) -> tuple[float, float, float]:
    if not isinstance(x, (list, tuple)) or len(x) != 3:
        raise ValueError(f"expected a list of three numbers, got {x!r}")
    return tuple(_real(c) for c in x)


def _int_pair(x) -> tuple[int, int]:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ValueError(f"expected a list of two integers, got {x!r}")
    return tuple(_int_value(c) for c in x)


def _scheme(x) -> str:
    if x not in ("em", "exp"):
        raise ValueError(f"scheme must be 'em' or 'exp', got {x!r}")
    return x


def _real_list(x) -> list[float]:
    if not isinstance(x, (list, tuple)):
        raise ValueError(f"expected a list of numbers, got {x!r}")
    return [_real(c) for c in x]


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return dict(cfg)


def _minea_params(cfg: dict) -> MineaParams:
    sec = _section(cfg, "system")
    lam = _take(sec, "system", "lambda", _triple)
    kappa = _take(sec, "system", "kappa", _real)
    sigma = _take(sec, "system", "sigma", _nonneg, 0.0)
    _done(sec, "system")
    try:
        return MineaParams(lam[0], lam[1], lam[2], kappa, sigma)
    except InvalidParameterError as err:
        raise ConfigError(str(err)) from None


def _nse_params(cfg: dict) -> NseParams:
    sec = _section(cfg, "system")
    mu = _take(sec, "system", "mu", _positive)
    forced = _take(sec, "system", "forced_mode", _int_pair, (1, 0))
    kappa = _take(sec, "system", "kappa", _real)
    sigma = _take(sec, "system", "sigma", _nonneg, 0.0)
    n_trunc = _take(sec, "system", "truncation", _count, 8)
    _done(sec, "system")
    try:
        return NseParams(mu=mu, forced_mode=forced, kappa=kappa, sigma=sigma, n_trunc=n_trunc)
    except InvalidParameterError as err:
        raise ConfigError(str(err)) from None


def _resolve_prefix(args, cfg: dict) -> str:
    cfg_out = cfg.pop("out", None)
    if cfg_out is not None and not isinstance(cfg_out, str):
        raise ConfigError("'out' must be a string path prefix")
    if args.out is not None:
        return args.out
    if cfg_out is not None:
        return cfg_out
    return args.command.replace("-", "_")


def _open_out(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _write_csv(path: str, header: list[str], rows) -> None:
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: str, obj) -> None:
    with _open_out(path) as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def cmd_simulate(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    params = _minea_params(cfg)
    sim = _section(cfg, "sim")
    t_end = _take(sim, "sim", "t_end", _positive, 100.0)
    dt = _take(sim, "sim", "dt", _positive, 1e-3)
    scheme = _take(sim, "sim", "scheme", _scheme, "exp")
    seed = _take(sim, "sim", "seed", _seed_value, 0)
    stride = _take(sim, "sim", "record_stride", _count, 1)
    _done(sim, "sim")
    initial = _take(cfg, "config", "initial", _triple, (0.0, 1.0, 1.0))
    _done(cfg, "config")
    if args.seed is not None:
        seed = args.seed
    traj = simulate(
        params, initial, t_end, dt, scheme, stream=make_stream(seed, 0), record_stride=stride
    )
    path = f"{prefix}_trajectory.csv"
    x = traj.x_series()
    rows = (
        [_fmt(t), _fmt(s[0]), _fmt(s[1]), _fmt(s[2]), _fmt(xv)]
        for t, s, xv in zip(traj.times, traj.states, x)
    )
    _write_csv(path, ["t", "u1", "u2", "u3", "X"], rows)
    print(f"simulate: wrote {path} ({traj.times.size} rows, final X = {x[-1]:.3g})")
    return EXIT_OK


def cmd_stationary_points(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    lam = _take(cfg, "config", "lambda", _triple)
    kappa = _take(cfg, "config", "kappa", _real)
    _done(cfg, "config")
    try:
        params = MineaParams(lam[0], lam[1], lam[2], kappa, 0.0)
    except InvalidParameterError as err:
        raise ConfigError(str(err)) from None
    stat = stationary_points(params)
    branches = []
    for branch in stat.branches:
        entry = branch.to_dict()
        entry["residuals"] = [
            float(np.abs(drift(params, w)).max()) for w in branch.witnesses
        ]
        branches.append(entry)
    report = {
        "lambda": list(lam),
        "kappa": kappa,
        "threshold": params.uniqueness_threshold,
        "regime": uniqueness_regime(params).regime,
        "branch_count": len(branches),
        "branches": branches,
        "max_drift_residual": stat.max_drift_residual(),
    }
    path = f"{prefix}_stationary_points.json"
    _write_json(path, report)
    print(f"stationary-points: wrote {path} ({len(branches)} branches)")
    return EXIT_OK


def cmd_phase_scan(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    lam = _take(cfg, "config", "lambda", _triple)
    kappa_grid = _take(cfg, "config", "kappa_grid", _real_list)
    sigma_grid = _take(cfg, "config", "sigma_grid", _real_list)
    initial = _take(cfg, "config", "initial", _triple, (0.0, 1.0, 1.0))
    sim = _section(cfg, "sim")
    t_end = _take(sim, "sim", "t_end", _positive, 100.0)
    dt = _take(sim, "sim", "dt", _positive, 1e-3)
    seed = _take(sim, "sim", "seed", _seed_value, 0)
    n_traj = _take(sim, "sim", "n_traj", _count, 500)
    burn_in = _take(sim, "sim", "burn_in_frac", _unit_interval, 0.5)
    _done(sim, "sim")
    _done(cfg, "config")
    if args.seed is not None:
        seed = args.seed
    if not kappa_grid or not sigma_grid:
        raise ConfigError("kappa_grid and sigma_grid must be nonempty")
    rows = []
    interrupted = False
    try:
        for row in iter_phase_scan(
            lam, kappa_grid, sigma_grid, t_end, dt, n_traj, seed, v=initial, burn_in_frac=burn_in
        ):
            rows.append(row)
    except KeyboardInterrupt:
        interrupted = True
    path = f"{prefix}_phase_scan.csv"
    _write_csv(
        path,
        ["kappa", "sigma", "regime", "ks_u1", "timeavg_X", "e55_bound", "verdict"],
        (
            [
                _fmt(r.kappa),
                _fmt(r.sigma),
                r.regime,
                _fmt(r.ks_u1),
                _fmt(r.timeavg_x),
                _fmt(r.e55_bound),
                r.verdict,
            ]
            for r in rows
        ),
    )
    total = len(kappa_grid) * len(sigma_grid)
    print(f"phase-scan: wrote {path} ({len(rows)}/{total} cells)")
    if interrupted:
        return EXIT_INTERRUPT
    if rows and all(r.verdict == "error" for r in rows):
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_dual_basin(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    params = _minea_params(cfg)
    sim = _section(cfg, "sim")
    t_end = _take(sim, "sim", "t_end", _positive, 100.0)
    dt = _take(sim, "sim", "dt", _positive, 1e-3)
    scheme = _take(sim, "sim", "scheme", _scheme, "exp")
    seed = _take(sim, "sim", "seed", _seed_value, 0)
    n_traj = _take(sim, "sim", "n_traj", _count, 500)
    _done(sim, "sim")
    _done(cfg, "config")
    if args.seed is not None:
        seed = args.seed
    result = dual_basin_experiment(params, t_end, dt, n_traj, seed, scheme=scheme)
    report = {
        "n_traj": n_traj,
        "t_end": t_end,
        "dt": dt,
        "seed": seed,
        "mean_a": result.mean_a,
        "mean_b": result.mean_b,
        "gaussian_mean": params.kappa / params.lam1,
        "ks_between": result.ks_between,
        "critical_value": result.critical_value,
        "separated": result.separated,
    }
    path = f"{prefix}_dual_basin.json"
    _write_json(path, report)
    for tag, law in (("a", result.law_a), ("b", result.law_b)):
        _write_csv(f"{prefix}_basin_{tag}.csv", ["u1"], ([_fmt(s)] for s in law.samples))
    print(
        f"dual-basin: wrote {path} (mean_a = {result.mean_a:.4g}, "
        f"mean_b = {result.mean_b:.4g}, separated = {result.separated})"
    )
    if args.expect_separation and not result.separated:
        print("dual-basin: expected separation but the endpoint laws agree", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_nse_verify(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    params = _nse_params(cfg)
    ident = _section(cfg, "identities")
    n_fields = _take(ident, "identities", "n_fields", _count, 100)
    ident_seed = _take(ident, "identities", "seed", _seed_value, 0)
    tolerance = _take(ident, "identities", "tolerance", _positive, 1e-10)
    _done(ident, "identities")
    cons = _section(cfg, "consistency")
    amplitude = _take(cons, "consistency", "amplitude", _real, 1.0)
    cons_t_end = _take(cons, "consistency", "t_end", _positive, 10.0)
    cons_dt = _take(cons, "consistency", "dt", _positive, 1e-3)
    cons_seed = _take(cons, "consistency", "seed", _seed_value, 0)
    _done(cons, "consistency")
    corruption = _take(cfg, "config", "inject_corruption", _real, 0.0)
    small_raw = cfg.pop("small_noise", None)
    if small_raw is not None and not isinstance(small_raw, dict):
        raise ConfigError("config section 'small_noise' must be a JSON object")
    _done(cfg, "config")
    if args.seed is not None:
        ident_seed = cons_seed = args.seed
    report_identities = identity_suite(
        params.n_trunc,
        n_fields=n_fields,
        seed=ident_seed,
        tolerance=tolerance,
        corruption=corruption,
    )
    threshold = CONSISTENCY_DT_FACTOR * cons_dt
    try:
        consistency = eigenmode_consistency(
            params, amplitude, cons_t_end, cons_dt, make_stream(cons_seed, 0)
        )
        consistency_report = {
            "max_deviation": consistency.max_deviation,
            "off_mode_energy_max": consistency.off_mode_energy_max,
            "dt": cons_dt,
            "threshold": threshold,
            "pass": consistency.max_deviation <= threshold,
        }
    except InvalidStateError as err:
        consistency_report = {"error": str(err), "dt": cons_dt, "threshold": threshold, "pass": False}
    small_report = None
    if small_raw is not None:
        small = dict(small_raw)
        sn_t_end = _take(small, "small_noise", "t_end", _positive, 50.0)
        sn_dt = _take(small, "small_noise", "dt", _positive, 0.02)
        sn_traj = _take(small, "small_noise", "n_traj", _count, 20)
        sn_seed = _take(small, "small_noise", "seed", _seed_value, 0)
        init_seed = _take(small, "small_noise", "initial_seed", _seed_value, 1)
        _done(small, "small_noise")
        if args.seed is not None:
            sn_seed = args.seed
        v = random_field(params.n_trunc, make_stream(init_seed, 0).generator(), unit_h_norm=True)
        sn = small_noise_convergence(params, v, sn_t_end, sn_dt, sn_traj, sn_seed)
        small_report = {
            "offmode_energy_initial": float(sn.offmode_energy_mean[0]),
            "offmode_energy_final": float(sn.offmode_energy_mean[-1]),
            "total_energy_final": float(sn.total_energy_mean[-1]),
            "ks_forced_mode": sn.ks_forced_mode,
            "ks_critical": sn.ks_critical,
            "forced_mean_analytic": sn.forced_mean_analytic,
            "forced_variance_analytic": sn.forced_variance_analytic,
        }
    overall = report_identities.passed and consistency_report["pass"]
    report = {
        "truncation": params.n_trunc,
        "identities": report_identities.to_dict(),
        "eigenmode_consistency": consistency_report,
        "small_noise": small_report,
        "pass": overall,
    }
    path = f"{prefix}_nse_verify.json"
    _write_json(path, report)
    print(
        f"nse-verify: wrote {path} (identities max violation = "
        f"{report_identities.max_violation:.3g}, pass = {overall})"
    )
    return EXIT_OK if overall else EXIT_VERIFY


def cmd_ou_check(args, cfg: dict) -> int:
    prefix = _resolve_prefix(args, cfg)
    lam1 = _take(cfg, "config", "lam1", _positive)
    kappa = _take(cfg, "config", "kappa", _real)
    sigma = _take(cfg, "config", "sigma", _nonneg)
    n = _take(cfg, "config", "n", _count, 100_000)
    seed = _take(cfg, "config", "seed", _seed_value, 0)
    _done(cfg, "config")
    if args.seed is not None:
        seed = args.seed
    law = ou_stationary_law(lam1, kappa, sigma)
    gen = make_stream(seed, 0).generator()
    start = law.mean + law.std * gen.standard_normal(n)
    samples = ou_step(start, 1.0, lam1, kappa, sigma, gen.standard_normal(n))
    emp = EmpiricalMeasure1D.from_samples(samples)
    report = {
        "analytic": {"mean": law.mean, "variance": law.variance},
        "empirical": {"mean": emp.mean(), "variance": emp.variance()},
        "n": n,
        "seed": seed,
        "degenerate": law.variance == 0.0,
    }
    if law.variance > 0:
        ks = ks_distance(emp, law)
        critical = ks_critical_value(n, alpha=0.01)
        passed = ks < critical
        report.update({"ks": ks, "ks_critical": critical, "pass": passed})
    else:
        distance = point_mass_distance(emp, law.mean)
        passed = distance == 0.0
        report.update({"point_mass_distance": distance, "pass": passed})
    path = f"{prefix}_ou_check.json"
    _write_json(path, report)
    print(
        f"ou-check: wrote {path} (empirical mean = {emp.mean():.6g}, "
        f"variance = {emp.variance():.6g}, pass = {passed})"
    )
    return EXIT_OK if passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minea-ergo",
        description="Run the invariant-measure experiments and write CSV/JSON outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("simulate", cmd_simulate, "integrate one trajectory to CSV"),
        ("phase-scan", cmd_phase_scan, "classify a (kappa, sigma) grid to CSV"),
        ("stationary-points", cmd_stationary_points, "enumerate stationary branches to JSON"),
        ("dual-basin", cmd_dual_basin, "compare endpoint laws from two initial states"),
        ("nse-verify", cmd_nse_verify, "check the spectral identities and OU consistency"),
        ("ou-check", cmd_ou_check, "compare stationary OU samples to the analytic law"),
    ]
    for name, func, help_text in specs:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON config file (strict schema)")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        sp.add_argument("--out", help="output path prefix (overrides config 'out')")
        if name == "dual-basin":
            sp.add_argument(
                "--expect-separation",
                action="store_true",
                help="exit 4 unless the two endpoint laws separate",
            )
        sp.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidParameterError, InvalidStateError) as err:
        print(f"invalid parameters: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as err:
        where = []
        if err.time is not None:
            where.append(f"t = {err.time:.6g}")
        if err.trajectory_index is not None:
            where.append(f"trajectory {err.trajectory_index}")
        suffix = f" ({', '.join(where)})" if where else ""
        print(f"blow-up: {err}{suffix}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    raise SystemExit(main())
