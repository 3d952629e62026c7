"""Acceptance gate: one test per release criterion, each printing a verdict line.

Every test computes its checks first, prints a single visible
"ACCEPTANCE n [label]: PASS/FAIL" line, then asserts.  Runtime budgets are
part of the contract and asserted alongside the numerical tolerances.
"""

import json
import math
import time

import numpy as np
from scipy.signal import lfilter

import minea_ergo as me
from minea_ergo import spectral_nse as sn
from minea_ergo.cli import EXIT_OK, main as cli_main


def _announce(capsys, num, label, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    with capsys.disabled():
        print(f"\nACCEPTANCE {num} [{label}]: {verdict} ({detail})")


def test_criterion_1_ou_stationary_law(capsys):
    t0 = time.perf_counter()
    law = me.ou_stationary_law(1.0, 2.0, 1.0)
    n = 100_000
    g = me.make_stream(2026, 0).generator()
    start = law.mean + law.std * g.standard_normal(n)
    samples = me.ou_step(start, 1.0, 1.0, 2.0, 1.0, g.standard_normal(n))
    emp = me.EmpiricalMeasure1D.from_samples(samples)
    mean_err = abs(emp.mean() - 2.0)
    var_err = abs(emp.variance() - 0.5)
    se_mean = law.std / math.sqrt(n)
    se_var = law.variance * math.sqrt(2.0 / (n - 1))
    ks = me.ks_distance(emp, law)
    ks_crit = me.ks_critical_value(n, alpha=0.01)
    elapsed = time.perf_counter() - t0
    ok = (
        mean_err < 3 * se_mean
        and var_err < 3 * se_var
        and ks < ks_crit
        and elapsed < 5.0
    )
    _announce(
        capsys,
        1,
        "OU stationary law",
        ok,
        f"mean err {mean_err:.2e} < {3 * se_mean:.2e}, var err {var_err:.2e} < "
        f"{3 * se_var:.2e}, KS {ks:.4f} < {ks_crit:.4f}, {elapsed:.2f}s",
    )
    assert mean_err < 3 * se_mean
    assert var_err < 3 * se_var
    assert ks < ks_crit
    assert elapsed < 5.0


def test_criterion_2_bilinear_identities(capsys):
    t0 = time.perf_counter()
    rng = me.make_stream(2002, 0).generator()
    worst = 0.0
    for _ in range(200):
        u, v, w = rng.standard_normal((3, 3)) * 3.0
        scale = max(np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w), 1.0)
        worst = max(worst, abs(me.b_form(u, v, w) + me.b_form(u, w, v)) / scale)
        worst = max(
            worst,
            abs(np.dot(me.bilinear_b(u, u), u)) / max(np.linalg.norm(u) ** 3, 1.0),
        )
    f1 = np.array([1.0, 0.0, 0.0])
    f2 = np.array([0.0, 1.0, 0.0])
    f3 = np.array([0.0, 0.0, 1.0])
    basis_ok = (
        np.all(me.bilinear_b(f1, f1) == 0.0)
        and np.array_equal(me.bilinear_b(f2, f2), -f1)
        and np.array_equal(me.bilinear_b(f3, f3), -f1)
    )
    report = me.identity_suite(8, n_fields=100, seed=0, tolerance=1e-10)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and basis_ok and report.passed and elapsed < 10.0
    _announce(
        capsys,
        2,
        "bilinear identities",
        ok,
        f"3d worst {worst:.2e}, spectral worst {report.max_violation:.2e} "
        f"<= 1e-10, {elapsed:.2f}s",
    )
    assert worst <= 1e-10
    assert basis_ok
    assert report.passed
    assert elapsed < 10.0


def test_criterion_3_stationary_case_table(capsys):
    t0 = time.perf_counter()
    cases = [
        ((1.0, 2.0, 3.0, 1.5), ["origin"]),
        ((1.0, 2.0, 2.0, 3.0), ["origin", "circle"]),
        ((1.0, 2.0, 3.0, 4.0), ["origin", "pair", "pair"]),
        ((1.0, 2.0, 3.0, 2.5), ["origin", "pair"]),
    ]
    worst_residual = 0.0
    kinds_ok = True
    for (l1, l2, l3, kappa), expected in cases:
        stat = me.stationary_points(me.MineaParams(l1, l2, l3, kappa, 0.0))
        kinds_ok = kinds_ok and [b.kind for b in stat.branches] == expected
        worst_residual = max(worst_residual, stat.max_drift_residual())
    elapsed = time.perf_counter() - t0
    ok = kinds_ok and worst_residual < 1e-12 and elapsed < 1.0
    _announce(
        capsys,
        3,
        "stationary case table",
        ok,
        f"4 regimes enumerated, worst residual {worst_residual:.2e} < 1e-12, "
        f"{elapsed:.2f}s",
    )
    assert kinds_ok
    assert worst_residual < 1e-12
    assert elapsed < 1.0


def test_criterion_4_subcritical_uniqueness(capsys):
    t0 = time.perf_counter()
    p = me.MineaParams(1.0, 1.0, 1.0, 0.5, 0.3)
    ends = me.endpoint_states(p, (0.0, 1.0, 1.0), 100.0, 1e-3, seed=4001, indices=range(100))
    x_final = ends[:, 1] ** 2 + ends[:, 2] ** 2
    dead_frac = float(np.mean(x_final < 1e-6))
    law = me.ou_stationary_law(1.0, 0.5, 0.3)
    assert law.variance == 0.045
    emp = me.EmpiricalMeasure1D.from_samples(ends[:, 0])
    ks = me.ks_distance(emp, law)
    ks_crit = me.ks_critical_value(100, alpha=0.01)
    elapsed = time.perf_counter() - t0
    ok = dead_frac >= 0.95 and ks < ks_crit and elapsed < 60.0
    _announce(
        capsys,
        4,
        "subcritical uniqueness",
        ok,
        f"X(T)<1e-6 on {dead_frac:.0%} >= 95%, u1 KS {ks:.4f} < {ks_crit:.4f}, "
        f"{elapsed:.1f}s",
    )
    assert dead_frac >= 0.95
    assert ks < ks_crit
    assert elapsed < 60.0


def test_criterion_5_supercritical_non_uniqueness(capsys):
    t0 = time.perf_counter()
    p = me.MineaParams(1.0, 1.0, 1.0, 2.0, 0.1)
    rho = 0.8
    trajs = me.ensemble_trajectories(
        p, (0.0, 1.0, 0.0), 500.0, 1e-3, 5001, range(50), record_stride=10
    )
    checks = [me.e55_check(traj, p, rho) for traj in trajs]
    pass_frac = float(np.mean([c.passed for c in checks]))
    min_obs = min(c.observed for c in checks)
    dual = me.dual_basin_experiment(p, 200.0, 1e-3, 500, 5002)
    mean_a_ok = abs(dual.mean_a - 2.0) <= 0.05
    mean_b_ok = abs(dual.mean_b - 1.0) <= 0.1
    elapsed = time.perf_counter() - t0
    ok = (
        pass_frac >= 0.95
        and dual.separated
        and mean_a_ok
        and mean_b_ok
        and elapsed < 180.0
    )
    _announce(
        capsys,
        5,
        "supercritical non-uniqueness",
        ok,
        f"e55 pass {pass_frac:.0%} (min avg {min_obs:.3f} vs bound 0.76), "
        f"separated={dual.separated}, means {dual.mean_a:.3f}/{dual.mean_b:.3f}, "
        f"{elapsed:.1f}s",
    )
    assert pass_frac >= 0.95
    assert dual.separated
    assert mean_a_ok
    assert mean_b_ok
    assert elapsed < 180.0


def test_criterion_6_invariant_subspace_exactness(capsys):
    t0 = time.perf_counter()
    dt = 1e-3
    n_steps = 100_000

    p = me.MineaParams(1.0, 1.0, 1.0, 2.0, 1.0)
    traj = me.simulate(p, (2.0, 0.0, 0.0), n_steps * dt, dt, stream=me.make_stream(606, 1))
    axis_exact = bool(np.all(traj.states[:, 1] == 0.0) and np.all(traj.states[:, 2] == 0.0))
    gauss = me.make_stream(606, 1).generator().standard_normal(n_steps)
    z = 2.0
    minea_dev = 0.0
    for k in range(n_steps):
        z = me.ou_step(z, dt, p.lam1, p.kappa, p.sigma, gauss[k])
        minea_dev = max(minea_dev, abs(traj.states[k + 1, 0] - z))

    params = sn.NseParams(mu=1.0, forced_mode=(1, 0), kappa=1.0, sigma=0.5, n_trunc=4)
    r = sn.eigenmode_consistency(params, 1.0, n_steps * dt, dt, me.make_stream(606, 0))
    elapsed = time.perf_counter() - t0
    ok = (
        axis_exact
        and minea_dev <= 5 * dt
        and r.off_mode_energy_max == 0.0
        and r.max_deviation <= 5 * dt
        and elapsed < 30.0
    )
    _announce(
        capsys,
        6,
        "invariant subspace exactness",
        ok,
        f"axis bit-exact={axis_exact}, ou deviation {minea_dev:.1e}/"
        f"{r.max_deviation:.1e} <= {5 * dt:.0e}, off-mode energy "
        f"{r.off_mode_energy_max:.1e}, {elapsed:.1f}s",
    )
    assert axis_exact
    assert minea_dev <= 5 * dt
    assert r.off_mode_energy_max == 0.0
    assert r.max_deviation <= 5 * dt
    assert elapsed < 30.0


def test_criterion_7_lyapunov_ceilings(capsys):
    t0 = time.perf_counter()
    p = me.MineaParams(1.0, 1.0, 1.0, 2.0, 0.5)
    v3 = (0.0, 1.0, 1.0)
    ceiling3 = me.lyapunov_ceiling(p, v3)
    trajs = me.ensemble_trajectories(p, v3, 100.0, 1e-3, 7001, range(200), record_stride=100)
    states = np.stack([t.states for t in trajs])
    mean3 = (states**2).sum(axis=2).mean(axis=0)

    params = sn.NseParams(mu=1.0, forced_mode=(1, 1), kappa=1.0, sigma=0.5, n_trunc=4)
    vf = sn.SpectralField.zero(4)
    ceiling_nse = sn.nse_lyapunov_ceiling(params, vf)
    _, mean_nse = sn.energy_bound_ensemble(params, vf, 100.0, 0.02, 200, 7002)
    elapsed = time.perf_counter() - t0
    ok = (
        mean3.max() <= ceiling3
        and mean_nse.max() <= ceiling_nse
        and elapsed < 60.0
    )
    _announce(
        capsys,
        7,
        "Lyapunov ceilings",
        ok,
        f"3d max {mean3.max():.3f} <= {ceiling3}, spectral max "
        f"{mean_nse.max():.3f} <= {ceiling_nse}, {elapsed:.1f}s",
    )
    assert mean3.max() <= ceiling3
    assert mean_nse.max() <= ceiling_nse
    assert elapsed < 60.0


def test_criterion_8_forced_mode_time_average(capsys):
    t0 = time.perf_counter()
    mu, lam, kappa, sigma = 1.0, 1.0, 1.0, 1.0
    expected = (kappa**2 / (lam**2 * mu**2) + sigma**2 / (2 * lam * mu)) * lam
    assert expected == 1.5
    dt, n = 0.01, 1_000_000
    # one exact OU step is affine in (z, gauss); extract its coefficients so
    # the long recursion can run through a compiled linear filter
    b = me.ou_step(0.0, dt, mu * lam, kappa, sigma, 0.0)
    a = me.ou_step(1.0, dt, mu * lam, kappa, sigma, 0.0) - b
    c = me.ou_step(0.0, dt, mu * lam, kappa, sigma, 1.0) - b
    gauss = me.make_stream(808, 0).generator().standard_normal(n)
    z0 = kappa / (mu * lam)
    z = lfilter([1.0], [1.0, -a], b + c * gauss, zi=np.array([a * z0]))[0]
    zcheck = z0
    for i in range(100):
        zcheck = me.ou_step(zcheck, dt, mu * lam, kappa, sigma, gauss[i])
        assert abs(zcheck - z[i]) < 1e-12
    vsq = lam * np.concatenate([[z0], z]) ** 2
    times = dt * np.arange(n + 1)
    avg = np.trapezoid(vsq, times) / times[-1]
    n_batches = 50
    batch_means = vsq[1:].reshape(n_batches, -1).mean(axis=1)
    se = batch_means.std(ddof=1) / math.sqrt(n_batches)
    err = abs(avg - expected)
    elapsed = time.perf_counter() - t0
    ok = err < 3 * se and elapsed < 30.0
    _announce(
        capsys,
        8,
        "forced-mode time average",
        ok,
        f"avg {avg:.4f} vs 1.5, err {err:.4f} < 3se {3 * se:.4f}, {elapsed:.1f}s",
    )
    assert err < 3 * se
    assert elapsed < 30.0


def test_criterion_9_byte_identical_determinism(capsys, tmp_path):
    t0 = time.perf_counter()

    def run(args):
        assert cli_main(args) == EXIT_OK

    sim_cfg = tmp_path / "sim.json"
    sim_cfg.write_text(
        json.dumps(
            {
                "system": {"lambda": [1.0, 1.0, 1.0], "kappa": 0.5, "sigma": 0.3},
                "sim": {"t_end": 2.0, "dt": 1e-3, "seed": 3, "record_stride": 10},
                "initial": [0.0, 1.0, 1.0],
            }
        )
    )
    run(["simulate", "--config", str(sim_cfg), "--out", str(tmp_path / "s1")])
    run(["simulate", "--config", str(sim_cfg), "--out", str(tmp_path / "s2")])
    sim_same = (tmp_path / "s1_trajectory.csv").read_bytes() == (
        tmp_path / "s2_trajectory.csv"
    ).read_bytes()

    scan_cfg = tmp_path / "scan.json"
    scan_cfg.write_text(
        json.dumps(
            {
                "lambda": [1.0, 1.0, 1.0],
                "kappa_grid": [0.5, 2.0],
                "sigma_grid": [0.1],
                "sim": {"t_end": 5.0, "dt": 1e-2, "seed": 31, "n_traj": 6},
            }
        )
    )
    import os

    old = os.environ.get("MINEA_ERGO_WORKERS")
    try:
        os.environ["MINEA_ERGO_WORKERS"] = "1"
        run(["phase-scan", "--config", str(scan_cfg), "--out", str(tmp_path / "p1")])
        os.environ["MINEA_ERGO_WORKERS"] = "2"
        run(["phase-scan", "--config", str(scan_cfg), "--out", str(tmp_path / "p2")])
    finally:
        if old is None:
            os.environ.pop("MINEA_ERGO_WORKERS", None)
        else:
            os.environ["MINEA_ERGO_WORKERS"] = old
    scan_same = (tmp_path / "p1_phase_scan.csv").read_bytes() == (
        tmp_path / "p2_phase_scan.csv"
    ).read_bytes()

    dual_cfg = tmp_path / "dual.json"
    dual_cfg.write_text(
        json.dumps(
            {
                "system": {"lambda": [1.0, 1.0, 1.0], "kappa": 2.0, "sigma": 0.1},
                "sim": {"t_end": 10.0, "dt": 1e-2, "seed": 5, "n_traj": 8},
            }
        )
    )
    run(["dual-basin", "--config", str(dual_cfg), "--out", str(tmp_path / "d1")])
    run(["dual-basin", "--config", str(dual_cfg), "--out", str(tmp_path / "d2")])
    dual_same = all(
        (tmp_path / f"d1{suffix}").read_bytes() == (tmp_path / f"d2{suffix}").read_bytes()
        for suffix in ("_dual_basin.json", "_basin_a.csv", "_basin_b.csv")
    )
    elapsed = time.perf_counter() - t0
    ok = sim_same and scan_same and dual_same
    _announce(
        capsys,
        9,
        "byte-identical determinism",
        ok,
        f"simulate repeat={sim_same}, scan workers 1 vs 2={scan_same}, "
        f"dual-basin repeat={dual_same}, {elapsed:.1f}s",
    )
    assert sim_same
    assert scan_same
    assert dual_same
