"""Distributional diagnostics for trajectory ensembles.

Empirical and occupation measures, Kolmogorov-Smirnov distances against the
analytic Gaussian laws, the time-average lower-bound check for the transverse
energy X(t) = u2^2 + u3^2, the two-basin endpoint experiment, and the
(kappa, sigma) parameter scan.  Everything is deterministic given the seed:
trajectory j of an experiment uses the counter-based stream (seed, j), and
results are merged in index order, so partial ensembles computed on different
workers reassemble into exactly the monolithic result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import BlowUpError, InvalidParameterError
from .minea_core import (
    MineaParams,
    Trajectory,
    _record_steps,
    _run_ensemble,
    _validate_run_args,
    gaussian_invariant,
    uniqueness_regime,
)
from .noise import GaussianLaw1D, make_stream

WORKERS_ENV_VAR = "MINEA_ERGO_WORKERS"

# Default admissible-fraction used when a scan derives the X lower bound:
# rho = E55_RHO_FRACTION * (kappa/lam1 - min(lam2, lam3)).
E55_RHO_FRACTION = 0.8


def worker_count(explicit: int | None = None) -> int:
    """Worker count from the environment (default 1); explicit wins."""
    if explicit is not None:
        if explicit < 1:
            raise InvalidParameterError(f"worker count must be >= 1, got {explicit}")
        return explicit
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as err:
        raise InvalidParameterError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from err
    if value < 1:
        raise InvalidParameterError(f"{WORKERS_ENV_VAR} must be >= 1, got {value}")
    return value


def _map_ordered(fn, payloads: list, workers: int) -> list:
    """Apply fn to payloads preserving order; fans out only when workers > 1."""
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
        return list(pool.map(fn, payloads))


@dataclass(frozen=True)
class EmpiricalMeasure1D:
    """Empirical law of scalar samples; samples are stored sorted."""

    samples: np.ndarray

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalMeasure1D":
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size < 1:
            raise InvalidParameterError("need at least one sample")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("samples contain non-finite entries")
        return cls(samples=np.sort(samples))

    @property
    def count(self) -> int:
        return int(self.samples.size)

    def cdf(self, x):
        """Right-continuous empirical distribution function."""
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.samples, x, side="right") / self.count

    def mean(self) -> float:
        return float(self.samples.mean())

    def variance(self) -> float:
        return float(self.samples.var(ddof=1)) if self.count > 1 else 0.0


def ks_distance(emp: EmpiricalMeasure1D, law: GaussianLaw1D) -> float:
    """Exact sup-distance between the empirical cdf and a Gaussian cdf.

    The supremum of |F_n - Phi| is attained at a sample point, where the
    empirical cdf jumps from i/n to (i+1)/n; both sides of each jump are
    checked.  Degenerate laws are rejected: against a point mass the KS
    statistic carries no scale, use :func:`point_mass_distance`.
    """
    if law.variance <= 0:
        raise InvalidParameterError(
            "ks_distance needs a nondegenerate law; use point_mass_distance instead"
        )
    n = emp.count
    phi = ndtr((emp.samples - law.mean) / law.std)
    grid = np.arange(n + 1) / n
    d_plus = np.max(grid[1:] - phi)
    d_minus = np.max(phi - grid[:-1])
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(a: EmpiricalMeasure1D, b: EmpiricalMeasure1D) -> float:
    """Two-sample KS statistic sup_x |F_a(x) - F_b(x)|."""
    pooled = np.concatenate([a.samples, b.samples])
    cdf_a = np.searchsorted(a.samples, pooled, side="right") / a.count
    cdf_b = np.searchsorted(b.samples, pooled, side="right") / b.count
    return float(np.abs(cdf_a - cdf_b).max())


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample critical value c(alpha)/sqrt(n).

    c(alpha) = sqrt(-ln(alpha/2)/2); at the 1 percent level c = 1.6276...
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must be in (0, 1), got {alpha}")
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


def ks_two_sample_critical(n: int, m: int, alpha: float = 0.001) -> float:
    """Asymptotic two-sample critical value c(alpha)*sqrt((n + m)/(n m))."""
    if n < 1 or m < 1:
        raise InvalidParameterError("both sample sizes must be >= 1")
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must be in (0, 1), got {alpha}")
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n + m) / (n * m))


def point_mass_distance(emp: EmpiricalMeasure1D, center: float, tol: float = 1e-6) -> float:
    """Fraction of samples outside [center - tol, center + tol].

    Degenerate-law counterpart of the KS distance: 0 when the whole sample
    sits on the point mass, 1 when none of it does.
    """
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    outside = np.abs(emp.samples - center) > tol
    return float(outside.mean())


@dataclass(frozen=True)
class OccupationMeasure:
    """Time-weighted occupation measure of one trajectory after burn-in.

    Weights come from the trapezoid rule on the recording grid and sum to 1.
    """

    states: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: Trajectory, burn_in_frac: float = 0.5) -> "OccupationMeasure":
        times, states = _post_burn_in(traj, burn_in_frac)
        weights = _trapezoid_weights(times)
        return cls(states=states, weights=weights)

    def mean_state(self) -> np.ndarray:
        return self.weights @ self.states

    def marginal_ks(self, coordinate: int, law: GaussianLaw1D) -> float:
        """Weighted KS distance of one coordinate's marginal against ``law``."""
        if law.variance <= 0:
            raise InvalidParameterError("marginal_ks needs a nondegenerate law")
        values = self.states[:, _coordinate_index(coordinate)]
        order = np.argsort(values, kind="stable")
        values = values[order]
        cum = np.cumsum(self.weights[order])
        phi = ndtr((values - law.mean) / law.std)
        below = np.concatenate([[0.0], cum[:-1]])
        return float(max(np.max(np.abs(cum - phi)), np.max(np.abs(below - phi))))


def _coordinate_index(coordinate: int) -> int:
    if coordinate not in (1, 2, 3):
        raise InvalidParameterError(f"coordinate must be 1, 2 or 3, got {coordinate}")
    return coordinate - 1


def _post_burn_in(traj: Trajectory, burn_in_frac: float) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= burn_in_frac < 1:
        raise InvalidParameterError(f"burn_in_frac must be in [0, 1), got {burn_in_frac}")
    cutoff = burn_in_frac * traj.t_end
    start = int(np.searchsorted(traj.times, cutoff, side="left"))
    times = traj.times[start:]
    if times.size < 2:
        raise InvalidParameterError("fewer than two recorded points after burn-in")
    return times, traj.states[start:]


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    weights = np.zeros(times.size)
    gaps = np.diff(times)
    weights[:-1] += 0.5 * gaps
    weights[1:] += 0.5 * gaps
    return weights / weights.sum()


def time_average_X(traj: Trajectory, burn_in_frac: float = 0.5) -> float:
    """Trapezoid-rule average of X(t) = u2^2 + u3^2 over the post-burn-in window."""
    times, states = _post_burn_in(traj, burn_in_frac)
    x = states[:, 1] ** 2 + states[:, 2] ** 2
    return float(np.trapezoid(x, times) / (times[-1] - times[0]))


@dataclass(frozen=True)
class E55Result:
    """Outcome of the transverse-energy lower-bound check.

    ``observed`` is the full post-burn-in time average of X; ``liminf_proxy``
    is the minimum of the averages over the last four quarter-windows.  The
    proxy is reported for diagnostics only: a finite-horizon minimum is not a
    liminf and is flagged as a proxy wherever it is surfaced.
    """

    rho: float
    bound: float
    observed: float
    liminf_proxy: float
    tolerance: float
    passed: bool


def e55_check(
    traj: Trajectory,
    params: MineaParams,
    rho: float,
    burn_in_frac: float = 0.5,
    tolerance: float = 0.05,
) -> E55Result:
    """Check the long-run lower bound (1/t) int X ds >= lam1*rho.

    Admissible range: 0 < rho < kappa/lam1 - min(lam2, lam3); the check
    passes when the observed time average is at least lam1*rho*(1 - tolerance).
    """
    rho_max = params.kappa / params.lam1 - min(params.lam2, params.lam3)
    if not 0 < rho < rho_max:
        raise InvalidParameterError(
            f"rho must lie in (0, {rho_max:g}) for these parameters, got {rho}"
        )
    if not 0 < tolerance < 1:
        raise InvalidParameterError(f"tolerance must be in (0, 1), got {tolerance}")
    bound = params.lam1 * rho
    observed = time_average_X(traj, burn_in_frac)
    times, states = _post_burn_in(traj, burn_in_frac)
    x = states[:, 1] ** 2 + states[:, 2] ** 2
    edges = np.linspace(times[0], times[-1], 5)
    window_averages = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (times >= lo) & (times <= hi)
        if mask.sum() >= 2:
            tw = times[mask]
            window_averages.append(np.trapezoid(x[mask], tw) / (tw[-1] - tw[0]))
    liminf_proxy = float(min(window_averages)) if window_averages else observed
    return E55Result(
        rho=rho,
        bound=bound,
        observed=observed,
        liminf_proxy=liminf_proxy,
        tolerance=tolerance,
        passed=observed >= bound * (1.0 - tolerance),
    )


def _endpoint_chunk(payload) -> np.ndarray:
    params, v, n_steps, dt, scheme, seed, indices = payload
    streams = [make_stream(seed, i) for i in indices]
    record_steps = np.array([n_steps], dtype=np.int64)
    try:
        _, recorded = _run_ensemble(params, v, n_steps, dt, scheme, streams, record_steps)
    except BlowUpError as err:
        raise err.annotated() from None
    return recorded[:, 0, :]


def endpoint_states(
    params: MineaParams,
    v,
    t_end: float,
    dt: float,
    seed: int,
    indices,
    scheme: str = "exp",
    workers: int | None = None,
) -> np.ndarray:
    """Final states u(t_end) for the trajectories with the given stream indices.

    The result is a deterministic function of (params, v, t_end, dt, scheme,
    seed, indices) and is independent of how indices are chunked over workers,
    so partial ensembles merge associatively into the monolithic ensemble.
    """
    indices = list(indices)
    if not indices:
        raise InvalidParameterError("need at least one trajectory index")
    n_steps = _validate_run_args(t_end, dt, scheme, 1)
    nworkers = worker_count(workers)
    if nworkers <= 1:
        chunks = [indices]
    else:
        size = math.ceil(len(indices) / nworkers)
        chunks = [indices[i : i + size] for i in range(0, len(indices), size)]
    payloads = [(params, v, n_steps, dt, scheme, seed, chunk) for chunk in chunks]
    parts = _map_ordered(_endpoint_chunk, payloads, nworkers)
    return np.concatenate(parts, axis=0)


def _trajectory_chunk(payload) -> tuple[np.ndarray, np.ndarray]:
    params, v, n_steps, dt, scheme, seed, indices, record_steps = payload
    streams = [make_stream(seed, i) for i in indices]
    try:
        return _run_ensemble(params, v, n_steps, dt, scheme, streams, record_steps)
    except BlowUpError as err:
        raise err.annotated() from None


def ensemble_trajectories(
    params: MineaParams,
    v,
    t_end: float,
    dt: float,
    seed: int,
    indices,
    scheme: str = "exp",
    record_stride: int = 1,
    workers: int | None = None,
) -> list[Trajectory]:
    """Full recorded trajectories for the given stream indices, marched in lockstep.

    Equivalent to calling :func:`minea_ergo.simulate` once per index with
    stream (seed, index), but integrates the whole batch together, which is
    much faster than a per-trajectory loop.  Chunking over workers does not
    change any output bit.
    """
    indices = list(indices)
    if not indices:
        raise InvalidParameterError("need at least one trajectory index")
    n_steps = _validate_run_args(t_end, dt, scheme, record_stride)
    record_steps = _record_steps(n_steps, record_stride)
    nworkers = worker_count(workers)
    if nworkers <= 1:
        chunks = [indices]
    else:
        size = math.ceil(len(indices) / nworkers)
        chunks = [indices[i : i + size] for i in range(0, len(indices), size)]
    payloads = [
        (params, v, n_steps, dt, scheme, seed, chunk, record_steps) for chunk in chunks
    ]
    parts = _map_ordered(_trajectory_chunk, payloads, nworkers)
    times = parts[0][0]
    states = np.concatenate([p[1] for p in parts], axis=0)
    return [
        Trajectory(times, states[j], params, scheme, seed, index)
        for j, index in enumerate(indices)
    ]


def ensemble_law(
    params: MineaParams,
    v,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
    coordinate: int,
    scheme: str = "exp",
    workers: int | None = None,
) -> EmpiricalMeasure1D:
    """Empirical law of one coordinate of u(t_end) over n_traj trajectories.

    Trajectory j uses stream (seed, j).  Blow-ups propagate with the
    trajectory index attached.
    """
    if n_traj < 2:
        raise InvalidParameterError(f"n_traj must be >= 2, got {n_traj}")
    idx = _coordinate_index(coordinate)
    finals = endpoint_states(
        params, v, t_end, dt, seed, range(n_traj), scheme=scheme, workers=workers
    )
    return EmpiricalMeasure1D.from_samples(finals[:, idx])


@dataclass(frozen=True)
class DualBasinResult:
    """Endpoint laws of u1 from the two reference initial states."""

    law_a: EmpiricalMeasure1D
    law_b: EmpiricalMeasure1D
    mean_a: float
    mean_b: float
    ks_between: float
    critical_value: float
    separated: bool


def dual_basin_experiment(
    params: MineaParams,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
    scheme: str = "exp",
    workers: int | None = None,
) -> DualBasinResult:
    """Compare endpoint u1 laws from v = (0,0,0) and v = (0,1,0).

    Requires strictly supercritical parameters (otherwise both ensembles see
    the same attractor and the experiment is meaningless).  Basin A uses
    streams (seed, 0..n-1), basin B uses (seed, n..2n-1); ``separated`` holds
    when the two-sample KS statistic exceeds the 0.1 percent critical value.
    """
    if n_traj < 2:
        raise InvalidParameterError(f"n_traj must be >= 2, got {n_traj}")
    if uniqueness_regime(params).regime != "supercritical":
        raise InvalidParameterError(
            "dual_basin_experiment needs strictly supercritical parameters "
            f"(kappa > {params.uniqueness_threshold:g})"
        )
    finals_a = endpoint_states(
        params, (0.0, 0.0, 0.0), t_end, dt, seed, range(n_traj), scheme=scheme, workers=workers
    )
    finals_b = endpoint_states(
        params,
        (0.0, 1.0, 0.0),
        t_end,
        dt,
        seed,
        range(n_traj, 2 * n_traj),
        scheme=scheme,
        workers=workers,
    )
    law_a = EmpiricalMeasure1D.from_samples(finals_a[:, 0])
    law_b = EmpiricalMeasure1D.from_samples(finals_b[:, 0])
    ks = ks_two_sample(law_a, law_b)
    critical = ks_two_sample_critical(law_a.count, law_b.count, alpha=0.001)
    return DualBasinResult(
        law_a=law_a,
        law_b=law_b,
        mean_a=law_a.mean(),
        mean_b=law_b.mean(),
        ks_between=ks,
        critical_value=critical,
        separated=ks > critical,
    )


@dataclass(frozen=True)
class PhaseScanRow:
    """One (kappa, sigma) cell of a parameter scan.

    verdict is "unique-like" (transverse energy died and u1 matches the
    analytic Gaussian), "multi-like" (the X lower bound held), "inconclusive",
    or "error" when the cell's ensemble blew up; for error cells the
    diagnostics are NaN.
    """

    kappa: float
    sigma: float
    regime: str
    ks_u1: float
    timeavg_x: float
    e55_bound: float
    verdict: str


_SCAN_UNIQUE_X_MAX = 0.01
_SCAN_REC_POINTS = 400
_POINT_MASS_TOL = 1e-6


def _phase_cell(payload) -> PhaseScanRow:
    (lambdas, kappa, sigma, t_end, dt, n_traj, seed, v, burn_in_frac, stream_base) = payload
    params = MineaParams(lambdas[0], lambdas[1], lambdas[2], kappa, sigma)
    regime = uniqueness_regime(params).regime
    rho_max = kappa / params.lam1 - min(params.lam2, params.lam3)
    if regime == "supercritical" and rho_max > 0:
        e55_bound = params.lam1 * E55_RHO_FRACTION * rho_max
    else:
        e55_bound = float("nan")
    n_steps = _validate_run_args(t_end, dt, "exp", 1)
    stride = max(1, n_steps // _SCAN_REC_POINTS)
    record_steps = _record_steps(n_steps, stride)
    streams = [make_stream(seed, stream_base + j) for j in range(n_traj)]
    try:
        times, recorded = _run_ensemble(params, v, n_steps, dt, "exp", streams, record_steps)
    except BlowUpError:
        return PhaseScanRow(
            kappa=kappa,
            sigma=sigma,
            regime=regime,
            ks_u1=float("nan"),
            timeavg_x=float("nan"),
            e55_bound=e55_bound,
            verdict="error",
        )
    cutoff = burn_in_frac * times[-1]
    sel = times >= cutoff
    window = times[sel]
    x = recorded[:, sel, 1] ** 2 + recorded[:, sel, 2] ** 2
    per_traj = np.trapezoid(x, window, axis=1) / (window[-1] - window[0])
    timeavg_x = float(per_traj.mean())
    endpoints = EmpiricalMeasure1D.from_samples(recorded[:, -1, 0])
    invariant = gaussian_invariant(params).first
    if invariant.variance > 0:
        ks_u1 = ks_distance(endpoints, invariant)
    else:
        ks_u1 = point_mass_distance(endpoints, invariant.mean, tol=_POINT_MASS_TOL)
    if timeavg_x < _SCAN_UNIQUE_X_MAX and ks_u1 < ks_critical_value(n_traj, alpha=0.01):
        verdict = "unique-like"
    elif regime == "supercritical" and timeavg_x >= e55_bound * 0.95:
        verdict = "multi-like"
    else:
        verdict = "inconclusive"
    return PhaseScanRow(
        kappa=kappa,
        sigma=sigma,
        regime=regime,
        ks_u1=ks_u1,
        timeavg_x=timeavg_x,
        e55_bound=e55_bound,
        verdict=verdict,
    )


def iter_phase_scan(
    lambdas,
    kappa_grid,
    sigma_grid,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
    v=(0.0, 1.0, 1.0),
    burn_in_frac: float = 0.5,
    workers: int | None = None,
):
    """Yield scan rows in kappa-major, sigma-minor order as cells complete.

    Cell c's trajectories use streams (seed, c*n_traj .. (c+1)*n_traj - 1),
    so the scan is one deterministic function of the seed regardless of
    worker count.  Rows stream out in order, which lets a caller flush
    completed cells if it is interrupted.
    """
    lambdas = tuple(float(x) for x in lambdas)
    if len(lambdas) != 3:
        raise InvalidParameterError("lambdas must have exactly three entries")
    kappa_grid = [float(k) for k in kappa_grid]
    sigma_grid = [float(s) for s in sigma_grid]
    if not kappa_grid or not sigma_grid:
        raise InvalidParameterError("kappa and sigma grids must be nonempty")
    if n_traj < 2:
        raise InvalidParameterError(f"n_traj must be >= 2, got {n_traj}")
    v = tuple(float(c) for c in v)
    payloads = []
    cell = 0
    for kappa in kappa_grid:
        for sigma in sigma_grid:
            payloads.append(
                (lambdas, kappa, sigma, t_end, dt, n_traj, seed, v, burn_in_frac, cell * n_traj)
            )
            cell += 1
    nworkers = worker_count(workers)
    if nworkers <= 1 or len(payloads) <= 1:
        for payload in payloads:
            yield _phase_cell(payload)
        return
    with ProcessPoolExecutor(max_workers=min(nworkers, len(payloads))) as pool:
        yield from pool.map(_phase_cell, payloads)


def phase_scan(
    lambdas,
    kappa_grid,
    sigma_grid,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
    v=(0.0, 1.0, 1.0),
    burn_in_frac: float = 0.5,
    workers: int | None = None,
) -> list[PhaseScanRow]:
    """Scan the (kappa, sigma) grid and classify every cell; see iter_phase_scan."""
    return list(
        iter_phase_scan(
            lambdas,
            kappa_grid,
            sigma_grid,
            t_end,
            dt,
            n_traj,
            seed,
            v=v,
            burn_in_frac=burn_in_frac,
            workers=workers,
        )
    )
