"""Three-dimensional quadratic SDE with noise on the first coordinate only.

State u = (u1, u2, u3) evolves by

    du1 = (-lam1*u1 - (u2^2 + u3^2) + kappa) dt + sigma dW
    du2 = (-lam2 + u1) u2 dt
    du3 = (-lam3 + u1) u3 dt

i.e. du = (A u + B(u, u) + kappa f1) dt + sigma f1 dW with the damping
A u = -(lam1 u1, lam2 u2, lam3 u3), the quadratic form
B(u, v) = (-u2 v2 - u3 v3, u2 v1, u3 v1), and f1 the first basis vector.
B has the same energy cancellation <B(u, u), u> = 0 as the incompressible
Navier-Stokes nonlinearity, the plane {u2 = u3 = 0} is invariant, and on it
u1 is an exact Ornstein-Uhlenbeck process.  Depending on kappa relative to
lam1*min(lam2, lam3) the product law N(kappa/lam1, sigma^2/(2 lam1)) x d0 x d0
is either the unique invariant measure or one of several.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, InvalidParameterError, InvalidStateError
from .noise import GaussianLaw1D, RngStream, abs_moment, ou_stationary_law, ou_step

BLOWUP_CAP = 1e8

_SCHEMES = ("em", "exp")

# Steps per block of pre-drawn gaussians in the ensemble driver.  The value
# only trades memory for generator-call overhead; results do not depend on it.
_GAUSS_BLOCK = 4096


@dataclass(frozen=True)
class MineaParams:
    """Damping rates (lam1, lam2, lam3), forcing kappa, noise amplitude sigma."""

    lam1: float
    lam2: float
    lam3: float
    kappa: float
    sigma: float = 0.0

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam3"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{name} must be finite and positive, got {value}")
        if not math.isfinite(self.kappa):
            raise InvalidParameterError(f"kappa must be finite, got {self.kappa}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidParameterError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def min_damping(self) -> float:
        return min(self.lam1, self.lam2, self.lam3)

    @property
    def uniqueness_threshold(self) -> float:
        """kappa below lam1*min(lam2, lam3) forces the transverse part to die."""
        return self.lam1 * min(self.lam2, self.lam3)


def _as_states(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (3,):
        raise InvalidStateError(f"state must have trailing dimension 3, got shape {u.shape}")
    return u


def _check_post_state(u: np.ndarray) -> None:
    norm_sq = (u * u).sum(axis=-1)
    bad = ~np.isfinite(norm_sq) | (norm_sq > BLOWUP_CAP * BLOWUP_CAP)
    if not bad.any():
        return
    slot = int(np.argmax(bad)) if bad.ndim else 0
    raise BlowUpError(
        f"state norm exceeded {BLOWUP_CAP:g} or became non-finite",
        trajectory_index=slot,
    )


def drift(params: MineaParams, u) -> np.ndarray:
    """Deterministic vector field (A u + B(u, u) + kappa f1); accepts (..., 3)."""
    u = _as_states(u)
    if not np.all(np.isfinite(u)):
        raise InvalidStateError("state contains non-finite entries")
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    x = u2 * u2 + u3 * u3
    return np.stack(
        [
            -params.lam1 * u1 - x + params.kappa,
            (u1 - params.lam2) * u2,
            (u1 - params.lam3) * u3,
        ],
        axis=-1,
    )


def b_form(u, v, w) -> float:
    """Trilinear form b(u, v, w) = <B(u, v), w>."""
    u, v, w = (np.asarray(a, dtype=float) for a in (u, v, w))
    return float(
        -(u[1] * v[1] + u[2] * v[2]) * w[0] + u[1] * v[0] * w[1] + u[2] * v[0] * w[2]
    )


def bilinear_b(u, v) -> np.ndarray:
    """Quadratic interaction B(u, v) = (-u2 v2 - u3 v3, u2 v1, u3 v1)."""
    u, v = (np.asarray(a, dtype=float) for a in (u, v))
    return np.stack(
        [
            -(u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]),
            u[..., 1] * v[..., 0],
            u[..., 2] * v[..., 0],
        ],
        axis=-1,
    )


def step_em(params: MineaParams, u, dt: float, dw) -> np.ndarray:
    """One Euler-Maruyama step; ``dw`` is the Brownian increment (var dt).

    Accepts a single state of shape (3,) or a batch (n, 3) with ``dw`` of
    shape () or (n,).
    """
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    u = _as_states(u)
    out = u + drift(params, u) * dt
    out[..., 0] += params.sigma * np.asarray(dw, dtype=float)
    _check_post_state(out)
    return out


def step_exp(params: MineaParams, u, dt: float, gauss) -> np.ndarray:
    """One step of the exponential splitting scheme; ``gauss`` is N(0, 1).

    u1 advances by the exact OU transition with the quadratic source
    -(u2^2 + u3^2) frozen over the step; u2, u3 advance by their exact
    exponential representation with u1 replaced by its trapezoidal average
    over the step.  The plane {u2 = u3 = 0} is invariant bit-exactly and on
    it the u1 recursion coincides with ``ou_step``.
    """
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    u = _as_states(u)
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    x = u2 * u2 + u3 * u3
    one_minus = -math.expm1(-params.lam1 * dt)
    u1_new = ou_step(u1, dt, params.lam1, params.kappa, params.sigma, gauss) - (
        x / params.lam1
    ) * one_minus
    u1_bar = 0.5 * (u1 + u1_new)
    out = np.stack(
        [
            u1_new,
            u2 * np.exp((u1_bar - params.lam2) * dt),
            u3 * np.exp((u1_bar - params.lam3) * dt),
        ],
        axis=-1,
    )
    _check_post_state(out)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Recorded path of one trajectory: times (n,), states (n, 3)."""

    times: np.ndarray
    states: np.ndarray
    params: MineaParams
    scheme: str
    seed: int
    stream_index: int

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape != (self.times.size, 3):
            raise InvalidStateError("times and states shapes are inconsistent")
        if self.times.size < 2 or not np.all(np.diff(self.times) > 0):
            raise InvalidStateError("times must be strictly increasing with >= 2 entries")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def x_series(self) -> np.ndarray:
        """Transverse energy X(t) = u2^2 + u3^2 at the recorded times."""
        return self.states[:, 1] ** 2 + self.states[:, 2] ** 2


def _record_steps(n_steps: int, record_stride: int) -> np.ndarray:
    steps = list(range(0, n_steps + 1, record_stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=np.int64)


def _validate_run_args(t_end: float, dt: float, scheme: str, record_stride: int) -> int:
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if t_end <= 0:
        raise InvalidParameterError(f"t_end must be positive, got {t_end}")
    if scheme not in _SCHEMES:
        raise InvalidParameterError(f"scheme must be one of {_SCHEMES}, got {scheme!r}")
    if record_stride < 1:
        raise InvalidParameterError(f"record_stride must be >= 1, got {record_stride}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise InvalidParameterError(f"t_end={t_end} is below one step of dt={dt}")
    return n_steps


def _run_ensemble(
    params: MineaParams,
    v,
    n_steps: int,
    dt: float,
    scheme: str,
    streams: list[RngStream],
    record_steps: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """March all trajectories in lockstep; returns (times, states (m, n_rec, 3)).

    Each trajectory consumes one standard normal per step from its own
    stream, so results are identical however trajectories are grouped into
    batches or processes.
    """
    v = _as_states(v)
    if v.ndim != 1:
        raise InvalidStateError(f"initial state must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidStateError("initial state contains non-finite entries")
    m = len(streams)
    states = np.tile(v, (m, 1))
    record_mask = np.zeros(n_steps + 1, dtype=bool)
    record_mask[record_steps] = True
    recorded = np.empty((m, record_steps.size, 3))
    pointer = 0
    if record_mask[0]:
        recorded[:, pointer] = states
        pointer += 1
    gens = [s.generator() for s in streams]
    sqrt_dt = math.sqrt(dt)
    step = 0
    gauss = np.empty((m, _GAUSS_BLOCK))
    while step < n_steps:
        block = min(_GAUSS_BLOCK, n_steps - step)
        for i, gen in enumerate(gens):
            gauss[i, :block] = gen.standard_normal(block)
        for j in range(block):
            g = gauss[:, j]
            try:
                if scheme == "exp":
                    states = step_exp(params, states, dt, g)
                else:
                    states = step_em(params, states, dt, sqrt_dt * g)
            except BlowUpError as err:
                slot = err.trajectory_index or 0
                raise err.annotated(
                    time=(step + j + 1) * dt,
                    step=step + j + 1,
                    trajectory_index=streams[slot].stream_index,
                ) from None
            if record_mask[step + j + 1]:
                recorded[:, pointer] = states
                pointer += 1
        step += block
    times = record_steps * dt
    return times, recorded


def simulate(
    params: MineaParams,
    v,
    t_end: float,
    dt: float,
    scheme: str = "exp",
    *,
    stream: RngStream,
    record_stride: int = 1,
) -> Trajectory:
    """Integrate one trajectory from ``v`` and record every ``record_stride`` steps.

    The step count is round(t_end/dt), so the final time is within dt of
    ``t_end`` and is always recorded.  Deterministic given (stream, scheme, dt).
    """
    n_steps = _validate_run_args(t_end, dt, scheme, record_stride)
    record_steps = _record_steps(n_steps, record_stride)
    times, recorded = _run_ensemble(params, v, n_steps, dt, scheme, [stream], record_steps)
    return Trajectory(
        times=times,
        states=recorded[0],
        params=params,
        scheme=scheme,
        seed=stream.seed,
        stream_index=stream.stream_index,
    )


def simulate_with_gaussians(
    params: MineaParams,
    v,
    dt: float,
    scheme: str,
    gaussians: np.ndarray,
    record_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """March one trajectory on an explicit standard-normal sequence.

    Exists so tests can drive both schemes on a common Brownian refinement;
    returns (times, states).
    """
    gaussians = np.asarray(gaussians, dtype=float)
    n_steps = gaussians.size
    if n_steps < 1:
        raise InvalidParameterError("need at least one increment")
    _validate_run_args(n_steps * dt, dt, scheme, record_stride)
    record_steps = _record_steps(n_steps, record_stride)
    record_mask = np.zeros(n_steps + 1, dtype=bool)
    record_mask[record_steps] = True
    state = _as_states(v).astype(float).copy()
    recorded = np.empty((record_steps.size, 3))
    pointer = 0
    if record_mask[0]:
        recorded[pointer] = state
        pointer += 1
    sqrt_dt = math.sqrt(dt)
    for k in range(n_steps):
        try:
            if scheme == "exp":
                state = step_exp(params, state, dt, gaussians[k])
            else:
                state = step_em(params, state, dt, sqrt_dt * gaussians[k])
        except BlowUpError as err:
            raise err.annotated(time=(k + 1) * dt, step=k + 1, trajectory_index=0) from None
        if record_mask[k + 1]:
            recorded[pointer] = state
            pointer += 1
    return record_steps * dt, recorded


@dataclass(frozen=True)
class StationaryBranch:
    """One connected component of the stationary set of the noiseless system.

    kind is "origin" for (kappa/lam1, 0, 0), "circle" for the circle
    u1 = lam2 = lam3, u2^2 + u3^2 = amplitude_sq, and "pair" for the two
    isolated points with u_axis = +-sqrt(amplitude_sq) on coordinate ``axis``.
    ``witnesses`` holds concrete points on the branch (8 equally spaced ones
    for a circle).
    """

    kind: str
    u1: float
    axis: int | None
    amplitude_sq: float | None
    witnesses: np.ndarray

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "u1": self.u1, "points": self.witnesses.tolist()}
        if self.axis is not None:
            out["axis"] = self.axis
        if self.amplitude_sq is not None:
            out["amplitude_sq"] = self.amplitude_sq
        return out


@dataclass(frozen=True)
class StationarySet:
    params: MineaParams
    branches: tuple[StationaryBranch, ...]

    def all_witnesses(self) -> np.ndarray:
        return np.concatenate([b.witnesses for b in self.branches], axis=0)

    def max_drift_residual(self) -> float:
        residual = drift(self.params, self.all_witnesses())
        return float(np.abs(residual).max())


_CIRCLE_WITNESSES = 8


def stationary_points(params: MineaParams) -> StationarySet:
    """Stationary set of the noiseless vector field, enumerated by branch.

    The equations u2 (u1 - lam2) = 0, u3 (u1 - lam3) = 0,
    lam1 u1 + u2^2 + u3^2 = kappa give (kappa/lam1, 0, 0) always; a branch
    with u1 = lam2 (resp. lam3) exists iff kappa > lam1*lam2 (resp.
    lam1*lam3), a circle when lam2 = lam3 and a +- pair otherwise.
    """
    branches = [
        StationaryBranch(
            kind="origin",
            u1=params.kappa / params.lam1,
            axis=None,
            amplitude_sq=None,
            witnesses=np.array([[params.kappa / params.lam1, 0.0, 0.0]]),
        )
    ]
    if params.lam2 == params.lam3:
        amp_sq = params.kappa - params.lam1 * params.lam2
        if amp_sq > 0:
            radius = math.sqrt(amp_sq)
            angles = 2.0 * math.pi * np.arange(_CIRCLE_WITNESSES) / _CIRCLE_WITNESSES
            witnesses = np.stack(
                [
                    np.full(_CIRCLE_WITNESSES, params.lam2),
                    radius * np.cos(angles),
                    radius * np.sin(angles),
                ],
                axis=-1,
            )
            branches.append(
                StationaryBranch(
                    kind="circle",
                    u1=params.lam2,
                    axis=None,
                    amplitude_sq=amp_sq,
                    witnesses=witnesses,
                )
            )
    else:
        for axis, lam in ((2, params.lam2), (3, params.lam3)):
            amp_sq = params.kappa - params.lam1 * lam
            if amp_sq > 0:
                amp = math.sqrt(amp_sq)
                witnesses = np.zeros((2, 3))
                witnesses[:, 0] = lam
                witnesses[0, axis - 1] = amp
                witnesses[1, axis - 1] = -amp
                branches.append(
                    StationaryBranch(
                        kind="pair",
                        u1=lam,
                        axis=axis,
                        amplitude_sq=amp_sq,
                        witnesses=witnesses,
                    )
                )
    return StationarySet(params=params, branches=tuple(branches))


_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeClassification:
    """Position of kappa relative to the uniqueness threshold, plus the
    integrated-|z| sufficient condition 2*E|Z| < min(lam1, lam2, lam3)."""

    threshold: float
    regime: str  # "subcritical" | "boundary" | "supercritical"
    e56_lhs: float
    e56_rhs: float
    e56_satisfied: bool


def uniqueness_regime(params: MineaParams) -> RegimeClassification:
    """Classify kappa against lam1*min(lam2, lam3) with 1e-12 relative slack.

    The boundary case is reported as its own regime; no uniqueness claim is
    attached to it.
    """
    threshold = params.uniqueness_threshold
    if abs(params.kappa - threshold) <= _BOUNDARY_RTOL * max(1.0, abs(threshold)):
        regime = "boundary"
    elif params.kappa < threshold:
        regime = "subcritical"
    else:
        regime = "supercritical"
    lhs = 2.0 * abs_moment(ou_stationary_law(params.lam1, params.kappa, params.sigma))
    rhs = params.min_damping
    return RegimeClassification(
        threshold=threshold,
        regime=regime,
        e56_lhs=lhs,
        e56_rhs=rhs,
        e56_satisfied=lhs < rhs,
    )


@dataclass(frozen=True)
class ProductInvariantLaw:
    """Product law: Gaussian in u1, point masses at 0 in u2 and u3."""

    first: GaussianLaw1D
    second: GaussianLaw1D = GaussianLaw1D(0.0, 0.0)
    third: GaussianLaw1D = GaussianLaw1D(0.0, 0.0)


def gaussian_invariant(params: MineaParams) -> ProductInvariantLaw:
    """The invariant law supported on the noise axis.

    Its first marginal is the OU stationary law N(kappa/lam1,
    sigma^2/(2 lam1)); it is invariant for every parameter choice and is the
    unique invariant law in the subcritical regime.
    """
    return ProductInvariantLaw(first=ou_stationary_law(params.lam1, params.kappa, params.sigma))


def lyapunov_ceiling(params: MineaParams, v) -> float:
    """Explicit all-time bound for E|u(t)|^2 started at v.

    From d E|u|^2/dt <= -rho E|u|^2 + (kappa^2/rho + sigma^2) with
    rho = min(lam1, lam2, lam3): the mean square never exceeds
    |v|^2 + (kappa^2/rho + sigma^2)/rho.
    """
    v = _as_states(v)
    rho = params.min_damping
    c = params.kappa * params.kappa / rho + params.sigma * params.sigma
    return float(np.dot(v, v) + c / rho)
