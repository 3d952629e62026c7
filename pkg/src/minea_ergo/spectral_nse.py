"""Divergence-free Fourier truncation of the 2D torus Navier-Stokes system.

A velocity field on [0, 2pi)^2 is stored as one complex amplitude per
wavevector along the unit direction k_perp/|k| (divergence-free gauge).  Only
a half-space of wavevectors is kept and conjugate modes are synthesized, so
fields are real and divergence-free by construction.  Inner products use the
normalized torus measure (1/(2pi)^2) dx; the single-mode eigenvectors of the
Stokes operator A (eigenvalue |k|^2) are then unit vectors in H.

Sign convention: the linear part is dissipative.  The integrated system is

    du = (-mu*A u - B(u, u) + kappa*e) dt + sigma*e dW

with e the unit eigenmode of the forced wavevector, so the semigroup decays
like exp(-mu |k|^2 t) per mode.  The nonlinearity B(u, v) is the
divergence-free projection of (u . grad) v, evaluated by direct convolution
over the truncation in a fixed canonical mode order (no FFT), which keeps
floating-point summation order reproducible and makes single-mode
self-interactions vanish bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BlowUpError, InvalidParameterError, InvalidStateError
from .measure_lab import EmpiricalMeasure1D, ks_critical_value, ks_distance
from .minea_core import BLOWUP_CAP
from .noise import RngStream, ou_step, ou_stationary_law

Wavevector = tuple[int, int]

MAX_TRUNCATION = 16

_SQRT1_2 = 1.0 / math.sqrt(2.0)


def _validate_wavevector(k, n_trunc: int | None = None) -> Wavevector:
    try:
        k1, k2 = k
    except (TypeError, ValueError) as err:
        raise InvalidParameterError(f"wavevector must be a pair of integers, got {k!r}") from err
    if float(k1) != int(k1) or float(k2) != int(k2):
        raise InvalidParameterError(f"wavevector components must be integers, got {k!r}")
    k1, k2 = int(k1), int(k2)
    if k1 == 0 and k2 == 0:
        raise InvalidParameterError("the zero wavevector carries no velocity mode")
    if n_trunc is not None and max(abs(k1), abs(k2)) > n_trunc:
        raise InvalidParameterError(f"wavevector {k!r} lies outside truncation {n_trunc}")
    return (k1, k2)


def _is_canonical(k: Wavevector) -> bool:
    return k[0] > 0 or (k[0] == 0 and k[1] > 0)


class ModeBasis:
    """Enumeration of the truncated mode set and the convolution stencil.

    ``half_modes`` lists the canonical (stored) wavevectors in lexicographic
    order; full modes include the conjugates.  The convolution arrays list
    every interacting triple (k, p, q = k - p) with its exact geometric
    coefficient, grouped by output mode in canonical order so that the
    nonlinear term is always summed in the same sequence.
    """

    def __init__(self, n_trunc: int):
        if not 1 <= n_trunc <= MAX_TRUNCATION:
            raise InvalidParameterError(
                f"truncation must be in [1, {MAX_TRUNCATION}], got {n_trunc}"
            )
        self.n_trunc = n_trunc
        rng_axis = range(-n_trunc, n_trunc + 1)
        full = [(i, j) for i in rng_axis for j in rng_axis if (i, j) != (0, 0)]
        full.sort()
        self.full_modes = np.array(full, dtype=np.int64)
        self.m_full = len(full)
        self.full_index = {tuple(k): i for i, k in enumerate(full)}
        half = [k for k in full if _is_canonical(k)]
        self.half_modes = [tuple(k) for k in half]
        self.m_half = len(half)
        self.half_index = {k: i for i, k in enumerate(self.half_modes)}
        self.half_of_full = np.empty(self.m_full, dtype=np.int64)
        self.conj_of_full = np.empty(self.m_full, dtype=bool)
        rho = np.empty((self.m_full, 2), dtype=np.int64)
        for i, k in enumerate(full):
            canonical = _is_canonical(k)
            rep = k if canonical else (-k[0], -k[1])
            self.half_of_full[i] = self.half_index[rep]
            self.conj_of_full[i] = not canonical
            rho[i] = rep
        self.rho_full = rho
        half_arr = np.array(self.half_modes, dtype=np.int64)
        self.ksq_half = (half_arr[:, 0] ** 2 + half_arr[:, 1] ** 2).astype(float)
        norms = np.sqrt(self.ksq_half)
        # Gauge direction k_perp/|k| of each stored mode.
        self.d_half = np.stack([-half_arr[:, 1] / norms, half_arr[:, 0] / norms], axis=-1)
        self._norm_full = np.sqrt(
            (self.full_modes[:, 0] ** 2 + self.full_modes[:, 1] ** 2).astype(float)
        )
        self._conv = None

    def canonical(self, k: Wavevector) -> tuple[int, float]:
        """(half index, sign) with stokes sign +1 for canonical k, -1 otherwise."""
        k = _validate_wavevector(k, self.n_trunc)
        if _is_canonical(k):
            return self.half_index[k], 1.0
        return self.half_index[(-k[0], -k[1])], -1.0

    @property
    def conv(self):
        if self._conv is None:
            self._conv = self._build_conv()
        return self._conv

    def _build_conv(self):
        n = self.n_trunc
        lookup = -np.ones((2 * n + 1, 2 * n + 1), dtype=np.int64)
        for i, (k1, k2) in enumerate(self.full_modes):
            lookup[k1 + n, k2 + n] = i
        out_idx, p_idx, q_idx, coefs = [], [], [], []
        p_modes = self.full_modes
        for o, k in enumerate(self.half_modes):
            q = np.asarray(k, dtype=np.int64) - p_modes
            ok = (np.abs(q) <= n).all(axis=1) & ((q[:, 0] != 0) | (q[:, 1] != 0))
            p_sel = np.nonzero(ok)[0]
            q_sel = lookup[q[p_sel, 0] + n, q[p_sel, 1] + n]
            rho_p = self.rho_full[p_sel]
            rho_q = self.rho_full[q_sel]
            qv = q[p_sel]
            # Integer geometry keeps parallel-mode interactions exactly zero:
            # cross(rho(p), q) vanishes identically when p and q are collinear.
            cross = rho_p[:, 0] * qv[:, 1] - rho_p[:, 1] * qv[:, 0]
            dot = rho_q[:, 0] * k[0] + rho_q[:, 1] * k[1]
            coef = (cross * dot).astype(float) / (
                self._norm_full[p_sel] * self._norm_full[q_sel] * math.sqrt(k[0] ** 2 + k[1] ** 2)
            )
            keep = coef != 0.0
            if not keep.any():
                continue
            p_keep = p_sel[keep]
            out_idx.append(np.full(p_keep.size, o, dtype=np.int64))
            p_idx.append(p_keep)
            q_idx.append(q_sel[keep])
            coefs.append(coef[keep])
        out_idx = np.concatenate(out_idx)
        p_idx = np.concatenate(p_idx)
        q_idx = np.concatenate(q_idx)
        coefs = np.concatenate(coefs)
        out_present, seg_starts = np.unique(out_idx, return_index=True)
        return _ConvStencil(
            p_idx=p_idx,
            q_idx=q_idx,
            coef=coefs,
            seg_starts=seg_starts,
            out_present=out_present,
        )


@dataclass(frozen=True)
class _ConvStencil:
    p_idx: np.ndarray
    q_idx: np.ndarray
    coef: np.ndarray
    seg_starts: np.ndarray
    out_present: np.ndarray


@lru_cache(maxsize=None)
def mode_basis(n_trunc: int) -> ModeBasis:
    return ModeBasis(int(n_trunc))


@dataclass(frozen=True)
class SpectralField:
    """Velocity field in the divergence-free gauge.

    ``amps[i]`` is the complex amplitude of ``basis.half_modes[i]`` along its
    gauge direction; the conjugate mode -k carries conjugate(amps[i]) along
    the same direction, so the physical field is real.  Instances are treated
    as immutable values.
    """

    n_trunc: int
    amps: np.ndarray

    def __post_init__(self):
        basis = mode_basis(self.n_trunc)
        if self.amps.shape != (basis.m_half,):
            raise InvalidStateError(
                f"amps must have shape ({basis.m_half},) for truncation {self.n_trunc}"
            )

    @property
    def basis(self) -> ModeBasis:
        return mode_basis(self.n_trunc)

    @classmethod
    def zero(cls, n_trunc: int) -> "SpectralField":
        return cls(n_trunc, np.zeros(mode_basis(n_trunc).m_half, dtype=complex))

    @classmethod
    def from_modes(cls, n_trunc: int, coefficients: dict) -> "SpectralField":
        """Build a field from {wavevector: complex amplitude} on stored modes."""
        basis = mode_basis(n_trunc)
        amps = np.zeros(basis.m_half, dtype=complex)
        for k, value in coefficients.items():
            k = _validate_wavevector(k, n_trunc)
            if not _is_canonical(k):
                raise InvalidParameterError(
                    f"{k!r} is a synthesized conjugate mode; assign its canonical partner"
                )
            amps[basis.half_index[k]] = value
        return cls(n_trunc, amps)

    def coefficient(self, k) -> complex:
        """Gauge amplitude of any mode, synthesizing conjugates."""
        basis = self.basis
        k = _validate_wavevector(k, self.n_trunc)
        if _is_canonical(k):
            return complex(self.amps[basis.half_index[k]])
        return complex(np.conj(self.amps[basis.half_index[(-k[0], -k[1])]]))

    def h_norm_sq(self) -> float:
        return 2.0 * float(np.sum(np.abs(self.amps) ** 2))

    def v_norm_sq(self) -> float:
        return 2.0 * float(np.sum(self.basis.ksq_half * np.abs(self.amps) ** 2))

    def h_inner(self, other: "SpectralField") -> float:
        if other.n_trunc != self.n_trunc:
            raise InvalidParameterError("fields live in different truncations")
        return 2.0 * float(np.real(np.sum(self.amps * np.conj(other.amps))))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.n_trunc != self.n_trunc:
            raise InvalidParameterError("fields live in different truncations")
        return SpectralField(self.n_trunc, self.amps + other.amps)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if other.n_trunc != self.n_trunc:
            raise InvalidParameterError("fields live in different truncations")
        return SpectralField(self.n_trunc, self.amps - other.amps)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.n_trunc, self.amps * complex(scalar))

    __rmul__ = __mul__


def stokes_eigenmode(k, n_trunc: int | None = None) -> SpectralField:
    """Unit-H-norm eigenvector sqrt(2) cos(k.x) k_perp/|k| of the Stokes operator.

    Satisfies A e = |k|^2 e, |e|_H = 1 and |e|_V^2 = |k|^2.  The minimal
    truncation holding the mode is used unless ``n_trunc`` is given.
    """
    k = _validate_wavevector(k, n_trunc)
    if n_trunc is None:
        n_trunc = max(abs(k[0]), abs(k[1]))
    basis = mode_basis(n_trunc)
    idx, sign = basis.canonical(k)
    amps = np.zeros(basis.m_half, dtype=complex)
    amps[idx] = sign * _SQRT1_2
    return SpectralField(n_trunc, amps)


def apply_A(field: SpectralField) -> SpectralField:
    """Stokes operator: multiply every mode by its eigenvalue |k|^2."""
    return SpectralField(field.n_trunc, field.amps * field.basis.ksq_half)


def _full_amps(basis: ModeBasis, amps: np.ndarray) -> np.ndarray:
    full = amps[..., basis.half_of_full]
    return np.where(basis.conj_of_full, np.conj(full), full)


def _conv_amps(basis: ModeBasis, a_u: np.ndarray, a_v: np.ndarray) -> np.ndarray:
    """Gauge amplitudes of the projected advection P((u . grad) v).

    Direct convolution over precomputed triples in canonical order:
    out_k = i * sum_p amp_u(p) amp_v(k-p) coef(k, p).
    """
    conv = basis.conv
    fu = _full_amps(basis, a_u)
    fv = fu if a_v is a_u else _full_amps(basis, a_v)
    terms = fu[..., conv.p_idx] * fv[..., conv.q_idx]
    terms *= conv.coef
    sums = np.add.reduceat(terms, conv.seg_starts, axis=-1)
    out = np.zeros(a_u.shape[:-1] + (basis.m_half,), dtype=complex)
    out[..., conv.out_present] = 1j * sums
    return out


def bilinear_B_spectral(u: SpectralField, v: SpectralField) -> SpectralField:
    """Galerkin-projected nonlinearity B(u, v) = P((u . grad) v)."""
    if u.n_trunc != v.n_trunc:
        raise InvalidParameterError("fields live in different truncations")
    return SpectralField(u.n_trunc, _conv_amps(u.basis, u.amps, v.amps))


def b_spectral_form(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """Trilinear form <B(u, v), w>_H."""
    return bilinear_B_spectral(u, v).h_inner(w)


@dataclass(frozen=True)
class NseParams:
    """Viscosity mu, forced wavevector, forcing kappa, noise sigma, truncation."""

    mu: float
    forced_mode: Wavevector
    kappa: float
    sigma: float
    n_trunc: int

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu <= 0:
            raise InvalidParameterError(f"mu must be finite and positive, got {self.mu}")
        if not math.isfinite(self.kappa):
            raise InvalidParameterError(f"kappa must be finite, got {self.kappa}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidParameterError(f"sigma must be finite and >= 0, got {self.sigma}")
        object.__setattr__(self, "forced_mode", _validate_wavevector(self.forced_mode, self.n_trunc))
        mode_basis(self.n_trunc)  # validates the truncation range

    @property
    def forced_eigenvalue(self) -> float:
        k1, k2 = self.forced_mode
        return float(k1 * k1 + k2 * k2)


@lru_cache(maxsize=None)
def _step_precomp(params: NseParams, dt: float):
    basis = mode_basis(params.n_trunc)
    rates = params.mu * basis.ksq_half * dt
    decay = np.exp(-rates)
    # dt*phi1(-mu|k|^2 dt) = (1 - e^{-mu|k|^2 dt})/(mu|k|^2), exact for
    # constant forcing; expm1 keeps it accurate for small rates.
    phi = -np.expm1(-rates) / (params.mu * basis.ksq_half)
    idx, sign = basis.canonical(params.forced_mode)
    e_amp = np.zeros(basis.m_half)
    e_amp[idx] = sign * _SQRT1_2
    forcing = params.kappa * phi * e_amp
    return decay, phi, e_amp, forcing, idx, sign


def _step_amps(params: NseParams, amps: np.ndarray, dt: float, dw) -> np.ndarray:
    decay, phi, e_amp, forcing, _, _ = _step_precomp(params, dt)
    basis = mode_basis(params.n_trunc)
    b_amps = _conv_amps(basis, amps, amps)
    new = decay * amps - phi * b_amps
    new += forcing
    noise = params.sigma * np.asarray(dw, dtype=float)
    new += np.expand_dims(noise, -1) * e_amp if noise.ndim else noise * e_amp
    return new


def _check_amps(amps: np.ndarray) -> None:
    h_sq = 2.0 * (np.abs(amps) ** 2).sum(axis=-1)
    bad = ~np.isfinite(h_sq) | (h_sq > BLOWUP_CAP * BLOWUP_CAP)
    if not bad.any():
        return
    slot = int(np.argmax(bad)) if bad.ndim else 0
    raise BlowUpError(
        f"field H-norm exceeded {BLOWUP_CAP:g} or became non-finite",
        trajectory_index=slot,
    )


def step_nse(params: NseParams, field: SpectralField, dt: float, dw: float) -> SpectralField:
    """One exponential-Euler step; ``dw`` is the Brownian increment (var dt).

    The linear part is integrated exactly per mode (factor e^{-mu|k|^2 dt});
    the nonlinearity is explicit through dt*phi1, the constant forcing is
    integrated exactly, and the noise enters the forced mode's real amplitude.
    """
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if field.n_trunc != params.n_trunc:
        raise InvalidParameterError(
            f"field truncation {field.n_trunc} does not match params truncation {params.n_trunc}"
        )
    new = _step_amps(params, field.amps, dt, float(dw))
    _check_amps(new)
    return SpectralField(params.n_trunc, new)


def forced_amplitude(params: NseParams, field: SpectralField) -> float:
    """Coordinate of the field along the forced unit eigenmode."""
    idx, sign = mode_basis(params.n_trunc).canonical(params.forced_mode)
    return math.sqrt(2.0) * sign * float(np.real(field.amps[idx]))


def random_field(n_trunc: int, rng: np.random.Generator, decay: float = 2.0,
                 unit_h_norm: bool = False) -> SpectralField:
    """Random smooth field: amplitudes ~ complex normal scaled by |k|^-decay."""
    basis = mode_basis(n_trunc)
    scale = (1.0 + basis.ksq_half) ** (-decay / 2.0)
    amps = scale * (rng.standard_normal(basis.m_half) + 1j * rng.standard_normal(basis.m_half))
    field = SpectralField(n_trunc, amps)
    if unit_h_norm:
        h = math.sqrt(field.h_norm_sq())
        if h == 0.0:
            raise InvalidParameterError("degenerate random draw; change the rng state")
        field = SpectralField(n_trunc, amps / h)
    return field


@dataclass(frozen=True)
class EigenmodeConsistency:
    """Forced-axis run compared against the exact scalar OU recursion.

    ``max_deviation`` is the sup over steps of |amplitude - ou path| on the
    same gaussians; ``off_mode_energy_max`` is the largest off-forced-mode
    H-energy seen (exactly 0.0 when the invariant subspace is preserved
    bit-exactly).
    """

    max_deviation: float
    off_mode_energy_max: float
    n_steps: int
    dt: float


_OFF_MODE_ENERGY_TOL = 1e-12


def eigenmode_consistency(
    params: NseParams,
    a: float,
    t_end: float,
    dt: float,
    stream: RngStream,
) -> EigenmodeConsistency:
    """Run from a*e on the forced mode and track deviation from the OU path.

    The forced amplitude follows d alpha = (-mu |k0|^2 alpha + kappa) dt
    + sigma dW up to the single-mode self-advection, which vanishes; the
    scheme reproduces the exact OU recursion up to an O(dt) noise-scale
    difference.
    """
    if dt <= 0 or t_end <= 0:
        raise InvalidParameterError("t_end and dt must be positive")
    if not math.isfinite(a):
        raise InvalidParameterError(f"amplitude must be finite, got {a}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise InvalidParameterError("t_end is below one step of dt")
    basis = mode_basis(params.n_trunc)
    _, _, _, _, idx, sign = _step_precomp(params, dt)
    amps = np.zeros(basis.m_half, dtype=complex)
    amps[idx] = a * sign * _SQRT1_2
    off_mask = np.ones(basis.m_half, dtype=bool)
    off_mask[idx] = False
    rate = params.mu * params.forced_eigenvalue
    sqrt_dt = math.sqrt(dt)
    sqrt2 = math.sqrt(2.0)
    gen = stream.generator()
    z = float(a)
    max_dev = 0.0
    off_max = 0.0
    done = 0
    while done < n_steps:
        block = min(4096, n_steps - done)
        gauss = gen.standard_normal(block)
        for g in gauss:
            amps = _step_amps(params, amps, dt, sqrt_dt * g)
            z = ou_step(z, dt, rate, params.kappa, params.sigma, g)
            alpha = sqrt2 * sign * amps[idx].real
            dev = abs(alpha - z)
            if dev > max_dev:
                max_dev = dev
            if basis.m_half > 1:
                off = 2.0 * float((np.abs(amps[off_mask]) ** 2).sum())
                if off > off_max:
                    off_max = off
        done += block
        _check_amps(amps)
    if off_max > _OFF_MODE_ENERGY_TOL:
        raise InvalidStateError(
            f"forced-mode subspace leaked: off-mode energy reached {off_max:g}"
        )
    return EigenmodeConsistency(
        max_deviation=float(max_dev), off_mode_energy_max=off_max, n_steps=n_steps, dt=dt
    )


@dataclass(frozen=True)
class SmallNoiseResult:
    """Ensemble decay of the off-forced-mode energy plus the endpoint law check.

    ``ks_forced_mode`` is NaN when sigma = 0 (degenerate limit law).
    """

    times: np.ndarray
    offmode_energy_mean: np.ndarray
    total_energy_mean: np.ndarray
    ks_forced_mode: float
    ks_critical: float
    forced_mean_analytic: float
    forced_variance_analytic: float


# Documented heuristic for "forcing small relative to viscosity": the
# quadratic self-interaction stays negligible when
# kappa^2/(lam*mu^4) + sigma^2/(2*mu^3) <= 0.01 with lam = |k0|^2.
_SMALL_NOISE_BUDGET = 0.01


def small_noise_convergence(
    params: NseParams,
    v: SpectralField,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
) -> SmallNoiseResult:
    """Track ensemble off-mode energy decay and the forced-mode endpoint law.

    For weak forcing the field collapses onto the forced axis and the forced
    amplitude approaches the scalar OU stationary law
    N(kappa/(mu |k0|^2), sigma^2/(2 mu |k0|^2)).  Trajectory j uses stream
    (seed, j); the endpoint law is compared by KS distance.
    """
    lam = params.forced_eigenvalue
    budget = params.kappa**2 / (lam * params.mu**4) + params.sigma**2 / (2.0 * params.mu**3)
    if budget > _SMALL_NOISE_BUDGET:
        raise InvalidParameterError(
            f"forcing too strong for the small-noise regime: "
            f"kappa^2/(lam mu^4) + sigma^2/(2 mu^3) = {budget:g} > {_SMALL_NOISE_BUDGET}"
        )
    if v.n_trunc != params.n_trunc:
        raise InvalidParameterError("initial field truncation does not match params")
    if n_traj < 2:
        raise InvalidParameterError(f"n_traj must be >= 2, got {n_traj}")
    if dt <= 0 or t_end <= 0:
        raise InvalidParameterError("t_end and dt must be positive")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise InvalidParameterError("t_end is below one step of dt")
    basis = mode_basis(params.n_trunc)
    _, _, _, _, idx, sign = _step_precomp(params, dt)
    off_mask = np.ones(basis.m_half, dtype=bool)
    off_mask[idx] = False
    stride = max(1, n_steps // 200)
    record_steps = list(range(0, n_steps + 1, stride))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    record_mask = np.zeros(n_steps + 1, dtype=bool)
    record_mask[record_steps] = True
    amps = np.tile(v.amps, (n_traj, 1))
    gens = [RngStream(seed, j).generator() for j in range(n_traj)]
    sqrt_dt = math.sqrt(dt)
    offmode = [2.0 * (np.abs(amps[:, off_mask]) ** 2).sum(axis=1).mean()]
    total = [2.0 * (np.abs(amps) ** 2).sum(axis=1).mean()]
    done = 0
    gauss = np.empty((n_traj, 4096))
    while done < n_steps:
        block = min(4096, n_steps - done)
        for i, gen in enumerate(gens):
            gauss[i, :block] = gen.standard_normal(block)
        for j in range(block):
            amps = _step_amps(params, amps, dt, sqrt_dt * gauss[:, j])
            if record_mask[done + j + 1]:
                offmode.append(2.0 * (np.abs(amps[:, off_mask]) ** 2).sum(axis=1).mean())
                total.append(2.0 * (np.abs(amps) ** 2).sum(axis=1).mean())
        done += block
        _check_amps(amps)
    law = ou_stationary_law(params.mu * lam, params.kappa, params.sigma)
    finals = math.sqrt(2.0) * sign * amps[:, idx].real
    emp = EmpiricalMeasure1D.from_samples(finals)
    ks = ks_distance(emp, law) if law.variance > 0 else float("nan")
    return SmallNoiseResult(
        times=np.asarray(record_steps, dtype=float) * dt,
        offmode_energy_mean=np.asarray(offmode),
        total_energy_mean=np.asarray(total),
        ks_forced_mode=ks,
        ks_critical=ks_critical_value(n_traj, alpha=0.01),
        forced_mean_analytic=law.mean,
        forced_variance_analytic=law.variance,
    )


@dataclass(frozen=True)
class IdentityReport:
    """Maximum normalized violations of the structural identities of B and A.

    antisymmetry: b(u,v,w) + b(u,w,v); energy_flux: <B(u,v),v>;
    eigenmode_self_advection: |B(e,e)|_H per eigenmode;
    enstrophy_cancellation: <B(v,v),Av>; stokes_form: <Au,u> - |u|_V^2.
    All are scaled by the product of V-norms of the inputs (H-norm for the
    unit eigenmodes).
    """

    antisymmetry: float
    energy_flux: float
    eigenmode_self_advection: float
    enstrophy_cancellation: float
    stokes_form: float
    tolerance: float

    @property
    def max_violation(self) -> float:
        return max(
            self.antisymmetry,
            self.energy_flux,
            self.eigenmode_self_advection,
            self.enstrophy_cancellation,
            self.stokes_form,
        )

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "antisymmetry": self.antisymmetry,
            "energy_flux": self.energy_flux,
            "eigenmode_self_advection": self.eigenmode_self_advection,
            "enstrophy_cancellation": self.enstrophy_cancellation,
            "stokes_form": self.stokes_form,
            "tolerance": self.tolerance,
            "max_violation": self.max_violation,
            "pass": self.passed,
        }


def identity_suite(
    n_trunc: int,
    n_fields: int = 100,
    seed: int = 0,
    tolerance: float = 1e-10,
    corruption: float = 0.0,
) -> IdentityReport:
    """Check the structural identities on random fields and all eigenmodes.

    ``corruption`` perturbs the computed B(u, v) before the energy-flux
    pairing; a nonzero value is a negative control that must trip the suite.
    """
    if n_fields < 1:
        raise InvalidParameterError(f"n_fields must be >= 1, got {n_fields}")
    basis = mode_basis(n_trunc)
    rng = RngStream(seed, 0).generator()
    anti = flux = enstrophy = stokes = 0.0
    for _ in range(n_fields):
        u = random_field(n_trunc, rng)
        v = random_field(n_trunc, rng)
        w = random_field(n_trunc, rng)
        nu, nv, nw = (math.sqrt(f.v_norm_sq()) for f in (u, v, w))
        scale_uvw = max(nu * nv * nw, 1e-300)
        anti = max(
            anti,
            abs(b_spectral_form(u, v, w) + b_spectral_form(u, w, v)) / scale_uvw,
        )
        b_uv = bilinear_B_spectral(u, v)
        if corruption != 0.0:
            perturbed = b_uv.amps.copy()
            perturbed[0] += corruption
            b_uv = SpectralField(n_trunc, perturbed)
        flux = max(flux, abs(b_uv.h_inner(v)) / max(nu * nv * nv, 1e-300))
        enstrophy = max(
            enstrophy,
            abs(b_spectral_form(v, v, apply_A(v))) / max(nv * nv * nv * n_trunc**2, 1e-300),
        )
        stokes = max(
            stokes,
            abs(apply_A(u).h_inner(u) - u.v_norm_sq()) / max(u.v_norm_sq(), 1e-300),
        )
    eigen = 0.0
    for k in basis.half_modes:
        e = stokes_eigenmode(k, n_trunc)
        eigen = max(eigen, math.sqrt(bilinear_B_spectral(e, e).h_norm_sq()))
    return IdentityReport(
        antisymmetry=anti,
        energy_flux=flux,
        eigenmode_self_advection=eigen,
        enstrophy_cancellation=enstrophy,
        stokes_form=stokes,
        tolerance=tolerance,
    )


def energy_bound_ensemble(
    params: NseParams,
    v: SpectralField,
    t_end: float,
    dt: float,
    n_traj: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean of |u(t)|_H^2 on the recording grid; returns (times, means).

    Used to verify the explicit dissipation ceiling
    |v|^2 + (kappa^2/(mu lam0) + sigma^2)/(mu lam0) with lam0 the smallest
    Stokes eigenvalue in the truncation (lam0 = 1 whenever |k|=1 modes are
    present).
    """
    if v.n_trunc != params.n_trunc:
        raise InvalidParameterError("initial field truncation does not match params")
    if n_traj < 2:
        raise InvalidParameterError(f"n_traj must be >= 2, got {n_traj}")
    n_steps = int(round(t_end / dt))
    if dt <= 0 or n_steps < 1:
        raise InvalidParameterError("t_end and dt must define at least one step")
    stride = max(1, n_steps // 400)
    record_steps = list(range(0, n_steps + 1, stride))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    record_mask = np.zeros(n_steps + 1, dtype=bool)
    record_mask[record_steps] = True
    amps = np.tile(v.amps, (n_traj, 1))
    gens = [RngStream(seed, j).generator() for j in range(n_traj)]
    sqrt_dt = math.sqrt(dt)
    means = [2.0 * (np.abs(amps) ** 2).sum(axis=1).mean()]
    done = 0
    gauss = np.empty((n_traj, 4096))
    while done < n_steps:
        block = min(4096, n_steps - done)
        for i, gen in enumerate(gens):
            gauss[i, :block] = gen.standard_normal(block)
        for j in range(block):
            amps = _step_amps(params, amps, dt, sqrt_dt * gauss[:, j])
            if record_mask[done + j + 1]:
                means.append(2.0 * (np.abs(amps) ** 2).sum(axis=1).mean())
        done += block
        _check_amps(amps)
    return np.asarray(record_steps, dtype=float) * dt, np.asarray(means)


def nse_lyapunov_ceiling(params: NseParams, v: SpectralField) -> float:
    """Explicit all-time bound for E|u(t)|_H^2 started at v.

    From d E|u|^2 <= (-2 mu |u|_V^2 + 2 kappa <u,e> + sigma^2) dt and
    |u|_V^2 >= lam0 |u|_H^2: the mean square never exceeds
    |v|^2 + (kappa^2/(mu lam0) + sigma^2)/(mu lam0).
    """
    basis = mode_basis(params.n_trunc)
    lam0 = float(basis.ksq_half.min())
    c = params.kappa**2 / (params.mu * lam0) + params.sigma**2
    return v.h_norm_sq() + c / (params.mu * lam0)
