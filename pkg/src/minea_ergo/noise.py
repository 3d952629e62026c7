"""Reproducible random streams, Brownian increments, and exact scalar OU steps.

Streams are counter-based (Philox) keyed by ``(seed, stream_index)``, so every
trajectory of an ensemble owns an independent stream that can be regenerated
on any worker without coordination.  The Ornstein-Uhlenbeck helpers implement
the exact one-step transition of ``dz = (-lam*z + kappa) dt + sigma dW`` and
its stationary law, which the rest of the package uses both as a building
block and as an analytic reference distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InvalidParameterError

_UINT64_MAX = 2**64 - 1
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RngStream:
    """Value-like identifier of one random stream.

    The stream content is a pure function of ``(seed, stream_index)``;
    :meth:`generator` always returns a generator positioned at the start of
    the stream.  A generator instance is stateful and must not be shared
    between workers.
    """

    seed: int
    stream_index: int

    def __post_init__(self):
        for name, value in (("seed", self.seed), ("stream_index", self.stream_index)):
            if not isinstance(value, (int, np.integer)) or not (0 <= value <= _UINT64_MAX):
                raise InvalidParameterError(
                    f"{name} must be an integer in [0, 2**64), got {value!r}"
                )

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def make_stream(seed: int, traj_index: int = 0) -> RngStream:
    """Stream for trajectory ``traj_index`` of the experiment seeded ``seed``."""
    return RngStream(seed, traj_index)


@dataclass(frozen=True)
class BrownianIncrements:
    """Increments of a scalar Brownian motion on a uniform grid of step dt."""

    dt: float
    increments: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")


def brownian_increments(stream: RngStream, dt: float, n: int) -> BrownianIncrements:
    """Draw n independent N(0, dt) increments from the start of ``stream``."""
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n}")
    gauss = stream.generator().standard_normal(int(n))
    return BrownianIncrements(float(dt), gauss * math.sqrt(dt))


@dataclass(frozen=True)
class GaussianLaw1D:
    """Scalar Gaussian law; variance 0 denotes the point mass at ``mean``."""

    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean) or not math.isfinite(self.variance):
            raise InvalidParameterError("mean and variance must be finite")
        if self.variance < 0:
            raise InvalidParameterError(f"variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def cdf(self, x):
        """Distribution function; a step function in the degenerate case."""
        x = np.asarray(x, dtype=float)
        if self.variance == 0.0:
            return (x >= self.mean).astype(float)
        return ndtr((x - self.mean) / self.std)


def ou_step(z, h: float, lam1: float, kappa: float, sigma: float, gauss):
    """Exact transition of dz = (-lam1*z + kappa) dt + sigma dW over step h.

    Returns ``e^{-lam1 h} z + (kappa/lam1)(1 - e^{-lam1 h})
    + sigma sqrt((1 - e^{-2 lam1 h})/(2 lam1)) gauss`` where ``gauss`` is a
    standard normal draw.  ``z`` and ``gauss`` may be arrays of equal shape.
    There is no step-size restriction: the formula is the exact conditional
    law of the process, so composing steps of any sizes is distribution-exact.
    """
    if h <= 0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    if lam1 <= 0:
        raise InvalidParameterError(f"lam1 must be positive, got {lam1}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    decay = math.exp(-lam1 * h)
    # expm1 keeps the drift and variance factors accurate for small lam1*h.
    one_minus = -math.expm1(-lam1 * h)
    noise_std = sigma * math.sqrt(-math.expm1(-2.0 * lam1 * h) / (2.0 * lam1))
    return decay * z + (kappa / lam1) * one_minus + noise_std * gauss


def ou_stationary_law(lam1: float, kappa: float, sigma: float) -> GaussianLaw1D:
    """Stationary law N(kappa/lam1, sigma^2/(2 lam1)) of the scalar OU process."""
    if lam1 <= 0:
        raise InvalidParameterError(f"lam1 must be positive, got {lam1}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    return GaussianLaw1D(kappa / lam1, sigma * sigma / (2.0 * lam1))


def _std_normal_cdf(x: float) -> float:
    # erfc keeps the tail accurate; plain erf would lose digits for x << 0.
    return 0.5 * math.erfc(-x / _SQRT2)


def abs_moment(law: GaussianLaw1D) -> float:
    """E|Z| for Z ~ N(mean, variance): the folded-normal mean.

    ``s*sqrt(2/pi)*exp(-m^2/(2 s^2)) + m*(1 - 2*Phi(-m/s))`` with s the
    standard deviation; degenerates to |mean| when the variance is 0.
    """
    s = law.std
    if s == 0.0:
        return abs(law.mean)
    m = law.mean
    r = m / s
    return s * math.sqrt(2.0 / math.pi) * math.exp(-0.5 * r * r) + m * (
        1.0 - 2.0 * _std_normal_cdf(-r)
    )
