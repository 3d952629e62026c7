"""Figure renderers for minea-ergo output tables.

Three kinds: the (kappa, sigma) verdict heatmap with the uniqueness
threshold overlaid, a normalized endpoint histogram with the analytic
Gaussian density, and the running time average of X against the
lower-bound line. All rendering is batch (Agg); a render call reads one
input file and writes one image, PNG or SVG by extension. Identical
inputs give identical image bytes: the savefig metadata that would
otherwise vary (tool version, date) is pinned.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch

from .io import VERDICTS, read_phase_scan, read_samples, read_trajectory

VERDICT_COLORS = {
    "unique-like": "#3b6fb6",
    "multi-like": "#c23b3b",
    "inconclusive": "#9c9c9c",
    "error": "#1a1a1a",
    "missing": "#ffffff",
}
FEW_SAMPLES = 30
FIGSIZE = (6.0, 4.5)
DPI = 120


def _check_positive(name, value) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value}")
    return value


def _check_lambdas(lambdas) -> tuple[float, float, float]:
    if not isinstance(lambdas, (list, tuple)) or len(lambdas) != 3:
        raise ValueError(f"lambda must be a list of three positive numbers, got {lambdas!r}")
    return tuple(_check_positive("lambda entries", c) for c in lambdas)


def save_figure(fig, out: str) -> str:
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    ext = os.path.splitext(out)[1].lower()
    if ext == ".svg":
        # the SVG backend stamps the current date unless told not to
        fig.savefig(out, metadata={"Date": None})
    else:
        fig.savefig(out, metadata={"Software": "minea-plots"})
    plt.close(fig)
    return out


def _edges(centers: np.ndarray) -> np.ndarray:
    centers = np.sort(centers)
    if centers.size == 1:
        h = max(0.1, 0.1 * abs(centers[0]))
        return np.array([centers[0] - h, centers[0] + h])
    mid = 0.5 * (centers[1:] + centers[:-1])
    first = centers[0] - (mid[0] - centers[0])
    last = centers[-1] + (centers[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])


def phase_figure(scan, lambdas):
    """Categorical heatmap of verdicts with the threshold kappa overlaid."""
    lam = _check_lambdas(lambdas)
    threshold = lam[0] * min(lam[1], lam[2])
    kappas = np.unique(scan.kappa)
    sigmas = np.unique(scan.sigma)
    categories = list(VERDICTS) + ["missing"]
    code = {name: k for k, name in enumerate(categories)}
    grid = np.full((kappas.size, sigmas.size), code["missing"], dtype=int)
    ki = {v: i for i, v in enumerate(kappas)}
    si = {v: i for i, v in enumerate(sigmas)}
    for kappa, sigma, verdict in zip(scan.kappa, scan.sigma, scan.verdict):
        grid[ki[kappa], si[sigma]] = code[verdict]

    fig, ax = plt.subplots(figsize=FIGSIZE)
    cmap = ListedColormap([VERDICT_COLORS[name] for name in categories])
    ax.pcolormesh(
        _edges(sigmas), _edges(kappas), grid, cmap=cmap, vmin=-0.5, vmax=len(categories) - 0.5
    )
    ax.axhline(threshold, color="black", linewidth=1.5, linestyle="--", label="threshold")
    present = sorted(set(scan.verdict), key=categories.index)
    handles = [Patch(facecolor=VERDICT_COLORS[name], label=name) for name in present]
    if (grid == code["missing"]).any():
        handles.append(Patch(facecolor=VERDICT_COLORS["missing"], edgecolor="black", label="missing"))
    ax.legend(handles=handles, loc="upper right", fontsize=8, framealpha=0.9)
    ax.set_xlabel("sigma")
    ax.set_ylabel("kappa")
    ax.set_title(f"uniqueness phase diagram (threshold kappa = {threshold:g})")
    return fig, ax


def render_phase(scan_path: str, lambdas, out: str) -> str:
    scan = read_phase_scan(scan_path)
    fig, _ = phase_figure(scan, lambdas)
    return save_figure(fig, out)


def gaussian_density(x, mean: float, variance: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mean) ** 2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def histogram_figure(samples, lam1: float, kappa: float, sigma: float):
    """Normalized histogram with the stationary law of the forced coordinate."""
    lam1 = _check_positive("lam1", lam1)
    kappa = float(kappa)
    sigma = float(sigma)
    if not math.isfinite(kappa) or not math.isfinite(sigma) or sigma < 0:
        raise ValueError(f"need finite kappa and sigma >= 0, got {kappa}, {sigma}")
    samples = np.asarray(samples, dtype=float)
    mean = kappa / lam1
    variance = sigma**2 / (2.0 * lam1)

    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.hist(samples, bins="auto", density=True, color="#7da7d9", edgecolor="white", label="samples")
    if variance > 0:
        lo = min(samples.min(), mean - 4.0 * math.sqrt(variance))
        hi = max(samples.max(), mean + 4.0 * math.sqrt(variance))
        xs = np.linspace(lo, hi, 400)
        ax.plot(xs, gaussian_density(xs, mean, variance), color="#c23b3b", linewidth=2, label="analytic law")
    else:
        ax.axvline(mean, color="#c23b3b", linewidth=2, linestyle="--", label="point mass")
    if samples.size < FEW_SAMPLES:
        ax.text(
            0.02,
            0.98,
            f"only {samples.size} samples",
            transform=ax.transAxes,
            va="top",
            fontsize=9,
            color="#803030",
        )
    ax.legend(loc="upper left" if samples.size >= FEW_SAMPLES else "upper right", fontsize=8)
    ax.set_xlabel("u1")
    ax.set_ylabel("density")
    ax.set_title(f"endpoint law vs N({mean:g}, {variance:g})")
    return fig, ax


def render_histogram(samples_path: str, lam1: float, kappa: float, sigma: float, out: str) -> str:
    samples = read_samples(samples_path)
    fig, _ = histogram_figure(samples, lam1, kappa, sigma)
    return save_figure(fig, out)


def running_time_average(times, values) -> np.ndarray:
    """(1/(t - t0)) * integral of values from t0 to t by the trapezoid rule.

    The first entry, where the window is empty, is defined as values[0].
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1 or times.size == 0:
        raise ValueError("times and values must be matching nonempty 1d arrays")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ValueError("times must be strictly increasing")
    increments = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
    integral = np.cumsum(increments)
    out = np.empty_like(times)
    out[0] = values[0]
    out[1:] = integral / (times[1:] - times[0])
    return out


def timeavg_figure(table, lam1: float, rho: float):
    """Running average of X(t) with the horizontal line at lam1*rho."""
    lam1 = _check_positive("lam1", lam1)
    rho = _check_positive("rho", rho)
    avg = running_time_average(table.times, table.x)
    bound = lam1 * rho

    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(table.times, table.x, color="#bbbbbb", linewidth=0.7, label="X(t)")
    ax.plot(table.times, avg, color="#3b6fb6", linewidth=2, label="running average")
    ax.axhline(bound, color="#c23b3b", linewidth=1.5, linestyle="--", label=f"bound {bound:g}")
    ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("X")
    ax.set_title("time average of the transverse energy")
    return fig, ax


def render_timeavg(trajectory_path: str, lam1: float, rho: float, out: str) -> str:
    table = read_trajectory(trajectory_path)
    fig, _ = timeavg_figure(table, lam1, rho)
    return save_figure(fig, out)
