"""Noise generators and spectral diagnostics.

Three phase-noise colors (white, flicker, random walk) plus a clamped
half-normal depolarization draw.  Every sampler takes an explicit RNG
stream; nothing touches global state, so concurrent trials only need
disjoint streams (see :func:`split_streams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "NoiseSpec",
    "NoiseSeries",
    "make_rng",
    "split_streams",
    "sample_depolarization",
    "expected_depolarization",
    "white_noise",
    "flicker_noise",
    "random_walk_noise",
    "noise_sequence",
    "periodogram",
    "fit_psd_slope",
]

Color = Literal["white", "flicker", "random_walk"]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator for one stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split_streams(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child streams of a root seed.

    Children are spawned, not offset, so the set of streams is identical
    no matter how trials are scheduled across threads.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


@dataclass(frozen=True)
class NoiseSpec:
    """Strengths of the four imperfection channels plus the stream seed.

    ``p_d`` is dimensionless; the three sigma fields carry the units of
    whatever quantity the scenario senses (rad, m/s^2, rad/s).
    """

    p_d: float = 0.0
    sigma_w: float = 0.0
    sigma_f: float = 0.0
    sigma_r: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_d", "sigma_w", "sigma_f", "sigma_r"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def sigma_g(self) -> float:
        """Combined phase-noise strength, quadrature sum of the colors."""
        return math.sqrt(self.sigma_w**2 + self.sigma_f**2 + self.sigma_r**2)

    @property
    def any_phase_noise(self) -> bool:
        return self.sigma_g > 0.0


@dataclass(frozen=True)
class NoiseSeries:
    samples: np.ndarray = field(repr=False)
    dt: float
    color: Color

    def __len__(self) -> int:
        return len(self.samples)


def sample_depolarization(
    p_d: float, rng: np.random.Generator, size: int | None = None
):
    """Clamped half-normal depolarization draw(s), |N(0, p_d^2)| capped at 1."""
    if p_d < 0.0:
        raise ValueError("p_d must be >= 0")
    if p_d == 0.0:
        return 0.0 if size is None else np.zeros(size)
    draw = np.abs(rng.normal(0.0, p_d, size))
    return np.minimum(draw, 1.0) if size is not None else min(float(draw), 1.0)


def expected_depolarization(p_d: float) -> float:
    """Closed-form mean of the clamped half-normal draw.

    E[min(|X|, 1)] for X ~ N(0, p_d^2); the two terms are the truncated
    half-normal mean and the clamped tail mass.
    """
    if p_d < 0.0:
        raise ValueError("p_d must be >= 0")
    if p_d == 0.0:
        return 0.0
    return p_d * math.sqrt(2.0 / math.pi) * (
        1.0 - math.exp(-1.0 / (2.0 * p_d**2))
    ) + math.erfc(1.0 / (p_d * math.sqrt(2.0)))


def white_noise(
    n: int, sigma: float, rng: np.random.Generator, dt: float = 1.0
) -> NoiseSeries:
    """i.i.d. Gaussian samples of standard deviation sigma."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    return NoiseSeries(rng.normal(0.0, sigma, n), dt, "white")


def flicker_noise(
    n: int, sigma: float, rng: np.random.Generator, dt: float = 1.0
) -> NoiseSeries:
    """1/f-power noise via spectral shaping of white noise.

    The amplitude filter is 1 / sqrt(k) per frequency bin (DC zeroed),
    which squares to the 1/f power spectral density.  The realization is
    rescaled so its sample standard deviation equals sigma exactly.
    """
    if n < 8:
        raise ValueError("n must be >= 8")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return NoiseSeries(np.zeros(n), dt, "flicker")
    spectrum = np.fft.rfft(rng.normal(0.0, 1.0, n))
    shaping = np.zeros(len(spectrum))
    shaping[1:] = 1.0 / np.sqrt(np.arange(1, len(spectrum)))
    samples = np.fft.irfft(spectrum * shaping, n)
    std = samples.std()
    if std == 0.0:
        return NoiseSeries(np.zeros(n), dt, "flicker")
    return NoiseSeries(samples * (sigma / std), dt, "flicker")


def random_walk_noise(
    n: int, sigma: float, rng: np.random.Generator, dt: float = 1.0
) -> NoiseSeries:
    """Running sum of i.i.d. Gaussian increments; non-stationary."""
    if n < 8:
        raise ValueError("n must be >= 8")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    return NoiseSeries(np.cumsum(rng.normal(0.0, sigma, n)), dt, "random_walk")


def noise_sequence(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Summed per-shot draws of every enabled color, one per measurement.

    Colors with zero strength consume no randomness, so a run with a
    given mix replays the same generator draws as one with a subset
    disabled plus the missing colors added back.
    """
    total = np.zeros(n)
    gen_len = max(n, 8)
    if spec.sigma_w > 0.0:
        total += white_noise(gen_len, spec.sigma_w, rng).samples[:n]
    if spec.sigma_f > 0.0:
        total += flicker_noise(gen_len, spec.sigma_f, rng).samples[:n]
    if spec.sigma_r > 0.0:
        total += random_walk_noise(gen_len, spec.sigma_r, rng).samples[:n]
    return total


def periodogram(series: NoiseSeries) -> tuple[np.ndarray, np.ndarray]:
    """One-sided power spectrum |DFT|^2 dt / n, DC excluded.

    Averages 8 non-overlapping segments when the series is long enough
    for each to satisfy the minimum length; short series use a single
    segment.
    """
    x = np.asarray(series.samples, dtype=float)
    if len(x) < 8:
        raise ValueError("series must have >= 8 samples")
    n_seg = 8 if len(x) >= 64 else 1
    seg_len = len(x) // n_seg
    freqs = np.fft.rfftfreq(seg_len, series.dt)[1:]
    power = np.zeros_like(freqs)
    for i in range(n_seg):
        seg = x[i * seg_len : (i + 1) * seg_len]
        power += np.abs(np.fft.rfft(seg)[1:]) ** 2 * series.dt / seg_len
    return freqs, power / n_seg


def fit_psd_slope(spectrum: tuple[np.ndarray, np.ndarray]) -> float:
    """Log-log slope of a power spectrum, negated.

    White noise fits 0, flicker 1, random walk 2.  The lowest 2 bins and
    the top 10% of frequencies are excluded; leakage and aliasing corrupt
    the extremes.
    """
    freqs, power = (np.asarray(a, dtype=float) for a in spectrum)
    if len(freqs) < 8:
        raise ValueError("need >= 8 spectral points")
    hi = len(freqs) - math.ceil(0.10 * len(freqs))
    f, p = freqs[2:hi], power[2:hi]
    zero_bins = np.flatnonzero(p <= 0.0)
    if zero_bins.size:
        raise ValueError(f"zero power at fitted bins {zero_bins.tolist()}")
    slope = np.polyfit(np.log10(f), np.log10(p), 1)[0]
    return -float(slope)
