"""Frequentist fringe fitting, the baseline the adaptive protocol beats.

The conventional gravimeter protocol scans the full interference fringe
P_e(g) and least-squares fits a sinusoid.  A coherent state's phase noise
is uniform along the fringe, so the unweighted fit is near-optimal and
approaches the standard quantum limit.  A squeezed state concentrates its
sensitivity in a narrow window around the zero crossing while the
anti-squeezed quadrature inflates the scatter everywhere else; the
unweighted fit soaks up those bad points and strong squeezing ends up
worse than no squeezing at all.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from spinbayes.bayes import SqueezedStateModel
from spinbayes.errors import ConfigError, ScenarioError
from spinbayes.gravimetry import PhaseModel, unambiguous_window
from spinbayes.noise import (
    NoiseSpec,
    expected_depolarization,
    noise_sequence,
    sample_depolarization,
    split_streams,
)
from spinbayes.session import simulate_measurement

__all__ = [
    "FringeSample",
    "FringeConfig",
    "FringePoint",
    "fringe_grid",
    "simulate_fringe",
    "fit_sine",
    "precision_vs_squeezing",
]

log = logging.getLogger(__name__)

_MIN_POINTS = 8


@dataclass(frozen=True)
class FringeSample:
    """One scanned fringe: excited-state fractions over an accel grid."""

    g_values: np.ndarray
    p_e: np.ndarray
    T: float
    shots: int = 1

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise ConfigError("T must be > 0")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if len(self.g_values) != len(self.p_e):
            raise ConfigError("grid and probabilities must pair up")
        if len(self.g_values) < _MIN_POINTS:
            raise ConfigError(f"a fittable fringe needs >= {_MIN_POINTS} points")
        period = unambiguous_window(PhaseModel.gravimetry(), self.T)
        if np.ptp(self.g_values) < 0.99 * period:
            raise ConfigError("grid must span at least one full fringe")
        if np.any(self.p_e < 0.0) or np.any(self.p_e > 1.0):
            raise ConfigError("probabilities must be clamped to [0, 1]")

    def __len__(self) -> int:
        return len(self.g_values)


def fringe_grid(T: float, n_points: int, spans: float = 1.0) -> np.ndarray:
    """Uniform acceleration grid over ``spans`` fringes centered on zero."""
    if n_points < _MIN_POINTS:
        raise ConfigError(f"a fittable fringe needs >= {_MIN_POINTS} points")
    if spans < 1.0:
        raise ConfigError("grid must span at least one full fringe")
    period = unambiguous_window(PhaseModel.gravimetry(), T)
    half = spans * period / 2.0
    return np.linspace(-half, half, n_points)


def simulate_fringe(
    state: SqueezedStateModel,
    T: float,
    g_grid: np.ndarray,
    noise: NoiseSpec = NoiseSpec(),
    rng: np.random.Generator | None = None,
    shots: int = 1,
) -> FringeSample:
    """Measure the fringe point by point, one independent shot at a time.

    No auxiliary phase: each point is read at whatever detuning its grid
    position dictates, which is exactly what exposes the anti-squeezed
    spread away from the zero crossing.
    """
    if rng is None:
        rng = split_streams(0, 1)[0]
    g_grid = np.asarray(g_grid, dtype=float)
    scale = PhaseModel.gravimetry().coefficient * T**2
    sigma_seq = scale * noise_sequence(noise, len(g_grid) * shots, rng)
    half_n = state.n_atoms / 2.0

    p_e = np.zeros(len(g_grid))
    for i, g in enumerate(g_grid):
        acc = 0.0
        for s in range(shots):
            p_tilde = sample_depolarization(noise.p_d, rng)
            draws = (p_tilde, float(sigma_seq[i * shots + s]))
            acc += simulate_measurement(state, 0.0, -scale * g, draws, rng)
        p_e[i] = 0.5 + acc / (shots * state.n_atoms)
    return FringeSample(
        g_values=g_grid, p_e=np.clip(p_e, 0.0, 1.0), T=T, shots=shots
    )


def _sine_residuals(params, k, g, p):
    amp, offset, g0 = params
    return amp * np.sin(k * (g - g0)) + offset - p


def fit_sine(
    sample: FringeSample, init: float = 0.0, max_evals: int = 200
) -> tuple[float, float]:
    """Least-squares sinusoid with the spatial frequency held fixed.

    k_eff and T are lab-calibrated, so only amplitude, offset, and the
    fringe position are free.  The position is seeded by a coarse scan of
    one period around ``init`` (the fit is periodic, any branch is as
    good as the data allow), then polished.  Returns the estimated
    acceleration and its standard error from the fit covariance.
    """
    k = PhaseModel.gravimetry().coefficient * sample.T**2
    period = 2.0 * math.pi / k
    g, p = sample.g_values, sample.p_e

    amp0 = max(0.5 * float(np.ptp(p)), 1e-6)
    offset0 = float(p.mean())
    shifts = init + period * np.linspace(-0.5, 0.5, 64, endpoint=False)
    scores = [
        float(np.sum(_sine_residuals((amp0, offset0, s), k, g, p) ** 2))
        for s in shifts
    ]
    g0 = float(shifts[int(np.argmin(scores))])

    result = least_squares(
        _sine_residuals,
        x0=(amp0, offset0, g0),
        args=(k, g, p),
        method="lm",
        max_nfev=max_evals,
    )
    if not result.success:
        raise ScenarioError("sinusoid fit did not converge")
    amp, _, g_fit = result.x
    if amp < 0.0:  # same curve as a half-period shift with positive amplitude
        amp, g_fit = -amp, g_fit + period / 2.0
    g_est = init + _wrap_periodic(g_fit - init, period)

    dof = len(sample) - 3
    if dof < 1:
        raise ScenarioError("not enough points for a covariance estimate")
    jtj = result.jac.T @ result.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise ScenarioError("singular fit covariance") from exc
    resid_var = 2.0 * result.cost / dof
    dg_fit = float(math.sqrt(max(cov[2, 2] * resid_var, 0.0)))
    return g_est, dg_fit


def _wrap_periodic(x: float, period: float) -> float:
    return (x + period / 2.0) % period - period / 2.0


@dataclass(frozen=True)
class FringeConfig:
    """Scenario for repeated scan-and-fit trials."""

    n_atoms: int = 6000
    contrast: float = 0.98
    T: float = 455e-6
    n_points: int = 100
    shots: int = 1
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_atoms < 2:
            raise ConfigError("n_atoms must be >= 2")
        if not 0.0 < self.contrast <= 1.0:
            raise ConfigError("contrast must lie in (0, 1]")
        if self.T <= 0.0:
            raise ConfigError("T must be > 0")
        if self.n_points < _MIN_POINTS:
            raise ConfigError(f"a fittable fringe needs >= {_MIN_POINTS} points")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")

    def state_for(self, xi: float) -> SqueezedStateModel:
        return SqueezedStateModel.from_xi(self.n_atoms, xi, self.contrast)

    @property
    def total_shots(self) -> int:
        return self.n_points * self.shots

    def sql_value(self) -> float:
        """Standard quantum limit for one shot at this T."""
        k = PhaseModel.gravimetry().coefficient
        return 1.0 / (self.contrast * math.sqrt(self.n_atoms) * k * self.T**2)


@dataclass(frozen=True)
class FringePoint:
    """Precision summary of repeated fits at one squeezing strength."""

    xi: float
    precision_mean: float
    precision_std: float
    failures: int

    @property
    def rms_error(self) -> float:
        return math.hypot(self.precision_mean, self.precision_std)


def precision_vs_squeezing(
    xis: list[float], cfg: FringeConfig, trials: int = 50
) -> list[FringePoint]:
    """Mean and spread of |g_est| over repeated scans, per squeezing.

    The simulated truth is g = 0 at the center of the grid; each trial
    rescans the fringe with fresh projection noise and refits.  Trials
    whose fit fails to converge are excluded and counted.
    """
    if trials < 10:
        raise ConfigError("trials must be >= 10 for a usable spread")
    grid = fringe_grid(cfg.T, cfg.n_points)
    streams = split_streams(cfg.seed, len(xis) * trials)
    out = []
    for j, xi in enumerate(xis):
        state = cfg.state_for(xi)
        errors = []
        failures = 0
        for t in range(trials):
            rng = streams[j * trials + t]
            sample = simulate_fringe(
                state, cfg.T, grid, noise=cfg.noise, rng=rng, shots=cfg.shots
            )
            try:
                g_est, _ = fit_sine(sample, init=0.0)
            except ScenarioError:
                failures += 1
                continue
            errors.append(abs(g_est))
        if failures:
            log.warning("xi=%g: %d of %d fits excluded", xi, failures, trials)
        if len(errors) < 2:
            raise ScenarioError(f"too few converged fits at xi={xi:g}")
        arr = np.asarray(errors)
        out.append(
            FringePoint(
                xi=xi,
                precision_mean=float(arr.mean()),
                precision_std=float(arr.std()),
                failures=failures,
            )
        )
    return out
