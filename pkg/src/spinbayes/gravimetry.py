"""Gravity estimation over an increasing interrogation-time ladder.

The phase maps onto the estimation parameter through phi = D * gamma * T**alpha,
so one generic loop serves both accelerometry (gamma = g, alpha = 2) and
frequency scenarios (alpha = 1).  Short early shots buy an unambiguous
window, exponentially growing shots buy precision, and the auxiliary
chirp parameter re-centers every shot on the latest estimate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spinbayes.bayes import (
    DegeneratePosteriorError,
    LikelihoodModel,
    Posterior,
    bayes_update,
    likelihood_curve,
    posterior_stats,
    zoomed,
)
from spinbayes.collective_spin import SqueezedStateModel
from spinbayes.errors import ConfigError, ScenarioError
from spinbayes.noise import (
    NoiseSpec,
    expected_depolarization,
    noise_sequence,
    sample_depolarization,
    split_streams,
)
from spinbayes.session import simulate_measurement

__all__ = [
    "RAMAN_K_EFF",
    "PhaseModel",
    "Schedule",
    "GravimetryConfig",
    "GravimetryCurve",
    "build_schedule",
    "phase_from_parameter",
    "unambiguous_window",
    "theoretical_precision",
    "theoretical_curve",
    "estimate_parameter",
    "run_gravimetry",
    "fit_scaling_exponent",
]

log = logging.getLogger(__name__)

# two-photon Raman wavevector for counter-propagating beams on Rb-87, rad/m
RAMAN_K_EFF = 1.61e7


@dataclass(frozen=True)
class PhaseModel:
    """Conversion between the estimated parameter and interferometer phase.

    ``coefficient`` carries the scenario units (rad/m for an atomic
    accelerometer, 1 for a clock reading angular frequency directly);
    ``alpha_exp`` is the power of the interrogation time.
    """

    coefficient: float
    alpha_exp: int
    parameter: str = "gamma"
    units: str = ""

    def __post_init__(self) -> None:
        if self.coefficient <= 0.0:
            raise ConfigError("phase coefficient must be > 0")
        if self.alpha_exp not in (1, 2):
            raise ConfigError("alpha_exp must be 1 or 2")

    @classmethod
    def gravimetry(cls, k_eff: float = RAMAN_K_EFF) -> "PhaseModel":
        return cls(k_eff, 2, "g", "m/s^2")

    @classmethod
    def clock(cls) -> "PhaseModel":
        return cls(1.0, 1, "omega", "rad/s")


def phase_from_parameter(pm: PhaseModel, gamma: float, T: float) -> float:
    """Accumulated phase of one shot of duration T."""
    if T <= 0.0:
        raise ValueError("T must be > 0")
    return pm.coefficient * gamma * T**pm.alpha_exp


def unambiguous_window(pm: PhaseModel, T: float) -> float:
    """Width of the parameter range covering one full fringe at time T."""
    return 2.0 * math.pi / (pm.coefficient * T**pm.alpha_exp)


@dataclass(frozen=True)
class Schedule:
    """Ordered interrogation times: an exponential ramp, then a plateau."""

    times: np.ndarray
    T_max: float
    a: float
    M_a: int
    M: int

    @property
    def total_time(self) -> np.ndarray:
        return np.cumsum(self.times)


def build_schedule(T_max: float, a: float, M_a: int, M: int) -> Schedule:
    """T_l = T_max / a**(M_a - l) while l < M_a, then T_max up to M."""
    if T_max <= 0.0:
        raise ConfigError("T_max must be > 0")
    if a <= 1.0:
        raise ConfigError("growth ratio a must exceed 1")
    if not 1 <= M_a <= M:
        raise ConfigError("need 1 <= M_a <= M")
    l = np.arange(1, M + 1)
    times = np.where(l < M_a, T_max / a ** (M_a - l).astype(float), T_max)
    return Schedule(times, float(T_max), float(a), int(M_a), int(M))


def theoretical_precision(
    sched: Schedule, l: int, state: SqueezedStateModel, pm: PhaseModel
) -> float:
    """Noise-free posterior width after the first l shots."""
    if not 1 <= l <= sched.M:
        raise ConfigError("step index outside the schedule")
    powers = sched.times[:l] ** pm.alpha_exp
    norm = state.contrast * pm.coefficient * math.sqrt(state.n_atoms)
    return state.xi / (norm * math.sqrt(float(np.sum(powers**2))))


def theoretical_curve(
    sched: Schedule, state: SqueezedStateModel, pm: PhaseModel
) -> np.ndarray:
    powers = sched.times**pm.alpha_exp
    norm = state.contrast * pm.coefficient * math.sqrt(state.n_atoms)
    return state.xi / (norm * np.sqrt(np.cumsum(powers**2)))


@dataclass(frozen=True)
class GravimetryConfig:
    """One estimation scenario over a schedule.

    Noise strengths are in parameter units (acceleration for gravimetry);
    each shot converts its draw to phase through the step's own T_l, so a
    fixed acceleration noise hits long shots harder.
    """

    state: SqueezedStateModel
    schedule: Schedule
    true_g: float
    g_prior: float = 0.0
    phase_model: PhaseModel = field(default_factory=PhaseModel.gravimetry)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    reshaped: bool = True
    seed: int = 0
    grid_nodes: int = 4096
    zoom_width: float = 12.0

    def __post_init__(self) -> None:
        if self.grid_nodes < 8:
            raise ConfigError("grid_nodes must be >= 8")
        if self.zoom_width < 4.0:
            raise ConfigError("zoom_width below 4 clips posterior mass")


@dataclass(frozen=True)
class GravimetryCurve:
    """Across-trial precision curve plus the theory reference."""

    steps: np.ndarray
    times: np.ndarray
    total_time: np.ndarray
    dg_theory: np.ndarray
    dg_batch: np.ndarray
    g_est_mean: np.ndarray
    sigma_mean: np.ndarray
    resets: int


def estimate_parameter(
    cfg: GravimetryConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-step (g_est, posterior sigma, reset count) for one trial."""
    pm, sched = cfg.phase_model, cfg.schedule
    window = unambiguous_window(pm, float(sched.times[0]))
    noise_rng, meas_rng = rng.spawn(2)
    accel_seq = noise_sequence(cfg.noise, sched.M, noise_rng)
    p_d_mean = expected_depolarization(cfg.noise.p_d)

    posterior = Posterior.uniform(
        cfg.g_prior - window / 2.0, cfg.g_prior + window / 2.0, cfg.grid_nodes
    )
    g_est = np.zeros(sched.M)
    sigma_g = np.zeros(sched.M)
    resets = 0
    estimate = cfg.g_prior
    for i in range(sched.M):
        scale = pm.coefficient * float(sched.times[i]) ** pm.alpha_exp
        p_tilde = sample_depolarization(cfg.noise.p_d, meas_rng)
        m_z = simulate_measurement(
            cfg.state,
            scale * (cfg.true_g - estimate),
            0.0,
            (p_tilde, scale * accel_seq[i]),
            meas_rng,
        )
        model = LikelihoodModel(
            cfg.state,
            sigma_n=scale * cfg.noise.sigma_g,
            reshaped=cfg.reshaped,
            p_d_mean=p_d_mean,
        )
        weights = likelihood_curve(
            model, m_z, 0.0, scale * (posterior.grid - estimate)
        )
        try:
            posterior = bayes_update(posterior, weights)
        except DegeneratePosteriorError:
            log.warning("posterior reset to uniform at shot %d", i + 1)
            resets += 1
            posterior = posterior.reset_uniform()
        estimate, sigma_g[i] = posterior_stats(posterior)
        g_est[i] = estimate
        half = cfg.zoom_width * sigma_g[i]
        if 2.0 * half < 0.6 * (posterior.hi - posterior.lo):
            posterior = zoomed(
                posterior,
                max(posterior.lo, estimate - half),
                min(posterior.hi, estimate + half),
            )
    return g_est, sigma_g, resets


def run_gravimetry(
    cfg: GravimetryConfig, repetitions: int, threads: int | None = None
) -> GravimetryCurve:
    """Independent trials on split streams, aggregated per step.

    The phase-noise stream is separated from the measurement stream so
    that runs differing only in noise strengths share their measurement
    draws; quantum projection noise then cancels out of noisy-vs-clean
    comparisons instead of masking them.
    """
    if repetitions < 2:
        raise ConfigError("repetitions must be >= 2")
    pm, sched = cfg.phase_model, cfg.schedule
    window = unambiguous_window(pm, float(sched.times[0]))
    if abs(cfg.true_g - cfg.g_prior) > window / 2.0:
        raise ScenarioError(
            "true parameter outside the unambiguous window of the first shot"
        )
    streams = split_streams(cfg.seed, repetitions)

    def one(i: int) -> tuple[np.ndarray, np.ndarray, int]:
        return estimate_parameter(cfg, streams[i])

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(repetitions)))
    else:
        results = [one(i) for i in range(repetitions)]

    estimates = np.stack([r[0] for r in results])
    sigmas = np.stack([r[1] for r in results])
    return GravimetryCurve(
        steps=np.arange(1, sched.M + 1),
        times=sched.times.copy(),
        total_time=sched.total_time,
        dg_theory=theoretical_curve(sched, cfg.state, pm),
        dg_batch=estimates.std(axis=0),
        g_est_mean=estimates.mean(axis=0),
        sigma_mean=sigmas.mean(axis=0),
        resets=sum(r[2] for r in results),
    )


def fit_scaling_exponent(
    x: np.ndarray, y: np.ndarray, window: tuple[float, float] | None = None
) -> float:
    """Least-squares log-log slope of y(x), optionally windowed in x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        mask = np.ones(x.shape, dtype=bool)
    else:
        mask = (x >= window[0]) & (x <= window[1])
    if int(mask.sum()) < 5:
        raise ScenarioError("need at least 5 points inside the fit window")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])
