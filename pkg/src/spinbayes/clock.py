"""Local-oscillator locking and Allan-deviation analysis.

A clock cycle interrogates the oscillator's frequency offset with the same
adaptive Bayesian sequence used for gravimetry, but with phase linear in
time (phi = omega * T) and a short twelve-shot schedule: five ramp shots
growing by 1.3x, then the rest pinned at T_max.  After each cycle the full
estimate is subtracted from the oscillator (integral gain one), so the
cumulative correction signal tracks the free-running oscillator up to one
estimation error per cycle.  That tracking series is the one whose Allan
deviation reproduces the oscillator's own noise color at long averaging
times; the per-cycle residuals stay projection-noise limited by design.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from spinbayes.bayes import SqueezedStateModel
from spinbayes.errors import ConfigError, ScenarioError
from spinbayes.gravimetry import (
    GravimetryConfig,
    PhaseModel,
    Schedule,
    build_schedule,
    estimate_parameter,
    theoretical_precision,
    unambiguous_window,
)
from spinbayes.noise import NoiseSpec, noise_sequence, split_streams

__all__ = [
    "ClockConfig",
    "FrequencyRecord",
    "clock_schedule",
    "lock_cycle",
    "run_clock",
    "allan_deviation",
    "pooled_deviation",
    "theoretical_adev",
]

log = logging.getLogger(__name__)


def clock_schedule(t_max: float = 0.141) -> Schedule:
    """Twelve-shot lock schedule: 1.3x ramp reaching t_max at shot six."""
    return build_schedule(t_max, 1.3, 6, 12)


@dataclass(frozen=True)
class ClockConfig:
    """One locking run: state, shot schedule, oscillator noise, length.

    Noise strengths are per-cycle frequency-offset draws in the same
    angular units as the estimated offset, one colored sample per cycle.
    """

    state: SqueezedStateModel
    schedule: Schedule = field(default_factory=clock_schedule)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    cycles: int = 400
    reshaped: bool = True
    seed: int = 0
    grid_nodes: int = 4096
    zoom_width: float = 12.0

    def __post_init__(self) -> None:
        if self.cycles < 32:
            raise ConfigError("cycles must be >= 32 for a usable deviation")
        if self.noise.p_d != 0.0:
            raise ConfigError(
                "depolarization belongs to the state contrast here; "
                "only frequency noise drives a lock run"
            )

    @property
    def cycle_duration(self) -> float:
        return float(self.schedule.times.sum())

    def single_cycle_sigma(self) -> float:
        """Projection-noise floor of one full cycle's estimate."""
        return theoretical_precision(
            self.schedule, self.schedule.M, self.state, PhaseModel.clock()
        )


@dataclass(frozen=True)
class FrequencyRecord:
    """Per-cycle lock history.

    ``true_offset`` is the offset the atoms actually saw (corrections up
    to that cycle already applied), so ``residual = true_offset -
    estimate`` holds exactly.  ``lo_tracking`` accumulates the estimates;
    since each correction cancels the previous offset, the running sum
    equals the free-running oscillator plus one per-cycle estimation
    error, which is the series a frequency comparison against the atomic
    reference would record.
    """

    true_offset: np.ndarray
    estimate: np.ndarray
    residual: np.ndarray
    cycle_duration: float
    flagged: int = 0

    def __post_init__(self) -> None:
        if not (len(self.true_offset) == len(self.estimate) == len(self.residual)):
            raise ConfigError("record arrays must share one length per cycle")
        if self.cycle_duration <= 0.0:
            raise ConfigError("cycle_duration must be > 0")

    def __len__(self) -> int:
        return len(self.estimate)

    @property
    def lo_tracking(self) -> np.ndarray:
        return np.cumsum(self.estimate)


def lock_cycle(
    cfg: ClockConfig, lo_offset: float, rng: np.random.Generator
) -> tuple[float, float]:
    """Estimate one cycle's frequency offset; returns (estimate, residual).

    The offset is constant over the cycle's twelve shots, so the only
    randomness inside is quantum projection noise.  Offsets beyond the
    first shot's unambiguous window cannot be estimated and raise.
    """
    pm = PhaseModel.clock()
    window = unambiguous_window(pm, float(cfg.schedule.times[0]))
    if abs(lo_offset) > window / 2.0:
        raise ScenarioError(
            "oscillator offset outside the dynamic range of the first shot"
        )
    trial = GravimetryConfig(
        state=cfg.state,
        schedule=cfg.schedule,
        true_g=lo_offset,
        g_prior=0.0,
        phase_model=pm,
        reshaped=cfg.reshaped,
        grid_nodes=cfg.grid_nodes,
        zoom_width=cfg.zoom_width,
    )
    estimates, _, _ = estimate_parameter(trial, rng)
    estimate = float(estimates[-1])
    return estimate, lo_offset - estimate


def run_clock(cfg: ClockConfig) -> FrequencyRecord:
    """Lock for ``cfg.cycles`` cycles against a colored free-running drift.

    Gain-one servo: the previous estimate is subtracted in full before the
    next cycle starts.  A cycle whose post-correction offset falls outside
    the dynamic range is flagged and left uncorrected rather than locking
    onto a fringe alias.
    """
    lo_rng, meas_rng = split_streams(cfg.seed, 2)
    free_running = noise_sequence(cfg.noise, cfg.cycles, lo_rng)

    true_offset = np.zeros(cfg.cycles)
    estimate = np.zeros(cfg.cycles)
    residual = np.zeros(cfg.cycles)
    correction = 0.0
    flagged = 0
    for k in range(cfg.cycles):
        offset = float(free_running[k]) - correction
        true_offset[k] = offset
        try:
            est, res = lock_cycle(cfg, offset, meas_rng)
        except ScenarioError:
            log.warning("cycle %d beyond dynamic range, left uncorrected", k + 1)
            flagged += 1
            est, res = 0.0, offset
        estimate[k] = est
        residual[k] = res
        correction += est
    return FrequencyRecord(
        true_offset=true_offset,
        estimate=estimate,
        residual=residual,
        cycle_duration=cfg.cycle_duration,
        flagged=flagged,
    )


def allan_deviation(
    series: np.ndarray, tau0: float, multiples: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Overlapping Allan deviation of evenly spaced frequency samples.

    ``multiples`` are integer numbers of cycles per averaging window
    (octave-spaced by default); each needs two full windows of data.
    """
    y = np.asarray(series, dtype=float)
    if tau0 <= 0.0:
        raise ConfigError("tau0 must be > 0")
    if y.ndim != 1 or len(y) < 2:
        raise ScenarioError("need a 1-d series of at least 2 samples")
    if multiples is None:
        multiples = 2 ** np.arange(int(math.log2(len(y) / 2)) + 1)
    m_values = np.asarray(multiples)
    if m_values.ndim != 1 or len(m_values) == 0:
        raise ConfigError("multiples must be a non-empty 1-d sequence")
    if not np.issubdtype(m_values.dtype, np.integer) or np.any(m_values < 1):
        raise ConfigError("multiples must be positive integers")

    csum = np.concatenate([[0.0], np.cumsum(y)])
    out = np.zeros(len(m_values))
    for j, m in enumerate(m_values):
        if 2 * m > len(y):
            raise ScenarioError(
                f"window of {m} cycles needs {2 * m} samples, have {len(y)}"
            )
        means = (csum[m:] - csum[:-m]) / m
        diffs = means[m:] - means[:-m]
        out[j] = math.sqrt(0.5 * float(np.mean(diffs * diffs)))
    return m_values * tau0, out


def pooled_deviation(curves: np.ndarray) -> np.ndarray:
    """Aggregate deviation curves from repeated runs, bin by bin.

    Pools the variances, not the deviations.  A single run's longest
    windows hold barely two independent samples, so their deviation
    estimate sags below the true level; the squared estimator stays
    unbiased and survives the average.
    """
    arr = np.asarray(curves, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ConfigError("curves must be a 2-d stack of deviation arrays")
    return np.sqrt(np.mean(arr * arr, axis=0))


# sqrt(h_beta^2) per noise color; white uses the discrete-sampling level
# (deviation equals the per-sample spread at tau0), flicker and random
# walk the power-law prefactors sqrt(2 ln 2) and sqrt(2 pi^2 / 3).
_ADEV_PREFACTOR = {
    0: 1.0,
    1: math.sqrt(2.0 * math.log(2.0)),
    2: math.sqrt(2.0 * math.pi**2 / 3.0),
}


def theoretical_adev(
    beta: int, strength: float, tau: np.ndarray, tau0: float
) -> np.ndarray:
    """Power-law deviation h_beta * tau^((beta-1)/2) for one noise color.

    beta 0 is white frequency noise (slope -1/2), 1 flicker (flat), 2
    random walk (slope +1/2); tau is measured in units of tau0.
    """
    if beta not in _ADEV_PREFACTOR:
        raise ConfigError("beta must be one of 0 (white), 1 (flicker), 2 (walk)")
    if strength < 0.0:
        raise ConfigError("strength must be >= 0")
    if tau0 <= 0.0:
        raise ConfigError("tau0 must be > 0")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0):
        raise ConfigError("tau values must be > 0")
    return _ADEV_PREFACTOR[beta] * strength * (tau / tau0) ** ((beta - 1) / 2.0)
