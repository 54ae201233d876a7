"""Adaptive estimation sessions: simulate, update, re-center, repeat.

A trial starts from a uniform prior on the phase circle and feeds each
measurement back as the next auxiliary phase.  The simulator draws from
the physical outcome distribution (full tan-form spread of the state);
the estimator sees only the Gaussian likelihood model, ideal or
reshaped, so the two routes stay independent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from spinbayes.bayes import (
    DegeneratePosteriorError,
    LikelihoodModel,
    Posterior,
    bayes_update,
    likelihood_curve,
    posterior_stats,
)
from spinbayes.collective_spin import OatParams, SqueezedStateModel
from spinbayes.errors import ConfigError
from spinbayes.noise import (
    NoiseSpec,
    expected_depolarization,
    noise_sequence,
    sample_depolarization,
    split_streams,
)

__all__ = [
    "SessionConfig",
    "TrialRecord",
    "BatchSummary",
    "simulate_measurement",
    "run_trial",
    "run_batch",
    "sweep_imperfection",
]

log = logging.getLogger(__name__)


def _wrap(x):
    """Map angles into [-pi, pi)."""
    return (x + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class SessionConfig:
    """One adaptive-estimation scenario.

    ``state`` may be a reduced model or explicit twisting parameters;
    ``alpha_error`` and ``t_error`` perturb the preparation and only
    apply to the twisting route.
    """

    state: Union[SqueezedStateModel, OatParams]
    true_phi: float
    n_steps: int
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    reshaped: bool = True
    alpha_error: float = 0.0
    t_error: float = 0.0
    seed: int = 0
    p_d_per_step: bool = True
    grid_nodes: int = 4096

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if not -math.pi <= self.true_phi < math.pi:
            raise ConfigError("true_phi must lie in [-pi, pi)")
        if self.grid_nodes < 8:
            raise ConfigError("grid_nodes must be >= 8")
        if isinstance(self.state, SqueezedStateModel) and (
            self.alpha_error != 0.0 or self.t_error != 0.0
        ):
            raise ConfigError(
                "preparation errors need explicit twisting parameters"
            )

    def resolved_state(self) -> SqueezedStateModel:
        if isinstance(self.state, SqueezedStateModel):
            return self.state
        p = self.state
        perturbed = OatParams(
            p.n_atoms,
            p.chi_t * (1.0 + self.t_error),
            p.alpha + self.alpha_error,
            p.theta,
        )
        return SqueezedStateModel.from_oat(perturbed)


@dataclass(frozen=True)
class TrialRecord:
    """Per-step history of one trial; arrays all have length n_steps."""

    Phi: np.ndarray
    m_z: np.ndarray
    phi_est: np.ndarray
    sigma_phi: np.ndarray
    final_error: float
    resets: tuple[int, ...] = ()


@dataclass(frozen=True)
class BatchSummary:
    """Across-trial aggregates per step, plus the raw records.

    The median width is carried alongside the mean because a trial whose
    posterior pinches onto a single grid node (an over-narrow likelihood
    meeting an extreme outlier) drags the mean far below every typical
    trial.
    """

    sigma_mean: np.ndarray
    sigma_median: np.ndarray
    err_mean: np.ndarray
    err_std: np.ndarray
    records: tuple[TrialRecord, ...]


def simulate_measurement(
    state: SqueezedStateModel,
    true_phi: float,
    Phi: float,
    noise_draws: tuple[float, float],
    rng: np.random.Generator,
) -> float:
    """One measured population difference.

    The spread follows error propagation of the phase uncertainty
    through the fringe slope; early iterations can put the working
    point anywhere on the circle, and the quadratic form below is its
    finite, pi-periodic continuation (the tan singularity cancels
    against the vanishing slope).
    """
    p_tilde, sigma_draw = noise_draws
    detuning = _wrap((true_phi - Phi) + sigma_draw)
    mean = (1.0 - p_tilde) * state.effective_amplitude * math.sin(detuning)
    s, c = math.sin(detuning), math.cos(detuning)
    spread = (
        (1.0 - p_tilde)
        * state.effective_amplitude
        * math.sqrt(state.a_coeff * s * s + state.b_coeff * c * c)
    )
    return float(rng.normal(mean, spread))


def run_trial(cfg: SessionConfig, rng: np.random.Generator | None = None) -> TrialRecord:
    """One adaptive trial of n_steps measurements.

    The first auxiliary phase is 0 (no prior knowledge); afterwards each
    step re-centers on the latest estimate.  A degenerate posterior is
    reset to uniform and the step index logged on the record.
    """
    if rng is None:
        rng = split_streams(cfg.seed, 1)[0]
    state = cfg.resolved_state()
    model = LikelihoodModel(
        state,
        sigma_n=cfg.noise.sigma_g,
        reshaped=cfg.reshaped,
        p_d_mean=expected_depolarization(cfg.noise.p_d),
    )
    posterior = Posterior.uniform(
        -math.pi, math.pi, cfg.grid_nodes, circular=True
    )
    sigma_seq = noise_sequence(cfg.noise, cfg.n_steps, rng)
    p_tilde = 0.0
    if not cfg.p_d_per_step:
        p_tilde = sample_depolarization(cfg.noise.p_d, rng)

    n = cfg.n_steps
    Phi = np.zeros(n)
    m_z = np.zeros(n)
    phi_est = np.zeros(n)
    sigma_phi = np.zeros(n)
    resets: list[int] = []

    estimate = 0.0
    for l in range(n):
        Phi[l] = estimate if l > 0 else 0.0
        if cfg.p_d_per_step:
            p_tilde = sample_depolarization(cfg.noise.p_d, rng)
        m_z[l] = simulate_measurement(
            state, cfg.true_phi, Phi[l], (p_tilde, sigma_seq[l]), rng
        )
        weights = likelihood_curve(model, m_z[l], Phi[l], posterior.grid)
        try:
            posterior = bayes_update(posterior, weights)
        except DegeneratePosteriorError:
            log.warning("posterior reset to uniform at step %d", l + 1)
            resets.append(l)
            posterior = posterior.reset_uniform()
        estimate, sigma_phi[l] = posterior_stats(posterior)
        phi_est[l] = estimate

    return TrialRecord(
        Phi,
        m_z,
        phi_est,
        sigma_phi,
        final_error=float(_wrap(phi_est[-1] - cfg.true_phi)),
        resets=tuple(resets),
    )


def run_batch(
    cfg: SessionConfig, repetitions: int, threads: int | None = None
) -> BatchSummary:
    """Independent trials on split RNG streams, aggregated per step.

    Stream splitting plus fixed-order reduction make the summary a pure
    function of (cfg, repetitions) no matter how many workers run.
    """
    if repetitions < 2:
        raise ConfigError("repetitions must be >= 2")
    streams = split_streams(cfg.seed, repetitions)

    def one(i: int) -> TrialRecord:
        return run_trial(cfg, streams[i])

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = tuple(pool.map(one, range(repetitions)))
    else:
        records = tuple(one(i) for i in range(repetitions))

    sigma = np.stack([r.sigma_phi for r in records])
    err = _wrap(
        np.stack([r.phi_est for r in records]) - cfg.true_phi
    )
    return BatchSummary(
        sigma_mean=sigma.mean(axis=0),
        sigma_median=np.median(sigma, axis=0),
        err_mean=err.mean(axis=0),
        err_std=err.std(axis=0),
        records=records,
    )


def sweep_imperfection(
    cfg: SessionConfig,
    kind: str,
    values: Sequence[float],
    repetitions: int = 100,
    threads: int | None = None,
) -> list[tuple[float, float]]:
    """Final-step precision (median across trials) per error value.

    ``kind`` selects which knob the values perturb: the rotation angle
    (radians, additive) or the twisting time (relative offset with the
    rotation angle held at its unperturbed optimum).
    """
    if kind not in ("alpha_error", "t_error"):
        raise ConfigError("kind must be alpha_error or t_error")
    if not isinstance(cfg.state, OatParams):
        raise ConfigError("imperfection sweeps need explicit twisting parameters")
    out = []
    for v in values:
        perturbed = replace(cfg, **{kind: float(v)})
        summary = run_batch(perturbed, repetitions, threads)
        out.append((float(v), float(summary.sigma_median[-1])))
    return out
