"""Likelihood construction and grid-based Bayesian phase inference.

The posterior lives on a uniform grid.  Circular domains (the bare phase
on [-pi, pi)) use a half-open periodic grid where the rectangle sum is
the exact trapezoid rule; bounded scenario domains include both endpoints
and integrate trapezoidally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from spinbayes.collective_spin import TAN_GUARD, SqueezedStateModel
from spinbayes.errors import SpinBayesError

__all__ = [
    "DEFAULT_GRID_NODES",
    "DegeneratePosteriorError",
    "LikelihoodModel",
    "Posterior",
    "analytic_posterior_std",
    "bayes_update",
    "gaussian_product",
    "likelihood_curve",
    "outcome_mean",
    "posterior_stats",
    "reshaped_sigma",
    "zoomed",
]

DEFAULT_GRID_NODES = 4096

ArrayLike = Union[float, np.ndarray]


class DegeneratePosteriorError(SpinBayesError):
    """Every posterior weight underflowed to zero."""


@dataclass(frozen=True)
class LikelihoodModel:
    """Outcome distribution model for one probe state.

    ``sigma_n`` is the phase-noise strength the reshaping accounts for;
    ``p_d_mean`` the expected depolarization folded into the mean (the
    estimator cannot observe the per-shot draw).  ``sigma_floor`` keeps
    the reshaped width positive where cos(phi_tilde) vanishes; None
    selects amplitude * xi / (10 sqrt(N)).
    """

    state: SqueezedStateModel
    sigma_n: float = 0.0
    reshaped: bool = True
    sigma_floor: float | None = None
    p_d_mean: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_n < 0.0:
            raise ValueError("sigma_n must be >= 0")
        if self.sigma_floor is not None and self.sigma_floor <= 0.0:
            raise ValueError("sigma_floor must be > 0")
        if not 0.0 <= self.p_d_mean < 1.0:
            raise ValueError("p_d_mean must lie in [0, 1)")

    @property
    def amplitude(self) -> float:
        return self.state.effective_amplitude

    @property
    def ideal_sigma(self) -> float:
        """Outcome std at the fringe zero crossing, amplitude * xi / sqrt(N)."""
        return self.amplitude * self.state.xi / math.sqrt(self.state.n_atoms)

    @property
    def floor(self) -> float:
        if self.sigma_floor is not None:
            return self.sigma_floor
        return self.ideal_sigma / 10.0


def outcome_mean(
    model: LikelihoodModel,
    phi: float,
    Phi: float,
    p_tilde: float = 0.0,
    sigma_draw: float = 0.0,
) -> float:
    """Mean measured population difference for one shot.

    ``p_tilde`` and ``sigma_draw`` are the realized depolarization and
    phase-noise draws; zero draws give the noiseless fringe.
    """
    return (1.0 - p_tilde) * model.amplitude * math.sin((phi - Phi) + sigma_draw)


def reshaped_sigma(model: LikelihoodModel, phi_tilde: ArrayLike) -> ArrayLike:
    """Outcome std at detuning phi_tilde from the auxiliary phase.

    The state's phase uncertainty at the detuning and sigma_n add in
    quadrature (they are independent), then project through the fringe
    slope |amp cos(phi_tilde)|.  At the working point this reduces to
    amp * sqrt(xi^2/N + sigma_n^2); away from it the anti-squeezed
    tan^2 term keeps the width consistent with the outcome spread, so
    a wild early-iteration detuning cannot masquerade as a precise
    measurement.  The tan is clamped at the guard and the floor keeps
    the width positive at the extrema, where the slope vanishes.
    """
    tan_sq = np.minimum(np.tan(phi_tilde) ** 2, math.tan(TAN_GUARD) ** 2)
    quad = model.state.a_coeff * tan_sq + model.state.b_coeff + model.sigma_n**2
    sigma = model.amplitude * np.sqrt(quad) * np.abs(np.cos(phi_tilde))
    return np.maximum(sigma, model.floor)


def likelihood_curve(
    model: LikelihoodModel, m_z: float, Phi: float, phases: np.ndarray
) -> np.ndarray:
    """Unnormalized likelihood of outcome m_z over an array of phases.

    Gaussian in the outcome with phase-dependent width when reshaped.
    Weights are rescaled by their maximum in log space so a far outlier
    cannot underflow every node at once.
    """
    phases = np.asarray(phases, dtype=float)
    detuning = phases - Phi
    mean = (1.0 - model.p_d_mean) * model.amplitude * np.sin(detuning)
    if model.reshaped:
        sigma = reshaped_sigma(model, detuning)
    else:
        sigma = np.full_like(detuning, model.ideal_sigma)
    log_w = -0.5 * ((m_z - mean) / sigma) ** 2 - np.log(sigma)
    return np.exp(log_w - log_w.max())


@dataclass(frozen=True)
class Posterior:
    """Normalized density on a uniform grid over [lo, hi).

    Circular grids are half-open (no duplicate node at hi == lo + 2 pi);
    bounded grids include both endpoints.
    """

    grid: np.ndarray
    density: np.ndarray
    lo: float
    hi: float
    circular: bool = False

    @classmethod
    def uniform(
        cls, lo: float, hi: float, n: int = DEFAULT_GRID_NODES, circular: bool = False
    ) -> "Posterior":
        if hi <= lo:
            raise ValueError("hi must exceed lo")
        if n < 8:
            raise ValueError("need at least 8 grid nodes")
        if circular:
            grid = lo + (hi - lo) * np.arange(n) / n
        else:
            grid = np.linspace(lo, hi, n)
        density = np.full(n, 1.0 / (hi - lo))
        return cls(grid, density, lo, hi, circular)

    @property
    def spacing(self) -> float:
        if self.circular:
            return (self.hi - self.lo) / len(self.grid)
        return (self.hi - self.lo) / (len(self.grid) - 1)

    def integral(self) -> float:
        if self.circular:
            return float(self.density.sum() * self.spacing)
        return float(np.trapezoid(self.density, self.grid))

    def reset_uniform(self) -> "Posterior":
        return replace(self, density=np.full_like(self.density, 1.0 / (self.hi - self.lo)))


def bayes_update(prior: Posterior, weights: np.ndarray) -> Posterior:
    """Pointwise product with renormalization.

    Raises DegeneratePosteriorError when the product vanishes everywhere;
    the caller decides whether to reset to uniform.
    """
    product = prior.density * weights
    if prior.circular:
        total = product.sum() * prior.spacing
    else:
        total = np.trapezoid(product, prior.grid)
    if not total > 0.0 or not math.isfinite(total):
        raise DegeneratePosteriorError(
            "posterior underflowed to zero over the whole grid"
        )
    return replace(prior, density=product / total)


def posterior_stats(p: Posterior) -> tuple[float, float]:
    """Mean and standard deviation by numerical quadrature.

    On circular domains a wide posterior (linear std above 1 rad) is
    re-centered on the circular mean with wrapped deviations, so early
    full-circle iterations and densities split across the boundary both
    report sensible centers.
    """
    w = _quadrature_weights(p)
    mean = float(w @ p.grid)
    var = float(w @ (p.grid - mean) ** 2)
    std = math.sqrt(max(var, 0.0))
    if p.circular and std > 1.0:
        sin_m = float(w @ np.sin(p.grid))
        cos_m = float(w @ np.cos(p.grid))
        mean = math.atan2(sin_m, cos_m)
        span = p.hi - p.lo
        dev = np.mod(p.grid - mean + span / 2.0, span) - span / 2.0
        std = math.sqrt(max(float(w @ dev**2), 0.0))
    return mean, std


def _quadrature_weights(p: Posterior) -> np.ndarray:
    """Density times quadrature weights, summing to the integral."""
    h = p.spacing
    w = p.density * h
    if not p.circular:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def analytic_posterior_std(xi: float, n_atoms: int, n_updates: int) -> float:
    """Large-l posterior width, xi / (sqrt(N) sqrt(l))."""
    if n_updates < 1:
        raise ValueError("n_updates must be >= 1")
    return xi / (math.sqrt(n_atoms) * math.sqrt(n_updates))


def gaussian_product(
    means: np.ndarray, sigmas: np.ndarray
) -> tuple[float, float]:
    """Mean and std of a normalized product of Gaussian densities."""
    means = np.asarray(means, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if np.any(sigmas <= 0.0):
        raise ValueError("sigmas must be > 0")
    precision = np.sum(1.0 / sigmas**2)
    mu = float(np.sum(means / sigmas**2) / precision)
    return mu, float(1.0 / math.sqrt(precision))


def zoomed(p: Posterior, lo: float, hi: float, n: int | None = None) -> Posterior:
    """Posterior re-sampled onto a narrower bounded window.

    Linear interpolation with zero density outside the source grid;
    renormalized on the new window.  Only meaningful for non-circular
    domains (scenario grids that track a shrinking posterior).
    """
    if p.circular:
        raise ValueError("cannot zoom a circular domain")
    if not (hi > lo):
        raise ValueError("hi must exceed lo")
    n = len(p.grid) if n is None else n
    grid = np.linspace(lo, hi, n)
    density = np.interp(grid, p.grid, p.density, left=0.0, right=0.0)
    total = np.trapezoid(density, grid)
    if not total > 0.0:
        raise DegeneratePosteriorError("zoom window has no posterior mass")
    return Posterior(grid, density / total, lo, hi, False)
