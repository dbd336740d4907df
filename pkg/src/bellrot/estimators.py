"""
Particle filter over Euler angles and the single-qubit cycling baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bell import MeasurementAxis, outcome_probabilities
from .quantum import BELL_ORDER, BellKind, RotationVector, fold_rotation_vectors

ARCSIN_CLAMP = 1.0 - 1e-12
COV_RIDGE = 1e-12
LIKELIHOOD_FLOOR = 1e-12


class DegenerateLikelihoodError(RuntimeError):
    """Every particle assigned zero probability to the observed outcome."""


@dataclass(frozen=True)
class PriorConfig:
    sigma_prior: float = 0.1745
    n_theta: int = 1000

    def __post_init__(self):
        if self.sigma_prior <= 0:
            raise ValueError("sigma_prior must be positive")
        if self.n_theta < 2:
            raise ValueError("need at least 2 particles")


@dataclass(frozen=True)
class FilterConfig:
    resample_threshold_fraction: float = 0.5
    defensive_small_scale: float = 0.1
    defensive_small_prob: float = 0.9
    process_noise_coeff: float = 0.1
    process_noise_exponent: float = -2.0 / 3.0
    resample: bool = True

    def __post_init__(self):
        for name in ("resample_threshold_fraction", "defensive_small_prob"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.defensive_small_scale <= 0:
            raise ValueError("defensive_small_scale must be positive")
        if self.process_noise_coeff < 0:
            raise ValueError("process_noise_coeff must be non-negative")


@dataclass
class Ensemble:
    """Weighted particles over (theta_x, theta_y, theta_z).

    Owned by one run; the filter functions below update it in place and
    return it.
    """

    particles: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    m: int = 0
    n_resamples: int = 0

    @property
    def size(self) -> int:
        return len(self.weights)


def init_ensemble(prior: PriorConfig, seed) -> Ensemble:
    """Draw particles i.i.d. from N(0, sigma_prior^2) per component, equal weights.

    ``seed`` may be an integer, a SeedSequence or an existing Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = prior.n_theta
    particles = rng.normal(0.0, prior.sigma_prior, size=(n, 3))
    return Ensemble(particles=particles, weights=np.full(n, 1.0 / n), rng=rng)


def pinned_ensemble(points: np.ndarray, weights=None, seed=0) -> Ensemble:
    """Ensemble with particles fixed at the given points (for exact-Bayes checks)."""
    points = np.array(points, dtype=float, copy=True)
    n = len(points)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float) / np.sum(weights)
    return Ensemble(particles=points, weights=w, rng=np.random.default_rng(seed))


def process_noise_sigma(m: int, cfg: FilterConfig) -> float:
    """coeff * m**exponent, with m the 1-based measurement index."""
    if m < 1:
        raise ValueError("measurement index starts at 1")
    return cfg.process_noise_coeff * float(m) ** cfg.process_noise_exponent


def predict(ens: Ensemble, cfg: FilterConfig) -> Ensemble:
    sigma = process_noise_sigma(ens.m + 1, cfg)
    if sigma > 0:
        ens.particles = fold_rotation_vectors(ens.particles + ens.rng.normal(0.0, sigma, size=ens.particles.shape))
    return ens


def reweight(ens: Ensemble, likelihood: np.ndarray) -> Ensemble:
    """Multiply weights by per-particle likelihoods and renormalise."""
    unnormalised = ens.weights * likelihood
    total = unnormalised.sum()
    # Likelihoods at round-off level mean the outcome is impossible for every particle.
    if not total > 0 or np.max(likelihood) < LIKELIHOOD_FLOOR:
        raise DegenerateLikelihoodError(f"all particle likelihoods vanished at measurement {ens.m + 1}")
    ens.weights = unnormalised / total
    ens.m += 1
    return ens


def update_weights(
    ens: Ensemble,
    prepared: BellKind,
    axis: MeasurementAxis,
    observed: BellKind,
    alpha: float = 0.0,
) -> Ensemble:
    probs = outcome_probabilities(prepared, ens.particles, axis, alpha)
    return reweight(ens, probs[:, BELL_ORDER.index(observed)])


def effective_sample_size(ens: Ensemble) -> float:
    return float(1.0 / np.sum(ens.weights**2))


def estimate(ens: Ensemble) -> tuple[RotationVector, np.ndarray]:
    """Weighted mean and (biased, weight-normalised) covariance of the particles."""
    mean = ens.weights @ ens.particles
    centred = ens.particles - mean
    cov = (centred * ens.weights[:, None]).T @ centred
    return RotationVector.from_array(mean), cov


def resample_defensive(ens: Ensemble, cfg: FilterConfig) -> Ensemble:
    """Multinomial resampling followed by defensive Gaussian jitter.

    Each offspring comes from one uniform draw compared against the
    cumulative weights. Jitter covariance is ``small_scale * Sigma`` with
    probability ``small_prob`` and ``Sigma`` otherwise, Sigma being the
    weighted covariance before resampling.
    """
    n = ens.size
    _, sigma = estimate(ens)
    chol = np.linalg.cholesky(sigma + COV_RIDGE * np.eye(3))

    cumulative = np.cumsum(ens.weights)
    cumulative /= cumulative[-1]
    u = ens.rng.random(n)
    idx = np.minimum(np.searchsorted(cumulative, u, side="right"), n - 1)

    small = ens.rng.random(n) < cfg.defensive_small_prob
    scale = np.where(small, np.sqrt(cfg.defensive_small_scale), 1.0)
    jitter = (ens.rng.standard_normal((n, 3)) @ chol.T) * scale[:, None]

    # Folding keeps jittered particles off the aliased copies beyond |v| = pi.
    ens.particles = fold_rotation_vectors(ens.particles[idx] + jitter)
    ens.weights = np.full(n, 1.0 / n)
    ens.n_resamples += 1
    return ens


def maybe_resample(ens: Ensemble, cfg: FilterConfig) -> bool:
    if cfg.resample and effective_sample_size(ens) < cfg.resample_threshold_fraction * ens.size:
        resample_defensive(ens, cfg)
        return True
    return False


# --- single-qubit baseline -------------------------------------------------


class CycleStep(NamedTuple):
    prepare: str
    measure: str
    component: int  # index into (theta_x, theta_y, theta_z)


_CYCLE = (CycleStep("z", "x", 1), CycleStep("x", "y", 2), CycleStep("y", "z", 0))


def single_qubit_cycle_schedule(m: int) -> CycleStep:
    """z->x estimates theta_y, x->y estimates theta_z, y->z estimates theta_x; period 3."""
    if m < 1:
        raise ValueError("measurement index starts at 1")
    return _CYCLE[(m - 1) % 3]


def single_qubit_success_prob(theta_rot, alpha: float = 0.0):
    """Probability of the +1/2 outcome, (1 + (1 - alpha) sin(theta)) / 2."""
    return 0.5 * (1.0 + (1.0 - alpha) * np.sin(theta_rot))


@dataclass
class SingleQubitTally:
    """Measurement and success counts, indexed by the estimated component (x, y, z)."""

    trials: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    successes: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    def __post_init__(self):
        self.trials = np.asarray(self.trials, dtype=np.int64)
        self.successes = np.asarray(self.successes, dtype=np.int64)
        if np.any(self.successes < 0) or np.any(self.successes > self.trials):
            raise ValueError("successes must lie between 0 and the number of trials")

    def record(self, component: int, success: bool) -> None:
        self.trials[component] += 1
        self.successes[component] += int(success)


def _arcsin_estimate(successes, trials):
    ratio = np.clip(2.0 * successes / trials - 1.0, -ARCSIN_CLAMP, ARCSIN_CLAMP)
    theta = np.arcsin(ratio)
    p = 0.5 * (1.0 + np.sin(theta))
    variance = 4.0 * p * (1.0 - p) / (trials * (1.0 - (2.0 * p - 1.0) ** 2))
    return theta, variance


def single_qubit_estimate(tally: SingleQubitTally) -> tuple[RotationVector, np.ndarray]:
    """Per-component arcsin estimate and its variance (which reduces to 1/N)."""
    if np.any(tally.trials < 1):
        raise ValueError("every component needs at least one measurement")
    theta, variance = _arcsin_estimate(tally.successes, tally.trials)
    return RotationVector.from_array(theta), variance


def single_qubit_likelihood(ens: Ensemble, component: int, success: bool, alpha: float = 0.0) -> np.ndarray:
    p = single_qubit_success_prob(ens.particles[:, component], alpha)
    return p if success else 1.0 - p
