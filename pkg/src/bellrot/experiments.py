"""
Seeded Monte Carlo campaigns: error against resource count, mixed-state sweeps.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimators as est
from .bell import PHI_MINUS_AXIS, PHI_PLUS_AXIS, outcome_distribution
from .quantum import (
    BELL_ORDER,
    BellKind,
    RotationVector,
    bell_state,
    density,
    mix_with_identity,
    pauli,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("bell_pf", "single_qubit_analytic", "single_qubit_pf")
RESOURCE_MODES = ("qubit_count", "trace_formula")


@dataclass(frozen=True)
class ExperimentConfig:
    estimator: str = "bell_pf"
    n_runs: int = 100
    max_resources: int = 4000
    alpha: float = 0.0
    truth_sigma: float = 0.0873
    prior: est.PriorConfig = field(default_factory=est.PriorConfig)
    filter: est.FilterConfig = field(default_factory=est.FilterConfig)
    resource_mode: str = "qubit_count"
    master_seed: int = 0
    record_stride: int = 80

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.resource_mode not in RESOURCE_MODES:
            raise ValueError(f"resource_mode must be one of {RESOURCE_MODES}, got {self.resource_mode!r}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if self.max_resources < 2:
            raise ValueError("max_resources must be at least 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.truth_sigma < 0:
            raise ValueError("truth_sigma must be non-negative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.resource_mode == "trace_formula" and self.alpha >= 1.0:
            # The trace of a fully mixed state vanishes, so the ledger could never advance.
            raise ValueError("trace_formula resources need alpha < 1")

    def checkpoints(self) -> np.ndarray:
        return np.arange(self.record_stride, self.max_resources + 1, self.record_stride)


class ResourceLedger:
    """Cumulative resource count; only ever grows."""

    def __init__(self):
        self.total = 0.0

    def add(self, amount: float) -> float:
        if not amount > 0:
            raise ValueError(f"resource increment must be positive, got {amount}")
        self.total += amount
        return self.total


def resource_trace_formula(rho: np.ndarray) -> float:
    """Sum over j of Tr(rho sigma_j (x) sigma_j)."""
    total = 0.0
    for axis in "xyz":
        s = pauli(axis)
        total += np.trace(rho @ np.kron(s, s))
    return float(np.real(total))


def _single_qubit_trace_resource(prepare: str, alpha: float) -> float:
    s = pauli(prepare)
    evals, evecs = np.linalg.eigh(s)
    plus = evecs[:, np.argmax(evals)]
    rho = mix_with_identity(density(plus), alpha)
    return float(np.real(np.trace(rho @ s)))


@dataclass
class RunRecord:
    run_index: int
    truth: np.ndarray
    resources: np.ndarray
    estimates: np.ndarray  # (n_checkpoints, 3)
    restarts: int = 0
    outcome_counts: np.ndarray = None  # Bell outcomes in BELL_ORDER, or single-qubit (+, -)

    @property
    def component_errors(self) -> np.ndarray:
        return self.estimates - self.truth

    @property
    def errors(self) -> np.ndarray:
        """Total angular error: Euclidean norm of the component errors."""
        return np.linalg.norm(self.component_errors, axis=1)

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "restarts": self.restarts,
            "truth": self.truth.tolist(),
            "resources": self.resources.tolist(),
            "estimates": self.estimates.tolist(),
            "errors": self.errors.tolist(),
            "outcome_counts": None if self.outcome_counts is None else self.outcome_counts.tolist(),
        }


@dataclass
class AggregateResult:
    resources: np.ndarray
    mean_error: np.ndarray
    std_error: np.ndarray
    n_runs: int
    mean_component_abs_error: np.ndarray = None
    total_restarts: int = 0


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, run_index]))


def draw_truth(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, cfg.truth_sigma, size=3)


class _Checkpoints:
    def __init__(self, cfg: ExperimentConfig):
        self.grid = cfg.checkpoints()
        self.values = np.zeros((len(self.grid), 3))
        self.next = 0

    def due(self, ledger_total: float) -> bool:
        return self.next < len(self.grid) and ledger_total >= self.grid[self.next] - 1e-9

    def record(self, ledger_total: float, value) -> None:
        while self.due(ledger_total):
            self.values[self.next] = value
            self.next += 1

    @property
    def done(self) -> bool:
        return self.next >= len(self.grid)


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    cumulative = np.cumsum(probs)
    return int(min(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"), len(probs) - 1))


def run_bell_trial(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    """One particle-filter run alternating phi+ and phi- preparations."""
    rng = run_rng(cfg.master_seed, run_index)
    truth = draw_truth(cfg, rng)
    true_rot = RotationVector.from_array(truth)
    protocol = (
        (BellKind.PHI_PLUS, PHI_PLUS_AXIS),
        (BellKind.PHI_MINUS, PHI_MINUS_AXIS),
    )
    true_probs = [outcome_distribution(k, true_rot, axis, cfg.alpha).as_array() for k, axis in protocol]
    if cfg.resource_mode == "qubit_count":
        costs = [2.0, 2.0]
    else:
        costs = [resource_trace_formula(mix_with_identity(density(bell_state(k)), cfg.alpha)) for k, _ in protocol]

    ens = est.init_ensemble(cfg.prior, rng)
    ledger = ResourceLedger()
    marks = _Checkpoints(cfg)
    restarts = 0
    counts = np.zeros(4, dtype=np.int64)
    j = 0
    while not marks.done:
        slot = j % 2
        prepared, axis = protocol[slot]
        est.predict(ens, cfg.filter)
        outcome = _sample(rng, true_probs[slot])
        counts[outcome] += 1
        observed = BELL_ORDER[outcome]
        try:
            est.update_weights(ens, prepared, axis, observed, cfg.alpha)
        except est.DegenerateLikelihoodError:
            log.warning("run %d: degenerate likelihood at measurement %d, restarting from prior", run_index, j + 1)
            restarts += 1
            ens = est.init_ensemble(cfg.prior, rng)
        else:
            est.maybe_resample(ens, cfg.filter)
        ledger.add(costs[slot])
        j += 1
        if marks.due(ledger.total):
            marks.record(ledger.total, est.estimate(ens)[0].as_array())
    return RunRecord(run_index, truth, marks.grid.copy(), marks.values, restarts, counts)


def run_single_qubit_trial(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    """Cycling single-qubit scheme with the arcsin or particle-filter estimator."""
    rng = run_rng(cfg.master_seed, run_index)
    truth = draw_truth(cfg, rng)
    use_pf = cfg.estimator == "single_qubit_pf"
    p_success = est.single_qubit_success_prob(truth, cfg.alpha)
    if cfg.resource_mode == "qubit_count":
        costs = {axis: 1.0 for axis in "xyz"}
    else:
        costs = {axis: _single_qubit_trace_resource(axis, cfg.alpha) for axis in "xyz"}

    tally = est.SingleQubitTally()
    ens = est.init_ensemble(cfg.prior, rng) if use_pf else None
    ledger = ResourceLedger()
    marks = _Checkpoints(cfg)
    restarts = 0
    m = 0
    while not marks.done:
        m += 1
        step = est.single_qubit_cycle_schedule(m)
        success = bool(rng.random() < p_success[step.component])
        tally.record(step.component, success)
        if use_pf:
            est.predict(ens, cfg.filter)
            try:
                est.reweight(ens, est.single_qubit_likelihood(ens, step.component, success, cfg.alpha))
            except est.DegenerateLikelihoodError:
                restarts += 1
                ens = est.init_ensemble(cfg.prior, rng)
            else:
                est.maybe_resample(ens, cfg.filter)
        ledger.add(costs[step.prepare])
        if marks.due(ledger.total):
            if use_pf:
                value = est.estimate(ens)[0].as_array()
            else:
                value = _analytic_estimate(tally)
            marks.record(ledger.total, value)
    counts = np.array([tally.successes.sum(), tally.trials.sum() - tally.successes.sum()])
    return RunRecord(run_index, truth, marks.grid.copy(), marks.values, restarts, counts)


def _analytic_estimate(tally: est.SingleQubitTally) -> np.ndarray:
    # Components with no measurements yet sit at the prior mean of zero.
    out = np.zeros(3)
    seen = tally.trials > 0
    if np.any(seen):
        out[seen], _ = est._arcsin_estimate(tally.successes[seen], tally.trials[seen])
    return out


def run_trial(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    if cfg.estimator == "bell_pf":
        return run_bell_trial(cfg, run_index)
    return run_single_qubit_trial(cfg, run_index)


def _run_trial_args(args):
    return run_trial(*args)


def run_campaign(cfg: ExperimentConfig, workers: int = 1) -> list[RunRecord]:
    """All runs of a campaign, ordered by run index regardless of worker count."""
    jobs = [(cfg, i) for i in range(cfg.n_runs)]
    if workers <= 1 or cfg.n_runs == 1:
        records = [run_trial(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_trial_args, jobs, chunksize=max(1, cfg.n_runs // (4 * workers))))
    return sorted(records, key=lambda r: r.run_index)


def aggregate(records: list[RunRecord]) -> AggregateResult:
    """Per-checkpoint mean and population standard deviation of the total error."""
    if not records:
        raise ValueError("nothing to aggregate")
    records = sorted(records, key=lambda r: r.run_index)
    grid = records[0].resources
    for r in records[1:]:
        if r.resources.shape != grid.shape or np.any(r.resources != grid):
            raise ValueError(f"run {r.run_index} has a different checkpoint grid")
    errors = np.stack([r.errors for r in records])
    comp = np.stack([np.abs(r.component_errors) for r in records])
    return AggregateResult(
        resources=grid.copy(),
        mean_error=errors.mean(axis=0),
        std_error=errors.std(axis=0),
        n_runs=len(records),
        mean_component_abs_error=comp.mean(axis=0),
        total_restarts=int(sum(r.restarts for r in records)),
    )


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    estimator: str
    mean_error: float
    std_error: float
    n_runs: int
    resources: int


def alpha_sweep(cfg: ExperimentConfig, alphas, workers: int = 1) -> list[SweepRow]:
    """Final-checkpoint errors of the Bell filter and a single-qubit estimator at each alpha.

    The single-qubit track uses ``cfg.estimator`` when it names a single-qubit
    estimator and the analytic arcsin estimator otherwise.
    """
    single = cfg.estimator if cfg.estimator != "bell_pf" else "single_qubit_analytic"
    rows = []
    for alpha in alphas:
        for kind in ("bell_pf", single):
            sub = replace(cfg, estimator=kind, alpha=float(alpha))
            agg = aggregate(run_campaign(sub, workers))
            rows.append(
                SweepRow(float(alpha), kind, float(agg.mean_error[-1]), float(agg.std_error[-1]), agg.n_runs, int(agg.resources[-1]))
            )
    return rows
