"""Annealed importance sampling, bidirectional bounds, and sequential Monte
Carlo over annealing paths.

Every estimator works purely on log-densities; incremental weights are
accumulated and aggregated with log-sum-exp so no unbounded log-ratio is ever
exponentiated on its own.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from qanneal.hmc import HmcConfig, hmc_step, tune_step_size


class WeightCollapseError(RuntimeError):
    """Raised when every chain or particle carries a -inf weight.

    ``diagnostics`` holds whatever trace data existed at the collapse.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def ess_of_log_weights(log_weights) -> float:
    """Effective sample size (sum w)^2 / sum w^2 from log weights.

    Computed via log-sum-exp; -inf entries count as zero-weight particles.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty vector")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log_weights must be finite or -inf")
    if not np.any(np.isfinite(lw)):
        raise ValueError("at least one log weight must be finite")
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def systematic_resample(log_weights, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling indices from a single stratified uniform draw."""
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise ValueError("at least one log weight must be finite")
    n = lw.shape[0]
    w = np.exp(lw - logsumexp(lw))
    w = w / np.sum(w)
    positions = (rng.uniform() + np.arange(n)) / n
    indices = np.searchsorted(np.cumsum(w), positions, side="right")
    return np.minimum(indices, n - 1)


@dataclass(frozen=True)
class AisResult:
    """Outcome of one annealed importance sampling run.

    ``log_Z_estimate`` is the log-mean-exp of the finite per-chain weights;
    chains that hit -inf stay recorded in ``per_chain_log_w`` but are dropped
    from the mean, with the count in ``n_dropped``.
    """

    log_Z_estimate: float
    per_chain_log_w: np.ndarray
    schedule_used: np.ndarray
    acceptance_trace: np.ndarray
    n_dropped: int = 0
    ess_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class ParticleSystem:
    """Weighted particle ensemble carried through an SMC sweep."""

    positions: np.ndarray
    log_weights: np.ndarray
    log_Z_accum: float = 0.0
    rng_seed: int | None = None
    step_index: int = 0

    def __post_init__(self):
        if self.positions.shape[0] != self.log_weights.shape[0]:
            raise ValueError("positions and log_weights must have equal length")

    def ess(self) -> float:
        return ess_of_log_weights(self.log_weights)


@dataclass
class SmcDiagnostics:
    """Per-step traces and the final particle system of an SMC run."""

    beta_trace: np.ndarray
    ess_trace: np.ndarray
    acceptance_trace: np.ndarray
    resample_count: int
    system: ParticleSystem
    step_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))


def _betas_of(schedule) -> np.ndarray:
    betas = np.asarray(getattr(schedule, "betas", schedule), dtype=float)
    if betas.ndim != 1 or betas.size < 2:
        raise ValueError("schedule must hold at least the two endpoints")
    if betas[0] != 0.0 or betas[-1] != 1.0:
        raise ValueError("schedule must start at 0 and end at 1")
    if np.any(np.diff(betas) <= 0.0):
        raise ValueError("schedule must be strictly increasing")
    return betas


def _path_energy(path, beta: float):
    """Log-density and gradient callables for the path at fixed beta.

    The gradient is zeroed on points where the path energy is -inf so that
    leapfrog trajectories can enter dead regions and be Metropolis-rejected
    instead of raising.
    """

    def logp(z):
        return path.log_density(z, beta)

    def grad(z):
        lp = np.atleast_1d(np.asarray(path.log_density(z, beta), dtype=float))
        alive = np.isfinite(lp)
        if np.all(alive):
            return path.gradient(z, beta)
        g = np.zeros_like(np.asarray(z, dtype=float))
        if np.any(alive):
            g[alive] = path.gradient(z[alive], beta)
        return g

    return logp, grad


def _masked_increment(lp_new: np.ndarray, lp_old: np.ndarray) -> np.ndarray:
    """Energy difference with dead evaluations mapped to -inf, never nan."""
    with np.errstate(invalid="ignore"):
        incr = lp_new - lp_old
    return np.where(np.isnan(incr) | (lp_new == -np.inf), -np.inf, incr)


def _accumulate(log_w: np.ndarray, incr: np.ndarray) -> np.ndarray:
    dead = (log_w == -np.inf) | (incr == -np.inf)
    return np.where(dead, -np.inf, np.where(dead, 0.0, log_w) + np.where(dead, 0.0, incr))


def _moves(z, energy, cfg, rng, moves_per_step):
    rates = []
    for _ in range(moves_per_step):
        z, accepted = hmc_step(z, energy, cfg, rng)
        rates.append(float(np.mean(accepted)))
    return z, (float(np.mean(rates)) if rates else math.nan)


def ais_forward(
    path,
    schedule,
    chains: int,
    cfg: HmcConfig,
    moves_per_step: int,
    rng: np.random.Generator,
    adapt_steps: int = 10,
) -> AisResult:
    """Forward AIS estimate of log(Z_target / Z_base).

    Per-chain weights telescope the path energy along the schedule, each
    increment evaluated before the HMC moves for that step.  The log-mean-exp
    of the weights is a stochastic lower bound in expectation.
    """
    betas = _betas_of(schedule)
    if path.base.exact_sampler is None:
        raise ValueError("forward AIS requires an exact sampler for the base")
    if chains < 1:
        raise ValueError("chains must be positive")
    z = path.base.exact_sampler(rng, chains)
    log_w = np.zeros(chains)
    acceptance = np.full(betas.size - 1, math.nan)
    ess = np.full(betas.size - 1, math.nan)
    step_cfg = cfg
    for t in range(1, betas.size):
        lp_new = np.atleast_1d(path.log_density(z, betas[t]))
        lp_old = np.atleast_1d(path.log_density(z, betas[t - 1]))
        log_w = _accumulate(log_w, _masked_increment(lp_new, lp_old))
        if np.any(np.isfinite(log_w)):
            ess[t - 1] = ess_of_log_weights(log_w)
        energy = _path_energy(path, betas[t])
        step_cfg, z = tune_step_size(z, energy, step_cfg, rng, n_adapt=adapt_steps)
        z, acc = _moves(z, energy, step_cfg, rng, moves_per_step)
        acceptance[t - 1] = acc
    return _finish_ais(log_w, betas, acceptance, ess)


def ais_reverse(
    path,
    schedule,
    exact_target_samples: np.ndarray,
    cfg: HmcConfig,
    moves_per_step: int,
    rng: np.random.Generator,
    adapt_steps: int = 10,
) -> AisResult:
    """Reverse AIS from exact target samples down the schedule.

    The returned ``log_Z_estimate`` is the log-mean-exp of the run-direction
    weights and so estimates log(Z_base / Z_target); negating it gives the
    stochastic upper bound on log(Z_target / Z_base) that ``bdmc_gap`` pairs
    with a forward run.
    """
    betas = _betas_of(schedule)
    z = np.asarray(exact_target_samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] < 1:
        raise ValueError("reverse AIS requires at least one target sample")
    descending = betas[::-1]
    log_w = np.zeros(z.shape[0])
    acceptance = np.full(betas.size - 1, math.nan)
    ess = np.full(betas.size - 1, math.nan)
    step_cfg = cfg
    for t in range(1, descending.size):
        lp_new = np.atleast_1d(path.log_density(z, descending[t]))
        lp_old = np.atleast_1d(path.log_density(z, descending[t - 1]))
        log_w = _accumulate(log_w, _masked_increment(lp_new, lp_old))
        if np.any(np.isfinite(log_w)):
            ess[t - 1] = ess_of_log_weights(log_w)
        energy = _path_energy(path, descending[t])
        step_cfg, z = tune_step_size(z, energy, step_cfg, rng, n_adapt=adapt_steps)
        z, acc = _moves(z, energy, step_cfg, rng, moves_per_step)
        acceptance[t - 1] = acc
    return _finish_ais(log_w, betas, acceptance, ess)


def _finish_ais(
    log_w: np.ndarray, betas: np.ndarray, acceptance: np.ndarray, ess: np.ndarray
) -> AisResult:
    finite = np.isfinite(log_w)
    n_dropped = int(log_w.size - np.sum(finite))
    if n_dropped == log_w.size:
        raise WeightCollapseError("every chain carries a -inf weight")
    if n_dropped:
        warnings.warn(
            f"{n_dropped} of {log_w.size} chains hit -inf weights and were "
            "excluded from the estimate",
            RuntimeWarning,
        )
    estimate = float(logsumexp(log_w[finite]) - math.log(int(np.sum(finite))))
    return AisResult(
        log_Z_estimate=estimate,
        per_chain_log_w=log_w,
        schedule_used=betas,
        acceptance_trace=acceptance,
        n_dropped=n_dropped,
        ess_trace=ess,
    )


def bdmc_gap(fwd: AisResult, rev: AisResult) -> float:
    """Width of the sandwich: reverse upper bound minus forward lower bound."""
    return float(-rev.log_Z_estimate - fwd.log_Z_estimate)


def _next_beta_by_ess(incr_fn, beta_now, ess_target, tol, max_iter=100):
    """Bisect for the smallest next beta whose incremental ESS hits the target.

    ``incr_fn(b)`` returns per-particle log incremental weights from beta_now
    to b.  Returns (beta, converged); when the cap at 1 already satisfies the
    target the cap is returned converged.
    """
    if not beta_now < 1.0:
        raise ValueError("beta_now must be below 1")
    if ess_of_log_weights(incr_fn(1.0)) >= ess_target:
        return 1.0, True
    lo, hi = beta_now, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        ess = ess_of_log_weights(incr_fn(mid))
        if abs(ess - ess_target) <= tol:
            return mid, True
        if ess > ess_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi), False


def smc_run(
    path,
    schedule,
    particles: int,
    moves_per_step: int,
    cfg: HmcConfig,
    rng: np.random.Generator | int,
    ess_fraction: float = 0.5,
    adapt_steps: int = 10,
    adaptive_ess_tol: float | None = None,
    max_steps: int = 10_000,
) -> tuple[float, SmcDiagnostics]:
    """Sequential Monte Carlo estimate of log(Z_target / Z_base).

    ``schedule`` is either a fixed beta grid (resampling triggers when the
    carried-weight ESS drops below ``ess_fraction * particles``) or the string
    "adaptive" (each step bisects for the beta whose incremental ESS matches
    the target, then always resamples).  Accumulation is the log of the
    weighted mean incremental weight, so the estimate of Z is unbiased when
    no adaptation is used.  Deterministic given an integer seed.
    """
    if particles < 2:
        raise ValueError("particles must be at least 2")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(seed) if seed is not None else rng
    if path.base.exact_sampler is None:
        raise ValueError("SMC requires an exact sampler for the base")

    adaptive = isinstance(schedule, str)
    if adaptive:
        if schedule != "adaptive":
            raise ValueError(f"unknown schedule rule {schedule!r}")
        betas = None
    else:
        betas = _betas_of(schedule)

    z = path.base.exact_sampler(gen, particles)
    log_w = np.full(particles, -math.log(particles))
    log_Z = 0.0
    ess_target = ess_fraction * particles
    tol = adaptive_ess_tol if adaptive_ess_tol is not None else 0.01 * particles
    beta = 0.0
    beta_trace, ess_trace, acc_trace, eps_trace = [0.0], [], [], []
    resamples = 0
    step_cfg = cfg
    step = 0
    while beta < 1.0:
        step += 1
        if step > max_steps:
            raise WeightCollapseError(
                "adaptive schedule failed to reach beta = 1",
                {"beta_trace": np.asarray(beta_trace)},
            )
        if adaptive:
            lp_here = np.atleast_1d(path.log_density(z, beta))

            def incr_fn(b):
                return _masked_increment(np.atleast_1d(path.log_density(z, b)), lp_here)

            beta_next, converged = _next_beta_by_ess(incr_fn, beta, ess_target, tol)
            if not converged:
                warnings.warn(
                    f"incremental ESS bisection did not converge at beta {beta:.6f}",
                    RuntimeWarning,
                )
        else:
            beta_next = float(betas[step])

        lp_new = np.atleast_1d(path.log_density(z, beta_next))
        lp_old = np.atleast_1d(path.log_density(z, beta))
        log_w_next = _accumulate(log_w, _masked_increment(lp_new, lp_old))
        total_next = logsumexp(log_w_next)
        if total_next == -np.inf:
            raise WeightCollapseError(
                "all particle weights collapsed to -inf",
                {
                    "beta_trace": np.asarray(beta_trace + [beta_next]),
                    "ess_trace": np.asarray(ess_trace),
                },
            )
        log_Z += float(total_next - logsumexp(log_w))
        log_w = log_w_next - total_next
        ess = ess_of_log_weights(log_w)

        if adaptive or ess < ess_target:
            idx = systematic_resample(log_w, gen)
            z = z[idx]
            log_w = np.full(particles, -math.log(particles))
            resamples += 1

        energy = _path_energy(path, beta_next)
        step_cfg, z = tune_step_size(z, energy, step_cfg, gen, n_adapt=adapt_steps)
        z, acc = _moves(z, energy, step_cfg, gen, moves_per_step)

        beta = beta_next
        beta_trace.append(beta)
        ess_trace.append(ess)
        acc_trace.append(acc)
        eps_trace.append(step_cfg.step_size)

    system = ParticleSystem(
        positions=z,
        log_weights=log_w,
        log_Z_accum=log_Z,
        rng_seed=seed,
        step_index=len(beta_trace) - 1,
    )
    diagnostics = SmcDiagnostics(
        beta_trace=np.asarray(beta_trace),
        ess_trace=np.asarray(ess_trace),
        acceptance_trace=np.asarray(acc_trace),
        resample_count=resamples,
        system=system,
        step_sizes=np.asarray(eps_trace),
    )
    return log_Z, diagnostics
