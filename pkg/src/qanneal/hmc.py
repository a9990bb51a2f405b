"""Hamiltonian Monte Carlo on log-density energies.

The kernel is vectorized over a batch of chains: positions have shape (n, d)
and every chain draws its own momentum and accept threshold from the shared
generator, in a fixed order, so results are reproducible given a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

LogDensityFn = Callable[[np.ndarray], np.ndarray]
GradientFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HmcConfig:
    """Leapfrog step size, trajectory length, and diagonal mass matrix."""

    step_size: float
    n_leapfrog: int
    mass: np.ndarray

    def __post_init__(self):
        if not self.step_size > 0.0:
            raise ValueError("step_size must be positive")
        if self.n_leapfrog < 1:
            raise ValueError("n_leapfrog must be at least 1")
        mass = np.atleast_1d(np.asarray(self.mass, dtype=float))
        if mass.ndim != 1 or np.any(mass <= 0.0) or not np.all(np.isfinite(mass)):
            raise ValueError("mass must be a positive finite vector")
        object.__setattr__(self, "mass", mass)


def leapfrog(
    z: np.ndarray,
    momentum: np.ndarray,
    grad: GradientFn,
    cfg: HmcConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Run ``cfg.n_leapfrog`` leapfrog steps along the log-density gradient.

    The update is volume preserving and time reversible: negating the returned
    momentum and integrating again retraces the trajectory.  Nonfinite
    gradients propagate into the outputs; callers detect divergence there.
    """
    eps = cfg.step_size
    inv_mass = 1.0 / cfg.mass
    with np.errstate(over="ignore", invalid="ignore"):
        p = momentum + 0.5 * eps * grad(z)
        z = z + eps * inv_mass * p
        for _ in range(cfg.n_leapfrog - 1):
            p = p + eps * grad(z)
            z = z + eps * inv_mass * p
        p = p + 0.5 * eps * grad(z)
    return z, p


def _kinetic(p: np.ndarray, mass: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(p * p / mass, axis=-1)


def _hmc_core(
    positions: np.ndarray,
    logp: LogDensityFn,
    grad: GradientFn,
    cfg: HmcConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Metropolis-corrected HMC update for a (n, d) batch.

    Returns (positions, accepted mask, per-chain acceptance probability).
    Divergent trajectories (nonfinite state or energy) are auto-rejected.
    """
    n, d = positions.shape
    p0 = rng.standard_normal((n, d)) * np.sqrt(cfg.mass)
    lp0 = np.atleast_1d(np.asarray(logp(positions), dtype=float))
    k0 = _kinetic(p0, cfg.mass)

    proposal, p1 = leapfrog(positions, p0, grad, cfg)
    ok = np.all(np.isfinite(proposal), axis=1) & np.all(np.isfinite(p1), axis=1)
    lp1 = np.full(n, -np.inf)
    if np.any(ok):
        lp1[ok] = np.atleast_1d(np.asarray(logp(proposal[ok]), dtype=float))
    k1 = np.where(ok, _kinetic(np.where(ok[:, None], p1, 0.0), cfg.mass), np.inf)

    with np.errstate(invalid="ignore"):
        log_ratio = (lp1 - k1) - (lp0 - k0)
    log_ratio = np.where(np.isnan(log_ratio), -np.inf, log_ratio)

    with np.errstate(divide="ignore"):
        log_u = np.log(rng.uniform(size=n))
    accepted = log_u < log_ratio
    accept_prob = np.exp(np.minimum(log_ratio, 0.0))

    out = np.where(accepted[:, None], np.where(ok[:, None], proposal, 0.0), positions)
    return out, accepted, accept_prob


def hmc_step(
    z: np.ndarray,
    energy: tuple[LogDensityFn, GradientFn],
    cfg: HmcConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Metropolis-corrected HMC transition leaving exp(log-density) invariant.

    Accepts a single point (d,) or a batch (n, d); returns the new state and
    the accepted flag(s).  Proposals with -inf energy or nonfinite state are
    rejected in place.
    """
    logp, grad = energy
    arr = np.asarray(z, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    out, accepted, _ = _hmc_core(batch, logp, grad, cfg, rng)
    if single:
        return out[0], bool(accepted[0])
    return out, accepted


def tune_step_size(
    positions: np.ndarray,
    energy: tuple[LogDensityFn, GradientFn],
    cfg: HmcConfig,
    rng: np.random.Generator,
    target_accept: float = 0.65,
    n_adapt: int = 50,
) -> tuple[HmcConfig, np.ndarray]:
    """Dual-averaging warm-up of the step size toward a target acceptance.

    Returns the tuned config and the warmed-up positions.  ``n_adapt = 0``
    is a no-op so callers can disable adaptation entirely.
    """
    if n_adapt == 0:
        return cfg, positions
    logp, grad = energy
    arr = np.asarray(positions, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr

    eps = cfg.step_size
    mu = math.log(10.0 * eps)
    log_eps_bar = math.log(eps)
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75
    for m in range(1, n_adapt + 1):
        batch, _, accept_prob = _hmc_core(
            batch, logp, grad, replace(cfg, step_size=eps), rng
        )
        h_bar += ((target_accept - float(np.mean(accept_prob))) - h_bar) / (m + t0)
        log_eps = mu - math.sqrt(m) / gamma * h_bar
        log_eps = min(max(log_eps, math.log(1e-6)), math.log(1e2))
        eta = m**-kappa
        log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
        eps = math.exp(log_eps)

    tuned = replace(cfg, step_size=math.exp(log_eps_bar))
    return tuned, (batch[0] if single else batch)
