"""Annealing paths between a base and an unnormalized target.

The main object is the power-mean path of order q, evaluated entirely in log
space: intermediate log densities are combined through shifted log1p/expm1
calls so that no unbounded log-ratio is ever exponentiated. A moment-averaging
path for Gaussian and Student-t endpoint families is provided for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from qanneal.deformed import is_geometric_order
from qanneal.densities import (
    UnnormalizedDensity,
    gaussian,
    q_from_nu,
    student_t,
    with_log_scale,
)


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta


def blend_log_ratio(log_ratios, beta: float, q: float):
    """log(path density / base density) from finite endpoint log-ratios.

    Computes (1/(1-q)) * log((1-beta) + beta * ratio^(1-q)) without forming
    the ratio; exact 0 at beta = 0 and at equal endpoints.
    """
    beta = _check_beta(beta)
    lr = np.asarray(log_ratios, dtype=float)
    if not np.all(np.isfinite(lr)):
        raise ValueError("log_ratios must be finite")
    if beta == 0.0:
        return np.zeros_like(lr)
    if beta == 1.0:
        return lr.copy()
    if is_geometric_order(q):
        return beta * lr
    d = 1.0 - q
    x = d * lr
    # each branch feeds expm1 a nonpositive argument, so nothing overflows
    swap = x > 0.0
    lo = np.log1p(beta * np.expm1(np.where(swap, 0.0, x)))
    hi = np.log1p((1.0 - beta) * np.expm1(np.where(swap, -x, 0.0)))
    return np.where(swap, lr + hi / d, lo / d)


@dataclass(frozen=True)
class QPath:
    """Power-mean interpolation of order q between two densities.

    q = 1 is the geometric (log-linear) path; q = 0 mixes the raw densities
    arithmetically; q > 1 behaves like a soft minimum of the endpoints.
    """

    base: UnnormalizedDensity
    target: UnnormalizedDensity
    q: float = 1.0

    def __post_init__(self):
        if self.base.dim != self.target.dim:
            raise ValueError("endpoint dimensions differ")

    @property
    def dim(self) -> int:
        return self.base.dim

    def log_density(self, z, beta: float):
        beta = _check_beta(beta)
        if beta == 0.0:
            return self.base.log_density(z)
        if beta == 1.0:
            return self.target.log_density(z)
        lp0 = np.asarray(self.base.log_density(z), dtype=float)
        lp1 = np.asarray(self.target.log_density(z), dtype=float)
        scalar = lp0.ndim == 0
        lp0, lp1 = np.atleast_1d(lp0), np.atleast_1d(lp1)
        if is_geometric_order(self.q):
            # difference form keeps equal endpoints bit-exact at every beta
            dead = (lp0 == -np.inf) | (lp1 == -np.inf)
            diff = np.where(dead, 0.0, lp1) - np.where(dead, 0.0, lp0)
            out = np.where(dead, -np.inf, lp0 + beta * diff)
        else:
            d = 1.0 - self.q
            dead = (lp0 == -np.inf) & (lp1 == -np.inf)
            x = d * (np.where(dead, 0.0, lp1) - np.where(dead, 0.0, lp0))
            # anchor at whichever endpoint dominates in the deformed scale,
            # so expm1 only ever sees nonpositive arguments
            swap = x > 0.0
            lo = np.log1p(beta * np.expm1(np.where(swap, 0.0, x)))
            hi = np.log1p((1.0 - beta) * np.expm1(np.where(swap, -x, 0.0)))
            out = np.where(swap, lp1 + hi / d, lp0 + lo / d)
            out = np.where(dead, -np.inf, out)
        return float(out[0]) if scalar else out

    def gradient(self, z, beta: float):
        beta = _check_beta(beta)
        if beta == 0.0:
            return self.base.gradient(z)
        if beta == 1.0:
            return self.target.gradient(z)
        lp0 = np.atleast_1d(np.asarray(self.base.log_density(z), dtype=float))
        lp1 = np.atleast_1d(np.asarray(self.target.log_density(z), dtype=float))
        if is_geometric_order(self.q) or self.q > 1.0:
            vanished = (lp0 == -np.inf) | (lp1 == -np.inf)
        else:
            vanished = (lp0 == -np.inf) & (lp1 == -np.inf)
        if np.any(vanished):
            raise ValueError("gradient undefined where the path density vanishes")
        if is_geometric_order(self.q):
            w1 = np.full_like(lp0, beta)
        else:
            # responsibility of the target endpoint in the power mean
            w1 = expit(math.log(beta) - math.log1p(-beta) + (1.0 - self.q) * (lp1 - lp0))
        g0 = np.atleast_2d(np.asarray(self.base.gradient(z), dtype=float))
        g1 = np.atleast_2d(np.asarray(self.target.gradient(z), dtype=float))
        col = w1[:, None]
        mixed = np.where(col == 1.0, g1, np.where(col == 0.0, g0, (1.0 - col) * g0 + col * g1))
        return mixed[0] if np.asarray(z).ndim == 1 else mixed


def geometric_path(base: UnnormalizedDensity, target: UnnormalizedDensity) -> QPath:
    """The classic log-linear annealing path."""
    return QPath(base=base, target=target, q=1.0)


def qpath_log_density(path: QPath, z, beta: float):
    """Functional form of :meth:`QPath.log_density`."""
    return path.log_density(z, beta)


def qpath_gradient(path: QPath, z, beta: float):
    """Functional form of :meth:`QPath.gradient`."""
    return path.gradient(z, beta)


@dataclass(frozen=True)
class QExpFamilyParams:
    """Natural parameters of a one-dimensional deformed-exponential family.

    The density is exp_q(theta . phi(z)) with polynomial sufficient statistics
    phi(z) = (1, z, z^2, ...); the constant statistic lets scale factors ride
    along in the parameter vector.
    """

    theta: np.ndarray
    q: float

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        phi = np.vander(np.ravel(z), N=self.theta.size, increasing=True)
        u = phi @ self.theta
        if is_geometric_order(self.q):
            out = u
        else:
            d = 1.0 - self.q
            bracket = 1.0 + d * u
            pos = bracket > 0.0
            out = np.where(pos, np.log(np.where(pos, bracket, 1.0)) / d, -np.inf)
        return out.reshape(np.shape(z))


def same_family_qpath_params(
    p0: QExpFamilyParams, p1: QExpFamilyParams, beta: float
) -> QExpFamilyParams:
    """Path between same-family endpoints stays in the family: natural
    parameters mix linearly."""
    beta = _check_beta(beta)
    if p0.q != p1.q or p0.theta.size != p1.theta.size:
        raise ValueError("endpoints must share the family (same q and statistics)")
    return QExpFamilyParams(theta=(1.0 - beta) * p0.theta + beta * p1.theta, q=p0.q)


def gaussian_natural_params(mean: float, var: float) -> QExpFamilyParams:
    """1-d Gaussian written as exp(theta . (1, z, z^2)), constants included."""
    if not var > 0.0:
        raise ValueError("var must be positive")
    c = -0.5 * math.log(2.0 * math.pi * var)
    theta = np.array([c - 0.5 * mean**2 / var, mean / var, -0.5 / var])
    return QExpFamilyParams(theta=theta, q=1.0)


def student_t_natural_params(mean: float, scale: float, nu: float) -> QExpFamilyParams:
    """1-d Student-t written as exp_q(theta . (1, z, z^2)) at its matched q.

    The normalizer is folded into theta through the constant statistic, so the
    density equals the normalized Student-t pointwise.
    """
    if not (scale > 0.0 and nu > 0.0):
        raise ValueError("scale and nu must be positive")
    q = q_from_nu(nu, 1)
    d = 1.0 - q
    log_c = (
        math.lgamma(0.5 * (nu + 1.0))
        - math.lgamma(0.5 * nu)
        - 0.5 * math.log(nu * math.pi * scale)
    )
    cd = math.exp(d * log_c)
    theta = (
        np.array([cd - 1.0 + cd * mean**2 / (nu * scale), -2.0 * cd * mean / (nu * scale), cd / (nu * scale)])
        / d
    )
    return QExpFamilyParams(theta=theta, q=q)


def moment_path_params(mu0, cov0, mu1, cov1, beta: float, nu: float | None = None):
    """Parameters of the moment-averaged intermediate at mixing weight beta.

    Means mix linearly; covariances (scale matrices for Student-t endpoints,
    where ``nu`` is given) pick up a mean-displacement term whose coefficient
    is 1 for the Gaussian family and (nu+2)/nu for Student-t.
    """
    beta = _check_beta(beta)
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    cov0 = np.asarray(cov0, dtype=float)
    cov1 = np.asarray(cov1, dtype=float)
    if cov0.ndim == 0:
        cov0 = np.eye(mu0.size) * cov0
    if cov1.ndim == 0:
        cov1 = np.eye(mu1.size) * cov1
    if nu is not None and not nu > 0.0:
        raise ValueError("nu must be positive when given")
    factor = 1.0 if nu is None else (nu + 2.0) / nu
    mu_b = (1.0 - beta) * mu0 + beta * mu1
    gap = mu1 - mu0
    cov_b = (1.0 - beta) * cov0 + beta * cov1 + factor * beta * (1.0 - beta) * np.outer(gap, gap)
    return mu_b, cov_b


class MomentPath:
    """Moment-averaged annealing path with Gaussian or Student-t waypoints.

    ``nu=None`` gives the Gaussian moment path; a finite ``nu`` gives the
    Student-t path whose escort expectations mix linearly. Endpoint log
    scale factors interpolate log-linearly so unnormalized targets fit.
    """

    def __init__(self, mu0, cov0, mu1, cov1, nu: float | None = None,
                 log_scale0: float = 0.0, log_scale1: float = 0.0):
        self.mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
        self.mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
        if self.mu0.shape != self.mu1.shape:
            raise ValueError("endpoint dimensions differ")
        self.cov0 = np.asarray(cov0, dtype=float)
        self.cov1 = np.asarray(cov1, dtype=float)
        self.nu = nu
        self.log_scale0 = float(log_scale0)
        self.log_scale1 = float(log_scale1)
        self._waypoints: dict[float, UnnormalizedDensity] = {}
        self.base = with_log_scale(self._waypoint(0.0), self.log_scale0)
        self.target = with_log_scale(self._waypoint(1.0), self.log_scale1)

    @property
    def dim(self) -> int:
        return self.mu0.size

    def _waypoint(self, beta: float) -> UnnormalizedDensity:
        if beta not in self._waypoints:
            mu_b, cov_b = moment_path_params(
                self.mu0, self.cov0, self.mu1, self.cov1, beta, nu=self.nu
            )
            if self.nu is None:
                self._waypoints[beta] = gaussian(mu_b, cov_b)
            else:
                self._waypoints[beta] = student_t(mu_b, cov_b, nu=self.nu)
        return self._waypoints[beta]

    def _offset(self, beta: float) -> float:
        return (1.0 - beta) * self.log_scale0 + beta * self.log_scale1

    def log_density(self, z, beta: float):
        beta = _check_beta(beta)
        return self._waypoint(beta).log_density(z) + self._offset(beta)

    def gradient(self, z, beta: float):
        beta = _check_beta(beta)
        return self._waypoint(beta).gradient(z)
