"""Exact and Monte Carlo gradients of the mixture objective.

The gradient with respect to the mixture weights is, componentwise,

    b_j = integral of k(theta_j, y) f_alpha'(mix(y) / p(y)) d nu(y),

which a finite-support problem evaluates as a sum and the sampler estimates
as ``mean_m k(theta_j, Y_m) / mix(Y_m) * f_alpha'(mix(Y_m) / p(Y_m))`` with
``Y_m`` drawn from the mixture itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .divergence import amari_alpha_deriv_log
from .model import GaussianKernel, ParticleSet, as_simplex

__all__ = [
    "MixtureGradient",
    "MixtureState",
    "gradient_exact",
    "gradient_monte_carlo",
    "gradient_monte_carlo_from_logs",
    "sample_mixture",
]


@dataclass(frozen=True)
class MixtureState:
    """Weights, particle locations and kernel of the current mixture.

    Attributes:
        weights: simplex vector, one entry per particle.
        particles: a :class:`ParticleSet` (a bare ``(J, d)`` array is
            wrapped as generation 0).
        kernel: the smoothing kernel; its dimension must match the
            particles.
    """

    weights: np.ndarray
    particles: ParticleSet
    kernel: GaussianKernel

    def __post_init__(self):
        weights = as_simplex(self.weights)
        particles = self.particles
        if not isinstance(particles, ParticleSet):
            particles = ParticleSet(particles)
        if particles.num_components != weights.size:
            raise ValueError(
                f"{weights.size} weights for {particles.num_components} particles"
            )
        if particles.dim != self.kernel.dim:
            raise ValueError(
                f"kernel dimension {self.kernel.dim} does not match particle "
                f"dimension {particles.dim}"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "particles", particles)

    @property
    def num_components(self):
        return self.weights.size


@dataclass(frozen=True)
class MixtureGradient:
    """Gradient vector plus provenance of how it was computed."""

    values: np.ndarray
    mode: str
    sample_count: int | None
    alpha: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"gradient must be a nonempty vector, got {values.shape}")
        if self.mode not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown gradient mode {self.mode!r}")
        if self.mode == "exact" and self.sample_count is not None:
            raise ValueError("exact gradients carry no sample count")
        if self.mode == "monte_carlo" and (
            self.sample_count is None or self.sample_count < 1
        ):
            raise ValueError(f"bad sample count {self.sample_count!r}")
        object.__setattr__(self, "values", values)


def gradient_exact(problem, weights, alpha):
    """Exact gradient on a finite-support problem.

    Every component gets a value, including those with zero weight; the
    mixture in the ratio only sees the weighted ones.
    """
    log_u = problem.log_mixture(weights) - np.log(problem.p_values)
    deriv = amari_alpha_deriv_log(log_u, alpha)
    values = problem.kernel_matrix @ (problem.nu_weights * deriv)
    return MixtureGradient(values, "exact", None, alpha)


def sample_mixture(state, size, rng):
    """Draw ``size`` points from the smoothed mixture of ``state``.

    Each draw picks a component from the weights, then samples the kernel
    at that component's location.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    probs = state.weights / state.weights.sum()
    idx = rng.choice(state.num_components, size=size, p=probs)
    centres = state.particles.points[idx]
    return centres + state.kernel.bandwidth * rng.standard_normal(
        (size, state.kernel.dim)
    )


def gradient_monte_carlo_from_logs(log_kernel, log_target, weights, alpha):
    """Monte Carlo gradient from precomputed log evaluations.

    Args:
        log_kernel: ``(J, M)`` matrix of log kernel values at the samples.
        log_target: ``(M,)`` log target values at the samples.
        weights: simplex weights the samples were drawn under.
        alpha: divergence order.

    All density ratios are formed as differences of logs; ``f'`` of the
    ratio goes through ``expm1`` so the estimate stays finite even when the
    ratio itself would underflow.
    """
    log_kernel = np.asarray(log_kernel, dtype=float)
    log_target = np.asarray(log_target, dtype=float)
    weights = as_simplex(weights)
    if log_kernel.ndim != 2 or log_kernel.shape[0] != weights.size:
        raise ValueError(
            f"log_kernel must have shape ({weights.size}, M), got {log_kernel.shape}"
        )
    if log_target.shape != (log_kernel.shape[1],) or log_target.size == 0:
        raise ValueError("log_target must hold one value per sample")
    active = weights > 0
    log_mix = logsumexp(
        log_kernel[active] + np.log(weights[active])[:, None], axis=0
    )
    deriv = amari_alpha_deriv_log(log_mix - log_target, alpha)
    ratio = np.exp(log_kernel - log_mix)
    values = (ratio * deriv).mean(axis=1)
    return MixtureGradient(values, "monte_carlo", log_kernel.shape[1], alpha)


def gradient_monte_carlo(state, target, samples, alpha):
    """Monte Carlo gradient from mixture samples and a target."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("need at least one sample")
    log_kernel = state.kernel.logpdf_matrix(state.particles.points, samples)
    log_target = np.asarray(target.log_density(samples), dtype=float)
    return gradient_monte_carlo_from_logs(log_kernel, log_target, state.weights, alpha)
