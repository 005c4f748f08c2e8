"""Alpha-divergence generators, objectives and the variational Renyi bound.

The generator family is the Amari parameterisation of the Csiszar
f-divergence,

    f_0(u) = u - 1 - log u            (reverse KL)
    f_1(u) = 1 - u + u log u          (forward KL)
    f_a(u) = [u^a - 1 - a(u - 1)] / (a (a - 1))   otherwise,

which is continuous in ``alpha`` across the two special points.  Branch
dispatch is on exact float equality: nearby alphas approach the limits on
their own, so snapping would only hide the continuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import mixture_logpdf

__all__ = [
    "DescentParams",
    "amari_alpha",
    "amari_alpha_deriv",
    "amari_alpha_deriv_log",
    "divergence_exact",
    "renyi_objective_exact",
    "vr_bound_estimate",
    "vr_bound_exact",
    "vr_bound_from_logs",
]


@dataclass(frozen=True)
class DescentParams:
    """Hyperparameters shared by the descent updates.

    Attributes:
        alpha: divergence order.
        step_size: multiplicative-update step size, positive.
        shift: constant added to the gradient inside the update.  Keeping
            ``(alpha - 1) * shift >= 0`` preserves monotonicity, and a
            strictly positive product buys the O(1/N) rate of the renyi
            update.
        diag_offset: centring constant used only by the step-admissibility
            diagnostic of the renyi update; it cancels in the update itself.
    """

    alpha: float
    step_size: float
    shift: float = 0.0
    diag_offset: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "step_size", "shift", "diag_offset"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")

    @property
    def power_valid(self):
        """Monotonicity regime of the power update."""
        return (
            self.alpha != 1.0
            and (self.alpha - 1.0) * self.shift >= 0.0
            and 0.0 < self.step_size <= 1.0
        )

    @property
    def renyi_valid(self):
        """Assumptions behind the renyi update's convergence rate."""
        return self.alpha != 1.0 and (self.alpha - 1.0) * self.shift > 0.0


def _check_positive(u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise ValueError("generator argument must be strictly positive and finite")
    return u


def amari_alpha(u, alpha):
    """Generator ``f_alpha`` evaluated elementwise at ``u > 0``."""
    scalar = np.ndim(u) == 0
    u = _check_positive(u)
    if alpha == 0.0:
        out = u - 1.0 - np.log(u)
    elif alpha == 1.0:
        out = 1.0 - u + u * np.log(u)
    else:
        out = (u**alpha - 1.0 - alpha * (u - 1.0)) / (alpha * (alpha - 1.0))
    return float(out) if scalar else out


def amari_alpha_deriv(u, alpha):
    """Derivative ``f_alpha'`` evaluated elementwise at ``u > 0``."""
    scalar = np.ndim(u) == 0
    u = _check_positive(u)
    if alpha == 0.0:
        out = 1.0 - 1.0 / u
    elif alpha == 1.0:
        out = np.log(u)
    else:
        out = (u ** (alpha - 1.0) - 1.0) / (alpha - 1.0)
    return float(out) if scalar else out


def amari_alpha_deriv_log(log_u, alpha):
    """``f_alpha'(exp(log_u))`` computed without forming ``u``.

    This is the form the Monte Carlo gradient needs: in high dimension the
    density ratio ``u`` itself can underflow while ``f'`` stays
    representable.
    """
    log_u = np.asarray(log_u, dtype=float)
    if alpha == 0.0:
        return -np.expm1(-log_u)
    if alpha == 1.0:
        return log_u.copy()
    return np.expm1((alpha - 1.0) * log_u) / (alpha - 1.0)


def divergence_exact(problem, weights, alpha):
    """Exact objective ``sum_s nu_s p_s f_alpha(mix_s / p_s)``.

    Zero when the mixture matches ``p_values`` exactly; nonnegative whenever
    the target values are nu-normalised.
    """
    log_u = problem.log_mixture(weights) - np.log(problem.p_values)
    values = amari_alpha(np.exp(log_u), alpha)
    return float(np.sum(problem.nu_weights * problem.p_values * values))


def renyi_objective_exact(problem, weights, params):
    """Exact value of the log-transformed objective behind the renyi update.

    ``[alpha (alpha - 1)]^-1 log( sum_s nu_s mix_s^alpha p_s^(1-alpha)
    + (alpha - 1) shift )``; undefined at ``alpha`` 0 or 1.
    """
    alpha = params.alpha
    if alpha == 0.0 or alpha == 1.0:
        raise ValueError(f"renyi objective is undefined at alpha={alpha}")
    log_mix = problem.log_mixture(weights)
    log_terms = np.log(problem.nu_weights) + alpha * log_mix + (1.0 - alpha) * np.log(
        problem.p_values
    )
    total = float(np.exp(logsumexp(log_terms))) + (alpha - 1.0) * params.shift
    if total <= 0:
        raise ValueError(
            f"log argument of the renyi objective is nonpositive ({total!r}); "
            f"the shift {params.shift} is too aggressive for this problem"
        )
    return float(np.log(total) / (alpha * (alpha - 1.0)))


def vr_bound_exact(problem, weights, alpha):
    """Exact variational Renyi bound on the finite support.

    ``(1 - alpha)^-1 log sum_s nu_s mix_s^alpha p_s^(1-alpha)``; equals the
    log normaliser of the target when the mixture fits it perfectly.
    """
    if alpha == 1.0:
        raise ValueError("vr bound is undefined at alpha=1")
    log_mix = problem.log_mixture(weights)
    log_terms = np.log(problem.nu_weights) + alpha * log_mix + (1.0 - alpha) * np.log(
        problem.p_values
    )
    return float(logsumexp(log_terms) / (1.0 - alpha))


def vr_bound_from_logs(log_target, log_proposal, alpha):
    """Monte Carlo variational Renyi bound from paired log evaluations."""
    if alpha == 1.0:
        raise ValueError("vr bound is undefined at alpha=1")
    log_target = np.atleast_1d(np.asarray(log_target, dtype=float))
    log_proposal = np.atleast_1d(np.asarray(log_proposal, dtype=float))
    if log_target.shape != log_proposal.shape or log_target.size == 0:
        raise ValueError("need equal, nonempty batches of log evaluations")
    m = log_target.size
    lse = logsumexp((1.0 - alpha) * (log_target - log_proposal))
    return float((lse - np.log(m)) / (1.0 - alpha))


def vr_bound_estimate(samples, weights, points, kernel, target, alpha):
    """Monte Carlo bound from mixture samples.

    Args:
        samples: draws from the smoothed mixture, shape ``(M, d)``.
        weights: mixture weights on the simplex.
        points: component locations ``(J, d)``.
        kernel: the smoothing kernel.
        target: object with a ``log_density`` method.
        alpha: divergence order, anything but 1.

    Higher is better; the bound is exact (and equals the log normaliser)
    when the mixture matches the target.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("need at least one sample")
    log_q = mixture_logpdf(weights, points, kernel, samples)
    log_p = np.asarray(target.log_density(samples), dtype=float)
    return vr_bound_from_logs(log_p, log_q, alpha)
