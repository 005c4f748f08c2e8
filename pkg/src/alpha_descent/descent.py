"""Multiplicative updates on the simplex and their convergence-rate bound.

Four update rules share one shape: multiply each weight by a positive
factor computed from the gradient, renormalise in the log domain.

    power:  factor_j = [(alpha-1)(b_j + shift) + 1]^(step/(1-alpha))
    emd:    factor_j = exp(-step (b_j + shift))
    kl:     factor_j = exp(-step b_j)           (alpha = 1 gradient)
    renyi:  factor_j = exp(-step b_j / D),  D = (alpha-1)(mu_b + shift) + 1

where ``mu_b`` is the weighted mean of the gradient.  The power and renyi
updates carry positivity guards; a violated guard raises
:class:`GuardViolation` instead of producing NaNs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .divergence import divergence_exact, vr_bound_from_logs
from .gradient import (
    MixtureGradient,
    MixtureState,
    gradient_exact,
    gradient_monte_carlo_from_logs,
    sample_mixture,
)
from .model import as_simplex
from scipy.special import logsumexp

__all__ = [
    "ALGORITHMS",
    "FIXED_POINT_TOL",
    "DescentTrace",
    "GuardViolation",
    "RateConstants",
    "StepDiagnostics",
    "TraceRecord",
    "emd_step",
    "kl_step",
    "power_step",
    "power_transform",
    "rate_bound",
    "renyi_step",
    "run_descent",
]

ALGORITHMS = ("power", "renyi", "emd", "kl")

# Default threshold on ||new - old||_1 for treating a step as a fixed point.
# run_descent leaves early stopping off unless a tolerance is passed, since
# the reference experiments always run a fixed number of steps.
FIXED_POINT_TOL = 1e-12


class GuardViolation(RuntimeError):
    """A positivity guard failed; the step was refused.

    Attributes:
        indices: offending component indices, when the guard is per
            component.
        iteration: step number, attached when raised from inside a run.
    """

    def __init__(self, message, indices=None, iteration=None):
        super().__init__(message)
        self.indices = list(indices) if indices is not None else None
        self.iteration = iteration


@dataclass(frozen=True)
class StepDiagnostics:
    """What a single update actually did.

    Attributes:
        gamma_inputs: the J arguments handed to the multiplicative
            transform.
        log_normaliser: log of the positive normalising constant.
        guard_min: minimum guard margin; positive means the guard held
            with room, ``inf`` for the guard-free updates.
        check_values: renyi only, the shifted gradient values entering the
            step-admissibility check.
        objective_after: filled by :func:`run_descent` in exact mode.
    """

    gamma_inputs: np.ndarray
    log_normaliser: float
    guard_min: float
    check_values: np.ndarray | None = None
    objective_after: float | None = None


def _gradient_values(grad, num_components=None):
    values = grad.values if isinstance(grad, MixtureGradient) else np.asarray(
        grad, dtype=float
    )
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValueError(f"gradient must be a vector, got shape {values.shape}")
    if num_components is not None and values.size != num_components:
        raise ValueError(
            f"gradient has {values.size} entries for {num_components} weights"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("gradient values must be finite")
    return values


def _renormalise(weights, log_factors):
    """Multiply and renormalise in the log domain.

    Zero weights stay exactly zero.  Returns the new simplex vector and the
    log normaliser.
    """
    active = weights > 0
    log_w = np.full(weights.shape, -np.inf)
    log_w[active] = np.log(weights[active]) + log_factors[active]
    peak = np.max(log_w)
    if not np.isfinite(peak):
        raise GuardViolation("all mixture mass was annihilated by the update")
    w = np.exp(log_w - peak)
    total = w.sum()
    return w / total, float(peak + np.log(total))


def power_transform(v, params):
    """The power update's multiplicative factor ``[(a-1)v + 1]^(step/(1-a))``."""
    scalar = np.ndim(v) == 0
    v = np.atleast_1d(np.asarray(v, dtype=float))
    alpha = params.alpha
    if alpha == 1.0:
        raise ValueError("power transform is undefined at alpha=1")
    base = (alpha - 1.0) * v + 1.0
    if np.any(base <= 0):
        bad = np.flatnonzero(base <= 0)
        raise GuardViolation(
            f"power transform domain violated at v={v[bad[0]]!r} "
            f"((alpha-1)v + 1 = {base[bad[0]]!r})",
            indices=bad,
        )
    out = np.exp(params.step_size / (1.0 - alpha) * np.log(base))
    return float(out[0]) if scalar else out


def power_step(weights, grad, params):
    """One power update.  Returns ``(new_weights, diagnostics)``.

    Requires ``params.power_valid``.  The positivity guard is checked on
    weighted components only; zero-weight components stay at zero
    regardless of their gradient value.
    """
    if not params.power_valid:
        raise ValueError(
            "power step needs alpha != 1, (alpha-1)*shift >= 0 and "
            f"step_size in (0, 1]; got {params}"
        )
    weights = as_simplex(weights)
    values = _gradient_values(grad, weights.size)
    shifted = values + params.shift
    alpha = params.alpha
    base = (alpha - 1.0) * shifted + 1.0
    active = weights > 0
    if np.any(base[active] <= 0):
        bad = np.flatnonzero(active & (base <= 0))
        raise GuardViolation(
            f"power guard violated at component(s) {bad.tolist()}: "
            f"(alpha-1)(b+shift)+1 = {base[bad[0]]!r}",
            indices=bad,
        )
    log_factors = np.zeros_like(base)
    log_factors[active] = params.step_size / (1.0 - alpha) * np.log(base[active])
    new, log_norm = _renormalise(weights, log_factors)
    diag = StepDiagnostics(
        gamma_inputs=shifted,
        log_normaliser=log_norm,
        guard_min=float(base[active].min()),
    )
    return new, diag


def emd_step(weights, grad, params):
    """One entropic mirror descent update, factors ``exp(-step (b + shift))``."""
    weights = as_simplex(weights)
    values = _gradient_values(grad, weights.size)
    shifted = values + params.shift
    new, log_norm = _renormalise(weights, -params.step_size * shifted)
    diag = StepDiagnostics(
        gamma_inputs=shifted, log_normaliser=log_norm, guard_min=np.inf
    )
    return new, diag


def kl_step(weights, grad, step_size):
    """Mirror descent on the forward KL; the gradient must be the alpha=1 one."""
    if step_size <= 0:
        raise ValueError(f"step_size must be positive, got {step_size}")
    if isinstance(grad, MixtureGradient) and grad.alpha != 1.0:
        raise ValueError(f"kl step wants an alpha=1 gradient, got alpha={grad.alpha}")
    weights = as_simplex(weights)
    values = _gradient_values(grad, weights.size)
    new, log_norm = _renormalise(weights, -step_size * values)
    diag = StepDiagnostics(
        gamma_inputs=values, log_normaliser=log_norm, guard_min=np.inf
    )
    return new, diag


def renyi_step(weights, grad, params, unweighted_denominator=False):
    """One renyi update, factors ``exp(-step b_j / D)``.

    ``D = (alpha-1)(mu_b + shift) + 1`` with ``mu_b`` the weighted mean of
    the gradient; ``unweighted_denominator`` swaps in the plain sum instead,
    which reproduces a published variant but loses the positivity guarantee
    of the weighted form.  Requires ``alpha != 1`` and
    ``(alpha-1)*shift >= 0`` (the convergence rate additionally wants the
    product strictly positive, see :class:`RateConstants`).

    The admissibility check ``1 - step (alpha-1)(V_j - diag_offset) >= 0``
    is recorded in the diagnostics, not enforced; ``diag_offset`` never
    touches the update itself.
    """
    alpha = params.alpha
    if alpha == 1.0:
        raise ValueError("renyi step is undefined at alpha=1")
    if (alpha - 1.0) * params.shift < 0:
        raise ValueError(
            f"renyi step needs (alpha-1)*shift >= 0, got alpha={alpha}, "
            f"shift={params.shift}"
        )
    weights = as_simplex(weights)
    values = _gradient_values(grad, weights.size)
    mu_b = float(values.sum() if unweighted_denominator else weights @ values)
    denom = (alpha - 1.0) * (mu_b + params.shift) + 1.0
    if denom <= 0:
        raise GuardViolation(
            f"renyi normaliser nonpositive: (alpha-1)(mu_b+shift)+1 = {denom!r}"
        )
    scaled = values / denom
    new, log_norm = _renormalise(weights, -params.step_size * scaled)
    raw_check = (values + 1.0 / (alpha - 1.0)) / denom
    check = raw_check + params.diag_offset
    margin = 1.0 - params.step_size * (alpha - 1.0) * raw_check
    diag = StepDiagnostics(
        gamma_inputs=scaled,
        log_normaliser=log_norm,
        guard_min=float(margin.min()),
        check_values=check,
    )
    return new, diag


@dataclass(frozen=True)
class TraceRecord:
    """State of one descent iteration.

    ``objective`` is the exact objective (finite-support runs only) and
    ``vr_bound`` the Monte Carlo bound (sampled runs only); whichever does
    not apply is NaN.
    """

    phase: int
    step: int
    weights: np.ndarray
    vr_bound: float
    objective: float
    guard_min: float
    elapsed_ms: float


@dataclass
class DescentTrace:
    """Recorded iterations of one descent run plus its terminal status."""

    records: list = field(default_factory=list)
    status: str = "completed"
    replicate: int | None = None

    @property
    def final_weights(self):
        if not self.records:
            raise ValueError("empty trace has no final weights")
        return self.records[-1].weights


def _step_once(algorithm, weights, grad, params, unweighted_denominator):
    if algorithm == "power":
        return power_step(weights, grad, params)
    if algorithm == "emd":
        return emd_step(weights, grad, params)
    if algorithm == "kl":
        return kl_step(weights, grad, params.step_size)
    if algorithm == "renyi":
        return renyi_step(
            weights, grad, params, unweighted_denominator=unweighted_denominator
        )
    raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")


def run_descent(
    initial,
    params,
    algorithm,
    num_steps,
    *,
    problem=None,
    target=None,
    sample_count=None,
    rng=None,
    fixed_point_tol=None,
    reuse_monitor_samples=False,
    unweighted_denominator=False,
    phase=1,
    record_initial=True,
):
    """Apply ``num_steps`` updates and record every iteration.

    Exactly one of ``problem`` (exact gradients and objective) or
    ``target`` (Monte Carlo gradients and the sampled bound) must be given.
    The exact mode accepts bare weights or a :class:`MixtureState` as
    ``initial``; the Monte Carlo mode needs the full state plus
    ``sample_count`` and ``rng``.  The kl algorithm always uses the
    alpha = 1 gradient and objective, whatever ``params.alpha`` says; the
    sampled bound is monitored at ``params.alpha`` and recorded as NaN when
    that is 1.

    ``fixed_point_tol`` (e.g. :data:`FIXED_POINT_TOL`) stops the run once a
    step moves the weights by less than the tolerance in l1 norm; by
    default the run always performs the full ``num_steps``.

    The input state is never mutated.  Guard violations are re-raised with
    the failing step attached and the partial trace available on the
    exception as ``partial``.
    """
    if (problem is None) == (target is None):
        raise ValueError("pass exactly one of problem= or target=")
    if num_steps < 0:
        raise ValueError(f"num_steps must be >= 0, got {num_steps}")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")

    monte_carlo = target is not None
    if monte_carlo:
        if not isinstance(initial, MixtureState):
            raise ValueError("Monte Carlo descent needs a MixtureState")
        if sample_count is None or sample_count < 1:
            raise ValueError(f"bad sample_count {sample_count!r}")
        if rng is None:
            raise ValueError("Monte Carlo descent needs an rng")
        state = initial
        weights = state.weights
    else:
        weights = as_simplex(
            initial.weights if isinstance(initial, MixtureState) else initial
        )
        if weights.size != problem.num_components:
            raise ValueError(
                f"{weights.size} weights for a problem with "
                f"{problem.num_components} components"
            )

    grad_alpha = 1.0 if algorithm == "kl" else params.alpha
    monitor_alpha = params.alpha
    trace = DescentTrace(status="completed")

    def exact_objective(w):
        return divergence_exact(problem, w, grad_alpha)

    def monitor_exact(w):
        return TraceRecord(phase, 0, w.copy(), np.nan, exact_objective(w), np.nan, 0.0)

    def monitor_mc(w, tick):
        if monitor_alpha == 1.0:
            vr = np.nan
        else:
            fresh = sample_mixture(replace(state, weights=w), sample_count, rng)
            log_k = state.kernel.logpdf_matrix(state.particles.points, fresh)
            active = w > 0
            log_q = logsumexp(log_k[active] + np.log(w[active])[:, None], axis=0)
            log_p = np.asarray(target.log_density(fresh), dtype=float)
            vr = vr_bound_from_logs(log_p, log_q, monitor_alpha)
        elapsed = (time.perf_counter() - tick) * 1000.0
        return TraceRecord(phase, 0, w.copy(), vr, np.nan, np.nan, elapsed)

    tick = time.perf_counter()
    if record_initial:
        rec = monitor_exact(weights) if not monte_carlo else monitor_mc(weights, tick)
        trace.records.append(rec)

    for n in range(1, num_steps + 1):
        tick = time.perf_counter()
        try:
            if monte_carlo:
                samples = sample_mixture(state, sample_count, rng)
                log_k = state.kernel.logpdf_matrix(state.particles.points, samples)
                log_p = np.asarray(target.log_density(samples), dtype=float)
                grad = gradient_monte_carlo_from_logs(
                    log_k, log_p, weights, grad_alpha
                )
            else:
                grad = gradient_exact(problem, weights, grad_alpha)
            new, diag = _step_once(
                algorithm, weights, grad, params, unweighted_denominator
            )
        except GuardViolation as exc:
            err = GuardViolation(
                f"step {n} of phase {phase}: {exc}",
                indices=exc.indices,
                iteration=n,
            )
            trace.status = f"guard_violation: {err}"
            err.partial = trace
            raise err from exc

        moved = float(np.abs(new - weights).sum())
        weights = new
        if monte_carlo:
            state = replace(state, weights=weights)
            if monitor_alpha == 1.0:
                vr = np.nan
            elif reuse_monitor_samples:
                # Reuse this step's sample batch and kernel matrix; only the
                # mixture under the new weights needs recomputing.
                active = weights > 0
                log_q = logsumexp(
                    log_k[active] + np.log(weights[active])[:, None], axis=0
                )
                vr = vr_bound_from_logs(log_p, log_q, monitor_alpha)
            else:
                fresh = sample_mixture(state, sample_count, rng)
                log_kf = state.kernel.logpdf_matrix(state.particles.points, fresh)
                active = weights > 0
                log_q = logsumexp(
                    log_kf[active] + np.log(weights[active])[:, None], axis=0
                )
                log_pf = np.asarray(target.log_density(fresh), dtype=float)
                vr = vr_bound_from_logs(log_pf, log_q, monitor_alpha)
            objective = np.nan
        else:
            vr = np.nan
            objective = exact_objective(weights)
            diag = replace(diag, objective_after=objective)
        elapsed = (time.perf_counter() - tick) * 1000.0
        trace.records.append(
            TraceRecord(
                phase, n, weights.copy(), vr, objective, diag.guard_min, elapsed
            )
        )
        if fixed_point_tol is not None and moved < fixed_point_tol:
            trace.status = f"fixed_point: step {n} moved {moved:.3e}"
            break
    return trace


@dataclass(frozen=True)
class RateConstants:
    """Constants entering the O(1/N) bound of the renyi update.

    Built from a sup-norm bound on the shifted gradient over the whole
    simplex.  All constants are finite and positive whenever the rate
    assumptions hold (``(alpha-1)*shift > 0`` and a small enough step).

    Attributes:
        grad_bound: ``sup |b_j + 1/(alpha-1)|``.
        prefactor: multiplies the whole bound, ``|alpha-1|(B + |shift|) / step``.
        smoothness: smoothness constant of the exponential on the gradient
            domain.
        exp_sup: sup of the exponential on that domain.
        monotone_const: strong-monotonicity constant; positive only while
            ``step * grad_bound < |shift|``.
        kl_init_bound: ``log J``, bounds the KL between optimum and the
            uniform start.
        init_gap_bound: ``sqrt(2 log J) * grad_bound``, bounds the initial
            objective gap.
    """

    grad_bound: float
    prefactor: float
    smoothness: float
    exp_sup: float
    monotone_const: float
    kl_init_bound: float
    init_gap_bound: float

    @classmethod
    def from_grad_bound(cls, grad_bound, params, num_components):
        if not params.renyi_valid:
            raise ValueError(
                f"rate constants need alpha != 1 and (alpha-1)*shift > 0, got {params}"
            )
        if not np.isfinite(grad_bound) or grad_bound <= 0:
            raise ValueError(f"grad_bound must be positive and finite, got {grad_bound}")
        if num_components < 1:
            raise ValueError(f"num_components must be >= 1, got {num_components}")
        alpha, eta, shift = params.alpha, params.step_size, params.shift
        margin = 1.0 - eta * grad_bound / abs(shift)
        if margin <= 0:
            raise ValueError(
                f"step_size {eta} too large for grad_bound {grad_bound} and "
                f"shift {shift}: needs step_size * grad_bound < |shift|"
            )
        # The gradient domain is the interval of half-width
        # c = grad_bound / ((alpha-1) shift), centred at -3c; that centring
        # cancels from the final bound.
        c = grad_bound / ((alpha - 1.0) * shift)
        log_j = float(np.log(num_components))
        return cls(
            grad_bound=float(grad_bound),
            prefactor=float(abs(alpha - 1.0) * (grad_bound + abs(shift)) / eta),
            smoothness=float(eta**2 * np.exp(4.0 * eta * c)),
            exp_sup=float(np.exp(-2.0 * eta * c)),
            monotone_const=float(margin * eta * np.exp(2.0 * eta * c)),
            kl_init_bound=log_j,
            init_gap_bound=float(np.sqrt(2.0 * log_j) * grad_bound),
        )


def rate_bound(constants, num_steps, params, num_components):
    """Upper bound on the objective gap after ``num_steps`` renyi updates.

    Valid from a uniform start over ``num_components`` components; decays
    like 1/N.
    """
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    if not params.renyi_valid:
        raise ValueError(f"rate bound needs (alpha-1)*shift > 0, got {params}")
    correction = (
        constants.smoothness
        * constants.exp_sup
        / (constants.monotone_const * (params.alpha - 1.0) * params.shift)
    )
    return float(
        constants.prefactor
        / num_steps
        * (constants.kl_init_bound + correction * constants.init_gap_bound)
    )
