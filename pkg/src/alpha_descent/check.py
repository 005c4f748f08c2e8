"""Exact-oracle invariant battery behind ``alpha-descent check``.

Each check recomputes a contract from scratch on random finite-support
problems and raises on the first violation.  The battery overlaps the test
suite on purpose: it needs no test runner, so it can gate an installation.
"""

from __future__ import annotations

import math

import numpy as np

from .descent import emd_step, kl_step, power_step, power_transform, renyi_step
from .divergence import (
    DescentParams,
    amari_alpha,
    amari_alpha_deriv,
    divergence_exact,
    renyi_objective_exact,
    vr_bound_exact,
)
from .fixtures import random_problem, random_weights
from .gradient import gradient_exact
from .model import bandwidth_rule, gaussian_kernel_logpdf

ALPHA_GRID = (-0.5, 0.0, 0.5, 0.99, 2.0)


def _check_hand_values():
    assert math.isclose(
        gaussian_kernel_logpdf([0.0], [0.0], 1.0), -0.5 * math.log(2 * math.pi)
    )
    assert math.isclose(
        gaussian_kernel_logpdf([0.0], [2.0], 1.0), -2.0 - 0.5 * math.log(2 * math.pi)
    )
    assert math.isclose(bandwidth_rule(100, 16), 100.0 ** (-1.0 / 20.0))
    assert math.isclose(amari_alpha(4.0, 0.5), 2.0)
    assert math.isclose(amari_alpha(math.e, 1.0), 1.0)
    assert math.isclose(amari_alpha_deriv(4.0, 0.5), 1.0)
    p = DescentParams(alpha=0.5, step_size=0.5)
    assert math.isclose(power_transform(-1.0, p), 1.5)
    p = DescentParams(alpha=0.5, step_size=1.0)
    assert math.isclose(power_transform(1.0, p), 0.25)
    new, _ = power_step([0.5, 0.5], np.array([0.0, -1.0]), p)
    assert np.allclose(new, [4.0 / 13.0, 9.0 / 13.0], rtol=0, atol=1e-15)


def _check_derivative():
    rng = np.random.default_rng(11)
    eps = 1e-5
    for alpha in ALPHA_GRID:
        for u in rng.uniform(0.2, 5.0, 20):
            fd = (amari_alpha(u + eps, alpha) - amari_alpha(u - eps, alpha)) / (2 * eps)
            assert abs(fd - amari_alpha_deriv(u, alpha)) < 1e-6


def _check_power_monotone():
    rng = np.random.default_rng(23)
    for _ in range(25):
        problem = random_problem(rng)
        j = problem.num_components
        for alpha in ALPHA_GRID:
            if alpha == 1.0:
                continue
            params = DescentParams(alpha=alpha, step_size=rng.uniform(0.1, 1.0))
            w = random_weights(rng, j)
            value = divergence_exact(problem, w, alpha)
            for _ in range(20):
                w, _ = power_step(w, gradient_exact(problem, w, alpha), params)
                after = divergence_exact(problem, w, alpha)
                assert after <= value + 1e-10 * (1.0 + abs(value))
                value = after


def _check_renyi_monotone():
    rng = np.random.default_rng(29)
    for _ in range(15):
        problem = random_problem(rng)
        j = problem.num_components
        params = DescentParams(alpha=0.5, step_size=0.2, shift=-5.0)
        w = random_weights(rng, j)
        value = divergence_exact(problem, w, params.alpha)
        for _ in range(20):
            grad = gradient_exact(problem, w, params.alpha)
            w, diag = renyi_step(w, grad, params)
            assert diag.guard_min >= 0
            after = divergence_exact(problem, w, params.alpha)
            assert after <= value + 1e-10 * (1.0 + abs(value))
            value = after


def _check_simplex_and_support():
    rng = np.random.default_rng(31)
    params = DescentParams(alpha=0.5, step_size=0.7)
    for _ in range(50):
        j = int(rng.integers(2, 8))
        w = random_weights(rng, j)
        w[rng.integers(j)] = 0.0
        w = w / w.sum()
        b = rng.normal(0.0, 0.5, j)
        for step in (
            lambda: power_step(w, b, params),
            lambda: emd_step(w, b, params),
            lambda: kl_step(w, b, 0.7),
            lambda: renyi_step(w, b, params),
        ):
            new, _ = step()
            assert abs(new.sum() - 1.0) <= 1e-12
            assert np.all(new[w == 0] == 0)


def _check_scale_invariance():
    rng = np.random.default_rng(37)
    for _ in range(10):
        problem = random_problem(rng)
        doubled = problem.with_target(2.0 * problem.p_values)
        j = problem.num_components
        params = DescentParams(alpha=0.5, step_size=0.5)
        w1 = w2 = random_weights(rng, j)
        for _ in range(20):
            w1, _ = power_step(w1, gradient_exact(problem, w1, 0.5), params)
            w2, _ = power_step(w2, gradient_exact(doubled, w2, 0.5), params)
            assert np.abs(w1 - w2).max() < 1e-10


def _check_bound_identity():
    rng = np.random.default_rng(41)
    for alpha in (0.5, 2.0):
        problem = random_problem(rng)
        w = random_weights(rng, problem.num_components)
        params = DescentParams(alpha=alpha, step_size=0.5)
        lhs = renyi_objective_exact(problem, w, params)
        rhs = -vr_bound_exact(problem, w, alpha) / alpha
        assert abs(lhs - rhs) < 1e-12


def _check_gradient_vs_finite_difference():
    rng = np.random.default_rng(43)
    problem = random_problem(rng, 4, 8)
    w = random_weights(rng, 4)
    eps = 1e-6
    for alpha in ALPHA_GRID:
        grad = gradient_exact(problem, w, alpha).values
        for j in range(4):
            e = np.zeros(4)
            e[j] = eps
            fd = (
                np.sum(
                    problem.nu_weights
                    * problem.p_values
                    * amari_alpha(((w + e) @ problem.kernel_matrix) / problem.p_values, alpha)
                )
                - np.sum(
                    problem.nu_weights
                    * problem.p_values
                    * amari_alpha(((w - e) @ problem.kernel_matrix) / problem.p_values, alpha)
                )
            ) / (2 * eps)
            assert abs(fd - grad[j]) < 1e-5


CHECKS = [
    ("hand-computed values", _check_hand_values),
    ("generator derivative vs finite differences", _check_derivative),
    ("power update monotone on random problems", _check_power_monotone),
    ("renyi update monotone, guard recorded", _check_renyi_monotone),
    ("simplex and support preserved by all updates", _check_simplex_and_support),
    ("update invariant under target rescaling", _check_scale_invariance),
    ("log objective matches the sampled bound identity", _check_bound_identity),
    ("exact gradient vs finite differences", _check_gradient_vs_finite_difference),
]


def run_checks(verbose=True):
    """Run the battery; returns the number of failed checks."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # report and keep going
            failures += 1
            if verbose:
                print(f"FAIL  {name}: {exc}")
        else:
            if verbose:
                print(f"ok    {name}")
    if verbose and failures:
        print(f"{failures} of {len(CHECKS)} checks failed")
    return failures
