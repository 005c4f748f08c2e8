"""Targets, Gaussian smoothing kernels and finite-support test problems.

All density evaluations live in the log domain.  At dimension 16 a Gaussian
kernel value at a typical inter-particle distance underflows float64 in the
linear domain, so values only leave log space inside a log-sum-exp or when
they are provably O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

__all__ = [
    "LOG_2PI",
    "FiniteSupportProblem",
    "GaussianKernel",
    "GaussianMixtureTarget",
    "ParticleSet",
    "Target",
    "as_simplex",
    "bandwidth_rule",
    "gaussian_kernel_logpdf",
    "mixture_logpdf",
]

LOG_2PI = float(np.log(2.0 * np.pi))


def as_simplex(weights, *, tol=1e-12, name="weights"):
    """Validate and return ``weights`` as a float array on the simplex.

    Entries must be finite and nonnegative and sum to one within ``tol``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d array, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be finite")
    if np.any(w < 0):
        raise ValueError(f"{name} must be nonnegative, got min {w.min()}")
    total = float(w.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 within {tol}, got {total!r}")
    return w


def gaussian_kernel_logpdf(theta, y, bandwidth):
    """Log density at ``y`` of an isotropic Gaussian with mean ``theta``.

    Args:
        theta: location, shape ``(d,)``.
        y: evaluation point, shape ``(d,)``.
        bandwidth: positive standard deviation shared by all coordinates.

    Returns:
        float, ``-||y - theta||^2 / (2 h^2) - (d/2) log(2 pi h^2)``.
    """
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if theta.shape != y.shape:
        raise ValueError(f"dimension mismatch: theta {theta.shape} vs y {y.shape}")
    d = theta.shape[-1]
    sq = float(np.sum((y - theta) ** 2))
    return -sq / (2.0 * bandwidth**2) - 0.5 * d * (LOG_2PI + 2.0 * np.log(bandwidth))


def bandwidth_rule(num_components, dim, coeff=1.0):
    """Bandwidth ``coeff * J^(-1/(4+d))`` for ``J`` particles in dimension ``d``."""
    if num_components < 1:
        raise ValueError(f"num_components must be >= 1, got {num_components}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if coeff <= 0:
        raise ValueError(f"coeff must be positive, got {coeff}")
    return float(coeff * float(num_components) ** (-1.0 / (4.0 + dim)))


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic Gaussian Markov kernel on R^d.

    Attributes:
        bandwidth: standard deviation h of every coordinate.
        dim: dimension d of the space.
    """

    bandwidth: float
    dim: int

    def __post_init__(self):
        if self.bandwidth <= 0 or not np.isfinite(self.bandwidth):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        if int(self.dim) < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def logpdf(self, theta, y):
        return gaussian_kernel_logpdf(theta, y, self.bandwidth)

    def logpdf_matrix(self, points, ys):
        """Matrix of ``log k(points[j], ys[m])`` with shape ``(J, M)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if points.shape[1] != self.dim or ys.shape[1] != self.dim:
            raise ValueError(
                f"expected points of dimension {self.dim}, "
                f"got {points.shape[1]} and {ys.shape[1]}"
            )
        sq = cdist(points, ys, "sqeuclidean")
        h = self.bandwidth
        return -sq / (2.0 * h**2) - 0.5 * self.dim * (LOG_2PI + 2.0 * np.log(h))

    def sample(self, theta, rng, size):
        """Draw ``size`` points from ``k(theta, .)``."""
        theta = np.asarray(theta, dtype=float)
        return theta + self.bandwidth * rng.standard_normal((size, self.dim))


@dataclass(frozen=True)
class ParticleSet:
    """Locations of the mixture components plus an exploration counter.

    Attributes:
        points: array of shape ``(J, d)``.
        generation: number of exploration moves applied so far.
    """

    points: np.ndarray
    generation: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("particle set must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("particle locations must be finite")
        if self.generation < 0:
            raise ValueError(f"generation must be >= 0, got {self.generation}")
        object.__setattr__(self, "points", pts)

    @property
    def num_components(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


class Target:
    """Possibly unnormalised target density, evaluated in log space.

    Args:
        log_density: callable mapping a point ``(d,)`` or a batch ``(M, d)``
            to the log density (scalar or ``(M,)``).  Must be finite
            everywhere.
        normalisation_hint: the integral of ``exp(log_density)`` when known,
            e.g. for synthetic targets built as ``c`` times a probability
            density.  Optional; must be positive when given.
    """

    def __init__(self, log_density, normalisation_hint=None):
        if normalisation_hint is not None:
            if not np.isfinite(normalisation_hint) or normalisation_hint <= 0:
                raise ValueError(
                    f"normalisation_hint must be positive, got {normalisation_hint}"
                )
        self._log_density = log_density
        self.normalisation_hint = normalisation_hint

    def log_density(self, y):
        out = self._log_density(np.asarray(y, dtype=float))
        return np.asarray(out, dtype=float) if np.ndim(out) else float(out)


class GaussianMixtureTarget(Target):
    """Target ``scale * sum_i weights_i N(y; means_i, I_d)``.

    The component covariance is the identity.  ``scale`` deliberately leaves
    the target unnormalised so that invariance of the optimisers under
    rescaling can be exercised; the true normaliser is then ``scale`` itself.
    """

    def __init__(self, means, weights=None, scale=1.0):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        n = means.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = as_simplex(weights, name="mixture weights")
        if weights.size != n:
            raise ValueError(f"{n} means but {weights.size} weights")
        if scale <= 0 or not np.isfinite(scale):
            raise ValueError(f"scale must be positive, got {scale}")
        self.means = means
        self.weights = weights
        self.scale = float(scale)
        super().__init__(self._eval, normalisation_hint=float(scale))

    def _eval(self, y):
        ys = np.atleast_2d(y)
        if ys.shape[1] != self.means.shape[1]:
            raise ValueError(
                f"dimension mismatch: target is {self.means.shape[1]}-dimensional, "
                f"got points of dimension {ys.shape[1]}"
            )
        d = self.means.shape[1]
        sq = cdist(ys, self.means, "sqeuclidean")
        comp = -0.5 * sq - 0.5 * d * LOG_2PI
        active = self.weights > 0
        out = logsumexp(comp[:, active] + np.log(self.weights[active]), axis=1)
        out = out + np.log(self.scale)
        return out[0] if np.ndim(y) == 1 else out


def mixture_logpdf(weights, points, kernel, y):
    """Log density of the smoothed mixture ``sum_j weights_j k(points_j, .)``.

    Components with exactly zero weight are skipped, so their kernel values
    never enter the log-sum-exp.  ``y`` may be a single point ``(d,)`` or a
    batch ``(M, d)``.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("mixture weights must be finite and nonnegative")
    active = weights > 0
    if not np.any(active):
        raise ValueError("mixture weights are all zero")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != weights.size:
        raise ValueError(f"{weights.size} weights but {points.shape[0]} points")
    single = np.ndim(y) == 1
    logk = kernel.logpdf_matrix(points[active], y)
    out = logsumexp(logk + np.log(weights[active])[:, None], axis=0)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class FiniteSupportProblem:
    """Discrete analogue of the smoothed-mixture fitting problem.

    Used whenever an exact objective or gradient is wanted: all integrals
    reduce to finite sums.  ``kernel_matrix[j, s]`` holds the kernel value of
    component ``j`` at atom ``s``; the atoms carry base weights
    ``nu_weights`` and target values ``p_values``.  Every kernel row must
    integrate to one against the base weights, which is what makes each row a
    probability density on the support.

    Attributes:
        kernel_matrix: strictly positive array ``(J, S)``.
        nu_weights: strictly positive array ``(S,)``.
        p_values: strictly positive array ``(S,)``.
        support: optional atom locations, shape ``(S, ...)``.
    """

    kernel_matrix: np.ndarray
    nu_weights: np.ndarray
    p_values: np.ndarray
    support: np.ndarray | None = None

    _ROW_TOL = 1e-12

    def __post_init__(self):
        kernel = np.asarray(self.kernel_matrix, dtype=float)
        nu = np.asarray(self.nu_weights, dtype=float)
        p = np.asarray(self.p_values, dtype=float)
        if kernel.ndim != 2:
            raise ValueError(f"kernel_matrix must be 2-d, got shape {kernel.shape}")
        n_comp, n_atoms = kernel.shape
        if nu.shape != (n_atoms,) or p.shape != (n_atoms,):
            raise ValueError(
                f"nu_weights {nu.shape} and p_values {p.shape} must both have "
                f"shape ({n_atoms},)"
            )
        for name, arr in (("kernel_matrix", kernel), ("nu_weights", nu), ("p_values", p)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} must be strictly positive and finite")
        residual = np.abs(kernel @ nu - 1.0)
        worst = int(np.argmax(residual))
        if residual[worst] > self._ROW_TOL:
            raise ValueError(
                f"kernel row {worst} does not integrate to 1 against nu_weights "
                f"(residual {residual[worst]:.3e})"
            )
        support = self.support
        if support is not None:
            support = np.asarray(support, dtype=float)
            if support.shape[0] != n_atoms:
                raise ValueError(
                    f"support has {support.shape[0]} points for {n_atoms} atoms"
                )
        object.__setattr__(self, "kernel_matrix", kernel)
        object.__setattr__(self, "nu_weights", nu)
        object.__setattr__(self, "p_values", p)
        object.__setattr__(self, "support", support)

    @property
    def num_components(self):
        return self.kernel_matrix.shape[0]

    @property
    def support_size(self):
        return self.kernel_matrix.shape[1]

    def log_mixture(self, weights):
        """Log of the mixture values at every atom, shape ``(S,)``."""
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("mixture weights must be finite and nonnegative")
        if not np.any(weights > 0):
            raise ValueError("mixture weights are all zero")
        # Entries are O(1) by row normalisation, so the linear sum is safe.
        return np.log(weights @ self.kernel_matrix)

    def atom_probs(self, weights):
        """Sampling probabilities ``nu_s * mix_s`` of the atoms (sum to 1)."""
        probs = self.nu_weights * np.exp(self.log_mixture(weights))
        return probs / probs.sum()

    def with_target(self, p_values):
        """Copy of the problem with a different target vector."""
        return replace(self, p_values=np.asarray(p_values, dtype=float))
