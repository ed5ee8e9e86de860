"""Expectation machinery under (possibly contaminated) data densities:
the sandwich matrices I and J, the third-moment tensor of the loss kernel,
tail-overlap functionals, contamination residuals, and the asymptotic
relative efficiency curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from ._quadrature import (
    DivBayesError,
    SUPPORT_HALF_WIDTH,
    integrate_scalar,
    integrate_vector,
)
from .losses import DivergenceSpec, q_derivs, q_value
from .model import Theta, density, log_derivs

__all__ = [
    "ContaminatedModel",
    "ModelDensity",
    "SandwichSet",
    "sandwich",
    "nu_value",
    "posterior_mean_shift_limit",
    "robustness_residual",
    "holder_bound_check",
    "are_h",
    "population_minimizer",
    "NotPositiveDefiniteError",
]

_UNIQUE2 = [(0, 0), (0, 1), (1, 1)]
_UNIQUE3 = [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)]


class NotPositiveDefiniteError(DivBayesError):
    """The curvature matrix J is not positive definite at this point."""


@dataclass(frozen=True)
class ContaminatedModel:
    """Mixture data density (1-eps) N(0,1) + eps N(nu,1)."""

    eps: float
    nu: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"contamination ratio must be in [0, 1), got {self.eps}")
        if not math.isfinite(self.nu):
            raise ValueError("contamination location must be finite")
        total = integrate_scalar(self.pdf, *self.quad_interval()[:2],
                                 points=self.quad_interval()[2], abs_tol=1e-9)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"mixture density integrates to {total!r}, not 1")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        clean = np.exp(-0.5 * x * x)
        shifted = np.exp(-0.5 * (x - self.nu) ** 2)
        out = ((1.0 - self.eps) * clean + self.eps * shifted) / math.sqrt(2.0 * math.pi)
        return out if out.ndim else float(out)

    def quad_interval(self) -> tuple[float, float, list[float]]:
        lo = min(0.0, self.nu) - SUPPORT_HALF_WIDTH
        hi = max(0.0, self.nu) + SUPPORT_HALF_WIDTH
        return lo, hi, [0.0, self.nu]


@dataclass(frozen=True)
class ModelDensity:
    """The parametric model itself used as a data density."""

    theta: Theta

    def pdf(self, x):
        return density(x, self.theta)

    def quad_interval(self) -> tuple[float, float, list[float]]:
        half = SUPPORT_HALF_WIDTH * self.theta.sigma
        return self.theta.mu - half, self.theta.mu + half, [self.theta.mu]


Densityish = ContaminatedModel | ModelDensity | Theta


def _as_density(g: Densityish):
    if isinstance(g, Theta):
        return ModelDensity(g)
    if hasattr(g, "pdf") and hasattr(g, "quad_interval"):
        return g
    raise TypeError(f"cannot interpret {g!r} as a data density")


@dataclass(frozen=True)
class SandwichSet:
    """I = E[grad q grad q^T], J = -E[hess q], g3 = E[third q] under one g."""

    I: np.ndarray
    J: np.ndarray
    g3: np.ndarray

    def j_inverse(self) -> np.ndarray:
        try:
            np.linalg.cholesky(self.J)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"J is not positive definite: {self.J}") from exc
        return np.linalg.inv(self.J)


def sandwich(div: DivergenceSpec, theta: Theta, g: Densityish, *, abs_tol: float = 1e-10) -> SandwichSet:
    """Quadrature expectations of the kernel derivatives against g.

    The integration window is the union of the component windows of g and
    the model window of theta, subdivided at every mode.
    """
    dens = _as_density(g)
    g_lo, g_hi, g_points = dens.quad_interval()
    half = SUPPORT_HALF_WIDTH * theta.sigma
    lo, hi = min(g_lo, theta.mu - half), max(g_hi, theta.mu + half)
    points = sorted(set(list(g_points) + [theta.mu]))

    q_derivs(div, theta.mu, theta)  # warm the tilted-moment cache outside the adaptive loop

    def integrand(x: float) -> np.ndarray:
        d = q_derivs(div, x, theta)
        w = dens.pdf(x)
        comps = [d.grad[i] * d.grad[j] for i, j in _UNIQUE2]
        comps += [-d.hess[i, j] for i, j in _UNIQUE2]
        comps += [d.third[i, j, k] for i, j, k in _UNIQUE3]
        return w * np.array(comps)

    raw = integrate_vector(integrand, lo, hi, points=points, abs_tol=abs_tol)
    I = np.array([[raw[0], raw[1]], [raw[1], raw[2]]])
    J = np.array([[raw[3], raw[4]], [raw[4], raw[5]]])
    g3 = np.empty((2, 2, 2))
    for value, (i, j, k) in zip(raw[6:], _UNIQUE3):
        for p in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
            g3[p] = value
    return SandwichSet(I=I, J=J, g3=g3)


def nu_value(theta: Theta, delta: Densityish, gamma0: float) -> float:
    """Tail-overlap functional (int delta(x) f_theta(x)^gamma0 dx)^(1/gamma0).

    Near zero when the contamination density delta sits on the tail of the
    model density.
    """
    if gamma0 <= 0.0:
        raise ValueError(f"gamma0 must be positive, got {gamma0}")
    dens = _as_density(delta)
    lo, hi, points = dens.quad_interval()

    def fn(x: float) -> float:
        return dens.pdf(x) * float(density(x, theta)) ** gamma0

    value = integrate_scalar(fn, lo, hi, points=points, abs_tol=1e-12)
    return value ** (1.0 / gamma0)


def _log_prior_gradient(prior_or_fn, div: DivergenceSpec, theta: Theta) -> np.ndarray:
    """Gradient of a log prior given either a PriorSpec or a callable of Theta."""
    if callable(prior_or_fn):
        return _numerical_log_prior_gradient(prior_or_fn, theta)
    from .priors import log_prior_gradient  # deferred: priors builds on this module

    return log_prior_gradient(prior_or_fn, div, theta)


def _numerical_log_prior_gradient(fn: Callable[[Theta], float], theta: Theta) -> np.ndarray:
    out = np.zeros(2)
    base = theta.as_array()
    for i in range(2):
        h = 1e-6 * max(1.0, abs(base[i]))
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (fn(Theta(*up)) - fn(Theta(*dn))) / (2.0 * h)
    return out


def posterior_mean_shift_limit(
    div: DivergenceSpec,
    prior,
    theta_g: Theta,
    g: Densityish,
) -> np.ndarray:
    """Limit of n * (posterior mean - minimum divergence estimate).

    ``prior`` is a PriorSpec or any callable Theta -> log prior.  ``theta_g``
    must be the population risk minimizer under g (see population_minimizer).
    """
    s = sandwich(div, theta_g, g)
    jinv = s.j_inverse()
    glp = _log_prior_gradient(prior, div, theta_g)
    out = np.zeros(2)
    for ell in range(2):
        out[ell] = float(glp @ jinv[:, ell])
        acc = 0.0
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    acc += s.g3[i, j, k] * (
                        jinv[i, j] * jinv[k, ell]
                        + jinv[i, k] * jinv[j, ell]
                        + jinv[i, ell] * jinv[j, k]
                    )
        out[ell] += acc / 6.0
    return out


def robustness_residual(
    div: DivergenceSpec, theta: Theta, eps: float, nu: float
) -> tuple[np.ndarray, np.ndarray]:
    """J and third-moment residuals of the mixture versus (1-eps) x clean model.

    Only defined for the gamma kernel, whose tilted normalization keeps both
    residuals of order eps * nu_overlap^gamma.
    """
    if div.kind != "gamma":
        raise ValueError("contamination residuals are specific to the gamma kernel")
    mixture = ContaminatedModel(eps=eps, nu=nu)
    dirty = sandwich(div, theta, mixture)
    clean = sandwich(div, theta, theta)
    j_resid = dirty.J - (1.0 - eps) * clean.J
    g3_resid = dirty.g3 - (1.0 - eps) * clean.g3
    return j_resid, g3_resid


def holder_bound_check(
    theta: Theta, delta: Densityish, gamma: float
) -> list[tuple[str, float, float]]:
    """Evaluate both sides of the six tail-overlap inequalities by quadrature.

    Each entry is (label, lhs, rhs) with the guarantee lhs <= rhs for exact
    integrals; callers assert lhs <= rhs * (1 + 1e-8).
    """
    dens = _as_density(delta)
    lo, hi, points = dens.quad_interval()
    half = SUPPORT_HALF_WIDTH * theta.sigma
    lo, hi = min(lo, theta.mu - half), max(hi, theta.mu + half)
    points = sorted(set(list(points) + [theta.mu]))
    nu_pow = nu_value(theta, delta, 1.0 + gamma) ** gamma

    names = "ms"

    def factors(x: float) -> dict[str, float]:
        d = log_derivs(x, theta)
        out: dict[str, float] = {}
        for i in range(2):
            out[names[i]] = float(d.grad[i])
        for i, j in _UNIQUE2:
            out[names[i] + names[j]] = float(d.hess[i, j])
        for i, j, k in _UNIQUE3:
            out[names[i] + names[j] + names[k]] = float(d.third[i, j, k])
        return out

    families: list[tuple[str, Callable[[dict[str, float]], float]]] = []
    for i in range(2):
        families.append((f"l_{names[i]}", lambda f, i=i: f[names[i]]))
    for i, j in _UNIQUE2:
        families.append(
            (f"l_{names[i]} l_{names[j]}", lambda f, i=i, j=j: f[names[i]] * f[names[j]])
        )
    for i, j in _UNIQUE2:
        families.append((f"l_{names[i]}{names[j]}", lambda f, i=i, j=j: f[names[i] + names[j]]))
    for i, j, k in _UNIQUE3:
        families.append(
            (
                f"l_{names[i]}{names[j]}{names[k]}",
                lambda f, i=i, j=j, k=k: f[names[i] + names[j] + names[k]],
            )
        )
    for i, j in _UNIQUE2:
        for k in range(2):
            families.append(
                (
                    f"l_{names[i]}{names[j]} l_{names[k]}",
                    lambda f, i=i, j=j, k=k: f[names[i] + names[j]] * f[names[k]],
                )
            )
    for i, j, k in _UNIQUE3:
        families.append(
            (
                f"l_{names[i]} l_{names[j]} l_{names[k]}",
                lambda f, i=i, j=j, k=k: f[names[i]] * f[names[j]] * f[names[k]],
            )
        )

    results = []
    for label, term in families:
        lhs = integrate_scalar(
            lambda x: dens.pdf(x) * float(density(x, theta)) ** gamma * abs(term(factors(x))),
            lo, hi, points=points, abs_tol=1e-11,
        )
        inner = integrate_scalar(
            lambda x: dens.pdf(x) * abs(term(factors(x))) ** (1.0 + gamma),
            lo, hi, points=points, abs_tol=1e-11,
        )
        rhs = nu_pow * inner ** (1.0 / (1.0 + gamma))
        results.append((label, lhs, rhs))
    return results


def are_h(gamma: float) -> float:
    """Asymptotic efficiency of the robust posterior mean relative to the
    standard one, for joint normal mean/scale estimation."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    denom = (1.0 + gamma) ** 6 * (1.0 + 2.0 * gamma) * (2.0 + 4.0 * gamma + 3.0 * gamma**2)
    return math.sqrt(2.0 / denom)


def population_minimizer(
    div: DivergenceSpec, g: Densityish, init: Theta | None = None
) -> Theta:
    """Minimize the population risk -E_g[q(X; theta)] by quadrature + simplex."""
    dens = _as_density(g)
    lo, hi, points = dens.quad_interval()
    if init is None:
        init = Theta(0.0, 1.0)

    def risk(v: np.ndarray) -> float:
        theta = Theta(v[0], math.exp(v[1]))
        return -integrate_scalar(
            lambda x: dens.pdf(x) * float(q_value(div, x, theta)),
            min(lo, theta.mu - SUPPORT_HALF_WIDTH * theta.sigma),
            max(hi, theta.mu + SUPPORT_HALF_WIDTH * theta.sigma),
            points=points,
            abs_tol=1e-11,
        )

    res = optimize.minimize(
        risk,
        np.array([init.mu, math.log(init.sigma)]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
    )
    if not res.success:
        raise DivBayesError(f"population risk minimization failed: {res.message}")
    return Theta(res.x[0], math.exp(res.x[1]))
