"""Deterministic quadrature helpers shared by the model, prior and asymptotics code.

All integrals in this package are over sub-Gaussian-tailed integrands, so
adaptive Gauss-Kronrod rules on a finite window (mean +/- 12 standard
deviations per mixture component) are accurate to well below the contract
tolerances.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import integrate

DEFAULT_ABS_TOL = 1e-10

# padding, in component standard deviations, around every mode of an integrand
SUPPORT_HALF_WIDTH = 12.0


class DivBayesError(Exception):
    """Base error for this package."""


class QuadratureError(DivBayesError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def integrate_scalar(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    points: Sequence[float] | None = None,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> float:
    """Integrate a scalar function on [lo, hi], subdividing at ``points``.

    Raises QuadratureError when the error estimate exceeds the tolerance.
    """
    inner = [p for p in (points or []) if lo < p < hi]
    value, err = integrate.quad(
        fn, lo, hi, points=inner or None, epsabs=abs_tol * 0.1, epsrel=1e-11, limit=300
    )
    if not np.isfinite(value) or err > max(abs_tol, 1e-11 * abs(value)):
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} exceeds tolerance {abs_tol:.1e}"
        )
    return value


def integrate_vector(
    fn: Callable[[float], np.ndarray],
    lo: float,
    hi: float,
    *,
    points: Sequence[float] | None = None,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> np.ndarray:
    """Integrate a vector-valued function componentwise in one adaptive pass."""
    inner = sorted(p for p in (points or []) if lo < p < hi)
    edges = [lo, *inner, hi]
    total = None
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = integrate.quad_vec(fn, a, b, epsabs=abs_tol * 1e-2, epsrel=1e-11)
        total = value if total is None else total + value
        if not np.all(np.isfinite(value)) or err > abs_tol:
            raise QuadratureError(
                f"vector quadrature error estimate {err:.3e} exceeds tolerance {abs_tol:.1e}"
            )
    return total


def gauss_legendre_nodes(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w
