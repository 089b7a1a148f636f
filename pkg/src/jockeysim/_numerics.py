"""Jit-compiled numerical primitives shared by the decision layer and the
fast simulation kernel: normal pdf/cdf and the adaptive quadrature behind
the shorter-queue routing probability."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Gauss-Legendre nodes/weights for the two embedded rules of the adaptive
# integrator; generated (not typed in) to avoid transcription slips.
_GL7_X, _GL7_W = np.polynomial.legendre.leggauss(7)
_GL15_X, _GL15_W = np.polynomial.legendre.leggauss(15)

#: denominators below this are treated as degenerate conditioning windows
DEGENERATE_DENOMINATOR = 1e-12


@njit(cache=True)
def draw_exponential(gen, rate: float) -> float:
    """One exponential(rate) variate; both engines draw through this helper
    so their streams advance identically."""
    return gen.standard_exponential() / rate


@njit(cache=True)
def draw_uniform(gen) -> float:
    return gen.random()


@njit(cache=True)
def norm_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


@njit(cache=True)
def norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


@njit(cache=True)
def round_half_even(x: float) -> float:
    """Round to nearest integer, ties to even (same result on every path)."""
    f = math.floor(x)
    r = x - f
    if r > 0.5:
        return f + 1.0
    if r < 0.5:
        return f
    if f % 2.0 == 0.0:
        return f
    return f + 1.0


@njit(cache=True)
def _panel(a, b, x_mean, y_mean, sigma, base_cdf, nodes, weights):
    """One Gauss-Legendre panel of f_Y(y) * (F_X(y) - F_X(0)) over [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    acc = 0.0
    for i in range(nodes.shape[0]):
        y = mid + half * nodes[i]
        f_y = norm_pdf((y - y_mean) / sigma) / sigma
        acc += weights[i] * f_y * (norm_cdf((y - x_mean) / sigma) - base_cdf)
    return acc * half


@njit(cache=True)
def _routing_numerator(x_mean, y_mean, sigma, tau, tol):
    """Adaptive integral of f_Y(y) * P(0 < X < y) over y in [1, tau].

    Panels are bisected until the GL7/GL15 discrepancy meets the tolerance
    share of each panel.  The interval is clipped to the region carrying
    f_Y mass (beyond 9.5 sigma the integrand is ~1e-21).
    """
    base_cdf = norm_cdf((0.0 - x_mean) / sigma)
    a = max(1.0, y_mean - 9.5 * sigma)
    b = min(tau, y_mean + 9.5 * sigma)
    if not b > a:
        return 0.0
    width = b - a
    stack_a = np.empty(2048)
    stack_b = np.empty(2048)
    stack_a[0] = a
    stack_b[0] = b
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        pa = stack_a[top]
        pb = stack_b[top]
        c7 = _panel(pa, pb, x_mean, y_mean, sigma, base_cdf, _GL7_X, _GL7_W)
        c15 = _panel(pa, pb, x_mean, y_mean, sigma, base_cdf, _GL15_X, _GL15_W)
        if (
            abs(c15 - c7) <= tol * (pb - pa) / width
            or (pb - pa) <= 1e-12 * width
            or top >= 2046
        ):
            total += c15
        else:
            mid = 0.5 * (pa + pb)
            stack_a[top] = pa
            stack_b[top] = mid
            top += 1
            stack_a[top] = mid
            stack_b[top] = pb
            top += 1
    return total


@njit(cache=True)
def routing_probability_value(x_mean, y_mean, sigma, tau, tol):
    """Conditional P(X < Y | 1 <= Y <= tau) for independent Gaussians.

    X ~ N(x_mean, sigma^2), Y ~ N(y_mean, sigma^2); X is truncated below 0
    in the numerator exactly as in the double integral it replaces.  Returns
    (probability, degenerate): a denominator below DEGENERATE_DENOMINATOR
    (tau deep in the left tail of Y) yields the unconditional P(X < Y) with
    the degenerate flag set.
    """
    den = norm_cdf((tau - y_mean) / sigma) - norm_cdf((1.0 - y_mean) / sigma)
    if den < DEGENERATE_DENOMINATOR:
        return norm_cdf((y_mean - x_mean) / (sigma * _SQRT2)), True
    p = _routing_numerator(x_mean, y_mean, sigma, tau, tol) / den
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return p, False
