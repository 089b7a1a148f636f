"""Closed-form counterpart of the simulation: the distributions governing
joiner counts and waiting times, the exponential race probability, and the
binomial model of how often a job switches queues."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RatePair:
    """Service rates of the current queue (mu_i) and the preferred queue (mu_j)."""

    mu_i: float
    mu_j: float

    def __post_init__(self) -> None:
        if not (self.mu_i > 0 and self.mu_j > 0):
            raise ValueError(f"rates must be positive, got ({self.mu_i}, {self.mu_j})")


def poisson_pmf(beta: int, lam: float) -> float:
    """P(B = beta) for B ~ Poisson(lam), evaluated in the log domain."""
    if beta < 0 or beta != int(beta):
        raise ValueError(f"beta must be a nonnegative integer, got {beta}")
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    return math.exp(beta * math.log(lam) - lam - math.lgamma(beta + 1))


def exponential_pdf(t: float, mu: float) -> float:
    """Density mu * exp(-mu * t) of an exponential waiting time at t >= 0."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return mu * math.exp(-mu * t)


def conditional_expected_wait(times_at_pose: list[float], mu: float) -> float:
    """Mean of t * (1 - exp(-mu * t)) over the observed durations at a pose.

    Strictly below the plain arithmetic mean for every nonempty input, since
    the exponential damping factor is < 1.

    Raises:
        ValueError: on an empty list, which signals that the pose has no
            recorded history and the caller must fall back.
    """
    if len(times_at_pose) == 0:
        raise ValueError("no observations at this pose")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    total = 0.0
    for t in times_at_pose:
        total += t * (1.0 - math.exp(-mu * t))
    return total / len(times_at_pose)


def p_race(rates: RatePair) -> float:
    """P(H < G) for H ~ Exp(mu_j), G ~ Exp(mu_i): mu_j / (mu_j + mu_i)."""
    return rates.mu_j / (rates.mu_j + rates.mu_i)


def binomial_pmf(xi: int, d: int, p: float) -> float:
    """P(exactly xi successes in d trials at success probability p)."""
    if xi < 0 or xi != int(xi) or d < 0 or d != int(d):
        raise ValueError(f"xi and d must be nonnegative integers, got ({xi}, {d})")
    if xi > d:
        raise ValueError(f"xi must not exceed d, got xi={xi}, d={d}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return 1.0 if xi == 0 else 0.0
    if p == 1.0:
        return 1.0 if xi == d else 0.0
    if d <= 20:
        return math.comb(d, xi) * p**xi * (1.0 - p) ** (d - xi)
    # log domain for large d to avoid factorial overflow
    log_comb = math.lgamma(d + 1) - math.lgamma(xi + 1) - math.lgamma(d - xi + 1)
    return math.exp(log_comb + xi * math.log(p) + (d - xi) * math.log(1.0 - p))


def expected_jockeys(d: int, rates: RatePair) -> float:
    """Expected number of queue switches over d trials: d * mu_j / (mu_j + mu_i)."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return d * p_race(rates)
