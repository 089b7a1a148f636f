"""Per-job jockeying rationale: expected-wait estimation from positional
history, the Gaussian shorter-queue routing probability, and the migrate
decision that compares the predicted wait at the landing pose against the
wait at the current one."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from . import _numerics
from .core import QUEUE_I, PositionHistory, QueueState, SimConfig


@dataclass(frozen=True)
class QueueLengthModel:
    """Gaussian fits to the observed length samples of the two queues."""

    mean_i: float
    mean_j: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.mean_i < 0 or self.mean_j < 0:
            raise ValueError("mean queue lengths must be nonnegative")

    def swapped(self) -> "QueueLengthModel":
        return QueueLengthModel(self.mean_j, self.mean_i, self.sigma)


class RoutingProbability(NamedTuple):
    """Routing probability plus a flag for degenerate conditioning windows."""

    value: float
    degenerate: bool


class DecisionCase(enum.Enum):
    """Which combination of expected joiners and departures drove a decision.

    The behavioral model enumerates three situations (joiners with
    departures, departures alone, neither); JOINERS_ONLY covers the
    arrival-triggered evaluations that fall outside that enumeration.
    """

    JOINERS_AND_DEPARTURES = 0
    DEPARTURES_ONLY = 1
    NEITHER = 2
    JOINERS_ONLY = 3


@dataclass(frozen=True)
class JockeyDecision:
    """Outcome of one migrate-or-stay evaluation."""

    migrate: bool
    predicted_pose: int
    t_w_current: float
    t_w_target: float
    beta: float
    case: DecisionCase


def expected_wait(
    queue: QueueState,
    pose: int,
    history: PositionHistory,
    arrival_rate: float,
    min_pose_samples: int = 1,
) -> float:
    """Expected time from occupying ``pose`` in ``queue`` until completion.

    Uses the arithmetic mean of the recorded durations at the pose when at
    least ``min_pose_samples`` exist; otherwise falls back to Little's law,
    queue length over arrival rate.
    """
    if pose < 0:
        raise ValueError(f"pose must be nonnegative, got {pose}")
    if not arrival_rate > 0:
        raise ValueError(f"arrival_rate must be positive, got {arrival_rate}")
    if history.count(pose) >= min_pose_samples:
        return history.mean(pose)
    return queue.length / arrival_rate


def routing_probability(
    tau_i: int,
    model: QueueLengthModel,
    quadrature_tolerance: float = 1e-8,
) -> RoutingProbability:
    """P(X < Y | 1 <= Y <= tau_i) for the fitted queue-length Gaussians.

    X follows the queue-i fit and Y the queue-j fit.  The numerator is the
    double integral of the product density over {0 < x < y, 1 < y < tau_i},
    evaluated by adaptive Gauss-Legendre quadrature to the given tolerance;
    the result is clamped to [0, 1].  When the conditioning window carries
    essentially no Y mass the unconditional P(X < Y) is returned with the
    degenerate flag set.
    """
    if tau_i < 1:
        raise ValueError(f"tau_i must be >= 1, got {tau_i}")
    p, degenerate = _numerics.routing_probability_value(
        model.mean_i, model.mean_j, model.sigma, float(tau_i), quadrature_tolerance
    )
    return RoutingProbability(p, degenerate)


def expected_joiners(arrival_rate: float, p: float) -> float:
    """Expected number of new arrivals routed to the preferred queue."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not arrival_rate > 0:
        raise ValueError(f"arrival_rate must be positive, got {arrival_rate}")
    return arrival_rate * p


def classify_case(rounded_beta: int, recent_departures: int) -> DecisionCase:
    if rounded_beta >= 1 and recent_departures >= 1:
        return DecisionCase.JOINERS_AND_DEPARTURES
    if rounded_beta == 0 and recent_departures >= 1:
        return DecisionCase.DEPARTURES_ONLY
    if rounded_beta == 0:
        return DecisionCase.NEITHER
    return DecisionCase.JOINERS_ONLY


def should_jockey(
    job,
    queues: Sequence[QueueState],
    histories: Sequence[PositionHistory],
    model: QueueLengthModel,
    config: SimConfig,
    recent_departures: int = 1,
) -> JockeyDecision:
    """Evaluate whether a waiting job should migrate to the other queue.

    The landing pose is predicted as target length + round(beta) + 1, where
    beta is the expected number of new arrivals routed to the target before
    the job lands.  The job migrates exactly when the expected wait at the
    predicted pose is strictly below the expected wait at its current pose.
    Pure: identical arguments always produce the identical decision.
    """
    if job.position < 1:
        raise ValueError("only waiting jobs (position >= 1) are candidates")
    source = queues[job.current_queue]
    target = queues[1 - job.current_queue]
    oriented = model if target.id == QUEUE_I else model.swapped()
    rp = routing_probability(target.length + 1, oriented, config.quadrature_tolerance)
    beta = expected_joiners(config.arrival_rate, rp.value)
    rounded = int(_numerics.round_half_even(beta))
    tau = target.length + rounded + 1
    t_current = expected_wait(
        source, job.position, histories[source.id], config.arrival_rate,
        config.min_pose_samples,
    )
    t_target = expected_wait(
        target, tau, histories[target.id], config.arrival_rate,
        config.min_pose_samples,
    )
    return JockeyDecision(
        migrate=t_target < t_current,
        predicted_pose=tau,
        t_w_current=t_current,
        t_w_target=t_target,
        beta=beta,
        case=classify_case(rounded, recent_departures),
    )
