"""Domain types, seeded random streams, and run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Queue identifiers used throughout: index 0 is queue "i", index 1 is queue "j".
QUEUE_I = 0
QUEUE_J = 1
QUEUE_NAMES = ("i", "j")


def service_rates(arrival_rate: float, delta_lambda: float) -> tuple[float, float]:
    """Split an arrival rate into two heterogeneous service rates.

    mu_i = (arrival_rate + delta_lambda) / 2 and mu_j = (arrival_rate -
    delta_lambda) / 2, so that mu_i + mu_j == arrival_rate exactly and
    mu_i > mu_j > 0.

    Raises:
        ValueError: if delta_lambda lies outside (0, arrival_rate), which
            would make one of the rates zero or negative.
    """
    if not arrival_rate > 0:
        raise ValueError(f"arrival_rate must be positive, got {arrival_rate}")
    if not 0 < delta_lambda < arrival_rate:
        raise ValueError(
            f"delta_lambda must lie strictly inside (0, {arrival_rate}), "
            f"got {delta_lambda}"
        )
    mu_i = (arrival_rate + delta_lambda) / 2.0
    mu_j = (arrival_rate - delta_lambda) / 2.0
    return mu_i, mu_j


@dataclass
class Job:
    """One unit of work moving through the two-queue system."""

    id: int
    arrival_time: float
    current_queue: int | None = None
    position: int = 0
    jockey_count: int = 0
    enqueue_time_current: float = 0.0
    completion_time: float | None = None
    # Engine bookkeeping for the current residence segment: the first time
    # each position was occupied since the job last entered its queue.  Reset
    # on migration, so a completion feeds the history of the queue the job
    # actually completed in with pure FCFS drain times.
    pose_first_reached: dict[int, float] = field(default_factory=dict)
    admission_queue: int | None = None
    segment_waits: list[float] = field(default_factory=list)

    def touch_pose(self, position: int, now: float) -> None:
        """Record the first time this job occupies ``position`` in its
        current queue segment."""
        self.pose_first_reached.setdefault(position, now)


@dataclass
class QueueState:
    """A single FCFS buffer; the job at index 0 is the one in service."""

    id: int
    service_rate: float
    buffer: list[Job] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.service_rate > 0:
            raise ValueError(f"service_rate must be positive, got {self.service_rate}")

    @property
    def length(self) -> int:
        return len(self.buffer)


class PositionHistory:
    """Observed times-to-completion keyed by queue position.

    Every completed job contributes, for each position it ever occupied, the
    duration from first reaching that position until its service completion.
    A position belongs to the known set once it has at least
    ``min_pose_samples`` entries (see SimConfig).
    """

    def __init__(self) -> None:
        self.records: dict[int, list[float]] = {}

    def record(self, pose: int, duration: float) -> None:
        if pose < 0:
            raise ValueError(f"pose must be nonnegative, got {pose}")
        if not duration > 0:
            raise ValueError(f"durations must be positive, got {duration}")
        self.records.setdefault(pose, []).append(duration)

    def count(self, pose: int) -> int:
        return len(self.records.get(pose, ()))

    def mean(self, pose: int) -> float:
        entries = self.records[pose]
        return sum(entries) / len(entries)


class RngStream:
    """Named, independently seeded random substreams for one replication.

    The same seed always reproduces the same draw sequence for each
    substream, regardless of how draws on the other substreams interleave.
    """

    #: spawn order is part of the reproducibility contract
    NAMES = ("interarrival", "service_i", "service_j", "tie_break", "delta_lambda")

    def __init__(self, seed: int) -> None:
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(len(self.NAMES))
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        (
            self.interarrival,
            self.service_i,
            self.service_j,
            self.tie_break,
            self.delta_lambda,
        ) = gens

    def service(self, queue: int) -> np.random.Generator:
        return self.service_i if queue == QUEUE_I else self.service_j


@dataclass
class SimConfig:
    """Full parameterization of one experiment configuration.

    The rate asymmetry is either fixed (``delta_lambda``) or sampled once
    per replication from ``delta_lambda_range``; when neither is given the
    range defaults to (0.1, 0.9) times the arrival rate.  The horizon is a
    departure count, a maximum simulation time, or both (whichever is hit
    first stops the run).
    """

    arrival_rate: float
    delta_lambda: float | None = None
    delta_lambda_range: tuple[float, float] | None = None
    max_departures: int | None = None
    max_time: float | None = None
    seed: int = 0
    d: int = 5
    sigma: float | None = None  # None: estimated from length samples
    quadrature_tolerance: float = 1e-8
    min_pose_samples: int = 1
    validate: bool = False

    def __post_init__(self) -> None:
        if not self.arrival_rate > 0:
            raise ValueError(f"arrival_rate must be positive, got {self.arrival_rate}")
        if self.delta_lambda is not None and self.delta_lambda_range is not None:
            raise ValueError("give either delta_lambda or delta_lambda_range, not both")
        if self.delta_lambda is not None:
            # raises if outside (0, arrival_rate)
            service_rates(self.arrival_rate, self.delta_lambda)
        if self.delta_lambda_range is None and self.delta_lambda is None:
            self.delta_lambda_range = (0.1 * self.arrival_rate, 0.9 * self.arrival_rate)
        if self.delta_lambda_range is not None:
            lo, hi = self.delta_lambda_range
            if not (0 < lo < hi < self.arrival_rate):
                raise ValueError(
                    f"delta_lambda_range must satisfy 0 < lo < hi < arrival_rate, "
                    f"got ({lo}, {hi})"
                )
        if self.max_departures is None and self.max_time is None:
            raise ValueError("set max_departures and/or max_time")
        if self.max_departures is not None and self.max_departures < 0:
            raise ValueError("max_departures must be >= 0")
        if self.max_time is not None and self.max_time < 0:
            raise ValueError("max_time must be >= 0")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive when fixed")
        if not self.quadrature_tolerance > 0:
            raise ValueError("quadrature_tolerance must be positive")
        if self.min_pose_samples < 1:
            raise ValueError("min_pose_samples must be >= 1")

    def resolve_delta_lambda(self, rng: RngStream) -> float:
        """The asymmetry for one replication: fixed value or one uniform draw."""
        if self.delta_lambda is not None:
            return self.delta_lambda
        lo, hi = self.delta_lambda_range
        return lo + (hi - lo) * rng.delta_lambda.random()

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], **overrides) -> "SimConfig":
        """Build a config from string key = value pairs (see ``parse_config_text``)."""
        kwargs: dict = {}
        for key, raw in mapping.items():
            key = key.strip()
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"unknown config field: {key}")
            kwargs[key] = _CONFIG_PARSERS[key](raw.strip())
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "SimConfig":
        blocks = parse_config_text(Path(path).read_text())
        if len(blocks) != 1:
            raise ValueError(f"expected a single config block in {path}, got {len(blocks)}")
        return cls.from_mapping(blocks[0], **overrides)


def _parse_range(raw: str) -> tuple[float, float]:
    parts = raw.replace(",", " ").split()
    if len(parts) != 2:
        raise ValueError(f"expected two numbers for a range, got {raw!r}")
    return float(parts[0]), float(parts[1])


def _parse_bool(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


_CONFIG_PARSERS = {
    "arrival_rate": float,
    "delta_lambda": float,
    "delta_lambda_range": _parse_range,
    "max_departures": int,
    "max_time": float,
    "seed": int,
    "d": int,
    "sigma": float,
    "quadrature_tolerance": float,
    "min_pose_samples": int,
    "validate": _parse_bool,
}


def parse_config_text(text: str) -> list[dict[str, str]]:
    """Parse flat ``key = value`` text into config blocks.

    A line of the form ``[anything]`` starts a new block that inherits every
    key from the first (defaults) block.  Blank lines and ``#`` comments are
    ignored.  Returns one mapping per block; a file without section headers
    yields a single block.
    """
    defaults: dict[str, str] = {}
    blocks: list[dict[str, str]] = []
    current = defaults
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = dict(defaults)
            blocks.append(current)
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        current[key.strip()] = raw.strip()
    return blocks if blocks else [defaults]
