"""Event-driven simulation of the two-queue system: Poisson arrivals joining
the shorter queue, FCFS exponential service, and a jockey-evaluation sweep
after every arrival and departure.

Two interchangeable implementations produce bit-identical traces for the
same seed: the readable ``Simulation`` class below, and the compiled kernel
in ``_kernel`` used by default for long runs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from . import decision
from ._numerics import draw_exponential, draw_uniform
from .core import (
    QUEUE_I,
    QUEUE_J,
    Job,
    PositionHistory,
    QueueState,
    RngStream,
    SimConfig,
    service_rates,
)

#: event-kind codes in the trace
DEPARTURE = 0
ARRIVAL = 1

_INF = math.inf


@dataclass
class SimResult:
    """Immutable record of one replication.

    Per-job arrays are indexed by job id; jobs still in the system at the
    horizon carry NaN completion times.  The event log holds one row per
    arrival or departure with the queue lengths right after the state
    change (these rows double as the queue-length samples).  Migrations are
    logged separately with the wait estimates that justified them.
    """

    arrival_rate: float
    delta_lambda: float
    mu_i: float
    mu_j: float
    seed: int
    arrival_times: np.ndarray
    completion_times: np.ndarray
    jockey_counts: np.ndarray
    admission_queues: np.ndarray
    completion_queues: np.ndarray
    segment_jobs: np.ndarray
    segment_waits: np.ndarray
    event_times: np.ndarray
    event_kinds: np.ndarray
    event_queues: np.ndarray
    event_jobs: np.ndarray
    event_len_i: np.ndarray
    event_len_j: np.ndarray
    migration_times: np.ndarray
    migration_jobs: np.ndarray
    migration_from: np.ndarray
    migration_t_current: np.ndarray
    migration_t_target: np.ndarray
    n_decisions: int
    sum_t_w_current: float
    sum_t_w_target: float
    case_counts: np.ndarray
    n_arrivals: int
    n_completions: int
    n_jockey_events: int
    final_len_i: int
    final_len_j: int

    def __post_init__(self) -> None:
        in_system = self.final_len_i + self.final_len_j
        if self.n_arrivals != self.n_completions + in_system:
            raise AssertionError(
                f"conservation violated: {self.n_arrivals} arrivals != "
                f"{self.n_completions} completions + {in_system} in system"
            )

    @property
    def completed(self) -> np.ndarray:
        return ~np.isnan(self.completion_times)

    def sojourns(self) -> np.ndarray:
        """Arrival-to-completion times of completed jobs."""
        done = self.completed
        return self.completion_times[done] - self.arrival_times[done]

    def interarrival_gaps(self) -> np.ndarray:
        return np.diff(self.arrival_times)

    def trace_hash(self) -> str:
        """Digest of the full event and migration history."""
        h = hashlib.sha256()
        for arr in (
            self.event_times,
            self.event_kinds,
            self.event_queues,
            self.event_jobs,
            self.event_len_i,
            self.event_len_j,
            self.migration_times,
            self.migration_jobs,
            self.migration_from,
            self.migration_t_current,
            self.migration_t_target,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def admit(job: Job, queues: list[QueueState], rng: RngStream) -> int:
    """Route a new job to the strictly shorter queue; a fair coin breaks ties.

    Only decides and appends; the caller starts service if the queue was
    idle.  Returns the chosen queue id.
    """
    len_i, len_j = queues[QUEUE_I].length, queues[QUEUE_J].length
    if len_i < len_j:
        target = QUEUE_I
    elif len_j < len_i:
        target = QUEUE_J
    else:
        target = QUEUE_I if draw_uniform(rng.tie_break) < 0.5 else QUEUE_J
    queue = queues[target]
    job.current_queue = target
    job.position = queue.length
    job.enqueue_time_current = job.arrival_time
    job.admission_queue = target
    job.touch_pose(job.position, job.arrival_time)
    queue.buffer.append(job)
    return target


class Simulation:
    """Reference implementation of one replication (single-threaded).

    Random draws always occur in the same order: admission tie-break, then
    service start (when a queue turns busy), then the next interarrival;
    migrations draw a service time only when they land in an empty queue.
    The compiled kernel follows the identical order, which is what makes the
    two traces comparable bit for bit.
    """

    def __init__(self, config: SimConfig) -> None:
        self.config = config
        self.rng = RngStream(config.seed)
        self.delta_lambda = config.resolve_delta_lambda(self.rng)
        mu_i, mu_j = service_rates(config.arrival_rate, self.delta_lambda)
        self.queues = [QueueState(QUEUE_I, mu_i), QueueState(QUEUE_J, mu_j)]
        self.histories = (PositionHistory(), PositionHistory())
        self.jobs: list[Job] = []
        self.now = 0.0
        self.next_arrival = draw_exponential(self.rng.interarrival, config.arrival_rate)
        self.next_departure = [_INF, _INF]
        # integer-exact running sums for the length model
        self.n_samples = 0
        self.len_sum = [0.0, 0.0]
        self.len_sumsq = [0.0, 0.0]
        # outputs
        self.n_completions = 0
        self.n_jockey_events = 0
        self.segment_jobs: list[int] = []
        self.segment_waits: list[float] = []
        self.ev_time: list[float] = []
        self.ev_kind: list[int] = []
        self.ev_queue: list[int] = []
        self.ev_job: list[int] = []
        self.ev_len_i: list[int] = []
        self.ev_len_j: list[int] = []
        self.mig_time: list[float] = []
        self.mig_job: list[int] = []
        self.mig_from: list[int] = []
        self.mig_t_cur: list[float] = []
        self.mig_t_tgt: list[float] = []
        self.n_decisions = 0
        self.sum_t_w_current = 0.0
        self.sum_t_w_target = 0.0
        self.case_counts = np.zeros(4, dtype=np.int64)

    # -- event processing -------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.config
        while True:
            if cfg.max_departures is not None and self.n_completions >= cfg.max_departures:
                break
            t, kind, q = self._peek_next_event()
            if t == _INF:
                break
            if cfg.max_time is not None and t > cfg.max_time:
                break
            if kind == DEPARTURE:
                self._process_departure(q, t)
            else:
                self._process_arrival(t)
        return self._build_result()

    def _peek_next_event(self) -> tuple[float, int, int]:
        """Next event as (time, kind, queue): departures before arrivals at
        equal times, queue i before queue j."""
        t, kind, q = self.next_arrival, ARRIVAL, -1
        if self.next_departure[QUEUE_J] <= t:
            t, kind, q = self.next_departure[QUEUE_J], DEPARTURE, QUEUE_J
        if self.next_departure[QUEUE_I] <= t:
            t, kind, q = self.next_departure[QUEUE_I], DEPARTURE, QUEUE_I
        return t, kind, q

    def _start_service(self, q: int, now: float) -> None:
        rate = self.queues[q].service_rate
        self.next_departure[q] = now + draw_exponential(self.rng.service(q), rate)

    def _process_arrival(self, t: float) -> None:
        self.now = t
        job = Job(id=len(self.jobs), arrival_time=t)
        self.jobs.append(job)
        target = admit(job, self.queues, self.rng)
        if self.queues[target].length == 1:
            self._start_service(target, t)
        self.next_arrival = t + draw_exponential(
            self.rng.interarrival, self.config.arrival_rate
        )
        self._record_event(ARRIVAL, target, job.id)
        self.evaluate_jockeys(recent_departures=0)
        if self.config.validate:
            self._check_state()

    def _process_departure(self, q: int, t: float) -> None:
        self.now = t
        job = self.depart(self.queues[q], t)
        self._record_event(DEPARTURE, q, job.id)
        self.evaluate_jockeys(recent_departures=1)
        if self.config.validate:
            self._check_state()

    def depart(self, queue: QueueState, now: float) -> Job:
        """Complete the head job, feed the position history, start the next."""
        if queue.length == 0:
            raise AssertionError("departure event for an empty queue")
        job = queue.buffer.pop(0)
        job.completion_time = now
        job.current_queue = None
        self.segment_jobs.append(job.id)
        self.segment_waits.append(now - job.enqueue_time_current)
        for pos, first in job.pose_first_reached.items():
            self.histories[queue.id].record(pos, now - first)
        for newpos, other in enumerate(queue.buffer):
            other.position = newpos
            other.touch_pose(newpos, now)
        if queue.length > 0:
            self._start_service(queue.id, now)
        else:
            self.next_departure[queue.id] = _INF
        self.n_completions += 1
        return job

    def _record_event(self, kind: int, q: int, job_id: int) -> None:
        len_i = self.queues[QUEUE_I].length
        len_j = self.queues[QUEUE_J].length
        self.ev_time.append(self.now)
        self.ev_kind.append(kind)
        self.ev_queue.append(q)
        self.ev_job.append(job_id)
        self.ev_len_i.append(len_i)
        self.ev_len_j.append(len_j)
        self.n_samples += 1
        self.len_sum[QUEUE_I] += len_i
        self.len_sumsq[QUEUE_I] += len_i * len_i
        self.len_sum[QUEUE_J] += len_j
        self.len_sumsq[QUEUE_J] += len_j * len_j

    # -- jockeying ---------------------------------------------------------

    def length_model(self) -> decision.QueueLengthModel:
        """Gaussian length model from the samples so far (rebuilt per event)."""
        n = self.n_samples
        mean_i = self.len_sum[QUEUE_I] / n
        mean_j = self.len_sum[QUEUE_J] / n
        if self.config.sigma is not None:
            sigma = self.config.sigma
        elif n < 2:
            sigma = 0.5
        else:
            ssd_i = self.len_sumsq[QUEUE_I] - self.len_sum[QUEUE_I] * self.len_sum[QUEUE_I] / n
            ssd_j = self.len_sumsq[QUEUE_J] - self.len_sum[QUEUE_J] * self.len_sum[QUEUE_J] / n
            var = (ssd_i + ssd_j) / (2.0 * n - 2.0)
            if var < 0.0:
                var = 0.0
            sigma = max(math.sqrt(var), 0.5)
        return decision.QueueLengthModel(mean_i, mean_j, sigma)

    def evaluate_jockeys(self, recent_departures: int) -> list[tuple[Job, decision.JockeyDecision]]:
        """One sweep over all waiting jobs, longest-waiting first.

        Each candidate is examined once against the live state (queue
        lengths are re-read after every migration); it migrates exactly when
        the predicted wait at the landing pose beats its current one.  Jobs
        that migrate in during the sweep are not candidates.
        """
        model = self.length_model()
        candidates = [
            (job.enqueue_time_current, q, pos, job)
            for q in (QUEUE_I, QUEUE_J)
            for pos, job in enumerate(self.queues[q].buffer)
            if pos >= 1
        ]
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))
        migrations = []
        for _, _, _, job in candidates:
            verdict = decision.should_jockey(
                job, self.queues, self.histories, model, self.config,
                recent_departures=recent_departures,
            )
            self.n_decisions += 1
            self.sum_t_w_current += verdict.t_w_current
            self.sum_t_w_target += verdict.t_w_target
            self.case_counts[verdict.case.value] += 1
            if verdict.migrate:
                self._migrate(job, verdict)
                migrations.append((job, verdict))
        return migrations

    def _migrate(self, job: Job, verdict: decision.JockeyDecision) -> None:
        now = self.now
        source = self.queues[job.current_queue]
        target = self.queues[1 - job.current_queue]
        self.mig_time.append(now)
        self.mig_job.append(job.id)
        self.mig_from.append(source.id)
        self.mig_t_cur.append(verdict.t_w_current)
        self.mig_t_tgt.append(verdict.t_w_target)
        self.segment_jobs.append(job.id)
        self.segment_waits.append(now - job.enqueue_time_current)
        del source.buffer[job.position]
        for newpos in range(job.position, source.length):
            source.buffer[newpos].position = newpos
            source.buffer[newpos].touch_pose(newpos, now)
        job.current_queue = target.id
        job.position = target.length
        job.enqueue_time_current = now
        job.jockey_count += 1
        job.pose_first_reached = {}
        job.touch_pose(job.position, now)
        target.buffer.append(job)
        if target.length == 1:
            self._start_service(target.id, now)
        self.n_jockey_events += 1

    # -- invariants and output --------------------------------------------

    def _check_state(self) -> None:
        in_queues = 0
        seen: set[int] = set()
        for q in (QUEUE_I, QUEUE_J):
            for pos, job in enumerate(self.queues[q].buffer):
                assert job.position == pos, "position indices not contiguous"
                assert job.current_queue == q, "job/queue mismatch"
                assert job.id not in seen, "job present in two queues"
                seen.add(job.id)
                in_queues += 1
        assert len(self.jobs) == self.n_completions + in_queues, "conservation violated"

    def _build_result(self) -> SimResult:
        n = len(self.jobs)
        arrival = np.array([j.arrival_time for j in self.jobs], dtype=np.float64)
        completion = np.array(
            [math.nan if j.completion_time is None else j.completion_time for j in self.jobs],
            dtype=np.float64,
        )
        return SimResult(
            arrival_rate=self.config.arrival_rate,
            delta_lambda=self.delta_lambda,
            mu_i=self.queues[QUEUE_I].service_rate,
            mu_j=self.queues[QUEUE_J].service_rate,
            seed=self.config.seed,
            arrival_times=arrival,
            completion_times=completion,
            jockey_counts=np.array([j.jockey_count for j in self.jobs], dtype=np.int32),
            admission_queues=np.array(
                [-1 if j.admission_queue is None else j.admission_queue for j in self.jobs],
                dtype=np.int8,
            ),
            completion_queues=self._completion_queues(n),
            segment_jobs=np.array(self.segment_jobs, dtype=np.int32),
            segment_waits=np.array(self.segment_waits, dtype=np.float64),
            event_times=np.array(self.ev_time, dtype=np.float64),
            event_kinds=np.array(self.ev_kind, dtype=np.int8),
            event_queues=np.array(self.ev_queue, dtype=np.int8),
            event_jobs=np.array(self.ev_job, dtype=np.int32),
            event_len_i=np.array(self.ev_len_i, dtype=np.int32),
            event_len_j=np.array(self.ev_len_j, dtype=np.int32),
            migration_times=np.array(self.mig_time, dtype=np.float64),
            migration_jobs=np.array(self.mig_job, dtype=np.int32),
            migration_from=np.array(self.mig_from, dtype=np.int8),
            migration_t_current=np.array(self.mig_t_cur, dtype=np.float64),
            migration_t_target=np.array(self.mig_t_tgt, dtype=np.float64),
            n_decisions=self.n_decisions,
            sum_t_w_current=self.sum_t_w_current,
            sum_t_w_target=self.sum_t_w_target,
            case_counts=self.case_counts.copy(),
            n_arrivals=n,
            n_completions=self.n_completions,
            n_jockey_events=self.n_jockey_events,
            final_len_i=self.queues[QUEUE_I].length,
            final_len_j=self.queues[QUEUE_J].length,
        )

    def _completion_queues(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=np.int8)
        for kind, q, job_id in zip(self.ev_kind, self.ev_queue, self.ev_job):
            if kind == DEPARTURE:
                out[job_id] = q
        return out


def run(config: SimConfig, engine: str = "fast") -> SimResult:
    """Run one replication; ``engine`` is "fast" (compiled) or "reference"."""
    if engine == "reference":
        return Simulation(config).run()
    if engine == "fast":
        from . import _kernel

        return _kernel.run_fast(config)
    raise ValueError(f"unknown engine {engine!r}")


def run_replications(
    config: SimConfig, replications: int, engine: str = "fast"
) -> list[SimResult]:
    """Independent replications seeded ``config.seed + index``."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    return [
        run(replace(config, seed=config.seed + idx), engine=engine)
        for idx in range(replications)
    ]
