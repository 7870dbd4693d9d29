"""
In-memory domain state shared by the services.

Pydantic schemas describe what crosses the IO boundary; the classes here hold
the numeric state (numpy arrays) the algorithms work on.
"""
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.schemas.schemas import CostBreakdown, Job, JobCategory
from app.utils.errors import ParameterError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Timeline:
    """Partition of time into atomic intervals [tau_{k-1}, tau_k).

    Rows of the availability matrix follow the order of ``jobs`` (arrival
    order); columns follow the intervals.
    """

    def __init__(self, boundaries: Sequence[float], jobs: Sequence[Job]):
        self.boundaries = _frozen(np.asarray(boundaries, dtype=float))
        self.jobs: Tuple[Job, ...] = tuple(jobs)
        self._index = {job.id: i for i, job in enumerate(self.jobs)}

        releases = np.array([job.release for job in self.jobs], dtype=float).reshape(-1, 1)
        deadlines = np.array([job.deadline for job in self.jobs], dtype=float).reshape(-1, 1)
        available = (self.starts[None, :] >= releases) & (self.ends[None, :] <= deadlines)
        self.availability = _frozen(available.astype(np.int8))

    @property
    def starts(self) -> np.ndarray:
        return self.boundaries[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.boundaries[1:]

    @property
    def lengths(self) -> np.ndarray:
        return self.boundaries[1:] - self.boundaries[:-1]

    @property
    def n_intervals(self) -> int:
        return len(self.boundaries) - 1

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    @property
    def job_ids(self) -> Tuple[str, ...]:
        return tuple(job.id for job in self.jobs)

    @property
    def workloads(self) -> np.ndarray:
        return np.array([job.workload for job in self.jobs], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([job.value for job in self.jobs], dtype=float)

    def index_of(self, job_id: str) -> int:
        return self._index[job_id]

    def window(self, job_index: int) -> np.ndarray:
        """Indices of the intervals the job may use."""
        return np.flatnonzero(self.availability[job_index])

    def __repr__(self) -> str:
        return f"Timeline(boundaries={self.boundaries.tolist()}, jobs={list(self.job_ids)})"


@dataclass
class WorkAssignment:
    """Primal-dual state: fractions x_jk, indicators y_j and duals lambda_j."""
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    delta: float

    @classmethod
    def empty(cls, n_jobs: int, n_intervals: int, delta: float) -> "WorkAssignment":
        return cls(
            x=np.zeros((n_jobs, n_intervals)),
            y=np.zeros(n_jobs, dtype=np.int8),
            lam=np.zeros(n_jobs),
            delta=delta,
        )

    def copy(self) -> "WorkAssignment":
        return WorkAssignment(x=self.x.copy(), y=self.y.copy(), lam=self.lam.copy(), delta=self.delta)

    def loads(self, workloads: np.ndarray) -> np.ndarray:
        """Absolute work x_jk * w_j, shape (jobs, intervals)."""
        return self.x * workloads[:, None]


@dataclass(frozen=True)
class IntervalLoad:
    """Work assignment of one atomic interval as absolute loads."""
    loads: np.ndarray
    length: float
    m: int
    job_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        object.__setattr__(self, "loads", loads)
        if not self.job_ids:
            object.__setattr__(self, "job_ids", tuple(f"{i}" for i in range(len(loads))))
        if len(self.job_ids) != len(loads):
            raise ParameterError("one job id per load required")
        if np.any(loads < 0):
            raise ParameterError("loads must be nonnegative")
        if not self.length > 0:
            raise ParameterError("interval length must be positive")
        if self.m < 1:
            raise ParameterError("at least one processor required")


class PoolSegment(NamedTuple):
    """Piece of a pool job on a pool processor, offsets relative to the interval start."""
    job: int
    start: float
    end: float


@dataclass(frozen=True)
class IntervalSchedule:
    """Energy-minimal schedule of one interval: dedicated jobs plus a shared pool."""
    length: float
    m: int
    dedicated: Tuple[int, ...]
    pool_jobs: Tuple[int, ...]
    pool_speed: float
    speeds: np.ndarray
    placement: Tuple[Tuple[PoolSegment, ...], ...]

    @property
    def pool_processors(self) -> int:
        return self.m - len(self.dedicated)

    @property
    def processor_speeds(self) -> np.ndarray:
        """Dedicated processors first (descending load), then the pool processors."""
        pool = [self.pool_speed if self.placement[p] else 0.0 for p in range(self.pool_processors)]
        return np.array([self.speeds[j] for j in self.dedicated] + pool, dtype=float)


@dataclass
class ScheduleReport:
    """Outcome of one online run."""
    timeline: Timeline
    assignment: WorkAssignment
    schedules: List[IntervalSchedule]
    cost: CostBreakdown
    alpha: float
    m: int
    job_energy: Dict[str, float] = field(default_factory=dict)

    @property
    def lambdas(self) -> Dict[str, float]:
        return {job_id: float(lam) for job_id, lam in zip(self.timeline.job_ids, self.assignment.lam)}

    @property
    def finished(self) -> List[str]:
        return [job_id for job_id, y in zip(self.timeline.job_ids, self.assignment.y) if y == 1]

    @property
    def rejected(self) -> List[str]:
        return [job_id for job_id, y in zip(self.timeline.job_ids, self.assignment.y) if y == 0]


@dataclass
class DualCertificate:
    """Closed-form evaluation of the dual function at the run's duals."""
    job_ids: Tuple[str, ...]
    s_hat: np.ndarray
    x_hat: np.ndarray
    x_hat_job: np.ndarray
    energy: np.ndarray
    contributing_length: np.ndarray
    contributing: List[Tuple[int, ...]]
    available_counts: List[int]
    g: float
    categories: List[JobCategory]

    @property
    def category_counts(self) -> Dict[str, int]:
        counts = {category.value: 0 for category in JobCategory}
        for category in self.categories:
            counts[category.value] += 1
        return counts


@dataclass
class OracleResult:
    """Offline optimum found by subset enumeration."""
    finished: Tuple[str, ...]
    energy: float
    lost_value: float
    method: str
    converged: bool
    iterations: int
    projected_gradient_norm: float
    subsets_evaluated: int
    subset_energies: Dict[Tuple[str, ...], float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.energy + self.lost_value


@dataclass
class EnergyResult:
    """Minimized energy of one finish-subset plus solver diagnostics."""
    energy: float
    x: Optional[np.ndarray]
    converged: bool
    iterations: int
    projected_gradient_norm: float
