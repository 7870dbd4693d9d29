import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# =============================================================================
# Problem input
# =============================================================================

class Job(BaseModel):
    """A deadline job with a workload and a value lost if it is not finished."""
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="Opaque identifier, also the tie-breaker")
    release: float = Field(..., ge=0, description="Release time r_j")
    deadline: float = Field(..., description="Deadline d_j (exclusive)")
    workload: float = Field(..., gt=0, description="Work units w_j")
    value: float = Field(..., gt=0, description="Cost charged if the job is not finished")

    @field_validator("id", mode="before")
    @classmethod
    def _coerce_id(cls, value):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return str(value)
        return value

    @model_validator(mode="after")
    def _check_window(self):
        for name in ("release", "deadline", "workload"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.release < self.deadline:
            raise ValueError(f"release {self.release} must be before deadline {self.deadline}")
        return self


class Instance(BaseModel):
    """Global parameters plus the jobs, listed in arrival order."""
    alpha: float = Field(..., gt=1, description="Energy exponent of the power function s^alpha")
    m: int = Field(..., ge=1, description="Number of identical speed-scalable processors")
    jobs: List[Job] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_ids(self):
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        ids = [job.id for job in self.jobs]
        if len(ids) != len(set(ids)):
            raise ValueError("job ids must be unique")
        return self

    def arrival_order(self) -> List[Job]:
        """Jobs sorted by release time; simultaneous releases by id."""
        return sorted(self.jobs, key=lambda job: (job.release, job.id))

    def job(self, job_id: str) -> Job:
        for job in self.jobs:
            if job.id == job_id:
                return job
        raise KeyError(job_id)


# =============================================================================
# Generators
# =============================================================================

class GeneratorRanges(BaseModel):
    """Closed ranges the random generator samples from."""
    window: Tuple[float, float] = (0.5, 4.0)
    workload: Tuple[float, float] = (0.1, 2.0)
    value: Tuple[float, float] = (0.1, 5.0)
    horizon: float = 8.0


class LowerBoundRequest(BaseModel):
    n: int = Field(..., ge=1)
    alpha: float = Field(..., gt=1)
    value_scale: float = Field(default=1e9, gt=0)


class RandomInstanceRequest(BaseModel):
    seed: int
    n: int
    m: int = Field(default=1, ge=1)
    alpha: float = Field(default=2.0, gt=1)
    ranges: GeneratorRanges = Field(default_factory=GeneratorRanges)


# =============================================================================
# Costs and schedules
# =============================================================================

class CostBreakdown(BaseModel):
    """Energy plus lost value of a schedule."""
    energy: float = Field(..., ge=0)
    lost_value: float = Field(..., ge=0)
    total: float = Field(..., ge=0)

    @classmethod
    def from_parts(cls, energy: float, lost_value: float) -> "CostBreakdown":
        return cls(energy=energy, lost_value=lost_value, total=energy + lost_value)

    @model_validator(mode="after")
    def _check_total(self):
        if self.total != self.energy + self.lost_value:
            raise ValueError("total must equal energy + lost_value")
        return self


class SegmentOut(BaseModel):
    """Absolute-time piece of work on one processor; job_id None means idle."""
    job_id: Optional[str]
    start: float
    end: float


class ProcessorOut(BaseModel):
    processor: int
    kind: str  # "dedicated", "pool" or "idle"
    speed: float
    segments: List[SegmentOut]


class IntervalScheduleOut(BaseModel):
    index: int
    start: float
    end: float
    dedicated: List[str]
    pool_speed: float
    energy: float
    processors: List[ProcessorOut]


# =============================================================================
# Certificate, oracle and run reports
# =============================================================================

class JobCategory(str, Enum):
    FINISHED = "J1"
    REJECTED_LIGHT = "J2"
    REJECTED_HEAVY = "J3"


class JobCertificateOut(BaseModel):
    s_hat: float
    x_hat: float
    energy: float
    contributing_length: float
    category: JobCategory


class CertificateSummary(BaseModel):
    g: float
    jobs: Dict[str, JobCertificateOut]
    contributing: List[List[str]]
    available_counts: List[int]
    categories: Dict[str, int]


class OracleSummary(BaseModel):
    total: float
    energy: float
    lost_value: float
    finished: List[str]
    method: str
    converged: bool
    iterations: int
    projected_gradient_norm: float
    subsets_evaluated: int


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class RunReport(BaseModel):
    """Everything one pipeline run produces; serialized as the report file."""
    instance_digest: str
    alpha: float
    m: int
    delta: float
    intervals: List[IntervalScheduleOut]
    cost: CostBreakdown
    lambdas: Dict[str, float]
    finished: List[str]
    rejected: List[str]
    job_energy: Dict[str, float]
    certificate: CertificateSummary
    certified_ratio: float
    ratio_bound: float
    oracle: Optional[OracleSummary] = None
    empirical_ratio: Optional[float] = None
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def healthy(self) -> bool:
        return all(check.passed for check in self.checks)


class OracleReport(BaseModel):
    instance_digest: str
    oracle: OracleSummary
    subset_energies: Dict[str, float]


class SimulateRequest(BaseModel):
    """Request body of the batch simulate endpoint."""
    instance: Instance
    delta: Optional[float] = Field(default=None, gt=0, le=1)
    with_oracle: bool = False


class SweepRow(BaseModel):
    parameter: str
    value: float
    cost: float
    g: float
    certified_ratio: float
    reference_cost: Optional[float] = None
    empirical_ratio: Optional[float] = None
