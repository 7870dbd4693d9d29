from app.schemas.schemas import (
    # Input
    Job,
    Instance,
    # Generators
    GeneratorRanges,
    LowerBoundRequest,
    RandomInstanceRequest,
    # Schedules
    CostBreakdown,
    SegmentOut,
    ProcessorOut,
    IntervalScheduleOut,
    # Reports
    JobCategory,
    JobCertificateOut,
    CertificateSummary,
    OracleSummary,
    CheckResult,
    RunReport,
    OracleReport,
    SimulateRequest,
    SweepRow,
)
