from app.models.models import (
    Timeline,
    WorkAssignment,
    IntervalLoad,
    IntervalSchedule,
    PoolSegment,
    ScheduleReport,
    DualCertificate,
    OracleResult,
    EnergyResult,
)
