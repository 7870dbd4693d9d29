from app.utils.errors import (
    ExitCode,
    SchedulingError,
    InstanceError,
    InstanceParseError,
    ParameterError,
    CertificateViolation,
    OracleLimitError,
)
from app.utils.projection import euclidean_proj_simplex, euclidean_proj_simplex_rows
