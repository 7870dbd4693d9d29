from app.services.timeline import TimelineService
from app.services.chen_kernel import ChenKernel
from app.services.pd_service import PDService
from app.services.dual_service import DualService
from app.services.oracle_service import OracleService
from app.services.harness_service import HarnessService
