"""
Run Routes - Batch simulation and oracle endpoints.
"""
import logging

from fastapi import APIRouter, HTTPException

from app.schemas.schemas import Instance, OracleReport, RunReport, SimulateRequest
from app.services.harness_service import HarnessService
from app.utils.errors import CertificateViolation, InstanceError, OracleLimitError, ParameterError

logger = logging.getLogger("profit_sched.routes.run")

router = APIRouter(tags=["Runs"])


@router.post("/simulate", response_model=RunReport)
def simulate(request: SimulateRequest):
    """
    Run the online algorithm on a whole instance.

    Returns the run report with the dual certificate, the certified ratio,
    the optional oracle comparison and the result of every check.
    """
    instance = request.instance
    logger.info(f"Simulating {len(instance.jobs)} jobs (m={instance.m}, alpha={instance.alpha})")
    try:
        report = HarnessService.simulate(instance, delta=request.delta, with_oracle=request.with_oracle)
        logger.info(f"Simulation finished: cost {report.cost.total:.9g}, ratio {report.certified_ratio:.6g}")
        return report
    except HTTPException:
        raise
    except (InstanceError, ParameterError, OracleLimitError) as e:
        logger.warning(f"Rejected simulation request: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except CertificateViolation as e:
        logger.error(f"Certificate violation: {e}")
        raise HTTPException(status_code=409, detail=str(e))
    except Exception as e:
        logger.error(f"Error simulating instance: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Failed to simulate instance: {str(e)}")


@router.post("/oracle", response_model=OracleReport)
def oracle(instance: Instance):
    """
    Offline optimum of a small instance.

    Enumerates every finish-subset, so instances are limited to a few jobs.
    """
    logger.info(f"Oracle request for {len(instance.jobs)} jobs")
    try:
        return HarnessService.oracle_report(instance)
    except HTTPException:
        raise
    except (InstanceError, ParameterError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except OracleLimitError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing optimum: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Failed to compute optimum: {str(e)}")
