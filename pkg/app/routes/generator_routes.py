"""
Generator Routes - Instance generation endpoints.
"""
import logging

from fastapi import APIRouter, HTTPException

from app.schemas.schemas import Instance, LowerBoundRequest, RandomInstanceRequest
from app.services.harness_service import HarnessService
from app.utils.errors import InstanceError

logger = logging.getLogger("profit_sched.routes.generate")

router = APIRouter(prefix="/generate", tags=["Generators"])


@router.post("/lower-bound", response_model=Instance)
def generate_lower_bound(request: LowerBoundRequest):
    """Single-processor instance on which the online algorithm pays the most."""
    logger.debug(f"Lower-bound instance: n={request.n}, alpha={request.alpha}")
    try:
        return HarnessService.gen_lower_bound(request.n, request.alpha, request.value_scale)
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Error generating instance: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Failed to generate instance: {str(e)}")


@router.post("/random", response_model=Instance)
def generate_random(request: RandomInstanceRequest):
    """Seeded random instance; identical requests give identical instances."""
    logger.debug(f"Random instance: seed={request.seed}, n={request.n}, m={request.m}")
    try:
        return HarnessService.gen_random(request.seed, request.n, request.m, request.alpha, request.ranges)
    except HTTPException:
        raise
    except InstanceError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error generating instance: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Failed to generate instance: {str(e)}")
