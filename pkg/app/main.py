"""
Profitable Speed Scaling API - batch service around the online scheduler.

Whole instances are submitted per request; every response is a complete
run report, oracle report or generated instance.
"""
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.config import logger, settings, setup_logging
from app.routes import generator_router, run_router
from app.utils.errors import InstanceError, ParameterError


@asynccontextmanager
async def lifespan(app: FastAPI):
    setup_logging(settings.LOG_LEVEL)
    settings.ensure_directories()
    logger.info(
        f"{settings.APP_NAME} up: reports in {os.path.abspath(settings.OUTPUT_DIR)}, "
        f"oracle up to {settings.ORACLE_MAX_JOBS} jobs on {settings.ORACLE_WORKERS} worker(s)"
    )
    yield
    logger.info(f"{settings.APP_NAME} stopped")


app = FastAPI(
    title=settings.APP_NAME,
    description="""
## Profitable Speed Scaling API

Batch service around the online primal-dual algorithm for deadline jobs on
m speed-scalable processors with power s^alpha. Jobs that would cost more
energy than their value are rejected.

- **Simulate**: online schedule per interval, dual lower bound g and the certified ratio cost / g
- **Oracle**: offline optimum of small instances by finish-subset enumeration
- **Generators**: lower-bound family and seeded random instances
""",
    version="1.0.0",
    lifespan=lifespan,
)


@app.exception_handler(InstanceError)
@app.exception_handler(ParameterError)
async def domain_exception_handler(request: Request, exc: Exception):
    logger.warning(f"Invalid input on {request.method} {request.url.path}: {exc}")
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unhandled error on {request.method} {request.url.path}: {exc}", exc_info=True)
    if isinstance(exc, HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})
    message = str(exc) if settings.DEBUG else "An unexpected error occurred"
    return JSONResponse(status_code=500, content={"detail": "Internal server error", "message": message})


app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins_list,
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Debug trace of every request and its status."""
    response = await call_next(request)
    logger.debug(f"{request.method} {request.url.path} -> {response.status_code}")
    return response


app.include_router(run_router, prefix="/api")
app.include_router(generator_router, prefix="/api")


@app.get("/health", tags=["Status"])
async def health_check():
    return {"status": "healthy", "service": settings.APP_NAME}


@app.get("/")
async def root():
    return {"service": settings.APP_NAME, "docs": "/docs", "health": "/health"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host="0.0.0.0", port=8000, reload=settings.DEBUG)
