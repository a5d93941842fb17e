"""
FlowLoc - FastAPI Application
HTTP surface over the quantity computations and the verification suite
"""

import asyncio
import logging
import os
from typing import Any, Dict, List, Optional, Tuple

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, ValidationError

from flowloc.analyzers.localization import SuiteSpec, run_suite_async, verify_graph
from flowloc.analyzers.report_gen import compute_quantities, generate_quantity_data, generate_report_data
from flowloc.data_sources.graph_core import build_graph
from flowloc.utils.config import (
    APP_NAME,
    APP_VERSION,
    CHECKS,
    CORS_ORIGINS,
    FAMILIES,
    QUANTITIES,
    configure_logging,
)
from flowloc.utils.errors import FlowLocError

configure_logging()
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title=APP_NAME,
    version=APP_VERSION,
    description="Electrical-flow localization verifier: transfer currents, heat kernels and entropy bounds"
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Request Models
class ComputeRequest(BaseModel):
    edges: List[Tuple[int, int, float]] = Field(..., min_length=1)
    n: Optional[int] = None
    quantities: List[str] = Field(default_factory=lambda: [q for q in QUANTITIES if q not in ("K", "Pi")])
    emit_matrices: bool = False


class VerifyRequest(BaseModel):
    suite: SuiteSpec = Field(default_factory=SuiteSpec)
    edges: Optional[List[Tuple[int, int, float]]] = None
    n: Optional[int] = None


# Routes

@app.get("/api")
async def root():
    """Root endpoint - API info"""
    return {
        "app": APP_NAME,
        "version": APP_VERSION,
        "endpoints": {
            "/api/health": "GET - Health check",
            "/api/checks": "GET - Checks, families and quantities",
            "/api/compute": "POST - Quantities for an edge list",
            "/api/verify": "POST - Run the suite, or the per-graph checks on an edge list",
        }
    }


@app.get("/api/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "app": APP_NAME,
        "version": APP_VERSION
    }


@app.get("/api/checks")
async def list_checks():
    return {"checks": CHECKS, "families": FAMILIES, "quantities": QUANTITIES}


@app.post("/api/compute")
async def compute(request: ComputeRequest) -> Dict[str, Any]:
    """
    Compute quantities for a graph given as an edge list

    Input errors (construction, unknown quantity) map to 422.
    """
    logger.info(f"Compute request: {len(request.edges)} edges, quantities {request.quantities}")
    try:
        g = build_graph(request.edges, request.n)
        values = await asyncio.to_thread(compute_quantities, g, request.quantities, request.emit_matrices)
        return generate_quantity_data(g, values, source="request")
    except (FlowLocError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing quantities: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")


@app.post("/api/verify")
async def verify(request: VerifyRequest) -> Dict[str, Any]:
    """
    Run verification checks

    With an edge list, the suite's per-graph checks run on that graph;
    otherwise the whole family suite runs. Check-level errors are reported
    inside the document, not as HTTP errors.
    """
    suite = request.suite
    try:
        if request.edges is not None:
            g = build_graph(request.edges, request.n)
            reports = await asyncio.to_thread(verify_graph, g, suite, "request")
            source = "request"
        else:
            reports = await run_suite_async(suite)
            source = "families"
    except (FlowLocError, ValidationError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error running verification: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")

    return generate_report_data(reports, {"source": source, **suite.model_dump(exclude={"jobs"})})


# Run the application
if __name__ == "__main__":
    import uvicorn

    logger.info(f"Starting {APP_NAME} v{APP_VERSION}")
    port = int(os.getenv("PORT", 8000))

    uvicorn.run(
        "flowloc.main:app",
        host="0.0.0.0",
        port=port,
        reload=False,
        log_level="info"
    )
