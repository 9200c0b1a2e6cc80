"""FastAPI application exposing the portfolio toolkit over HTTP."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    EntroportError,
    InsufficientData,
    InvalidConfig,
    MalformedInput,
    NoConvergence,
)
from . import handlers
from .models import (
    BacktestRequest,
    BacktestResponse,
    OptimizeRequest,
    OptimizeResponse,
    StatsRequest,
    StatsResponse,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
)

app = FastAPI(title="entroport", version=__version__)


@app.exception_handler(EntroportError)
async def _domain_error(request: Request, exc: EntroportError) -> JSONResponse:
    if isinstance(exc, (MalformedInput, InvalidConfig, InsufficientData)):
        status = 422
    else:
        status = 409  # well-formed input, but the computation cannot proceed
    payload = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, NoConvergence) and exc.trace is not None:
        payload["trace"] = [list(step) for step in exc.trace]
    return JSONResponse(status_code=status, content=payload)


@app.get("/health")
async def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/stats", response_model=StatsResponse)
async def stats(request: StatsRequest) -> StatsResponse:
    return handlers.handle_stats(request)


@app.post("/optimize", response_model=OptimizeResponse)
async def optimize(request: OptimizeRequest) -> OptimizeResponse:
    return handlers.handle_optimize(request)


@app.post("/backtest", response_model=BacktestResponse)
async def backtest(request: BacktestRequest) -> BacktestResponse:
    return handlers.handle_backtest(request)


@app.post("/sweep", response_model=SweepResponse)
async def sweep(request: SweepRequest) -> SweepResponse:
    return handlers.handle_sweep(request)


@app.post("/synth", response_model=SynthResponse)
async def synth(request: SynthRequest) -> SynthResponse:
    return handlers.handle_synth(request)
