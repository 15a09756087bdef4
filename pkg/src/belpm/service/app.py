"""FastAPI service wrapping the core package.

Thin orchestration only: each endpoint converts wire payloads to core
objects, calls one core operation and converts back. Domain errors map to
structured responses: argument problems give 400, numeric failures 500,
both with a ``kind`` field the CLI turns into exit codes.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ArgumentError, NumericError
from ..harness import (
    ExperimentSpec,
    compare_structures,
    report_timings,
    report_to_dict,
    run_experiment,
)
from ..kernels import Kernel
from ..learning import parse_flat_config, train_phase1, train_phase2
from ..metrics import mse, nmse
from ..network import BelpmModel, model_from_dict, model_to_dict, predict_many
from ..series import (
    EmbeddedDataset,
    HenonParams,
    LorenzParams,
    TimeSeries,
    add_noise,
    embed,
    generate_henon,
    generate_lorenz,
)
from ..wknn import wknn_predict
from . import schemas


def _dataset_from_payload(payload: schemas.DatasetPayload) -> EmbeddedDataset:
    inputs = np.asarray(payload.inputs, dtype=float)
    if inputs.ndim != 2:
        raise ArgumentError("dataset inputs must be a non-empty list of equal-length rows")
    return EmbeddedDataset(
        inputs=inputs,
        targets=np.asarray(payload.targets, dtype=float),
        dim=inputs.shape[1],
        lag=payload.lag,
        horizon=payload.horizon,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="belpm", version=__version__)

    @app.exception_handler(ArgumentError)
    async def _argument_error(request, exc):
        return JSONResponse(status_code=400,
                            content={"detail": {"kind": "argument", "message": str(exc)}})

    @app.exception_handler(NumericError)
    async def _numeric_error(request, exc):
        return JSONResponse(status_code=500,
                            content={"detail": {"kind": "numeric", "message": str(exc)}})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/series/generate", response_model=schemas.SeriesResponse)
    def series_generate(req: schemas.GenerateRequest):
        params = req.params or {}
        if req.system == "lorenz":
            lp = LorenzParams(
                a=float(params.get("a", 10.0)),
                b=float(params.get("b", 28.0)),
                c=float(params.get("c", 8.0 / 3.0)),
                initial_state=tuple(params.get("initial_state", (-15.0, 0.0, 0.0))),
            )
            series = generate_lorenz(lp, dt=req.dt, n=req.n, discard=req.discard)
        else:
            hp = HenonParams(
                a=float(params.get("a", 1.4)),
                b=float(params.get("b", 0.3)),
                initial_state=tuple(params.get("initial_state", (0.0, 0.0))),
            )
            series = generate_henon(hp, n=req.n, discard=req.discard, dt=req.dt)
        series = add_noise(series, req.noise_std, req.seed)
        return schemas.SeriesResponse(values=series.values.tolist(), dt=series.dt,
                                      origin_time=series.origin_time)

    @app.post("/series/embed", response_model=schemas.DatasetPayload)
    def series_embed(req: schemas.EmbedRequest):
        series = TimeSeries(values=np.asarray(req.values, dtype=float), dt=req.dt,
                            origin_time=req.origin_time)
        ds = embed(series, dim=req.dim, lag=req.lag, horizon=req.horizon)
        return schemas.DatasetPayload(inputs=ds.inputs.tolist(), targets=ds.targets.tolist(),
                                      lag=ds.lag, horizon=ds.horizon)

    @app.post("/models/train", response_model=schemas.TrainResponse)
    def models_train(req: schemas.TrainRequest):
        ds = _dataset_from_payload(req.data)
        val = _dataset_from_payload(req.validation) if req.validation is not None else None
        k_a, k_o, kernel, config = parse_flat_config(req.config)
        model = BelpmModel.initialize(ds, k_a=k_a, k_o=k_o, kernel=kernel)
        model, history = train_phase1(model, ds, val, config)
        return schemas.TrainResponse(model=model_to_dict(model), history=history.to_dict())

    @app.post("/models/predict", response_model=schemas.PredictResponse)
    def models_predict(req: schemas.PredictRequest):
        model = model_from_dict(req.model)
        predictions = predict_many(model, np.asarray(req.inputs, dtype=float))
        return schemas.PredictResponse(predictions=predictions.tolist())

    @app.post("/models/adapt", response_model=schemas.AdaptResponse)
    def models_adapt(req: schemas.AdaptRequest):
        model = model_from_dict(req.model)
        _, _, _, config = parse_flat_config(req.config)
        model, result = train_phase2(model, np.asarray(req.inputs, dtype=float), config,
                                     targets=req.targets)
        return schemas.AdaptResponse(model=model_to_dict(model),
                                     predictions=result.predictions.tolist(),
                                     nmse_per_epoch=result.nmse_per_epoch)

    @app.post("/wknn/predict", response_model=schemas.PredictResponse)
    def wknn_predict_endpoint(req: schemas.WknnPredictRequest):
        ds = _dataset_from_payload(req.train)
        kernel = Kernel(kind=req.kernel, z=req.rational_z)
        b = np.asarray(req.b, dtype=float) if isinstance(req.b, list) else float(req.b)
        predictions = [wknn_predict(np.asarray(x, dtype=float), ds, req.k, kernel, b)
                       for x in req.inputs]
        return schemas.PredictResponse(predictions=predictions)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        return schemas.EvaluateResponse(nmse=nmse(req.predicted, req.target),
                                        mse=mse(req.predicted, req.target))

    @app.post("/benchmark", response_model=schemas.BenchmarkResponse)
    def benchmark(req: schemas.BenchmarkRequest):
        spec = ExperimentSpec.from_dict(req.spec)
        report = run_experiment(spec)
        return schemas.BenchmarkResponse(report=report_to_dict(report),
                                         timings=report_timings(report))

    @app.post("/benchmark/structures", response_model=schemas.StructureSweepResponse)
    def benchmark_structures(req: schemas.StructureSweepRequest):
        spec = ExperimentSpec.from_dict(req.spec)
        return schemas.StructureSweepResponse(rows=compare_structures(spec, req.sweep))

    return app
