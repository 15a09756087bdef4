"""Benchmark harness: metrics, experiment runner and report emission.

An experiment spec describes one end-to-end run: generate a chaotic series,
optionally add noise, delay-embed per horizon, split, train, evaluate, and
optionally adapt online over the test stream and compare against a plain
weighted-kNN baseline on identical splits.

Reports separate deterministic content from wall-clock timing: the report
document is byte-reproducible for a fixed seed, timings go to a sidecar.
"""
from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np
import jsonschema

from .errors import ArgumentError, BelpmError
from .kernels import KERNEL_KINDS, Kernel
from .learning import (
    TrainConfig,
    LearningHistory,
    heuristic_b_init,
    train_phase1,
    train_phase2,
    write_history_csv,
)
from .metrics import mse, nmse
from .network import BelpmModel, predict_many
from .series import (
    HenonParams,
    LorenzParams,
    TimeSeries,
    add_noise,
    embed,
    generate_henon,
    generate_lorenz,
    split,
)
from .wknn import wknn_predict

__all__ = [
    "nmse", "mse",
    "ExperimentSpec", "ModelSpec", "BaselineSpec", "ExperimentReport", "HorizonResult",
    "run_experiment", "compare_structures",
    "report_to_dict", "report_timings", "write_report_files", "write_report_dict_files",
    "make_lorenz_spec", "make_henon_spec",
    "REPORT_FORMAT_VERSION", "REPORT_SCHEMA", "validate_report",
]

REPORT_FORMAT_VERSION = 1


def _check_keys(section: str, doc, allowed: set) -> None:
    if not isinstance(doc, dict):
        raise ArgumentError(f"spec section {section!r} must be a mapping")
    unknown = set(doc) - allowed
    if unknown:
        raise ArgumentError(f"unknown keys in spec section {section!r}: {sorted(unknown)}")


@dataclass
class ModelSpec:
    k_a: int = 3
    k_o: int = 6
    kernel: str = "exponential"
    rational_z: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def build_kernel(self) -> Kernel:
        return Kernel(kind=self.kernel, z=self.rational_z)


@dataclass
class BaselineSpec:
    enabled: bool = True
    k: int = 3
    kernel: str = "gaussian"
    b: "float | str" = 1.0


@dataclass
class ExperimentSpec:
    system: str = "henon"
    n_samples: int = 1000
    discard: int = 0
    dt: float = 0.01
    noise_std: float = 0.0
    seed: int = 0
    system_params: dict = field(default_factory=dict)
    embedding_dim: int = 3
    embedding_lag: int = 1
    horizons: list = field(default_factory=lambda: [1])
    n_train: int = 500
    n_test: int = 100
    n_val: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    baseline: BaselineSpec = field(default_factory=BaselineSpec)

    def __post_init__(self):
        if self.system not in ("lorenz", "henon"):
            raise ArgumentError(f"system must be 'lorenz' or 'henon', got {self.system!r}")
        if not self.horizons or any(int(h) < 1 for h in self.horizons):
            raise ArgumentError("horizons must be a non-empty list of counts >= 1")
        if self.model.kernel not in KERNEL_KINDS:
            raise ArgumentError(f"unknown model kernel {self.model.kernel!r}")
        if self.baseline.kernel not in KERNEL_KINDS:
            raise ArgumentError(f"unknown baseline kernel {self.baseline.kernel!r}")
        if min(self.n_train, self.n_test, self.n_val) < 0:
            raise ArgumentError("split counts must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise ArgumentError("experiment spec must be a mapping")
        _check_keys("spec", doc, {"system", "n_samples", "discard", "dt", "noise_std",
                                  "seed", "system_params", "embedding", "split",
                                  "horizons", "model", "baseline"})
        try:
            embedding = doc.get("embedding", {})
            _check_keys("embedding", embedding, {"dim", "lag"})
            split_doc = doc.get("split", {})
            _check_keys("split", split_doc, {"train", "test", "val"})
            model_doc = dict(doc.get("model", {}))
            _check_keys("model", model_doc, {"k_a", "k_o", "kernel", "rational_z", "train"})
            train_doc = model_doc.pop("train", {})
            baseline_doc = doc.get("baseline", {})
            _check_keys("baseline", baseline_doc, {"enabled", "k", "kernel", "b"})
            return cls(
                system=doc.get("system", "henon"),
                n_samples=int(doc.get("n_samples", 1000)),
                discard=int(doc.get("discard", 0)),
                dt=float(doc.get("dt", 0.01)),
                noise_std=float(doc.get("noise_std", 0.0)),
                seed=int(doc.get("seed", 0)),
                system_params=dict(doc.get("system_params", {})),
                embedding_dim=int(embedding.get("dim", 3)),
                embedding_lag=int(embedding.get("lag", 1)),
                horizons=[int(h) for h in doc.get("horizons", [1])],
                n_train=int(split_doc.get("train", 500)),
                n_test=int(split_doc.get("test", 100)),
                n_val=int(split_doc.get("val", 0)),
                model=ModelSpec(
                    k_a=int(model_doc.get("k_a", 3)),
                    k_o=int(model_doc.get("k_o", 2 * int(model_doc.get("k_a", 3)))),
                    kernel=model_doc.get("kernel", "exponential"),
                    rational_z=float(model_doc.get("rational_z", 1.0)),
                    train=TrainConfig(**train_doc),
                ),
                baseline=BaselineSpec(
                    enabled=bool(baseline_doc.get("enabled", True)),
                    k=int(baseline_doc.get("k", 3)),
                    kernel=baseline_doc.get("kernel", "gaussian"),
                    b=baseline_doc.get("b", 1.0),
                ),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ArgumentError):
                raise
            raise ArgumentError(f"malformed experiment spec: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "n_samples": self.n_samples,
            "discard": self.discard,
            "dt": self.dt,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "system_params": dict(self.system_params),
            "embedding": {"dim": self.embedding_dim, "lag": self.embedding_lag},
            "split": {"train": self.n_train, "test": self.n_test, "val": self.n_val},
            "horizons": list(self.horizons),
            "model": {
                "k_a": self.model.k_a,
                "k_o": self.model.k_o,
                "kernel": self.model.kernel,
                "rational_z": self.model.rational_z,
                "train": asdict(self.model.train),
            },
            "baseline": {
                "enabled": self.baseline.enabled,
                "k": self.baseline.k,
                "kernel": self.baseline.kernel,
                "b": self.baseline.b,
            },
        }


@dataclass
class HorizonResult:
    horizon: int
    n_train: int = 0
    n_test: int = 0
    n_val: int = 0
    belpm: "dict | None" = None
    belpm_slp: "dict | None" = None
    wknn: "dict | None" = None
    history: "LearningHistory | None" = None
    error: "str | None" = None
    train_seconds: "float | None" = None
    predict_seconds: "float | None" = None
    phase2_seconds: "float | None" = None
    baseline_seconds: "float | None" = None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    results: list


def _generate(spec: ExperimentSpec) -> TimeSeries:
    params = spec.system_params
    if spec.system == "lorenz":
        lp = LorenzParams(
            a=float(params.get("a", 10.0)),
            b=float(params.get("b", 28.0)),
            c=float(params.get("c", 8.0 / 3.0)),
            initial_state=tuple(params.get("initial_state", (-15.0, 0.0, 0.0))),
        )
        series = generate_lorenz(lp, dt=spec.dt, n=spec.n_samples, discard=spec.discard)
    else:
        hp = HenonParams(
            a=float(params.get("a", 1.4)),
            b=float(params.get("b", 0.3)),
            initial_state=tuple(params.get("initial_state", (0.0, 0.0))),
        )
        series = generate_henon(hp, n=spec.n_samples, discard=spec.discard, dt=spec.dt)
    return add_noise(series, spec.noise_std, spec.seed)


def _metric_pair(predicted, target) -> dict:
    return {"nmse": nmse(predicted, target), "mse": mse(predicted, target)}


def _baseline_b(spec: ExperimentSpec, train_ds) -> "float | np.ndarray":
    if spec.baseline.b == "heuristic":
        probe = BelpmModel.initialize(train_ds, k_a=spec.baseline.k, k_o=spec.baseline.k,
                                      kernel=Kernel(kind="exponential"))
        b, _ = heuristic_b_init(probe, train_ds)
        return b
    return float(spec.baseline.b)


def _run_horizon(spec: ExperimentSpec, series: TimeSeries, horizon: int) -> HorizonResult:
    result = HorizonResult(horizon=horizon)
    try:
        ds = embed(series, dim=spec.embedding_dim, lag=spec.embedding_lag, horizon=horizon)
        train_ds, test_ds, val_ds = split(ds, spec.n_train, spec.n_test, spec.n_val)
        result.n_train, result.n_test, result.n_val = len(train_ds), len(test_ds), len(val_ds)

        model = BelpmModel.initialize(train_ds, k_a=spec.model.k_a, k_o=spec.model.k_o,
                                      kernel=spec.model.build_kernel())
        t0 = time.perf_counter()
        model, history = train_phase1(model, train_ds, val_ds if len(val_ds) else None,
                                      spec.model.train)
        result.train_seconds = time.perf_counter() - t0
        result.history = history

        if len(test_ds):  # warm-up query excluded from the timed run
            predict_many(model, test_ds.inputs[:1])
        t0 = time.perf_counter()
        flp_predictions = predict_many(model, test_ds.inputs)
        result.predict_seconds = time.perf_counter() - t0
        result.belpm = _metric_pair(flp_predictions, test_ds.targets)

        if spec.model.train.phase2_epochs > 0:
            adapted = copy.deepcopy(model)
            t0 = time.perf_counter()
            adapted, phase2 = train_phase2(adapted, test_ds.inputs, spec.model.train,
                                           targets=test_ds.targets)
            result.phase2_seconds = time.perf_counter() - t0
            result.belpm_slp = _metric_pair(phase2.predictions, test_ds.targets)

        if spec.baseline.enabled:
            kernel = Kernel(kind=spec.baseline.kernel, z=spec.model.rational_z)
            b = _baseline_b(spec, train_ds)
            if len(test_ds):
                wknn_predict(test_ds.inputs[0], train_ds, spec.baseline.k, kernel, b)
            t0 = time.perf_counter()
            baseline_predictions = np.array([
                wknn_predict(x, train_ds, spec.baseline.k, kernel, b)
                for x in test_ds.inputs
            ])
            result.baseline_seconds = time.perf_counter() - t0
            result.wknn = _metric_pair(baseline_predictions, test_ds.targets)
    except BelpmError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run the full protocol for every horizon in the spec.

    Stage failures are captured per horizon (the row keeps whatever stage
    timings completed); the run is fully deterministic for a fixed seed.
    """
    series = _generate(spec)
    results = [_run_horizon(spec, series, int(h)) for h in spec.horizons]
    return ExperimentReport(spec=spec, results=results)


def compare_structures(spec: ExperimentSpec, sweep) -> list:
    """Re-run the spec across neighbor-count structures.

    ``sweep`` entries are (k_a, k_o) pairs or single k values, in which case
    k_o defaults to 2k. A failing structure is marked errored without
    stopping the others.
    """
    sweep = list(sweep)
    if not sweep:
        raise ArgumentError("structure sweep must be non-empty")
    rows = []
    for entry in sweep:
        if isinstance(entry, (tuple, list)):
            if len(entry) != 2:
                raise ArgumentError(f"sweep entries must be k or (k_a, k_o), got {entry!r}")
            k_a, k_o = int(entry[0]), int(entry[1])
        else:
            k_a, k_o = int(entry), 2 * int(entry)
        row = {"k_a": k_a, "k_o": k_o, "results": None, "error": None}
        try:
            variant = ExperimentSpec.from_dict(spec.to_dict())
            variant.model.k_a = k_a
            variant.model.k_o = k_o
            report = run_experiment(variant)
            row["results"] = report_to_dict(report)["results"]
            errors = [r["error"] for r in row["results"] if r["error"]]
            if errors:
                row["error"] = errors[0]
        except BelpmError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _history_dict(history: "LearningHistory | None") -> "dict | None":
    return None if history is None else history.to_dict()


def report_to_dict(report: ExperimentReport) -> dict:
    """Canonical report document. Deterministic: carries no wall-clock data."""
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "spec": report.spec.to_dict(),
        "results": [
            {
                "horizon": row.horizon,
                "n_train": row.n_train,
                "n_test": row.n_test,
                "n_val": row.n_val,
                "belpm": row.belpm,
                "belpm_slp": row.belpm_slp,
                "wknn": row.wknn,
                "history": _history_dict(row.history),
                "error": row.error,
            }
            for row in report.results
        ],
    }


def report_timings(report: ExperimentReport) -> dict:
    """Wall-clock sidecar; separated so report documents stay reproducible."""
    return {
        "results": [
            {
                "horizon": row.horizon,
                "train_seconds": row.train_seconds,
                "predict_seconds": row.predict_seconds,
                "phase2_seconds": row.phase2_seconds,
                "baseline_seconds": row.baseline_seconds,
            }
            for row in report.results
        ],
    }


_METRIC_PAIR_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "required": ["nmse", "mse"],
            "properties": {
                "nmse": {"type": "number", "minimum": 0},
                "mse": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}

_NULLABLE_NUMBERS = {"type": "array", "items": {"type": ["number", "null"]}}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format_version", "spec", "results"],
    "properties": {
        "format_version": {"const": REPORT_FORMAT_VERSION},
        "spec": {"type": "object"},
        "results": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["horizon", "belpm", "belpm_slp", "wknn", "history", "error"],
                "properties": {
                    "horizon": {"type": "integer", "minimum": 1},
                    "n_train": {"type": "integer", "minimum": 0},
                    "n_test": {"type": "integer", "minimum": 0},
                    "n_val": {"type": "integer", "minimum": 0},
                    "belpm": _METRIC_PAIR_SCHEMA,
                    "belpm_slp": _METRIC_PAIR_SCHEMA,
                    "wknn": _METRIC_PAIR_SCHEMA,
                    "history": {
                        "oneOf": [
                            {"type": "null"},
                            {
                                "type": "object",
                                "required": ["loss_a", "loss_o", "train_nmse", "val_nmse"],
                                "properties": {
                                    "loss_a": {"type": "array", "items": {"type": "number"}},
                                    "loss_o": {"type": "array", "items": {"type": "number"}},
                                    "train_nmse": _NULLABLE_NUMBERS,
                                    "val_nmse": _NULLABLE_NUMBERS,
                                    "events": {"type": "array", "items": {"type": "string"}},
                                },
                            },
                        ]
                    },
                    "error": {"type": ["string", "null"]},
                },
            },
        },
    },
    "additionalProperties": False,
}


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, REPORT_SCHEMA)


def dump_report_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_report_dict_files(doc: dict, timings: dict, outdir) -> None:
    """Emit report.json, timings.json, metrics.csv and per-horizon history CSVs
    from canonical documents (the form the HTTP service returns)."""
    import os

    os.makedirs(outdir, exist_ok=True)
    validate_report(doc)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        fh.write(dump_report_json(doc))
    with open(os.path.join(outdir, "timings.json"), "w") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(outdir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["horizon", "belpm_nmse", "belpm_mse", "belpm_slp_nmse",
                         "belpm_slp_mse", "wknn_nmse", "wknn_mse", "error"])
        for row in doc["results"]:
            def pair(m, key):
                return "" if m is None else repr(m[key])
            writer.writerow([
                row["horizon"],
                pair(row["belpm"], "nmse"), pair(row["belpm"], "mse"),
                pair(row["belpm_slp"], "nmse"), pair(row["belpm_slp"], "mse"),
                pair(row["wknn"], "nmse"), pair(row["wknn"], "mse"),
                row["error"] or "",
            ])
    for row in doc["results"]:
        if row["history"] is not None:
            write_history_csv(row["history"],
                              os.path.join(outdir, f"history_h{row['horizon']}.csv"))


def write_report_files(report: ExperimentReport, outdir) -> dict:
    """Emit all report artifacts for an in-memory report; returns its document."""
    doc = report_to_dict(report)
    write_report_dict_files(doc, report_timings(report), outdir)
    return doc


# ---------------------------------------------------------------------------
# Canned spec builders for the benchmark protocols


def make_lorenz_spec(n_train=500, n_test=1400, n_val=0, horizon=30, noise_std=0.0,
                     seed=0, start_second=32.0, epochs=35, phase2_epochs=0,
                     k_a=3, k_o=None) -> ExperimentSpec:
    """Long-horizon Lorenz protocol: a window of the attractor sampled at
    10 ms, prefix-split, direct multi-step targets."""
    k_o = 2 * k_a if k_o is None else k_o
    dim, lag = 3, 1
    n_samples = n_train + n_test + n_val + (dim - 1) * lag + horizon
    return ExperimentSpec(
        system="lorenz",
        n_samples=n_samples,
        discard=int(round(start_second / 0.01)),
        dt=0.01,
        noise_std=noise_std,
        seed=seed,
        embedding_dim=dim,
        embedding_lag=lag,
        horizons=[horizon],
        n_train=n_train,
        n_test=n_test,
        n_val=n_val,
        model=ModelSpec(k_a=k_a, k_o=k_o,
                        train=TrainConfig(epochs=epochs, phase2_epochs=phase2_epochs)),
        baseline=BaselineSpec(enabled=True, k=k_a),
    )


def make_henon_spec(n_train=800, n_test=100, n_val=0, horizon=3, noise_std=0.0,
                    seed=0, start_second=9.0, epochs=35, phase2_epochs=0,
                    k_a=3, k_o=None) -> ExperimentSpec:
    """Short-window Henon protocol (one map iteration counts as 10 ms)."""
    k_o = 2 * k_a if k_o is None else k_o
    dim, lag = 3, 1
    n_samples = n_train + n_test + n_val + (dim - 1) * lag + horizon
    return ExperimentSpec(
        system="henon",
        n_samples=n_samples,
        discard=int(round(start_second / 0.01)),
        dt=0.01,
        noise_std=noise_std,
        seed=seed,
        embedding_dim=dim,
        embedding_lag=lag,
        horizons=[horizon],
        n_train=n_train,
        n_test=n_test,
        n_val=n_val,
        model=ModelSpec(k_a=k_a, k_o=k_o,
                        train=TrainConfig(epochs=epochs, phase2_epochs=phase2_epochs)),
        baseline=BaselineSpec(enabled=True, k=k_a),
    )
