"""Command line client.

Every subcommand is a thin client of the HTTP service: it reads local files,
sends one request, and writes the response back to disk. By default the
request is routed through the ASGI app in-process (no listener, no network,
fully deterministic); pass ``--server URL`` to talk to a running instance
started with ``belpm serve``.

Exit codes: 0 success, 2 argument/configuration errors, 3 numeric failures,
1 anything unexpected.
"""
from __future__ import annotations

import argparse
import asyncio
import csv
import json
import sys

import httpx
import numpy as np

from .errors import ArgumentError, BelpmError, NumericError
from .harness import write_report_dict_files
from .learning import write_history_csv
from .series import (
    EmbeddedDataset,
    TimeSeries,
    read_dataset_csv,
    read_series_csv,
    write_dataset_csv,
    write_series_csv,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_ARGUMENT = 2
EXIT_NUMERIC = 3


class ClientError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class ServiceClient:
    """Posts JSON payloads either in-process (default) or to a remote server."""

    def __init__(self, server: str | None = None):
        self._server = server
        self._app = None

    def post(self, path: str, payload: dict) -> dict:
        if self._server:
            with httpx.Client(base_url=self._server, timeout=600.0) as client:
                response = client.post(path, json=payload)
        else:
            if self._app is None:
                from .service import create_app

                self._app = create_app()
            response = asyncio.run(self._post_asgi(path, payload))
        return self._unwrap(response)

    async def _post_asgi(self, path: str, payload: dict) -> httpx.Response:
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(transport=transport, base_url="http://belpm.local",
                                     timeout=600.0) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _unwrap(response: httpx.Response) -> dict:
        if response.status_code == 200:
            return response.json()
        try:
            detail = response.json().get("detail")
        except (ValueError, AttributeError):
            detail = None
        if isinstance(detail, dict) and "kind" in detail:
            kind, message = detail["kind"], detail.get("message", "")
            code = {"argument": EXIT_ARGUMENT, "numeric": EXIT_NUMERIC}.get(kind, EXIT_INTERNAL)
            raise ClientError(f"{kind} error: {message}", code)
        if response.status_code == 422:
            raise ClientError(f"invalid request: {detail}", EXIT_ARGUMENT)
        raise ClientError(f"service error (HTTP {response.status_code}): {detail}",
                          EXIT_INTERNAL)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ClientError(f"{path}: invalid JSON ({exc})", EXIT_ARGUMENT) from exc


def _dataset_payload(ds: EmbeddedDataset) -> dict:
    return {"inputs": ds.inputs.tolist(), "targets": ds.targets.tolist(),
            "lag": ds.lag, "horizon": ds.horizon}


def _read_inputs_csv(path):
    """Input rows for prediction; a trailing 'target' column is ignored."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ArgumentError(f"{path}: empty CSV")
        drop_last = header[-1].strip() == "target"
        width = len(header) - (1 if drop_last else 0)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row[:width]])
            except ValueError as exc:
                raise ArgumentError(f"{path}:{lineno}: bad input row: {exc}") from exc
    if not rows:
        raise ArgumentError(f"{path}: no input rows")
    return rows


def _read_metric_column(path):
    """Last column of a CSV with a header row (prediction or series files)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        try:
            values = [float(row[-1]) for row in reader if row]
        except ValueError as exc:
            raise ArgumentError(f"{path}: non-numeric value column: {exc}") from exc
    if not values:
        raise ArgumentError(f"{path}: no values found")
    return values


def _write_predictions_csv(predictions, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "prediction"])
        for i, value in enumerate(predictions):
            writer.writerow([i, repr(float(value))])


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_generate(client: ServiceClient, args) -> int:
    payload = {"system": args.system, "n": args.n, "dt": args.dt,
               "noise_std": args.noise_std, "seed": args.seed, "discard": args.discard}
    if args.params:
        payload["params"] = _load_json(args.params)
    doc = client.post("/series/generate", payload)
    series = TimeSeries(values=np.asarray(doc["values"]), dt=doc["dt"],
                        origin_time=doc["origin_time"])
    write_series_csv(series, args.out)
    print(f"wrote {len(series)} samples to {args.out}")
    return EXIT_OK


def _cmd_embed(client: ServiceClient, args) -> int:
    series = read_series_csv(args.series)
    doc = client.post("/series/embed", {
        "values": series.values.tolist(), "dt": series.dt,
        "origin_time": series.origin_time,
        "dim": args.dim, "lag": args.lag, "horizon": args.horizon,
    })
    ds = EmbeddedDataset(inputs=np.asarray(doc["inputs"]), targets=np.asarray(doc["targets"]),
                         dim=args.dim, lag=doc["lag"], horizon=doc["horizon"])
    write_dataset_csv(ds, args.out)
    print(f"wrote {len(ds)} pairs to {args.out}")
    return EXIT_OK


def _cmd_train(client: ServiceClient, args) -> int:
    ds = read_dataset_csv(args.data)
    payload = {"data": _dataset_payload(ds), "config": _load_json(args.config)}
    if args.val_data:
        payload["validation"] = _dataset_payload(read_dataset_csv(args.val_data))
    doc = client.post("/models/train", payload)
    with open(args.model_out, "w") as fh:
        json.dump(doc["model"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.history_out:
        write_history_csv(doc["history"], args.history_out)
    print(f"wrote trained model to {args.model_out}")
    return EXIT_OK


def _cmd_predict(client: ServiceClient, args) -> int:
    inputs = _read_inputs_csv(args.data)
    if args.method == "wknn":
        if not args.train_data:
            raise ClientError("--train-data is required for --method wknn", EXIT_ARGUMENT)
        ds = read_dataset_csv(args.train_data)
        doc = client.post("/wknn/predict", {
            "train": _dataset_payload(ds), "inputs": inputs,
            "k": args.k, "kernel": args.kernel, "b": args.b,
        })
    else:
        if not args.model:
            raise ClientError("--model is required for --method belpm", EXIT_ARGUMENT)
        doc = client.post("/models/predict", {"model": _load_json(args.model),
                                              "inputs": inputs})
    _write_predictions_csv(doc["predictions"], args.out)
    print(f"wrote {len(doc['predictions'])} predictions to {args.out}")
    return EXIT_OK


def _cmd_adapt(client: ServiceClient, args) -> int:
    ds = read_dataset_csv(args.data)
    payload = {"model": _load_json(args.model), "inputs": ds.inputs.tolist(),
               "targets": ds.targets.tolist(), "config": _load_json(args.config)}
    doc = client.post("/models/adapt", payload)
    with open(args.model_out, "w") as fh:
        json.dump(doc["model"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.out:
        _write_predictions_csv(doc["predictions"], args.out)
    print(f"wrote adapted model to {args.model_out}")
    return EXIT_OK


def _cmd_evaluate(client: ServiceClient, args) -> int:
    doc = client.post("/evaluate", {"predicted": _read_metric_column(args.pred),
                                    "target": _read_metric_column(args.target)})
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_benchmark(client: ServiceClient, args) -> int:
    doc = client.post("/benchmark", {"spec": _load_json(args.spec)})
    write_report_dict_files(doc["report"], doc["timings"], args.out)
    failures = [row for row in doc["report"]["results"] if row["error"]]
    for row in doc["report"]["results"]:
        if row["error"]:
            print(f"horizon {row['horizon']}: ERROR {row['error']}", file=sys.stderr)
        else:
            line = f"horizon {row['horizon']}: belpm nmse={row['belpm']['nmse']:.6g}"
            if row["belpm_slp"]:
                line += f" slp={row['belpm_slp']['nmse']:.6g}"
            if row["wknn"]:
                line += f" wknn={row['wknn']['nmse']:.6g}"
            print(line)
    print(f"report written to {args.out}")
    if failures:
        error_type = failures[0]["error"].split(":", 1)[0]
        if error_type in ("ArgumentError", "UnsupportedKernelError"):
            return EXIT_ARGUMENT
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_serve(client: ServiceClient, args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from . import __version__

    parser = argparse.ArgumentParser(prog="belpm",
                                     description="Chaotic series forecasting client")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a benchmark series as CSV")
    p.add_argument("--system", required=True, choices=["lorenz", "henon"])
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--discard", type=int, default=0)
    p.add_argument("--params", default=None, help="JSON file with system coefficients")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("embed", help="delay-embed a series CSV into a dataset CSV")
    p.add_argument("--series", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("train", help="phase-1 train a model on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="JSON file with flat config keys")
    p.add_argument("--val-data", default=None)
    p.add_argument("--model-out", required=True)
    p.add_argument("--history-out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict targets for input rows")
    p.add_argument("--method", choices=["belpm", "wknn"], default="belpm")
    p.add_argument("--model", default=None, help="model JSON (belpm method)")
    p.add_argument("--train-data", default=None, help="training dataset CSV (wknn method)")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--kernel", default="rank",
                   choices=["gaussian", "inversion", "rank", "exponential", "rational"])
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("adapt", help="phase-2 online adaptation over a dataset CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--out", default=None, help="optional predictions CSV")
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("evaluate", help="NMSE/MSE of predictions against targets")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("benchmark", help="run an experiment spec and write reports")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = ServiceClient(args.server)
    try:
        return args.func(client, args)
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except BelpmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service ({exc})", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
