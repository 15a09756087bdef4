"""Chaotic benchmark series, noise injection, delay embedding and splits.

Generators produce the x-component of the Lorenz and Henon systems on a
uniform sampling grid. Delay embedding turns a series into supervised
(input vector, scalar target) pairs for one fixed prediction horizon.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, GenerationError

# State magnitude beyond which a trajectory is declared divergent.
DIVERGENCE_LIMIT = 1e6

# The Henon map has no intrinsic time step; one iteration counts as 0.01 s
# so that second-based data windows translate to 100 samples per second.
HENON_DT = 0.01


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar sequence."""

    values: np.ndarray
    dt: float
    origin_time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ArgumentError("time series must be a 1-D sequence with at least one sample")
        if not self.dt > 0:
            raise ArgumentError(f"sampling period must be positive, got {self.dt}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("time series values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.origin_time + self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class LorenzParams:
    a: float = 10.0
    b: float = 28.0
    c: float = 8.0 / 3.0
    initial_state: tuple[float, float, float] = (-15.0, 0.0, 0.0)


@dataclass(frozen=True)
class HenonParams:
    a: float = 1.4
    b: float = 0.3
    initial_state: tuple[float, float] = (0.0, 0.0)


def lorenz_derivative(state, params: LorenzParams):
    """Time derivative (dx, dy, dz) of the Lorenz system at ``state``."""
    x, y, z = state
    return (
        params.a * (y - x),
        params.b * x - y - x * z,
        x * y - params.c * z,
    )


def _rk4_step(state: np.ndarray, dt: float, params: LorenzParams) -> np.ndarray:
    k1 = np.asarray(lorenz_derivative(state, params))
    k2 = np.asarray(lorenz_derivative(state + 0.5 * dt * k1, params))
    k3 = np.asarray(lorenz_derivative(state + 0.5 * dt * k2, params))
    k4 = np.asarray(lorenz_derivative(state + dt * k3, params))
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def generate_lorenz(params: LorenzParams, dt: float, n: int, discard: int = 0) -> TimeSeries:
    """Integrate the Lorenz system with classical RK4 and sample x every ``dt``.

    ``discard`` initial samples are generated and dropped (warm-up), so the
    returned series starts at time ``discard * dt``.
    """
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    if n < 1:
        raise ArgumentError(f"sample count must be >= 1, got {n}")
    if discard < 0:
        raise ArgumentError(f"discard must be >= 0, got {discard}")
    state = np.asarray(params.initial_state, dtype=float)
    total = discard + n
    xs = np.empty(total)
    xs[0] = state[0]
    for i in range(1, total):
        state = _rk4_step(state, dt, params)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > DIVERGENCE_LIMIT:
            raise GenerationError(f"lorenz trajectory diverged at step {i}")
        xs[i] = state[0]
    return TimeSeries(values=xs[discard:], dt=dt, origin_time=discard * dt)


def henon_step(state, params: HenonParams):
    """One iteration of the Henon map."""
    x, y = state
    return (1.0 - params.a * x * x + y, params.b * x)


def generate_henon(params: HenonParams, n: int, discard: int = 0, dt: float = HENON_DT) -> TimeSeries:
    """Iterate the Henon map and return the x-sequence."""
    if n < 1:
        raise ArgumentError(f"sample count must be >= 1, got {n}")
    if discard < 0:
        raise ArgumentError(f"discard must be >= 0, got {discard}")
    state = params.initial_state
    total = discard + n
    xs = np.empty(total)
    xs[0] = state[0]
    for i in range(1, total):
        state = henon_step(state, params)
        if not all(np.isfinite(state)) or max(abs(state[0]), abs(state[1])) > DIVERGENCE_LIMIT:
            raise GenerationError(f"henon trajectory diverged at step {i}")
        xs[i] = state[0]
    return TimeSeries(values=xs[discard:], dt=dt, origin_time=discard * dt)


def add_noise(series: TimeSeries, std: float, seed: int) -> TimeSeries:
    """Add i.i.d. zero-mean Gaussian noise. ``std == 0`` returns the input."""
    if std < 0:
        raise ArgumentError(f"noise standard deviation must be >= 0, got {std}")
    if std == 0:
        return series
    rng = np.random.default_rng(seed)
    noisy = series.values + rng.normal(0.0, std, size=len(series))
    return TimeSeries(values=noisy, dt=series.dt, origin_time=series.origin_time)


@dataclass(frozen=True)
class EmbeddedDataset:
    """Delay-embedded (input, target) pairs for one prediction horizon.

    Input j is ``[x(t), x(t-L), ..., x(t-(R-1)L)]`` (most recent sample
    first) and its target is ``x(t+h)``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    dim: int
    lag: int
    horizon: int

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if self.dim < 1 or self.lag < 1 or self.horizon < 1:
            raise ArgumentError("dim, lag and horizon must all be >= 1")
        if inputs.ndim != 2 or inputs.shape[1] != self.dim:
            raise ArgumentError(f"inputs must have shape (n, {self.dim})")
        if targets.ndim != 1 or len(targets) != len(inputs):
            raise ArgumentError("inputs and targets must have equal length")
        inputs = inputs.copy()
        targets = targets.copy()
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return len(self.targets)


def embed(series: TimeSeries, dim: int, lag: int = 1, horizon: int = 1) -> EmbeddedDataset:
    """Delay-embed ``series`` into supervised pairs, preserving temporal order."""
    if dim < 1 or lag < 1 or horizon < 1:
        raise ArgumentError("dim, lag and horizon must all be >= 1")
    min_length = (dim - 1) * lag + horizon + 1
    if len(series) < min_length:
        raise ArgumentError(
            f"series of length {len(series)} too short to embed with dim={dim}, "
            f"lag={lag}, horizon={horizon}; minimum length is {min_length}"
        )
    x = series.values
    n_pairs = len(x) - (dim - 1) * lag - horizon
    t0 = (dim - 1) * lag
    cols = [x[t0 - r * lag : t0 - r * lag + n_pairs] for r in range(dim)]
    inputs = np.stack(cols, axis=1)
    targets = x[t0 + horizon : t0 + horizon + n_pairs]
    return EmbeddedDataset(inputs=inputs, targets=targets, dim=dim, lag=lag, horizon=horizon)


def _take(ds: EmbeddedDataset, start: int, stop: int) -> EmbeddedDataset:
    return EmbeddedDataset(
        inputs=ds.inputs[start:stop],
        targets=ds.targets[start:stop],
        dim=ds.dim,
        lag=ds.lag,
        horizon=ds.horizon,
    )


def split(ds: EmbeddedDataset, n_train: int, n_test: int, n_val: int):
    """Contiguous prefix split into (train, test, validation)."""
    if min(n_train, n_test, n_val) < 0:
        raise ArgumentError("split counts must be >= 0")
    needed = n_train + n_test + n_val
    if needed > len(ds):
        raise ArgumentError(
            f"split counts {n_train}+{n_test}+{n_val}={needed} exceed dataset size {len(ds)}"
        )
    train = _take(ds, 0, n_train)
    test = _take(ds, n_train, n_train + n_test)
    val = _take(ds, n_train + n_test, needed)
    return train, test, val


def write_series_csv(series: TimeSeries, path) -> None:
    """Persist a series as two-column ``t,value`` CSV with a header row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for t, v in zip(series.times, series.values):
            writer.writerow([repr(float(t)), repr(float(v))])


def read_series_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t", "value"]:
            raise ArgumentError(f"{path}: expected a 't,value' header row")
        times, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ArgumentError(f"{path}:{lineno}: bad series row: {exc}") from exc
    if len(values) < 1:
        raise ArgumentError(f"{path}: series contains no samples")
    if len(times) > 1:
        steps = np.diff(times)
        dt = float(steps[0])
        if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise ArgumentError(f"{path}: series is not uniformly sampled")
    else:
        dt = HENON_DT
    return TimeSeries(values=np.asarray(values), dt=dt, origin_time=times[0])


def write_dataset_csv(ds: EmbeddedDataset, path) -> None:
    """Persist a dataset as CSV: R input columns (most recent first), then target."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"i{r}" for r in range(ds.dim)] + ["target"])
        for row, target in zip(ds.inputs, ds.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def read_dataset_csv(path, lag: int = 1, horizon: int = 1) -> EmbeddedDataset:
    """Read a dataset CSV (input columns then a final ``target`` column)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[-1].strip() != "target":
            raise ArgumentError(f"{path}: expected input columns followed by a 'target' column")
        dim = len(header) - 1
        inputs, targets = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ArgumentError(f"{path}:{lineno}: row has {len(row)} columns, "
                                    f"expected {dim + 1}")
            try:
                inputs.append([float(v) for v in row[:dim]])
                targets.append(float(row[dim]))
            except ValueError as exc:
                raise ArgumentError(f"{path}:{lineno}: bad dataset row: {exc}") from exc
    return EmbeddedDataset(
        inputs=np.asarray(inputs, dtype=float).reshape(len(targets), dim),
        targets=np.asarray(targets),
        dim=dim,
        lag=lag,
        horizon=horizon,
    )
