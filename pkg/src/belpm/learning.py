"""Two-phase training.

Phase 1 is offline and hybrid: the eight linear weights are fitted by least
squares while the per-rank kernel parameters descend the punishment losses
by steepest descent (four method variants select which half runs). Phase 2
is online: as unlabeled queries stream in, the kernel parameters keep
adapting against the model's own output, with linear weights frozen.

All heavy per-epoch work runs on cached neighbor tables: training-set
distances never change during training, only kernel parameters and weights
do.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, UndefinedMetricError, UnsupportedKernelError
from .kernels import EPSILON, RANK, Kernel, grad_b, weights
from .metrics import nmse
from .network import BelpmModel, ForwardTrace, TrainingMemory, belpm_predict, predict_many
from .series import EmbeddedDataset

SD_ALL = "sd_all"
SD_NONLINEAR_LSE_INIT = "sd_nonlinear_lse_init"
LSE_LINEAR_HEURISTIC_KERNEL = "lse_linear_heuristic_kernel"
HYBRID_SD_LSE = "hybrid_sd_lse"
TRAIN_METHODS = (SD_ALL, SD_NONLINEAR_LSE_INIT, LSE_LINEAR_HEURISTIC_KERNEL, HYBRID_SD_LSE)

_METHODS_WITH_SD = (SD_ALL, SD_NONLINEAR_LSE_INIT, HYBRID_SD_LSE)
_METHODS_WITH_EPOCH_LSE = (LSE_LINEAR_HEURISTIC_KERNEL, HYBRID_SD_LSE)

RIDGE_LAMBDA = 1e-8


@dataclass
class TrainConfig:
    method: str = HYBRID_SD_LSE
    epochs: int = 35
    eta_a0: float = 0.05
    eta_o0: float = 0.05
    mode: str = "batch"
    b_init: "str | float" = "heuristic"
    phase2_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in TRAIN_METHODS:
            raise ArgumentError(f"unknown training method {self.method!r}; choose from {TRAIN_METHODS}")
        if self.epochs < 0 or self.phase2_epochs < 0:
            raise ArgumentError("epoch counts must be >= 0")
        if not (self.eta_a0 > 0 and self.eta_o0 > 0):
            raise ArgumentError("learning rates must be positive")
        if self.mode not in ("batch", "online"):
            raise ArgumentError(f"mode must be 'batch' or 'online', got {self.mode!r}")
        if isinstance(self.b_init, str):
            if self.b_init != "heuristic":
                raise ArgumentError(f"b_init must be 'heuristic' or a number, got {self.b_init!r}")
        else:
            try:
                finite = np.isfinite(float(self.b_init))
            except (TypeError, ValueError) as exc:
                raise ArgumentError(f"b_init must be 'heuristic' or a number, "
                                    f"got {self.b_init!r}") from exc
            if not finite:
                raise ArgumentError("constant b_init must be finite")


@dataclass
class LearningHistory:
    """Per-epoch phase-1 record plus noteworthy events (ridge fallbacks,
    rejected steps)."""

    loss_a: list = field(default_factory=list)
    loss_o: list = field(default_factory=list)
    train_nmse: list = field(default_factory=list)
    val_nmse: list = field(default_factory=list)
    b_a_snapshots: list = field(default_factory=list)
    b_o_snapshots: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss_a)

    def to_dict(self) -> dict:
        return {
            "loss_a": list(self.loss_a),
            "loss_o": list(self.loss_o),
            "train_nmse": list(self.train_nmse),
            "val_nmse": list(self.val_nmse),
            "events": list(self.events),
        }


def write_history_csv(history, path) -> None:
    """Write the per-epoch record as CSV; accepts a LearningHistory or its dict."""
    doc = history.to_dict() if hasattr(history, "to_dict") else history
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss_a", "loss_o", "train_nmse", "val_nmse"])
        for e in range(len(doc["loss_a"])):
            writer.writerow([
                e,
                repr(doc["loss_a"][e]),
                repr(doc["loss_o"][e]),
                "" if doc["train_nmse"][e] is None else repr(doc["train_nmse"][e]),
                "" if doc["val_nmse"][e] is None else repr(doc["val_nmse"][e]),
            ])


# ---------------------------------------------------------------------------
# Cached neighbor tables


@dataclass
class NeighborCache:
    """Fixed per-training-set tables: neighbor indices, distances, targets.

    Distances depend only on the stored samples, so they survive any number
    of parameter updates.
    """

    bl_idx: np.ndarray
    bl_dist: np.ndarray
    bl_targets: np.ndarray
    mo_idx: np.ndarray
    mo_dist: np.ndarray


def build_neighbor_cache(model: BelpmModel) -> NeighborCache:
    # Both tables are leave-one-out: a training sample at distance zero from
    # itself would otherwise dominate its own response and leak the stored
    # value into the weight fits.
    memory = model.memory
    s, th, n = memory.s_u, memory.th_u, len(memory)
    d_cx = np.empty((n, n))
    d_th = np.empty((n, n))
    for i in range(n):
        d_cx[i] = np.linalg.norm(s - s[i], axis=1)
        d_th[i] = np.linalg.norm(th - th[i], axis=1)
    d_bl = d_cx + d_th
    np.fill_diagonal(d_bl, np.inf)
    np.fill_diagonal(d_cx, np.inf)
    bl_order = np.argsort(d_bl, axis=1, kind="stable")[:, : model.k_a]
    mo_order = np.argsort(d_cx, axis=1, kind="stable")[:, : model.k_o]
    return NeighborCache(
        bl_idx=bl_order,
        bl_dist=np.take_along_axis(d_bl, bl_order, axis=1),
        bl_targets=memory.r_u[bl_order],
        mo_idx=mo_order,
        mo_dist=np.take_along_axis(d_cx, mo_order, axis=1),
    )


def _kernel_rows(kernel: Kernel, dist: np.ndarray, b: np.ndarray):
    """Layer-1 kernel matrix plus row sums, normalized rows and degeneracy mask."""
    n1 = weights(kernel, dist) if kernel.kind == RANK else weights(kernel, dist, b)
    sums = n1.sum(axis=1)
    degenerate = (sums < EPSILON) | ~np.isfinite(sums)
    k = dist.shape[1]
    safe = np.where(degenerate, 1.0, sums)
    n2 = np.where(degenerate[:, None], 1.0 / k, n1 / safe[:, None])
    return n1, sums, n2, degenerate


@dataclass
class BatchEval:
    """Responses of every training sample at one parameter state."""

    cache: NeighborCache
    r_a: np.ndarray
    r_o: np.ndarray
    r: np.ndarray
    n1_a: np.ndarray
    sum_a: np.ndarray
    deg_a: np.ndarray
    n1_o: np.ndarray
    sum_o: np.ndarray
    deg_o: np.ndarray
    mo_pe: np.ndarray


def batch_responses(model: BelpmModel, cache: NeighborCache | None = None) -> BatchEval:
    """Leave-one-out primary responses, refreshed expected punishments, and
    secondary plus combined responses for the whole training set."""
    if cache is None:
        cache = build_neighbor_cache(model)
    memory = model.memory
    n1_a, sum_a, n2_a, deg_a = _kernel_rows(model.kernel, cache.bl_dist, model.b_a)
    r_a = (n2_a * cache.bl_targets).sum(axis=1)
    memory.p_a_e = memory.r_u - r_a
    mo_pe = memory.p_a_e[cache.mo_idx]
    n1_o, sum_o, n2_o, deg_o = _kernel_rows(model.kernel, cache.mo_dist, model.b_o)
    r_o = (n2_o * mo_pe).sum(axis=1)
    r = model.w[0] * r_a + model.w[1] * r_o + model.w[2]
    return BatchEval(cache=cache, r_a=r_a, r_o=r_o, r=r,
                     n1_a=n1_a, sum_a=sum_a, deg_a=deg_a,
                     n1_o=n1_o, sum_o=sum_o, deg_o=deg_o, mo_pe=mo_pe)


def combined_response(model: BelpmModel, ev: BatchEval) -> np.ndarray:
    return model.w[0] * ev.r_a + model.w[1] * ev.r_o + model.w[2]


def punishments(model: BelpmModel, ev: BatchEval):
    """Phase-1 punishment vectors at the model's current weights."""
    r_u = model.memory.r_u
    p_a = model.w_a[0] * r_u + model.w_a[1] * ev.r_a + model.w_a[2]
    p_o = model.w_o[0] * ev.r_o + model.w_o[1]
    return p_a, p_o


# ---------------------------------------------------------------------------
# Least squares


def _lse_solve(a: np.ndarray, y: np.ndarray):
    """Normal-equations solve with a Tikhonov fallback on rank deficiency."""
    gram = a.T @ a
    rhs = a.T @ y
    ridge_used = np.linalg.matrix_rank(a) < a.shape[1]
    if not ridge_used:
        try:
            coef = np.linalg.solve(gram, rhs)
            if not np.all(np.isfinite(coef)):
                ridge_used = True
        except np.linalg.LinAlgError:
            ridge_used = True
    if ridge_used:
        coef = np.linalg.solve(gram + RIDGE_LAMBDA * np.eye(a.shape[1]), rhs)
    return coef, ridge_used


def _design(*columns):
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = len(cols[0])
    if any(c.shape != (n,) for c in cols):
        raise ArgumentError("design columns must be equal-length 1-D vectors")
    return np.column_stack(cols + [np.ones(n)])


def lse_fit_w(r_a, r_o, r_u):
    """Fit the combiner weights: design [r_a | r_o | 1], target r_u."""
    a = _design(r_a, r_o)
    if len(a) < a.shape[1]:
        raise ArgumentError(f"need at least {a.shape[1]} samples to fit w, got {len(a)}")
    return _lse_solve(a, np.asarray(r_u, dtype=float))


def lse_fit_wa(r_u, r_a, p_a_e):
    """Fit the punishment weights: design [r_u | r_a | 1], target p_a_e."""
    a = _design(r_u, r_a)
    if len(a) < a.shape[1]:
        raise ArgumentError(f"need at least {a.shape[1]} samples to fit w_a, got {len(a)}")
    return _lse_solve(a, np.asarray(p_a_e, dtype=float))


def lse_fit_wo(r_o, p_o_e):
    """Fit the secondary punishment weights: design [r_o | 1], target p_o_e."""
    a = _design(r_o)
    if len(a) < a.shape[1]:
        raise ArgumentError(f"need at least {a.shape[1]} samples to fit w_o, got {len(a)}")
    return _lse_solve(a, np.asarray(p_o_e, dtype=float))


# ---------------------------------------------------------------------------
# Steepest descent


def heuristic_b_init(model: BelpmModel, ds: EmbeddedDataset | None = None):
    """Scale kernel parameters so that (typical distance) * b is about one.

    b[m] is the reciprocal of the mean distance to the m-th leave-one-out
    nearest neighbor in input space, shared between both network halves.
    """
    x = model.memory.s_u if ds is None else np.asarray(ds.inputs, dtype=float)
    n = len(x)
    k_max = max(model.k_a, model.k_o)
    if k_max > n - 1:
        raise ArgumentError(f"need at least {k_max + 1} samples for the heuristic, got {n}")
    d = np.empty((n, n))
    for i in range(n):
        d[i] = np.linalg.norm(x - x[i], axis=1)
    np.fill_diagonal(d, np.inf)
    d.sort(axis=1)
    mean_rank_dist = d[:, :k_max].mean(axis=0)
    b = 1.0 / (mean_rank_dist + EPSILON)
    return b[: model.k_a].copy(), b[: model.k_o].copy()


def loss_gradients(model: BelpmModel, ev: BatchEval):
    """Exact gradients of the quadratic punishment losses.

    Returns (d loss_a / d b_a, d loss_o / d b_o) where loss = 0.5 * ||p||^2
    over the batch. Each parameter b[m] reaches the response only through
    its own layer-1 node, so the normalization quotient differentiates to
    K'_b(d_m) * (stored_value_m - response) / sum(layer1).
    """
    if not model.kernel.is_parametric:
        raise UnsupportedKernelError(
            f"kernel {model.kernel.kind!r} has no trainable parameter"
        )
    p_a, p_o = punishments(model, ev)
    cache = ev.cache

    dk_a = grad_b(model.kernel, cache.bl_dist, model.b_a)
    coeff_a = np.where(ev.deg_a, 0.0, model.w_a[1] * p_a / np.where(ev.deg_a, 1.0, ev.sum_a))
    g_a = (coeff_a[:, None] * dk_a * (cache.bl_targets - ev.r_a[:, None])).sum(axis=0)

    dk_o = grad_b(model.kernel, cache.mo_dist, model.b_o)
    coeff_o = np.where(ev.deg_o, 0.0, model.w_o[0] * p_o / np.where(ev.deg_o, 1.0, ev.sum_o))
    g_o = (coeff_o[:, None] * dk_o * (ev.mo_pe - ev.r_o[:, None])).sum(axis=0)
    return g_a, g_o


@dataclass
class SdStepResult:
    b_a: np.ndarray
    b_o: np.ndarray
    grad_a: np.ndarray
    grad_o: np.ndarray
    rejected_a: bool
    rejected_o: bool


def sd_step(model: BelpmModel, ev: BatchEval, eta_a: float, eta_o: float) -> SdStepResult:
    """One steepest-descent step on the kernel parameters.

    A non-finite gradient leaves the corresponding parameter block untouched
    and reports the rejection so the caller can shrink its rate.
    """
    g_a, g_o = loss_gradients(model, ev)
    rejected_a = not np.all(np.isfinite(g_a))
    rejected_o = not np.all(np.isfinite(g_o))
    if not rejected_a:
        model.b_a = model.b_a - eta_a * g_a
    if not rejected_o:
        model.b_o = model.b_o - eta_o * g_o
    return SdStepResult(b_a=model.b_a, b_o=model.b_o, grad_a=g_a, grad_o=g_o,
                        rejected_a=rejected_a, rejected_o=rejected_o)


def _step_rate(eta0: float, p: np.ndarray) -> float:
    # Rate shrinks as the mean squared punishment grows, damping steps when
    # the model is far off.
    n = max(len(np.atleast_1d(p)), 1)
    return eta0 / (1.0 + float(np.sum(np.square(p))) / n)


def _safe_nmse(predicted, target):
    try:
        value = nmse(predicted, target)
    except (ArgumentError, UndefinedMetricError):
        return None
    return value if np.isfinite(value) else None


def _fit_linear_weights(model: BelpmModel, ev: BatchEval, history: LearningHistory, tag: str):
    r_u = model.memory.r_u
    model.w, ridge_w = lse_fit_w(ev.r_a, ev.r_o, r_u)
    r = combined_response(model, ev)
    model.w_a, ridge_wa = lse_fit_wa(r_u, ev.r_a, model.memory.p_a_e)
    model.w_o, ridge_wo = lse_fit_wo(ev.r_o, r_u - r)
    for name, flag in (("w", ridge_w), ("w_a", ridge_wa), ("w_o", ridge_wo)):
        if flag:
            history.events.append(f"{tag}: ridge fallback in {name} fit")


def _sd_linear_weights(model: BelpmModel, ev: BatchEval, eta_a: float, eta_o: float):
    """Gradient step on the linear weights against the same least-squares
    objectives the LSE variant solves in closed form."""
    r_u = model.memory.r_u
    r = combined_response(model, ev)
    p_a, p_o = punishments(model, ev)
    p_a_e = model.memory.p_a_e
    p_o_e = r_u - r
    g_w = np.array([
        np.dot(r - r_u, ev.r_a), np.dot(r - r_u, ev.r_o), np.sum(r - r_u),
    ])
    g_wa = np.array([
        np.dot(p_a - p_a_e, r_u), np.dot(p_a - p_a_e, ev.r_a), np.sum(p_a - p_a_e),
    ])
    g_wo = np.array([np.dot(p_o - p_o_e, ev.r_o), np.sum(p_o - p_o_e)])
    if np.all(np.isfinite(g_w)):
        model.w = model.w - eta_a * g_w
    if np.all(np.isfinite(g_wa)):
        model.w_a = model.w_a - eta_a * g_wa
    if np.all(np.isfinite(g_wo)):
        model.w_o = model.w_o - eta_o * g_wo


def _online_sweep(model: BelpmModel, ev: BatchEval, eta_a0: float, eta_o0: float,
                  history: LearningHistory, epoch: int):
    """Per-sample steepest descent over the training set in temporal order.

    Returns the (possibly halved) base learning rates.
    """
    cache = ev.cache
    r_u = model.memory.r_u
    pe = model.memory.p_a_e
    for j in range(len(r_u)):
        n1_a = (weights(model.kernel, cache.bl_dist[j])
                if model.kernel.kind == RANK
                else weights(model.kernel, cache.bl_dist[j], model.b_a))
        sum_a = float(n1_a.sum())
        if sum_a >= EPSILON and np.isfinite(sum_a):
            r_a = float(np.dot(n1_a, cache.bl_targets[j]) / sum_a)
            p_a = model.w_a[0] * r_u[j] + model.w_a[1] * r_a + model.w_a[2]
            dk = grad_b(model.kernel, cache.bl_dist[j], model.b_a)
            g = model.w_a[1] * p_a * dk * (cache.bl_targets[j] - r_a) / sum_a
            if np.all(np.isfinite(g)):
                model.b_a = model.b_a - _step_rate(eta_a0, np.array([p_a])) * g
            else:
                eta_a0 *= 0.5
                history.events.append(f"epoch {epoch} sample {j}: non-finite b_a "
                                      f"gradient, step rejected, eta_a halved to {eta_a0:g}")
        n1_o = (weights(model.kernel, cache.mo_dist[j])
                if model.kernel.kind == RANK
                else weights(model.kernel, cache.mo_dist[j], model.b_o))
        sum_o = float(n1_o.sum())
        if sum_o >= EPSILON and np.isfinite(sum_o):
            pe_row = pe[cache.mo_idx[j]]
            r_o = float(np.dot(n1_o, pe_row) / sum_o)
            p_o = model.w_o[0] * r_o + model.w_o[1]
            dk = grad_b(model.kernel, cache.mo_dist[j], model.b_o)
            g = model.w_o[0] * p_o * dk * (pe_row - r_o) / sum_o
            if np.all(np.isfinite(g)):
                model.b_o = model.b_o - _step_rate(eta_o0, np.array([p_o])) * g
            else:
                eta_o0 *= 0.5
                history.events.append(f"epoch {epoch} sample {j}: non-finite b_o "
                                      f"gradient, step rejected, eta_o halved to {eta_o0:g}")
    return eta_a0, eta_o0


def train_phase1(model: BelpmModel, train_ds: EmbeddedDataset | None,
                 val_ds: EmbeddedDataset | None, config: TrainConfig):
    """Offline hybrid training. Returns the trained model and its history."""
    if config.method in _METHODS_WITH_SD and not model.kernel.is_parametric:
        raise UnsupportedKernelError(
            f"method {config.method!r} updates kernel parameters by steepest descent, "
            f"but kernel {model.kernel.kind!r} has none; use "
            f"{LSE_LINEAR_HEURISTIC_KERNEL!r} or a parametric kernel"
        )
    if train_ds is not None:
        model.memory = TrainingMemory.from_dataset(train_ds)
        if model.k_a > len(model.memory) - 1 or model.k_o > len(model.memory) - 1:
            raise ArgumentError("training set too small for the configured neighbor counts")

    if config.b_init == "heuristic":
        model.b_a, model.b_o = heuristic_b_init(model)
    else:
        value = float(config.b_init)
        model.b_a = np.full(model.k_a, value)
        model.b_o = np.full(model.k_o, value)

    history = LearningHistory()
    cache = build_neighbor_cache(model)
    ev = batch_responses(model, cache)
    _fit_linear_weights(model, ev, history, "init")

    eta_a0, eta_o0 = config.eta_a0, config.eta_o0
    for epoch in range(config.epochs):
        ev = batch_responses(model, cache)
        if config.method in _METHODS_WITH_EPOCH_LSE:
            _fit_linear_weights(model, ev, history, f"epoch {epoch}")

        r = combined_response(model, ev)
        p_a, p_o = punishments(model, ev)
        history.loss_a.append(0.5 * float(np.sum(p_a**2)))
        history.loss_o.append(0.5 * float(np.sum(p_o**2)))
        history.train_nmse.append(_safe_nmse(r, model.memory.r_u))
        if val_ds is not None and len(val_ds) >= 2:
            history.val_nmse.append(_safe_nmse(predict_many(model, val_ds.inputs), val_ds.targets))
        else:
            history.val_nmse.append(None)
        history.b_a_snapshots.append(model.b_a.copy())
        history.b_o_snapshots.append(model.b_o.copy())

        if config.method not in _METHODS_WITH_SD:
            continue
        if config.method == SD_ALL:
            _sd_linear_weights(model, ev, _step_rate(eta_a0, p_a), _step_rate(eta_o0, p_o))
            p_a, p_o = punishments(model, ev)
        if config.mode == "online":
            eta_a0, eta_o0 = _online_sweep(model, ev, eta_a0, eta_o0, history, epoch)
        else:
            result = sd_step(model, ev, _step_rate(eta_a0, p_a), _step_rate(eta_o0, p_o))
            if result.rejected_a:
                eta_a0 *= 0.5
                history.events.append(f"epoch {epoch}: non-finite b_a gradient, step "
                                      f"rejected, eta_a halved to {eta_a0:g}")
            if result.rejected_o:
                eta_o0 *= 0.5
                history.events.append(f"epoch {epoch}: non-finite b_o gradient, step "
                                      f"rejected, eta_o halved to {eta_o0:g}")
    return model, history


@dataclass
class Phase2Result:
    """Per-sample record of the online phase.

    ``predictions`` holds the final pass; every prediction was recorded
    before the update it triggered.
    """

    predictions: np.ndarray
    nmse_per_epoch: list
    running_nmse: np.ndarray
    events: list = field(default_factory=list)


def _phase2_gradients(model: BelpmModel, trace: ForwardTrace):
    bl, mo = trace.bl, trace.mo
    p_a = trace.r - trace.r_a
    p_o = model.w_o[0] * trace.r_o + model.w_o[1]
    if bl.degenerate:
        g_a = np.zeros(model.k_a)
    else:
        targets = model.memory.r_u[bl.neighbors.indices]
        dk = grad_b(model.kernel, bl.neighbors.distances, model.b_a)
        # d p_a / d b_a = (w_1 - 1) * d r_a / d b_a: the output feeds back
        # through the combiner while the stored punishments stay frozen.
        g_a = (model.w[0] - 1.0) * p_a * dk * (targets - trace.r_a) / float(bl.layer1.sum())
    if mo.degenerate:
        g_o = np.zeros(model.k_o)
    else:
        pe = model.memory.p_a_e[mo.neighbors.indices]
        dk = grad_b(model.kernel, mo.neighbors.distances, model.b_o)
        g_o = model.w_o[0] * p_o * dk * (pe - trace.r_o) / float(mo.layer1.sum())
    return p_a, p_o, g_a, g_o


def train_phase2(model: BelpmModel, inputs, config: TrainConfig, targets=None):
    """Online adaptation over a stream of queries; linear weights frozen.

    ``targets``, when provided, are used only to compute the NMSE traces,
    never for updates: the punishment signal is built from the model's own
    output.
    """
    if not model.kernel.is_parametric:
        raise UnsupportedKernelError(
            f"kernel {model.kernel.kind!r} has no trainable parameter; "
            "the online phase has nothing to adapt"
        )
    if model.memory.p_a_e is None:
        raise ArgumentError("model is not phase-1 trained (expected punishments missing)")
    inputs = np.asarray(inputs, dtype=float)
    if inputs.size == 0:
        return model, Phase2Result(predictions=np.empty(0), nmse_per_epoch=[],
                                   running_nmse=np.empty(0))
    if inputs.ndim != 2:
        raise ArgumentError("stream inputs must be a 2-D array of query vectors")
    if targets is not None:
        targets = np.asarray(targets, dtype=float)
        if targets.shape != (len(inputs),):
            raise ArgumentError("targets must align with the stream inputs")

    eta_a0, eta_o0 = config.eta_a0, config.eta_o0
    events = []
    nmse_per_epoch = []
    running = []
    predictions = np.empty(len(inputs))
    for epoch in range(config.phase2_epochs):
        for t, x in enumerate(inputs):
            r, trace = belpm_predict(x, model)
            predictions[t] = r
            if targets is not None and t >= 1:
                running.append(_safe_nmse(predictions[: t + 1], targets[: t + 1]))
            else:
                running.append(None)
            p_a, p_o, g_a, g_o = _phase2_gradients(model, trace)
            if np.all(np.isfinite(g_a)):
                model.b_a = model.b_a - _step_rate(eta_a0, np.array([p_a])) * g_a
            else:
                eta_a0 *= 0.5
                events.append(f"epoch {epoch} sample {t}: non-finite b_a gradient, "
                              f"step rejected, eta_a halved to {eta_a0:g}")
            if np.all(np.isfinite(g_o)):
                model.b_o = model.b_o - _step_rate(eta_o0, np.array([p_o])) * g_o
            else:
                eta_o0 *= 0.5
                events.append(f"epoch {epoch} sample {t}: non-finite b_o gradient, "
                              f"step rejected, eta_o halved to {eta_o0:g}")
        nmse_per_epoch.append(None if targets is None else _safe_nmse(predictions, targets))
    running_arr = np.array([np.nan if v is None else v for v in running])
    return model, Phase2Result(predictions=predictions.copy(), nmse_per_epoch=nmse_per_epoch,
                               running_nmse=running_arr, events=events)


# ---------------------------------------------------------------------------
# Flat config files (shared by the CLI and the service)


def parse_flat_config(doc: dict):
    """Split a flat config mapping into model structure and train settings.

    Recognized keys: method, epochs, eta_a0, eta_o0, mode, k_a, k_o, kernel,
    rational_z, b_init, phase2_epochs, seed.
    """
    if not isinstance(doc, dict):
        raise ArgumentError("config must be a mapping of option keys to values")
    known = {"method", "epochs", "eta_a0", "eta_o0", "mode", "k_a", "k_o",
             "kernel", "rational_z", "b_init", "phase2_epochs", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    try:
        k_a = int(doc.get("k_a", 3))
        k_o = int(doc.get("k_o", 2 * k_a))
        kernel = Kernel(kind=doc.get("kernel", "exponential"),
                        z=float(doc.get("rational_z", 1.0)))
        config = TrainConfig(
            method=doc.get("method", HYBRID_SD_LSE),
            epochs=int(doc.get("epochs", 35)),
            eta_a0=float(doc.get("eta_a0", 0.05)),
            eta_o0=float(doc.get("eta_o0", 0.05)),
            mode=doc.get("mode", "batch"),
            b_init=doc.get("b_init", "heuristic"),
            phase2_epochs=int(doc.get("phase2_epochs", 10)),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ArgumentError):
            raise
        raise ArgumentError(f"malformed config value: {exc}") from exc
    return k_a, k_o, kernel, config
