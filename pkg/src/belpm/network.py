"""The BELPM network forward pass.

Four cooperating parts process a query vector: the thalamus stage extracts
max/min features, the cortex stage distributes the (identity-mapped) input,
the amygdala stage produces a primary kernel-kNN response plus punishment
signals, and the orbitofrontal stage predicts the expected punishment from
stored training residuals and corrects the output.

A trained model is immutable by convention: prediction never mutates it, so
queries may run concurrently. Training code takes exclusive ownership.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .kernels import EPSILON, RANK, Kernel, weights
from .series import EmbeddedDataset
from .wknn import NeighborSet, nearest_of_distances

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ThOutput:
    """Thalamus features: [max, min] of the input plus a verbatim copy."""

    max_min: np.ndarray
    agg: np.ndarray


@dataclass
class TrainingMemory:
    """Stored training-set quantities the network predicts from.

    ``p_a_e`` holds one expected punishment (leave-one-out residual) per
    training sample and must be populated before the orbitofrontal stage
    can run.
    """

    s_u: np.ndarray
    th_u: np.ndarray
    r_u: np.ndarray
    p_a_e: np.ndarray | None = None

    def __post_init__(self):
        self.s_u = np.asarray(self.s_u, dtype=float)
        self.th_u = np.asarray(self.th_u, dtype=float)
        self.r_u = np.asarray(self.r_u, dtype=float)
        n = len(self.r_u)
        if self.s_u.ndim != 2 or len(self.s_u) != n or self.th_u.shape != (n, 2):
            raise ArgumentError("memory fields s_u, th_u, r_u must share one sample count")
        if self.p_a_e is not None:
            self.p_a_e = np.asarray(self.p_a_e, dtype=float)
            if self.p_a_e.shape != (n,):
                raise ArgumentError("p_a_e must hold one value per training sample")

    def __len__(self) -> int:
        return len(self.r_u)

    @classmethod
    def from_dataset(cls, ds: EmbeddedDataset) -> "TrainingMemory":
        th = np.stack([ds.inputs.max(axis=1), ds.inputs.min(axis=1)], axis=1)
        return cls(s_u=ds.inputs.copy(), th_u=th, r_u=ds.targets.copy())


@dataclass
class BelpmModel:
    memory: TrainingMemory
    k_a: int
    k_o: int
    kernel: Kernel
    b_a: np.ndarray
    b_o: np.ndarray
    w: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    w_a: np.ndarray = field(default_factory=lambda: np.array([1.0, -1.0, 0.0]))
    w_o: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))

    def __post_init__(self):
        self.b_a = np.asarray(self.b_a, dtype=float)
        self.b_o = np.asarray(self.b_o, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.w_a = np.asarray(self.w_a, dtype=float)
        self.w_o = np.asarray(self.w_o, dtype=float)
        n = len(self.memory)
        if self.k_a < 1 or self.k_o < 1:
            raise ArgumentError("neighbor counts k_a and k_o must be >= 1")
        if self.k_a > n - 1 or self.k_o > n - 1:
            raise ArgumentError(
                f"neighbor counts must leave leave-one-out headroom: "
                f"k_a={self.k_a}, k_o={self.k_o}, memory size {n}"
            )
        if self.b_a.shape != (self.k_a,) or self.b_o.shape != (self.k_o,):
            raise ArgumentError("b_a and b_o must hold one parameter per neighbor rank")
        if not (np.all(np.isfinite(self.b_a)) and np.all(np.isfinite(self.b_o))):
            raise ArgumentError("kernel parameters must be finite")
        if self.w.shape != (3,) or self.w_a.shape != (3,) or self.w_o.shape != (2,):
            raise ArgumentError("weights must have shapes w:(3,), w_a:(3,), w_o:(2,)")

    @classmethod
    def initialize(cls, ds: EmbeddedDataset, k_a: int, k_o: int, kernel: Kernel,
                   b_a=None, b_o=None) -> "BelpmModel":
        """Build an untrained model around a training dataset."""
        memory = TrainingMemory.from_dataset(ds)
        if b_a is None:
            b_a = np.ones(k_a)
        if b_o is None:
            b_o = np.ones(k_o)
        return cls(memory=memory, k_a=k_a, k_o=k_o, kernel=kernel, b_a=b_a, b_o=b_o)

    @property
    def parameter_count(self) -> int:
        """Learnable parameters; independent of the input dimension."""
        return self.k_a + self.k_o + 8


@dataclass(frozen=True)
class LayerTrace:
    """Per-layer vectors of one adaptive-network evaluation."""

    neighbors: NeighborSet
    layer1: np.ndarray
    layer2: np.ndarray
    layer3: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class ForwardTrace:
    th: ThOutput
    bl: LayerTrace
    mo: LayerTrace
    r_a: float
    r_o: float
    r: float


def th_forward(x) -> ThOutput:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ArgumentError("input must be a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("input must be finite")
    return ThOutput(max_min=np.array([x.max(), x.min()]), agg=x.copy())


def cx_forward(agg) -> np.ndarray:
    # The cortex stage is a fixed single linear layer, i.e. the identity.
    return np.asarray(agg, dtype=float).copy()


def bl_distance(s_q, th_q, s_j, th_j) -> float:
    """Combined distance: input-space norm plus max/min-feature norm."""
    s_q, s_j = np.asarray(s_q, dtype=float), np.asarray(s_j, dtype=float)
    th_q, th_j = np.asarray(th_q, dtype=float), np.asarray(th_j, dtype=float)
    if s_q.shape != s_j.shape or th_q.shape != th_j.shape:
        raise ArgumentError("distance operands must have matching shapes")
    return float(np.linalg.norm(s_j - s_q) + np.linalg.norm(th_j - th_q))


def bl_distance_vector(memory: TrainingMemory, s_q, th_q) -> np.ndarray:
    return np.linalg.norm(memory.s_u - s_q, axis=1) + np.linalg.norm(memory.th_u - th_q, axis=1)


def mo_distance_vector(memory: TrainingMemory, s_q) -> np.ndarray:
    return np.linalg.norm(memory.s_u - s_q, axis=1)


def _layer_eval(distances: np.ndarray, k: int, b: np.ndarray, kernel: Kernel,
                values: np.ndarray, exclude: int | None = None):
    """Shared four-layer evaluation: kernel, normalize, scale, sum.

    ``values`` holds the stored quantity each neighbor contributes (targets
    for the primary response, expected punishments for the secondary one).
    """
    neighbors = nearest_of_distances(distances, k, exclude=exclude)
    if kernel.kind == RANK:
        n1 = weights(kernel, neighbors.distances)
    else:
        n1 = weights(kernel, neighbors.distances, b)
    total = float(np.sum(n1))
    # underflowed and overflowed kernel rows both lose their weighting
    # information; fall back to a plain average and flag the trace
    degenerate = total < EPSILON or not np.isfinite(total)
    n2 = np.full(k, 1.0 / k) if degenerate else n1 / total
    n3 = n2 * values[neighbors.indices]
    out = float(np.sum(n3))
    return out, LayerTrace(neighbors=neighbors, layer1=n1, layer2=n2, layer3=n3,
                           degenerate=degenerate)


def bl_forward(s_q, th_q, model: BelpmModel, exclude: int | None = None):
    """Primary response: kernel-kNN over the combined distance.

    Returns a convex combination of the k_a nearest training targets; with a
    degenerate kernel row the weights fall back to uniform and the trace is
    flagged.
    """
    d = bl_distance_vector(model.memory, np.asarray(s_q, dtype=float),
                           np.asarray(th_q, dtype=float))
    return _layer_eval(d, model.k_a, model.b_a, model.kernel, model.memory.r_u,
                       exclude=exclude)


def compute_expected_punishments(model: BelpmModel) -> np.ndarray:
    """Leave-one-out residual of the primary response per training sample.

    Stores the vector on the model memory (the orbitofrontal stage reads it
    by neighbor index) and returns it.
    """
    memory = model.memory
    n = len(memory)
    if n <= model.k_a:
        raise ArgumentError(
            f"need more than k_a={model.k_a} training samples for leave-one-out, got {n}"
        )
    p = np.empty(n)
    for j in range(n):
        r_a, _ = bl_forward(memory.s_u[j], memory.th_u[j], model, exclude=j)
        p[j] = memory.r_u[j] - r_a
    memory.p_a_e = p
    return p


def mo_forward(s_q, model: BelpmModel, exclude: int | None = None):
    """Secondary response: kernel-kNN over stored expected punishments.

    ``exclude`` supports leave-one-out evaluation of training samples; plain
    queries never exclude anything.
    """
    if model.memory.p_a_e is None:
        raise ArgumentError("expected punishments not populated; run "
                            "compute_expected_punishments (or train) first")
    d = mo_distance_vector(model.memory, np.asarray(s_q, dtype=float))
    return _layer_eval(d, model.k_o, model.b_o, model.kernel, model.memory.p_a_e,
                       exclude=exclude)


def cm_combine(r_a: float, r_o: float, w) -> float:
    w = np.asarray(w, dtype=float)
    return float(w[0] * r_a + w[1] * r_o + w[2])


def cm_punishment_phase1(r_u: float, r_a: float, w_a) -> float:
    w_a = np.asarray(w_a, dtype=float)
    return float(w_a[0] * r_u + w_a[1] * r_a + w_a[2])


def cm_punishment_phase2(r: float, r_a: float) -> float:
    # Online phase has no target; the model's own output takes its place
    # with the fixed weighting [1, -1, 0].
    return float(r - r_a)


def lo_punishment(r_o: float, w_o) -> float:
    w_o = np.asarray(w_o, dtype=float)
    return float(w_o[0] * r_o + w_o[1])


def belpm_predict(x, model: BelpmModel):
    """Full forward pass for one query; returns the response and its trace."""
    th = th_forward(x)
    s = cx_forward(th.agg)
    if s.shape != model.memory.s_u.shape[1:]:
        raise ArgumentError(
            f"query dimension {s.shape[0]} does not match memory dimension "
            f"{model.memory.s_u.shape[1]}"
        )
    r_a, bl_trace = bl_forward(s, th.max_min, model)
    r_o, mo_trace = mo_forward(s, model)
    r = cm_combine(r_a, r_o, model.w)
    return r, ForwardTrace(th=th, bl=bl_trace, mo=mo_trace, r_a=r_a, r_o=r_o, r=r)


def predict_many(model: BelpmModel, inputs) -> np.ndarray:
    """Predict a batch of queries; equivalent to looping belpm_predict."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.memory.s_u.shape[1]:
        raise ArgumentError(
            f"inputs must have shape (n, {model.memory.s_u.shape[1]})"
        )
    if model.memory.p_a_e is None:
        raise ArgumentError("expected punishments not populated; train first")
    out = np.empty(len(inputs))
    for i, x in enumerate(inputs):
        out[i], _ = belpm_predict(x, model)
    return out


def model_to_dict(model: BelpmModel) -> dict:
    """JSON-ready persistence document; carries the full training memory."""
    memory = model.memory
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "k_a": model.k_a,
        "k_o": model.k_o,
        "kernel": {"kind": model.kernel.kind, "z": model.kernel.z},
        "b_a": model.b_a.tolist(),
        "b_o": model.b_o.tolist(),
        "w": model.w.tolist(),
        "w_a": model.w_a.tolist(),
        "w_o": model.w_o.tolist(),
        "memory": {
            "s_u": memory.s_u.tolist(),
            "th_u": memory.th_u.tolist(),
            "r_u": memory.r_u.tolist(),
            "p_a_e": None if memory.p_a_e is None else memory.p_a_e.tolist(),
        },
    }


def model_from_dict(doc: dict) -> BelpmModel:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ArgumentError("model document is missing the mandatory format_version tag")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ArgumentError(
            f"unsupported model format_version {doc['format_version']!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    try:
        mem = doc["memory"]
        memory = TrainingMemory(
            s_u=np.asarray(mem["s_u"], dtype=float),
            th_u=np.asarray(mem["th_u"], dtype=float),
            r_u=np.asarray(mem["r_u"], dtype=float),
            p_a_e=None if mem.get("p_a_e") is None else np.asarray(mem["p_a_e"], dtype=float),
        )
        kernel = Kernel(kind=doc["kernel"]["kind"], z=float(doc["kernel"].get("z", 1.0)))
        return BelpmModel(
            memory=memory,
            k_a=int(doc["k_a"]),
            k_o=int(doc["k_o"]),
            kernel=kernel,
            b_a=np.asarray(doc["b_a"], dtype=float),
            b_o=np.asarray(doc["b_o"], dtype=float),
            w=np.asarray(doc["w"], dtype=float),
            w_a=np.asarray(doc["w_a"], dtype=float),
            w_o=np.asarray(doc["w_o"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed model document: {exc}") from exc


def save_model(model: BelpmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> BelpmModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
