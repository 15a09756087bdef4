"""Kernel families mapping neighbor distances to weights.

Five families are supported. ``gaussian``, ``inversion`` and ``rank`` carry
no trainable parameter and are inference-only choices; ``exponential`` and
``rational`` consume a per-node scale ``b`` and are the families whose
weights can be adapted by gradient descent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, UnsupportedKernelError

EPSILON = 1e-12

GAUSSIAN = "gaussian"
INVERSION = "inversion"
RANK = "rank"
EXPONENTIAL = "exponential"
RATIONAL = "rational"

KERNEL_KINDS = (GAUSSIAN, INVERSION, RANK, EXPONENTIAL, RATIONAL)
PARAMETRIC_KINDS = (EXPONENTIAL, RATIONAL)

_GAUSS_NORM = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Kernel:
    """Kernel family selector; ``z`` is the rational family's exponent."""

    kind: str
    z: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ArgumentError(f"unknown kernel kind {self.kind!r}; choose one of {KERNEL_KINDS}")
        if not self.z > 0:
            raise ArgumentError(f"rational exponent z must be positive, got {self.z}")

    @property
    def is_parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS


def weights(kernel: Kernel, d: np.ndarray, b=0.0) -> np.ndarray:
    """Vectorized kernel evaluation over a distance array.

    ``b`` may be a scalar or an array broadcastable against ``d``; it is
    ignored by the non-parametric families. For the rank kernel the context
    is ``d`` itself, evaluated row-wise when ``d`` is 2-D.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ArgumentError("distances must be non-negative")
    if kernel.kind == GAUSSIAN:
        return _GAUSS_NORM * np.exp(-0.5 * d * d)
    if kernel.kind == INVERSION:
        return 1.0 / np.maximum(d, EPSILON)
    if kernel.kind == RANK:
        if d.size == 0:
            raise ArgumentError("rank kernel requires a non-empty distance context")
        axis = -1 if d.ndim > 0 else None
        dmax = np.max(d, axis=axis, keepdims=True)
        dmin = np.min(d, axis=axis, keepdims=True)
        out = np.where(dmax < EPSILON, 1.0, (dmax - (d - dmin)) / np.maximum(dmax, EPSILON))
        return out if d.ndim > 0 else float(out)
    if kernel.kind == EXPONENTIAL:
        return np.exp(-d * np.asarray(b, dtype=float))
    # rational
    db = d * np.asarray(b, dtype=float)
    return (1.0 + db * db) ** (-kernel.z)


def evaluate(kernel: Kernel, d: float, b: float = 0.0, context=None) -> float:
    """Evaluate one kernel weight at distance ``d``.

    The rank kernel needs ``context``, the distance vector it normalizes
    against; ``d`` is expected to be one of its entries.
    """
    if d < 0:
        raise ArgumentError(f"distance must be non-negative, got {d}")
    if kernel.kind == RANK:
        if context is None or len(context) == 0:
            raise ArgumentError("rank kernel requires a non-empty distance context")
        context = np.asarray(context, dtype=float)
        dmax = float(np.max(context))
        dmin = float(np.min(context))
        if dmax < EPSILON:
            return 1.0
        return (dmax - (d - dmin)) / dmax
    return float(weights(kernel, np.asarray(d, dtype=float), b))


def grad_b(kernel: Kernel, d, b):
    """Derivative of the kernel weight with respect to its parameter ``b``.

    Only defined for the parametric families; the rest have no ``b`` and are
    excluded from gradient-based updates.
    """
    if not kernel.is_parametric:
        raise UnsupportedKernelError(
            f"kernel {kernel.kind!r} has no trainable parameter; gradient undefined"
        )
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    if kernel.kind == EXPONENTIAL:
        out = -d * np.exp(-d * b)
    else:
        db = d * b
        out = -2.0 * kernel.z * d * d * b * (1.0 + db * db) ** (-kernel.z - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KernelPropertyReport:
    """Outcome of the kernel sanity checks on a distance grid."""

    kernel: str
    checks: tuple
    passed: bool

    def failures(self):
        return [name for name, ok, _ in self.checks if not ok]


def check_kernel_properties(kernel, b: float, grid) -> KernelPropertyReport:
    """Check non-negativity, maximum at zero and (parametric) monotonicity.

    ``kernel`` may be a :class:`Kernel` or any callable ``d -> weight``,
    which allows probing deliberately broken kernels.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ArgumentError("grid must be non-empty")
    if np.any(grid < 0):
        raise ArgumentError("grid distances must be non-negative")
    grid = np.sort(grid)

    if isinstance(kernel, Kernel):
        name = kernel.kind
        if kernel.kind == RANK:
            context = np.concatenate(([0.0], grid))
            k_of = lambda d: evaluate(kernel, float(d), b, context=context)
        else:
            k_of = lambda d: evaluate(kernel, float(d), b)
        parametric = kernel.is_parametric
    else:
        name = getattr(kernel, "__name__", "callable")
        k_of = kernel
        parametric = True

    vals = np.asarray([k_of(d) for d in grid], dtype=float)
    k0 = float(k_of(0.0))

    checks = [
        ("non-negative on grid", bool(np.all(vals >= 0.0)), f"min={vals.min():.6g}"),
        ("maximum at 0", bool(np.all(k0 >= vals - 1e-12)), f"K(0)={k0:.6g}"),
    ]
    if parametric:
        monotone = bool(np.all(np.diff(vals) <= 1e-12))
        checks.append(("non-increasing on grid", monotone, ""))
    return KernelPropertyReport(
        kernel=name, checks=tuple(checks), passed=all(ok for _, ok, _ in checks)
    )
