"""Matrix workload generation and the three computational kernels.

Matrices are plain 2-D C-contiguous float64 numpy arrays.  Generated
workloads have off-diagonal entries uniform in [1.0, 2.0) and the diagonal
boosted by +n, which keeps all three kernels total on the same inputs
(strictly positive entries, comfortably invertible).
"""

from __future__ import annotations

import enum
import time

import numpy as np

from . import kernels
from .errors import DomainError, InvalidArgumentError, SingularMatrixError

# pivot magnitudes below this abort inversion as singular
PIVOT_EPS = 1e-12


class OpKind(enum.IntEnum):
    """The three offloadable operations; values are the wire identifiers."""

    MUL = 1
    INV = 2
    LN = 3

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "OpKind":
        try:
            return cls[name.upper()]
        except KeyError:
            raise InvalidArgumentError(f"unknown operation {name!r}") from None


def as_matrix(obj) -> np.ndarray:
    """Validate/convert ``obj`` into a 2-D C-contiguous float64 array."""
    a = np.asarray(obj, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidArgumentError(f"matrix must be 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidArgumentError(f"matrix must be non-empty, got shape {a.shape}")
    return np.ascontiguousarray(a)


def gen_matrix(seed: int, n: int) -> np.ndarray:
    """Deterministic n x n workload matrix for ``seed``.

    Pure function of (seed, n): same arguments always produce bit-identical
    output (see :mod:`odmbench.kernels` for the generator definition).
    Off-diagonal entries lie in [1, 2), diagonal entries in [1 + n, 2 + n).
    """
    if n < 1:
        raise InvalidArgumentError(f"matrix size must be >= 1, got {n}")
    a = kernels.fill_uniform(int(seed), n, n)
    a[np.diag_indices(n)] += float(n)
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product; equals the naive triple-loop sum bit for bit."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(
            f"inner dimensions differ: {a.shape} x {b.shape}"
        )
    return kernels.matmul(a, b)


def invert(a: np.ndarray) -> np.ndarray:
    """Inverse via Gauss-Jordan elimination with partial pivoting."""
    a = as_matrix(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise InvalidArgumentError(f"matrix must be square, got shape {a.shape}")
    aug = np.hstack((a, np.eye(n)))
    if not kernels.gauss_jordan_inplace(aug, PIVOT_EPS):
        raise SingularMatrixError(
            f"pivot magnitude below {PIVOT_EPS:g}; matrix is singular"
        )
    return np.ascontiguousarray(aug[:, n:])


def elementwise_ln(a: np.ndarray) -> np.ndarray:
    """Natural logarithm applied element-wise; requires all entries > 0."""
    a = as_matrix(a)
    if not np.all(a > 0.0):
        raise DomainError("elementwise_ln requires every element > 0")
    return kernels.elementwise_log(a)


def execute(op: OpKind, a: np.ndarray) -> np.ndarray:
    """Run one kernel.  MUL squares its single operand (a x a)."""
    if op == OpKind.MUL:
        return matmul(a, a)
    if op == OpKind.INV:
        return invert(a)
    if op == OpKind.LN:
        return elementwise_ln(a)
    raise InvalidArgumentError(f"unknown op {op!r}")


def local_execute(op: OpKind, a: np.ndarray) -> tuple[np.ndarray, float]:
    """Run one kernel locally, returning (result, wall seconds).

    Timed with the monotonic high-resolution clock.
    """
    t0 = time.perf_counter()
    result = execute(op, a)
    elapsed = time.perf_counter() - t0
    return result, elapsed
