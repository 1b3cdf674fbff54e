"""Hot numeric kernels, available in two interchangeable backends.

The default backend JIT-compiles the scalar loop versions with numba.  A pure
numpy fallback implements the same arithmetic with vectorised row operations.
Selection happens once at import time via the ``ODMBENCH_BACKEND`` environment
variable: ``numba`` or ``numpy``; unset means numba when importable, numpy
otherwise.  Both paths perform identical IEEE-754 operations in identical
order, so matrix generation, multiplication and inversion are bit-identical
across backends (``elementwise_log`` may differ in the last ulp because the
two paths use different libm implementations).

Random matrix entries come from an xorshift64* generator (Marsaglia xorshift
with the Vigna output multiplier), one independent stream per matrix row:

* row stream seeding, splitmix64 finalizer applied to
  ``seed + (row + 1) * 0x9E3779B97F4A7C15``::

      z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
      z ^= z >> 27;  z *= 0x94D049BB133111EB
      z ^= z >> 31                      (state 0 is remapped to the gamma)

* per element step and output::

      x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
      out = x * 0x2545F4914F6CDD1D

* mapping to a double in [1.0, 2.0): ``1.0 + (out >> 12) * 2.0**-52``
  (the top 52 output bits become the significand; exact in float64).

All arithmetic is modulo 2**64.
"""

from __future__ import annotations

import os

import numpy as np

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_MIX1 = 0xBF58476D1CE4E5B9
SPLITMIX_MIX2 = 0x94D049BB133111EB
XORSHIFT_MULT = 0x2545F4914F6CDD1D

_U64_MASK = 0xFFFFFFFFFFFFFFFF
_TWO_NEG52 = 2.0 ** -52


# ---------------------------------------------------------------------------
# pure numpy backend
# ---------------------------------------------------------------------------

def fill_uniform_numpy(seed: int, rows: int, cols: int) -> np.ndarray:
    """Deterministic rows x cols matrix of doubles uniform in [1.0, 2.0)."""
    gamma = np.uint64(SPLITMIX_GAMMA)
    idx = np.arange(1, rows + 1, dtype=np.uint64)
    z = np.uint64(seed & _U64_MASK) + gamma * idx
    z = (z ^ (z >> np.uint64(30))) * np.uint64(SPLITMIX_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(SPLITMIX_MIX2)
    z = z ^ (z >> np.uint64(31))
    z[z == np.uint64(0)] = gamma
    out = np.empty((rows, cols), dtype=np.float64)
    x = z
    for j in range(cols):
        x = x ^ (x >> np.uint64(12))
        x = x ^ (x << np.uint64(25))
        x = x ^ (x >> np.uint64(27))
        o = x * np.uint64(XORSHIFT_MULT)
        out[:, j] = 1.0 + (o >> np.uint64(12)) * _TWO_NEG52
    return out


def matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product accumulated in ascending-k order (matches the naive
    triple loop bit for bit)."""
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    tmp = np.empty((m, n), dtype=np.float64)
    for p in range(k):
        np.multiply(a[:, p : p + 1], b[p : p + 1, :], out=tmp)
        out += tmp
    return out


def gauss_jordan_numpy(aug: np.ndarray, eps: float) -> bool:
    """In-place Gauss-Jordan elimination with partial pivoting on an
    augmented matrix.  Returns False when the best pivot magnitude drops
    below ``eps``.  Ties pick the first maximal row."""
    n = aug.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) < eps:
            return False
        if piv != col:
            tmp = aug[col].copy()
            aug[col] = aug[piv]
            aug[piv] = tmp
        aug[col] /= aug[col, col]
        prow = aug[col]
        if col > 0:
            aug[:col] -= aug[:col, col : col + 1] * prow
        if col + 1 < n:
            aug[col + 1 :] -= aug[col + 1 :, col : col + 1] * prow
    return True


def elementwise_log_numpy(a: np.ndarray) -> np.ndarray:
    return np.log(a)


# ---------------------------------------------------------------------------
# numba backend (scalar loops, jitted)
# ---------------------------------------------------------------------------

def _fill_uniform_loops(seed, rows, cols):
    out = np.empty((rows, cols), dtype=np.float64)
    for i in range(rows):
        z = np.uint64(seed) + np.uint64(SPLITMIX_GAMMA) * np.uint64(i + 1)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(SPLITMIX_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(SPLITMIX_MIX2)
        z = z ^ (z >> np.uint64(31))
        if z == np.uint64(0):
            z = np.uint64(SPLITMIX_GAMMA)
        x = z
        for j in range(cols):
            x = x ^ (x >> np.uint64(12))
            x = x ^ (x << np.uint64(25))
            x = x ^ (x >> np.uint64(27))
            o = x * np.uint64(XORSHIFT_MULT)
            out[i, j] = 1.0 + np.float64(o >> np.uint64(12)) * _TWO_NEG52
    return out


def _matmul_loops(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            for j in range(n):
                out[i, j] += aip * b[p, j]
    return out


def _gauss_jordan_loops(aug, eps):
    n = aug.shape[0]
    w = aug.shape[1]
    for col in range(n):
        piv = col
        best = abs(aug[col, col])
        for r in range(col + 1, n):
            v = abs(aug[r, col])
            if v > best:
                best = v
                piv = r
        if best < eps:
            return False
        if piv != col:
            for j in range(w):
                t = aug[col, j]
                aug[col, j] = aug[piv, j]
                aug[piv, j] = t
        p = aug[col, col]
        for j in range(w):
            aug[col, j] /= p
        for r in range(n):
            if r == col:
                continue
            f = aug[r, col]
            for j in range(w):
                aug[r, j] -= f * aug[col, j]
    return True


def _elementwise_log_loops(a):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i, j] = np.log(a[i, j])
    return out


def _select_backend() -> str:
    forced = os.environ.get("ODMBENCH_BACKEND", "").strip().lower()
    if forced and forced not in ("numba", "numpy"):
        raise ValueError(
            f"ODMBENCH_BACKEND must be 'numba' or 'numpy', got {forced!r}"
        )
    if forced == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if forced == "numba":
            raise
        return "numpy"
    return "numba"


ACTIVE_BACKEND = _select_backend()

fill_uniform_numba = None
matmul_numba = None
gauss_jordan_numba = None
elementwise_log_numba = None

if ACTIVE_BACKEND == "numba":
    from numba import njit

    fill_uniform_numba = njit(cache=True)(_fill_uniform_loops)
    matmul_numba = njit(cache=True)(_matmul_loops)
    gauss_jordan_numba = njit(cache=True)(_gauss_jordan_loops)
    elementwise_log_numba = njit(cache=True)(_elementwise_log_loops)

    def fill_uniform(seed: int, rows: int, cols: int) -> np.ndarray:
        return fill_uniform_numba(np.uint64(seed & _U64_MASK), rows, cols)

    matmul = matmul_numba
    gauss_jordan_inplace = gauss_jordan_numba
    elementwise_log = elementwise_log_numba
else:
    fill_uniform = fill_uniform_numpy
    matmul = matmul_numpy
    gauss_jordan_inplace = gauss_jordan_numpy
    elementwise_log = elementwise_log_numpy
