"""Numeric evaluation kernels.

A symbolic matrix is compiled once into flat index arrays (one row per
monomial, CSR-style factor lists into the fade-coefficient layout).
Batches of trials are then evaluated without touching Python objects:
build H, form G = I + rho H H*, Cholesky, accumulate log2 of the
diagonal.  Everything stays in the log domain so large rho never
overflows a determinant.

Two interchangeable backends:

  * numba: @njit kernels, one trial per iteration, prange across trials.
  * numpy: batched einsum plus stacked LAPACK Cholesky.

``ASAF_BACKEND`` picks one (``auto`` prefers numba when importable);
``benchmarks/bench_kernels.py`` compares them.  Outage counts are exact
integer sums, so results do not depend on thread count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ValidationError

try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:                    # pragma: no cover - numba is a hard dep
    HAVE_NUMBA = False

__all__ = [
    "HAVE_NUMBA",
    "active_backend",
    "CompiledMatrix",
    "compile_matrix",
    "eval_batch",
    "mi_batch",
    "outage_count",
]


def active_backend() -> str:
    """Resolve the kernel backend from ASAF_BACKEND (auto | numba | numpy)."""
    choice = os.environ.get("ASAF_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise ValidationError("ASAF_BACKEND=numba but numba is not importable")
        return "numba"
    raise ValidationError(f"unknown ASAF_BACKEND {choice!r}")


@dataclass(frozen=True, eq=False)
class CompiledMatrix:
    rows: int
    cols: int
    mono_row: np.ndarray               # int64 (n_monomials,)
    mono_col: np.ndarray
    mono_ptr: np.ndarray               # int64 (n_monomials + 1,) into factor_idx
    factor_idx: np.ndarray             # int64, fade-vector positions


def compile_matrix(m, n_relays: int) -> CompiledMatrix:
    rows_, cols_, ptr, fac = [], [], [0], []
    for (r, c) in sorted(m.entries):
        for mono in m.entries[(r, c)].monomials:
            rows_.append(r)
            cols_.append(c)
            fac.extend(f.fade_index(n_relays) for f in mono.factors)
            ptr.append(len(fac))
    return CompiledMatrix(
        rows=m.rows, cols=m.cols,
        mono_row=np.asarray(rows_, dtype=np.int64),
        mono_col=np.asarray(cols_, dtype=np.int64),
        mono_ptr=np.asarray(ptr, dtype=np.int64),
        factor_idx=np.asarray(fac, dtype=np.int64))


# ======================================================================
# numpy backend
# ======================================================================

def _eval_np(cm: CompiledMatrix, fades: np.ndarray) -> np.ndarray:
    B = fades.shape[0]
    H = np.zeros((B, cm.rows, cm.cols), dtype=np.complex128)
    # overflow surfaces as NonFinite downstream; the warning is just noise
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(cm.mono_row.size):
            v = np.ones(B, dtype=np.complex128)
            for f in range(cm.mono_ptr[i], cm.mono_ptr[i + 1]):
                v *= fades[:, cm.factor_idx[f]]
            H[:, cm.mono_row[i], cm.mono_col[i]] += v
    return H


def _mi_np(cm: CompiledMatrix, fades: np.ndarray, rho: float) -> np.ndarray:
    H = _eval_np(cm, fades)
    G = np.einsum("brc,bsc->brs", H, H.conj())
    G *= rho
    G[:, np.arange(cm.rows), np.arange(cm.rows)] += 1.0
    L = np.linalg.cholesky(G)
    d = np.einsum("bii->bi", L).real
    return 2.0 * np.sum(np.log2(d), axis=1)


# ======================================================================
# numba backend
# ======================================================================

if HAVE_NUMBA:

    @njit(cache=True)
    def _eval_one(fades_t, mono_row, mono_col, mono_ptr, factor_idx, rows, cols):
        H = np.zeros((rows, cols), dtype=np.complex128)
        for i in range(mono_row.size):
            v = 1.0 + 0.0j
            for f in range(mono_ptr[i], mono_ptr[i + 1]):
                v *= fades_t[factor_idx[f]]
            H[mono_row[i], mono_col[i]] += v
        return H

    @njit(cache=True)
    def _mi_one(H, rho):
        rows = H.shape[0]
        G = rho * (H @ np.conj(H.T))
        for i in range(rows):
            G[i, i] += 1.0
        L = np.linalg.cholesky(G)
        acc = 0.0
        for i in range(rows):
            acc += np.log2(L[i, i].real)
        return 2.0 * acc

    @njit(cache=True, parallel=True)
    def _mi_batch_nb(fades, mono_row, mono_col, mono_ptr, factor_idx, rows, cols, rho):
        B = fades.shape[0]
        out = np.empty(B, dtype=np.float64)
        for t in prange(B):
            H = _eval_one(fades[t], mono_row, mono_col, mono_ptr, factor_idx, rows, cols)
            out[t] = _mi_one(H, rho)
        return out

    @njit(cache=True, parallel=True)
    def _outage_count_nb(fades, mono_row, mono_col, mono_ptr, factor_idx,
                         rows, cols, rho, thr):
        B = fades.shape[0]
        count = 0
        for t in prange(B):
            H = _eval_one(fades[t], mono_row, mono_col, mono_ptr, factor_idx, rows, cols)
            if _mi_one(H, rho) < thr:
                count += 1
        return count

    @njit(cache=True, parallel=True)
    def _eval_batch_nb(fades, mono_row, mono_col, mono_ptr, factor_idx, rows, cols):
        B = fades.shape[0]
        out = np.zeros((B, rows, cols), dtype=np.complex128)
        for t in prange(B):
            out[t] = _eval_one(fades[t], mono_row, mono_col, mono_ptr, factor_idx,
                               rows, cols)
        return out


def _set_threads(workers: int):
    if HAVE_NUMBA and workers:
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))


# ======================================================================
# dispatch
# ======================================================================

def eval_batch(cm: CompiledMatrix, fades: np.ndarray) -> np.ndarray:
    """H per trial, shape (B, rows, cols)."""
    if active_backend() == "numba":
        return _eval_batch_nb(fades, cm.mono_row, cm.mono_col, cm.mono_ptr,
                              cm.factor_idx, cm.rows, cm.cols)
    return _eval_np(cm, fades)


def mi_batch(cm: CompiledMatrix, fades: np.ndarray, rho: float) -> np.ndarray:
    """Mutual information log2 det(I + rho H H*) per trial, in bits."""
    if active_backend() == "numba":
        out = _mi_batch_nb(fades, cm.mono_row, cm.mono_col, cm.mono_ptr,
                           cm.factor_idx, cm.rows, cm.cols, rho)
    else:
        out = _mi_np(cm, fades, rho)
    if not np.all(np.isfinite(out)):
        raise NonFinite("mutual information overflowed")
    return out


def outage_count(cm: CompiledMatrix, fades: np.ndarray, rho: float,
                 threshold_bits: float, workers: int = 1) -> int:
    """Number of trials whose mutual information falls below the threshold."""
    if active_backend() == "numba":
        _set_threads(workers)
        return int(_outage_count_nb(fades, cm.mono_row, cm.mono_col, cm.mono_ptr,
                                    cm.factor_idx, cm.rows, cm.cols,
                                    float(rho), float(threshold_bits)))
    return int(np.count_nonzero(_mi_np(cm, fades, rho) < threshold_bits))
