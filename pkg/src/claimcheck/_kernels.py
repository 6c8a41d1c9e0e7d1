"""Hot counting kernel behind the paired bootstrap.

Each scored record collapses to a small joint category code (gold class plus
per-system correctness); a bootstrap resample then only needs category counts.
Tallying those counts over resamples x records index matrices is the one
numeric inner loop in the package, so it carries a numba-jitted version with a
pure-numpy fallback. Set CLAIMCHECK_NO_NUMBA=1 to force the fallback; it also
engages automatically when numba is absent.

Both paths consume identical inputs and produce identical int64 counts, so
results never depend on which backend ran.
"""

from __future__ import annotations

import os

import numpy as np

NO_NUMBA_ENV = "CLAIMCHECK_NO_NUMBA"

N_CATEGORIES = 8  # gold bit * 4 + correct_a * 2 + correct_b


def _joint_counts_loops(codes, idx, out):
    # Plain nested loops; compiled by numba when available.
    n_rows, n = idx.shape
    for r in range(n_rows):
        for j in range(n):
            out[r, codes[idx[r, j]]] += 1
    return out


def joint_counts_numpy(codes: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-resample category counts via one bincount per row."""
    n_rows = idx.shape[0]
    out = np.empty((n_rows, N_CATEGORIES), dtype=np.int64)
    for r in range(n_rows):
        out[r] = np.bincount(codes[idx[r]], minlength=N_CATEGORIES)
    return out


def build_numba_kernel():
    """Compile the loop kernel; raises ImportError when numba is missing."""
    from numba import njit

    compiled = njit(cache=True)(_joint_counts_loops)

    def joint_counts_numba(codes: np.ndarray, idx: np.ndarray) -> np.ndarray:
        out = np.zeros((idx.shape[0], N_CATEGORIES), dtype=np.int64)
        return compiled(codes, idx, out)

    return joint_counts_numba


def _select_backend():
    disabled = os.environ.get(NO_NUMBA_ENV, "").strip().lower() in {"1", "true", "yes", "on"}
    if not disabled:
        try:
            return build_numba_kernel(), "numba"
        except ImportError:
            pass
    return joint_counts_numpy, "numpy"


joint_counts, KERNEL_BACKEND = _select_backend()


def kernel_backend() -> str:
    """Name of the counting backend selected at import ("numba" or "numpy")."""
    return KERNEL_BACKEND
