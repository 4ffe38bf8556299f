"""Plane-wave mode sums, JIT-compiled when numba is importable."""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _mode_sum_jit(t, x, p, energy, w, out):
    # w has shape (F, K, 2): several fields sharing one mode grid reuse each phase.
    m = x.shape[0]
    n_fields = w.shape[0]
    k_modes = p.shape[0]
    acc = np.empty((n_fields, 4))
    for i in range(m):
        acc[:, :] = 0.0
        for k in range(k_modes):
            ph = p[k] * x[i] - energy[k] * t[i]
            c = math.cos(ph)
            s = math.sin(ph)
            for f in range(n_fields):
                w0 = w[f, k, 0]
                w1 = w[f, k, 1]
                acc[f, 0] += c * w0.real - s * w0.imag
                acc[f, 1] += c * w0.imag + s * w0.real
                acc[f, 2] += c * w1.real - s * w1.imag
                acc[f, 3] += c * w1.imag + s * w1.real
        for f in range(n_fields):
            out[f, i, 0] = complex(acc[f, 0], acc[f, 1])
            out[f, i, 1] = complex(acc[f, 2], acc[f, 3])


def mode_sum(t, x, p, energy, weights):
    """sum_k weights[..., k, :] * exp(-i energy[k] t + i p[k] x) for each point.

    ``weights`` is (K, 2) for one field, giving shape (M, 2), or (F, K, 2) for
    F fields on the same modes, giving shape (F, M, 2).
    """
    t = np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)))
    x = np.ascontiguousarray(x, dtype=float)
    w = np.asarray(weights, dtype=complex)
    single = w.ndim == 2
    w = np.ascontiguousarray(w[None] if single else w)
    if HAVE_NUMBA:
        out = np.empty((w.shape[0], x.shape[0], 2), dtype=complex)
        _mode_sum_jit(t, x, np.ascontiguousarray(p, dtype=float), np.ascontiguousarray(energy, dtype=float), w, out)
    else:
        phase = np.exp(1j * (np.outer(x, p) - np.outer(t, energy)))
        out = np.einsum("mk,fkc->fmc", phase, w)
    return out[0] if single else out
