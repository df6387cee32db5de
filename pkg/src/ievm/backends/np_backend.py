"""Pure-numpy kernel implementations.

The distance kernels intentionally avoid BLAS-backed matrix products: the
per-pair reduction must depend only on the two vectors involved, never on the
shape of the batch they arrive in, so that incremental fitting reproduces
batch fitting bit for bit. Row blocks only bound the temporary size; they do
not change per-pair arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

EUCLIDEAN = 0
COSINE = 1

# ~32 MB of float64 temporaries per block.
_BLOCK_BUDGET = 4_000_000


def pairwise_distances(a: np.ndarray, b: np.ndarray, metric: int) -> np.ndarray:
    n, dim = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    block = max(1, _BLOCK_BUDGET // max(1, m * dim))
    if metric == EUCLIDEAN:
        for start in range(0, n, block):
            chunk = a[start : start + block]
            diff = chunk[:, None, :] - b[None, :, :]
            np.sqrt((diff * diff).sum(axis=2), out=out[start : start + chunk.shape[0]])
    elif metric == COSINE:
        norm_a = np.sqrt((a * a).sum(axis=1))
        norm_b = np.sqrt((b * b).sum(axis=1))
        for start in range(0, n, block):
            chunk = a[start : start + block]
            dot = (chunk[:, None, :] * b[None, :, :]).sum(axis=2)
            cos = dot / (norm_a[start : start + chunk.shape[0], None] * norm_b[None, :])
            out[start : start + chunk.shape[0]] = 1.0 - cos
        # Rounding can push the distance of near-identical vectors a hair
        # below zero; distances are non-negative by contract.
        np.clip(out, 0.0, None, out=out)
    else:  # pragma: no cover - guarded by the dispatch layer
        raise ValueError(f"unknown metric code {metric}")
    return out


def weibull_mle(
    tail: np.ndarray,
    max_iterations: int,
    tolerance: float,
    shape_floor: float,
    shape_cap: float,
) -> tuple[float, float]:
    """Two-parameter Weibull fit: Newton iteration on the shape with the
    scale eliminated in closed form.

    Values are normalised by their maximum before exponentiation so that
    ``t ** k`` stays in [0, 1] for any shape; the returned scale is mapped
    back afterwards (the fit is scale-equivariant).
    """
    top = float(tail.max())
    t = tail / top
    log_t = np.log(t)
    mean_log = log_t.mean()

    spread = float(log_t.std())
    if spread == 0.0:  # defensive; degenerate tails are handled upstream
        return shape_cap, top
    # Moment estimate on the log scale: std(log T) = pi / (k * sqrt(6)).
    k = min(max(math.pi / (spread * math.sqrt(6.0)), shape_floor), shape_cap)

    for _ in range(max_iterations):
        t_k = t**k
        s0 = t_k.sum()
        s1 = (t_k * log_t).sum()
        s2 = (t_k * log_t * log_t).sum()
        f = s1 / s0 - mean_log - 1.0 / k
        fprime = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k)
        step = f / fprime
        k_next = k - step
        if not math.isfinite(k_next):
            break
        k_next = min(max(k_next, shape_floor), shape_cap)
        converged = abs(k_next - k) < tolerance
        k = k_next
        if converged:
            break

    scale = float(np.power(t, k).mean() ** (1.0 / k) * top)
    return float(k), scale


def inclusion_matrix(
    shapes: np.ndarray, scales: np.ndarray, dists: np.ndarray
) -> np.ndarray:
    """exp(-(d / scale_j) ** shape_j) for every entry of ``dists``.

    Column j carries the parameters of model element j. Saturation is the
    intended behaviour: overflow of the power term yields probability 0,
    underflow yields probability 1.
    """
    with np.errstate(over="ignore", under="ignore"):
        z = (dists / scales[None, :]) ** shapes[None, :]
        return np.exp(-z)
