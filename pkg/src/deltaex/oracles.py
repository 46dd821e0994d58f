"""Independent ground-truth machinery: closed-form mixture expectations,
brute-force tensor-grid quadrature, sample-based KL estimation, and the
Kolmogorov-Smirnov statistic for sampler validation."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .mixtures import GaussianSum, SignedGaussianMixture
from .samplers import SampleBatch
from .signed_log import SignedLogValue, signed_logsumexp

__all__ = [
    "exact_mixture_expectation",
    "exact_mixture_expectation_log",
    "quadrature",
    "kl_estimate",
    "ks_statistic",
    "smm_marginal_cdf",
]

QUAD_BOX_DEFAULT = (-8.0, 8.0)
QUAD_POINTS_DEFAULT = 2049


def _pair_overlap_log(mean_a, std_a, mean_b, std_b) -> np.ndarray:
    """log integral of N(.; a) * N(.; b) per (k, m) pair, summed over dims.

    mean/std arrays are (K, d) and (M, d); the result is (K, M).
    """
    var_sum = std_a[:, None, :] ** 2 + std_b[None, :, :] ** 2
    diff = mean_a[:, None, :] - mean_b[None, :, :]
    return np.sum(
        -0.5 * math.log(2 * math.pi) - 0.5 * np.log(var_sum) - diff**2 / (2 * var_sum),
        axis=2,
    )


def exact_mixture_expectation_log(p: SignedGaussianMixture, f: GaussianSum) -> SignedLogValue:
    """Signed log of E_p[f] for a normalized signed mixture p and a
    positively weighted Gaussian-density sum f, via pairwise closed-form
    Gaussian overlap integrals."""
    if p.dim != f.dim:
        raise ValueError("p and f must share the ambient dimension")
    p_means = np.stack([c.leaf.mean for c in p.components])
    p_stds = np.stack([c.leaf.stddev for c in p.components])
    f_means = np.stack([lf.mean for lf in f.leaves])
    f_stds = np.stack([lf.stddev for lf in f.leaves])
    overlap = _pair_overlap_log(p_means, p_stds, f_means, f_stds)  # (K, M)
    signs, log_masses = p.component_log_masses()
    logs = log_masses[:, None] + np.log(f.weights)[None, :] + overlap
    total = signed_logsumexp(
        np.broadcast_to(signs[:, None], logs.shape).ravel(), logs.ravel()
    )
    if total.sign == 0:
        return total
    return SignedLogValue(total.sign, total.log_abs - p.log_z)


def exact_mixture_expectation(p: SignedGaussianMixture, f: GaussianSum) -> float:
    return exact_mixture_expectation_log(p, f).to_real()


def quadrature(
    density_log: Callable[[np.ndarray], np.ndarray],
    box: Sequence[tuple[float, float]] = None,
    points_per_dim: int = QUAD_POINTS_DEFAULT,
    dim: int = None,
) -> float:
    """Trapezoidal tensor-grid integral of exp(density_log) over a box.

    density_log takes an (S, d) batch and returns (S,) log values; d must
    be 1 or 2. The default box is [-8, 8] per dimension.
    """
    if box is None:
        if dim is None:
            raise ValueError("pass either box or dim")
        box = [QUAD_BOX_DEFAULT] * dim
    box = [tuple(map(float, b)) for b in box]
    d = len(box)
    if d > 2:
        raise ValueError("quadrature supports only d <= 2")
    if points_per_dim < 129:
        raise ValueError("need at least 129 points per dimension")
    grids = [np.linspace(lo, hi, points_per_dim) for lo, hi in box]
    if d == 1:
        vals = np.exp(density_log(grids[0][:, None]))
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite density values on the grid")
        return float(np.trapezoid(vals, grids[0]))
    gx, gy = np.meshgrid(grids[0], grids[1], indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = np.exp(density_log(pts)).reshape(gx.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite density values on the grid")
    return float(np.trapezoid(np.trapezoid(vals, grids[1], axis=1), grids[0]))


def kl_estimate(
    p_batch: SampleBatch,
    p_log: Callable[[np.ndarray], np.ndarray],
    q_log: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Monte Carlo KL(p || q) from a batch drawn from p.

    Samples where q is exactly zero contribute +inf, so a zero hit makes
    the whole estimate +inf rather than being masked.
    """
    lp = np.asarray(p_log(p_batch.data), dtype=float)
    lq = np.asarray(q_log(p_batch.data), dtype=float)
    if np.any(lq == -np.inf):
        return math.inf
    return float(np.mean(lp - lq))


def ks_statistic(samples_1d, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup-norm distance between the empirical CDF and ``cdf``."""
    x = np.sort(np.asarray(samples_1d, dtype=float))
    if x.size < 1:
        raise ValueError("need at least one sample")
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(i / n - f, f - (i - 1) / n)))


def smm_marginal_cdf(smm: SignedGaussianMixture, dim_index: int = 0):
    """Analytic marginal CDF of one coordinate of a normalized signed
    mixture: the signed combination of component CDFs, clamped to [0, 1]."""
    signs, log_masses = smm.component_log_masses()
    shift = log_masses.max()
    coeffs = signs * np.exp(log_masses - shift)
    norm = math.exp(smm.log_z - shift)
    mus = np.array([c.leaf.mean[dim_index] for c in smm.components])
    sigmas = np.array([c.leaf.stddev[dim_index] for c in smm.components])

    def cdf(m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        phi = ndtr((m[:, None] - mus[None, :]) / sigmas[None, :])
        vals = np.clip(phi @ coeffs / norm, 0.0, 1.0)
        return vals if vals.size > 1 else vals
    return cdf
