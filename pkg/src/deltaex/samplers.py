"""Mixture samplers: ancestral, stratified, and autoregressive inverse
transform sampling (bisection inversion of conditional CDFs) for full
signed mixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import BracketError, ZeroEvidenceError
from .mixtures import AdditiveMixture, SignedGaussianMixture

__all__ = [
    "SampleBatch",
    "AritsConfig",
    "derive_seed",
    "ancestral_sample",
    "stratified_counts",
    "stratified_sample",
    "conditional_cdf",
    "arits_sample",
    "write_sample_csv",
]


@dataclass(frozen=True)
class SampleBatch:
    """S x d sample matrix with provenance."""

    data: np.ndarray
    strata: Optional[np.ndarray]
    seed: int
    method: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be an (S, d) matrix")
        if data.size and not np.all(np.isfinite(data)):
            raise ValueError("sample matrix contains non-finite rows")
        object.__setattr__(self, "data", data)
        if self.strata is not None:
            strata = np.asarray(self.strata, dtype=int)
            if strata.shape != (data.shape[0],):
                raise ValueError("strata must align with sample rows")
            object.__setattr__(self, "strata", strata)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AritsConfig:
    lower_bound: float = -100.0
    upper_bound: float = 100.0
    tolerance: float = 1e-6
    boundary_check: bool = True
    # skipping converged lanes is bit-identical to the all-lanes variant
    # because each lane's bisection path is independent
    skip_converged: bool = True

    def __post_init__(self):
        if not self.lower_bound < self.upper_bound:
            raise ValueError("lower_bound must be below upper_bound")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


def derive_seed(master_seed: int, *key) -> int:
    """Deterministic 64-bit child seed for (master_seed, key...).

    Sub-streams derived this way are independent of sweep execution order.
    """
    entropy = (int(master_seed),) + tuple(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def ancestral_sample(mix: AdditiveMixture, n: int, seed: int) -> SampleBatch:
    """n i.i.d. draws: categorical component choice, then a Gaussian draw."""
    rng = np.random.default_rng(seed)
    if n == 0:
        return SampleBatch(np.empty((0, mix.dim)), np.empty(0, dtype=int), seed, "ancestral")
    strata = rng.choice(mix.n_components, size=n, p=mix.weights)
    data = np.empty((n, mix.dim))
    for k, leaf in enumerate(mix.leaves):
        rows = strata == k
        cnt = int(rows.sum())
        if cnt:
            data[rows] = leaf.sample(cnt, rng)
    return SampleBatch(data, strata, seed, "ancestral")


def stratified_counts(weights: np.ndarray, n: int) -> np.ndarray:
    """Floor-plus-largest-remainder allocation; ties broken by lowest index."""
    weights = np.asarray(weights, dtype=float)
    raw = weights * n
    counts = np.floor(raw).astype(int)
    remainder = n - int(counts.sum())
    if remainder > 0:
        frac = raw - counts
        # stable sort on (-frac, index): lexsort's last key is primary
        order = np.lexsort((np.arange(weights.size), -frac))
        counts[order[:remainder]] += 1
    return counts


def stratified_sample(mix: AdditiveMixture, n: int, seed: int) -> SampleBatch:
    """Deterministic per-component counts proportional to the weights."""
    rng = np.random.default_rng(seed)
    counts = stratified_counts(mix.weights, n)
    data = np.empty((n, mix.dim))
    strata = np.empty(n, dtype=int)
    pos = 0
    for k, leaf in enumerate(mix.leaves):
        cnt = int(counts[k])
        if cnt:
            data[pos : pos + cnt] = leaf.sample(cnt, rng)
            strata[pos : pos + cnt] = k
            pos += cnt
    return SampleBatch(data, strata, seed, "stratified")


def _leaf_params(smm: SignedGaussianMixture):
    means = np.stack([c.leaf.mean for c in smm.components])  # (K, d)
    stds = np.stack([c.leaf.stddev for c in smm.components])
    return means, stds


def _prefix_state(smm: SignedGaussianMixture, prefix: np.ndarray):
    """Per-sample evidence terms for the observed prefix.

    prefix is (S, i-1). Returns (per-component signed factors W of shape
    (S, K) already divided by a per-sample max-shift, and the shifted
    evidence totals of shape (S,)). Conditional CDF ratios are invariant to
    the shift.
    """
    means, stds = _leaf_params(smm)
    signs, log_masses = smm.component_log_masses()
    s, i = prefix.shape
    if i == 0:
        logs = np.broadcast_to(log_masses, (s, log_masses.size)).copy()
    else:
        z = (prefix[:, None, :] - means[None, :, :i]) / stds[None, :, :i]
        leaf_logs = np.sum(
            -0.5 * math.log(2 * math.pi) - np.log(stds[None, :, :i]) - 0.5 * z * z, axis=2
        )
        logs = log_masses + leaf_logs
    shift = logs.max(axis=1, keepdims=True)
    w = signs * np.exp(logs - shift)  # (S, K)
    evidence = w.sum(axis=1)
    if np.any(evidence <= 0.0):
        bad = int(np.argmax(evidence <= 0.0))
        raise ZeroEvidenceError(
            f"prefix for sample {bad} has non-positive evidence; "
            "the conditioning point lies in a zero-density valley"
        )
    return w, evidence


def _conditional_cdf_from_state(w, evidence, mu_i, sigma_i, m):
    """CDF values for thresholds m (S,) given precomputed prefix state."""
    phi = ndtr((m[:, None] - mu_i[None, :]) / sigma_i[None, :])
    num = np.sum(w * phi, axis=1)
    return np.clip(num / evidence, 0.0, 1.0)


def conditional_cdf(
    smm: SignedGaussianMixture,
    prefix,
    dim_index: int,
    m: float,
    evidence=None,
) -> float:
    """P(x_i <= m | x_1..x_{i-1} = prefix) under the normalized mixture.

    dim_index is 1-based; prefix has length dim_index - 1. ``evidence`` is
    accepted for interface parity but recomputed state is used when absent.
    """
    prefix = np.asarray(prefix, dtype=float).reshape(1, -1)
    if prefix.shape[1] != dim_index - 1:
        raise ValueError("prefix length must be dim_index - 1")
    if not 1 <= dim_index <= smm.dim:
        raise ValueError("dim_index out of range")
    w, ev = _prefix_state(smm, prefix)
    if evidence is not None:
        ev = np.asarray([float(evidence)])
        if ev[0] <= 0.0:
            raise ZeroEvidenceError("supplied evidence is not positive")
    means, stds = _leaf_params(smm)
    c = _conditional_cdf_from_state(
        w, ev, means[:, dim_index - 1], stds[:, dim_index - 1], np.asarray([float(m)])
    )
    return float(c[0])


def _bisect_dim(w, evidence, mu_i, sigma_i, u, cfg: AritsConfig) -> np.ndarray:
    """Invert the conditional CDF for every lane by bisection."""
    n = u.shape[0]
    if cfg.boundary_check:
        lo_c = _conditional_cdf_from_state(
            w, evidence, mu_i, sigma_i, np.full(n, cfg.lower_bound)
        )
        hi_c = _conditional_cdf_from_state(
            w, evidence, mu_i, sigma_i, np.full(n, cfg.upper_bound)
        )
        if np.any(lo_c > 1e-6) or np.any(hi_c < 1.0 - 1e-6):
            raise BracketError(
                "conditional CDF is not ~0/~1 at the bracket endpoints "
                f"[{cfg.lower_bound}, {cfg.upper_bound}]"
            )
    lo = np.full(n, cfg.lower_bound)
    hi = np.full(n, cfg.upper_bound)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0] if cfg.skip_converged else slice(None)
        mid = lo[idx] + (hi[idx] - lo[idx]) / 2.0
        c = _conditional_cdf_from_state(w[idx], evidence[idx], mu_i, sigma_i, mid)
        gt = c > u[idx]
        hi_idx = hi[idx]
        lo_idx = lo[idx]
        hi_idx[gt] = mid[gt]
        lo_idx[~gt] = mid[~gt]
        hi[idx] = hi_idx
        lo[idx] = lo_idx
        active = (hi - lo) > cfg.tolerance
    return lo + (hi - lo) / 2.0


def invert_conditional_cdf(
    smm: SignedGaussianMixture, prefix, dim_index: int, u, cfg: AritsConfig
) -> np.ndarray:
    """Quantiles of the conditional CDF at probabilities u (one per row of
    prefix), via the same bisection path the full sampler uses."""
    prefix = np.asarray(prefix, dtype=float)
    if prefix.ndim == 1:
        prefix = prefix.reshape(1, -1)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w, evidence = _prefix_state(smm, prefix)
    means, stds = _leaf_params(smm)
    return _bisect_dim(w, evidence, means[:, dim_index - 1], stds[:, dim_index - 1], u, cfg)


def arits_sample(
    smm: SignedGaussianMixture, n: int, cfg: AritsConfig, seed: int
) -> SampleBatch:
    """Draw n samples from the full signed mixture by inverting each
    conditional CDF in ascending dimension order.

    Uniform variates are drawn once per (sample, dimension) before the
    bisection for that dimension starts.
    """
    if smm.z_q.sign <= 0:
        raise ValueError("sampling requires a positive normalization constant")
    rng = np.random.default_rng(seed)
    if n == 0:
        return SampleBatch(np.empty((0, smm.dim)), None, seed, "arits")
    means, stds = _leaf_params(smm)
    data = np.empty((n, smm.dim))
    for i in range(smm.dim):
        u = rng.uniform(size=n)
        w, evidence = _prefix_state(smm, data[:, :i])
        data[:, i] = _bisect_dim(w, evidence, means[:, i], stds[:, i], u, cfg)
    return SampleBatch(data, None, seed, "arits")


def write_sample_csv(batch: SampleBatch, path) -> None:
    """Sample dump: header x1,...,xd,stratum,method, one row per sample."""
    cols = [f"x{i + 1}" for i in range(batch.dim)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols + ["stratum", "method"]) + "\n")
        for s in range(batch.n):
            stratum = "" if batch.strata is None else str(int(batch.strata[s]))
            row = [f"{v:.17g}" for v in batch.data[s]]
            fh.write(",".join(row + [stratum, batch.method]) + "\n")
