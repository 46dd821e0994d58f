"""Diagonal-Gaussian leaves, signed mixtures, squaring and the
positive/negative difference decomposition.

A signed mixture is sum_k coeff_k * exp(log_scale_k) * leaf_k(x) where every
leaf is a normalized diagonal Gaussian. log_scale absorbs the constants
produced by Gaussian products during squaring, so coefficients stay O(1)
even when the effective component masses underflow double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateModelError
from .signed_log import SignedLogValue, signed_logsumexp, signed_logsumexp_batch

LOG_HALF_2PI = 0.5 * math.log(2.0 * math.pi)

# effective masses |coeff| * exp(log_scale) below this are dropped at
# construction so samplers never see sign-0 strata
PRUNE_LOG_MASS = math.log(1e-300)

__all__ = [
    "GaussianLeaf",
    "Component",
    "SignedGaussianMixture",
    "AdditiveMixture",
    "GaussianSum",
    "DifferenceForm",
    "gaussian_logpdf",
    "gaussian_product",
    "square_smm",
    "normalizing_constant",
    "smm_logdensity",
    "difference_form",
    "smm_to_dict",
    "smm_from_dict",
    "base_mixture_from_dict",
    "load_model",
]


@dataclass(frozen=True)
class GaussianLeaf:
    """Factorized Gaussian with per-dimension mean and standard deviation."""

    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        stddev = np.atleast_1d(np.asarray(self.stddev, dtype=float))
        if mean.ndim != 1 or stddev.ndim != 1 or mean.shape != stddev.shape:
            raise ValueError("mean and stddev must be 1-D and of equal length")
        if mean.size < 1:
            raise ValueError("dimension must be at least 1")
        if not np.all(stddev > 0.0):
            raise ValueError("all stddev entries must be strictly positive")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(stddev))):
            raise ValueError("leaf parameters must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", stddev)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.mean.shape:
            raise ValueError(f"point has dim {x.size}, leaf has dim {self.dim}")
        z = (x - self.mean) / self.stddev
        return float(np.sum(-LOG_HALF_2PI - np.log(self.stddev) - 0.5 * z * z))

    def logpdf_batch(self, x: np.ndarray) -> np.ndarray:
        """(S, d) points -> (S,) log densities."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"expected shape (S, {self.dim}), got {x.shape}")
        z = (x - self.mean) / self.stddev
        return np.sum(-LOG_HALF_2PI - np.log(self.stddev) - 0.5 * z * z, axis=1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.stddev * rng.standard_normal((n, self.dim))


def gaussian_logpdf(leaf: GaussianLeaf, x) -> float:
    return leaf.logpdf(x)


def gaussian_product(a: GaussianLeaf, b: GaussianLeaf) -> tuple[float, GaussianLeaf]:
    """Closed-form pointwise product: a(x) * b(x) = exp(log_scale) * leaf(x)."""
    if a.dim != b.dim:
        raise ValueError(f"leaf dims differ: {a.dim} vs {b.dim}")
    va, vb = a.stddev**2, b.stddev**2
    var_star = 1.0 / (1.0 / va + 1.0 / vb)
    mu_star = var_star * (a.mean / va + b.mean / vb)
    var_sum = va + vb
    log_scale = float(
        np.sum(-LOG_HALF_2PI - 0.5 * np.log(var_sum) - (a.mean - b.mean) ** 2 / (2.0 * var_sum))
    )
    return log_scale, GaussianLeaf(mu_star, np.sqrt(var_star))


@dataclass(frozen=True)
class Component:
    coeff: float
    log_scale: float
    leaf: GaussianLeaf

    @property
    def log_mass(self) -> float:
        """log |coeff * exp(log_scale)|; the leaf integrates to one."""
        if self.coeff == 0.0:
            return -math.inf
        return math.log(abs(self.coeff)) + self.log_scale

    @property
    def mass_sign(self) -> int:
        return 0 if self.coeff == 0.0 else (1 if self.coeff > 0 else -1)


class SignedGaussianMixture:
    """Signed mixture over diagonal-Gaussian leaves.

    Immutable after construction. The cached normalization constant z_q is
    the signed log-sum of the component masses; it may be indefinite for a
    pre-squaring base mixture, but must be positive wherever a normalized
    density is evaluated.
    """

    __slots__ = ("components", "dim", "z_q", "_signs", "_log_masses")

    def __init__(self, components: Sequence[Component]):
        components = tuple(c for c in components if c.log_mass > PRUNE_LOG_MASS)
        if not components:
            raise ValueError("mixture needs at least one non-degenerate component")
        dim = components[0].leaf.dim
        if any(c.leaf.dim != dim for c in components):
            raise ValueError("all leaves must share the same dimension")
        self.components = components
        self.dim = dim
        self._signs = np.array([c.mass_sign for c in components], dtype=float)
        self._log_masses = np.array([c.log_mass for c in components])
        self.z_q = signed_logsumexp(self._signs, self._log_masses)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def log_z(self) -> float:
        """log Z_q; requires a positive normalization constant."""
        if self.z_q.sign <= 0:
            raise DegenerateModelError("normalization constant is not positive")
        return self.z_q.log_abs

    def component_log_masses(self) -> tuple[np.ndarray, np.ndarray]:
        """(signs, log |coeff_k * exp(log_scale_k)|) per component."""
        return self._signs.copy(), self._log_masses.copy()

    def logdensity(self, x, normalized: bool = True) -> SignedLogValue:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        signs, logs = self.logdensity_batch(x[None, :], normalized=normalized)
        sgn = int(signs[0])
        return SignedLogValue(sgn, float(logs[0]) if sgn != 0 else -math.inf)

    def logdensity_batch(self, x: np.ndarray, normalized: bool = True):
        """(S, d) points -> (sign (S,), log-magnitude (S,)) of the density."""
        x = np.asarray(x, dtype=float)
        leaf_logs = np.stack([c.leaf.logpdf_batch(x) for c in self.components], axis=1)
        signs, logs = signed_logsumexp_batch(
            np.broadcast_to(self._signs, leaf_logs.shape),
            self._log_masses + leaf_logs,
        )
        if normalized:
            logs = logs - self.log_z
        return signs, logs

    def __repr__(self):
        return (
            f"SignedGaussianMixture(dim={self.dim}, K={self.n_components}, "
            f"z_q=({self.z_q.sign}, {self.z_q.log_abs:.6g}))"
        )


def smm_logdensity(smm: SignedGaussianMixture, x, normalized: bool = True) -> SignedLogValue:
    return smm.logdensity(x, normalized=normalized)


def normalizing_constant(smm: SignedGaussianMixture) -> SignedLogValue:
    """Recompute the signed normalization constant from the components."""
    signs, logs = smm.component_log_masses()
    return signed_logsumexp(signs, logs)


def square_smm(base: SignedGaussianMixture) -> SignedGaussianMixture:
    """Square a signed mixture into its K(K+1)/2 unique pairwise products.

    Diagonal terms get coeff_k^2, off-diagonal ones 2*coeff_k*coeff_k'; the
    result is a non-negative density. Raises DegenerateModelError if the
    recomputed mass is not strictly positive and finite.
    """
    comps = base.components
    out: list[Component] = []
    for k, ck in enumerate(comps):
        for kp in range(k, len(comps)):
            ckp = comps[kp]
            pair_scale, leaf = gaussian_product(ck.leaf, ckp.leaf)
            coeff = ck.coeff * ckp.coeff * (1.0 if kp == k else 2.0)
            out.append(Component(coeff, ck.log_scale + ckp.log_scale + pair_scale, leaf))
    squared = SignedGaussianMixture(out)
    if squared.z_q.sign <= 0 or not math.isfinite(squared.z_q.log_abs):
        raise DegenerateModelError(
            "squared mixture has non-positive or non-finite normalization constant"
        )
    return squared


@dataclass(frozen=True)
class AdditiveMixture:
    """Classical convex mixture of Gaussian leaves (weights >= 0, sum 1)."""

    weights: np.ndarray
    leaves: tuple[GaussianLeaf, ...]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size != len(self.leaves):
            raise ValueError("need one weight per leaf")
        if np.any(weights < 0.0):
            raise ValueError("mixture weights must be non-negative")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "leaves", tuple(self.leaves))

    @property
    def dim(self) -> int:
        return self.leaves[0].dim

    @property
    def n_components(self) -> int:
        return len(self.leaves)

    def logdensity_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        leaf_logs = np.stack([lf.logpdf_batch(x) for lf in self.leaves], axis=1)
        with np.errstate(divide="ignore"):
            logw = np.where(self.weights > 0, np.log(np.maximum(self.weights, 1e-320)), -np.inf)
        _, logs = signed_logsumexp_batch(np.ones_like(leaf_logs), logw + leaf_logs)
        return logs


@dataclass(frozen=True)
class GaussianSum:
    """Positively weighted sum of Gaussian densities (not normalized).

    Used both as the integrand family of the expectation benchmark and as
    the closed-form side of the exact-expectation oracle.
    """

    weights: np.ndarray
    leaves: tuple[GaussianLeaf, ...]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size != len(self.leaves):
            raise ValueError("need one weight per leaf")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "leaves", tuple(self.leaves))
        object.__setattr__(self, "_means", np.stack([lf.mean for lf in self.leaves]))
        object.__setattr__(self, "_stds", np.stack([lf.stddev for lf in self.leaves]))

    @property
    def dim(self) -> int:
        return self.leaves[0].dim

    def log_eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inv_var = 1.0 / self._stds**2  # (M, d)
        # expand the quadratic form so the (S, M) log matrix comes from
        # two matmuls instead of an (S, M, d) intermediate
        const = (
            np.log(self.weights)
            + np.sum(-LOG_HALF_2PI - np.log(self._stds), axis=1)
            - 0.5 * np.sum(self._means**2 * inv_var, axis=1)
        )
        logs = const - 0.5 * (x**2) @ inv_var.T + x @ (self._means * inv_var).T
        shift = logs.max(axis=1)
        return shift + np.log(np.sum(np.exp(logs - shift[:, None]), axis=1))

    def eval(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_eval(x))


@dataclass(frozen=True)
class DifferenceForm:
    """Split of a signed mixture into q = (Z+ q+ - Z- q-) / Z_q.

    Masses are kept in log form; z_plus/z_minus/z_q expose the linear
    values where they are representable.
    """

    positive: AdditiveMixture
    negative: Optional[AdditiveMixture]
    log_z_plus: float
    log_z_minus: float
    log_z_q: float
    # per (sub)component: index into the source mixture, for provenance
    positive_source: tuple[int, ...] = field(default=())
    negative_source: tuple[int, ...] = field(default=())

    @property
    def z_plus(self) -> float:
        return math.exp(self.log_z_plus)

    @property
    def z_minus(self) -> float:
        return 0.0 if self.log_z_minus == -math.inf else math.exp(self.log_z_minus)

    @property
    def z_q(self) -> float:
        return math.exp(self.log_z_q)

    @property
    def has_negative(self) -> bool:
        return self.negative is not None

    def logdensity_batch(self, x: np.ndarray):
        """Signed log density of the reconstructed (normalized) mixture."""
        lp = self.log_z_plus - self.log_z_q + self.positive.logdensity_batch(x)
        if self.negative is None:
            return np.where(lp > -np.inf, 1, 0).astype(np.int8), lp
        lm = self.log_z_minus - self.log_z_q + self.negative.logdensity_batch(x)
        stacked_logs = np.stack([lp, lm], axis=1)
        stacked_signs = np.stack([np.ones_like(lp), -np.ones_like(lm)], axis=1)
        return signed_logsumexp_batch(stacked_signs, stacked_logs)


def difference_form(smm: SignedGaussianMixture) -> DifferenceForm:
    """Partition components by coefficient sign into two additive mixtures."""
    if smm.z_q.sign <= 0:
        raise DegenerateModelError("difference form requires a positive normalization constant")
    signs, log_masses = smm.component_log_masses()
    pos_idx = [k for k in range(smm.n_components) if signs[k] > 0]
    neg_idx = [k for k in range(smm.n_components) if signs[k] < 0]
    if not pos_idx:
        raise DegenerateModelError("mixture has no positively weighted component")

    def part(idx):
        logs = log_masses[idx]
        shift = logs.max()
        rel = np.exp(logs - shift)
        log_z = shift + math.log(float(rel.sum()))
        weights = rel / rel.sum()
        leaves = tuple(smm.components[k].leaf for k in idx)
        return AdditiveMixture(weights, leaves), log_z

    positive, log_z_plus = part(pos_idx)
    if neg_idx:
        negative, log_z_minus = part(neg_idx)
    else:
        negative, log_z_minus = None, -math.inf
    return DifferenceForm(
        positive=positive,
        negative=negative,
        log_z_plus=log_z_plus,
        log_z_minus=log_z_minus,
        log_z_q=smm.log_z,
        positive_source=tuple(pos_idx),
        negative_source=tuple(neg_idx),
    )


# --- serialization -------------------------------------------------------

def smm_to_dict(smm: SignedGaussianMixture) -> dict:
    return {
        "dim": smm.dim,
        "components": [
            {
                "coeff": c.coeff,
                "log_scale": c.log_scale,
                "mean": c.leaf.mean.tolist(),
                "stddev": c.leaf.stddev.tolist(),
            }
            for c in smm.components
        ],
    }


def smm_from_dict(doc: dict) -> SignedGaussianMixture:
    dim = int(doc["dim"])
    comps = []
    for c in doc["components"]:
        leaf = GaussianLeaf(np.asarray(c["mean"], float), np.asarray(c["stddev"], float))
        if leaf.dim != dim:
            raise ValueError("component dimension disagrees with model dim")
        comps.append(Component(float(c["coeff"]), float(c.get("log_scale", 0.0)), leaf))
    return SignedGaussianMixture(comps)


def base_mixture_from_dict(doc: dict) -> SignedGaussianMixture:
    """Pre-squaring form: {dim, coeffs: [...], leaves: [{mean, stddev}]}."""
    dim = int(doc["dim"])
    coeffs = doc["coeffs"]
    leaves = doc["leaves"]
    if len(coeffs) != len(leaves):
        raise ValueError("coeffs and leaves must have equal lengths")
    comps = []
    for coeff, lf in zip(coeffs, leaves):
        leaf = GaussianLeaf(np.asarray(lf["mean"], float), np.asarray(lf["stddev"], float))
        if leaf.dim != dim:
            raise ValueError("leaf dimension disagrees with model dim")
        comps.append(Component(float(coeff), 0.0, leaf))
    return SignedGaussianMixture(comps)


def load_model(path, square: bool = False) -> SignedGaussianMixture:
    """Load a model JSON file; with square=True the pre-squaring form is
    expected and the loaded mixture is squared."""
    with open(path) as fh:
        doc = json.load(fh)
    if square:
        return square_smm(base_mixture_from_dict(doc))
    return smm_from_dict(doc)
