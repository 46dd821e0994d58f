"""Importance sampling estimators over the difference representation of a
signed mixture, plus the plain UIS/SNIS baselines and replication
statistics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateWeightsError, StarvedBudgetError
from .mixtures import (
    Component,
    DifferenceForm,
    GaussianLeaf,
    GaussianSum,
    SignedGaussianMixture,
    difference_form,
)
from .samplers import SampleBatch, ancestral_sample, derive_seed, stratified_sample

__all__ = [
    "Target",
    "Integrand",
    "Proposal",
    "BudgetPlan",
    "Estimate",
    "ReplicationStats",
    "target_from_smm",
    "allocate_budget",
    "allocate_budget_log",
    "with_safe",
    "delta_ex",
    "uis_estimate",
    "snis_estimate",
    "replication_stats",
    "estimates_to_csv",
]

LogDensityFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Target:
    """Integration target p, known up to an optional normalizing constant.

    log_density maps an (S, d) batch to log p~(x); -inf marks zero density.
    When known_log_z is None the estimator runs in normalizing-constant
    mode and its weights carry p~ rather than p.
    """

    log_density: LogDensityFn
    known_log_z: Optional[float] = None
    description: str = ""


@dataclass(frozen=True)
class Integrand:
    """Function f whose expectation under the target is sought."""

    eval: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    @classmethod
    def one(cls) -> "Integrand":
        return cls(lambda x: np.ones(x.shape[0]), "constant 1")

    @classmethod
    def from_gaussian_sum(cls, gs: GaussianSum) -> "Integrand":
        return cls(gs.eval, f"sum of {len(gs.leaves)} Gaussian densities")


def target_from_smm(smm: SignedGaussianMixture, normalized: bool = True) -> Target:
    """Target backed by a signed mixture.

    normalized=True gives the proper density (known_log_z = 0); False gives
    the unnormalized numerator, whose integral the estimator then recovers.
    """

    def log_density(x: np.ndarray) -> np.ndarray:
        signs, logs = smm.logdensity_batch(x, normalized=normalized)
        return np.where(signs > 0, logs, -np.inf)

    return Target(log_density, known_log_z=0.0 if normalized else None)


@dataclass(frozen=True)
class Proposal:
    """Proposal density: a signed mixture plus its difference form, with an
    optional flat safe component already folded into the positive part."""

    smm: SignedGaussianMixture
    diff: DifferenceForm
    safe: Optional[tuple[GaussianLeaf, float]] = None

    @classmethod
    def from_smm(cls, smm: SignedGaussianMixture) -> "Proposal":
        return cls(smm, difference_form(smm))

    def logdensity_batch(self, x: np.ndarray) -> np.ndarray:
        signs, logs = self.smm.logdensity_batch(x, normalized=True)
        return np.where(signs > 0, logs, -np.inf)


def with_safe(smm: SignedGaussianMixture, safe_leaf: GaussianLeaf, alpha: float) -> Proposal:
    """Convex mix (1 - alpha) * q_smm + alpha * q_safe as a new proposal.

    The safe leaf lands in the positive part of the difference form; the
    mixed density is already normalized (Z+' - Z-' = 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    if safe_leaf.dim != smm.dim:
        raise ValueError("safe leaf dimension disagrees with the mixture")
    log_zq = smm.log_z
    shift = math.log1p(-alpha) - log_zq
    comps = [Component(c.coeff, c.log_scale + shift, c.leaf) for c in smm.components]
    comps.append(Component(1.0, math.log(alpha), safe_leaf))
    mixed = SignedGaussianMixture(comps)
    return Proposal(mixed, difference_form(mixed), safe=(safe_leaf, alpha))


@dataclass(frozen=True)
class BudgetPlan:
    total: int
    s_plus: int
    s_minus: int
    scheme: str

    def __post_init__(self):
        if self.s_plus + self.s_minus > self.total:
            raise ValueError("allocated samples exceed the total budget")


def allocate_budget(z_plus: float, z_minus: float, total: int, scheme: str) -> BudgetPlan:
    """Split the sampling budget between the positive and negative parts."""
    if z_plus <= 0 or z_minus < 0:
        raise ValueError("z_plus must be positive and z_minus non-negative")
    if scheme not in ("proportional", "equal"):
        raise ValueError(f"unknown allocation scheme {scheme!r}")
    if z_minus == 0.0:
        return BudgetPlan(total, total, 0, scheme)
    if total < 2:
        raise StarvedBudgetError("need at least 2 samples when both parts are present")
    if scheme == "proportional":
        s_plus = int(math.floor(z_plus / (z_plus + z_minus) * total))
        s_minus = int(math.floor(z_minus / (z_plus + z_minus) * total))
        if s_plus == 0 or s_minus == 0:
            raise StarvedBudgetError(
                f"proportional allocation starves one part (S+={s_plus}, S-={s_minus})"
            )
    else:
        s_plus = s_minus = total // 2
    return BudgetPlan(total, s_plus, s_minus, scheme)


def allocate_budget_log(
    log_z_plus: float, log_z_minus: float, total: int, scheme: str
) -> BudgetPlan:
    """allocate_budget on log masses; safe when the linear masses underflow."""
    if log_z_minus == -math.inf:
        return allocate_budget(1.0, 0.0, total, scheme)
    return allocate_budget(1.0, math.exp(log_z_minus - log_z_plus), total, scheme)


@dataclass(frozen=True)
class Estimate:
    value: float
    budget: BudgetPlan
    wall_time_s: float
    max_log_weight: float
    zero_denominator_hits: int
    method: str = ""
    scheme: str = ""
    seed: int = 0

    @property
    def flagged(self) -> bool:
        return self.zero_denominator_hits > 0


def _part_contribution(
    target: Target,
    f: Integrand,
    proposal: Proposal,
    batch: SampleBatch,
    log_part_ratio: float,
):
    """(Z_part / Z_q) * mean(f * w) over one part's batch, via a max-shift
    on the log weights."""
    x = batch.data
    log_q = proposal.logdensity_batch(x)
    log_p = target.log_density(x)
    hits = int(np.sum(log_q == -np.inf))
    with np.errstate(invalid="ignore"):
        log_w = log_p - log_q
    finite = np.isfinite(log_w)
    max_log_w = float(log_w[finite].max()) if finite.any() else -math.inf
    if hits:
        return math.nan, max_log_w, hits
    shift = max_log_w if finite.any() else 0.0
    terms = f.eval(x) * np.exp(log_w - shift)
    mean = float(terms.mean())
    return math.exp(log_part_ratio + shift) * mean if mean != 0.0 else 0.0, max_log_w, hits


def delta_ex(
    target: Target,
    f: Integrand,
    proposal: Proposal,
    budget: BudgetPlan,
    sampler: str = "stratified",
    seed: int = 0,
) -> Estimate:
    """Difference-of-expectations estimate of E_p[f] (or of the integral of
    f * p~ when the target's normalizing constant is unknown).

    Samples the positive and negative parts of the proposal separately with
    the chosen mixture sampler; weights use the full signed mixture in the
    denominator. Samples where the proposal density is exactly zero are
    counted and flag the estimate as non-finite.
    """
    if sampler not in ("ancestral", "stratified"):
        raise ValueError(f"unknown sampler {sampler!r}")
    diff = proposal.diff
    if diff.has_negative and budget.s_minus == 0:
        raise StarvedBudgetError("negative part present but no samples allocated to it")
    draw = ancestral_sample if sampler == "ancestral" else stratified_sample

    t0 = time.perf_counter()
    plus_batch = draw(diff.positive, budget.s_plus, derive_seed(seed, 0))
    value, max_log_w, hits = _part_contribution(
        target, f, proposal, plus_batch, diff.log_z_plus - diff.log_z_q
    )
    if diff.has_negative:
        minus_batch = draw(diff.negative, budget.s_minus, derive_seed(seed, 1))
        neg_value, neg_mlw, neg_hits = _part_contribution(
            target, f, proposal, minus_batch, diff.log_z_minus - diff.log_z_q
        )
        value = value - neg_value
        max_log_w = max(max_log_w, neg_mlw)
        hits += neg_hits
    wall = time.perf_counter() - t0
    if hits:
        value = math.nan
    return Estimate(
        value=value,
        budget=budget,
        wall_time_s=wall,
        max_log_weight=max_log_w,
        zero_denominator_hits=hits,
        method="DExA" if sampler == "ancestral" else "DExS",
        scheme=budget.scheme,
        seed=seed,
    )


def uis_estimate(
    target: Target, f: Integrand, batch: SampleBatch, q_log_density: LogDensityFn
) -> Estimate:
    """Unnormalized IS: mean of w * f with w = p / q over a batch from q."""
    t0 = time.perf_counter()
    x = batch.data
    log_q = q_log_density(x)
    log_p = target.log_density(x)
    hits = int(np.sum(log_q == -np.inf))
    with np.errstate(invalid="ignore"):
        log_w = log_p - log_q
    finite = np.isfinite(log_w)
    max_log_w = float(log_w[finite].max()) if finite.any() else -math.inf
    if hits:
        value = math.nan
    else:
        shift = max_log_w if finite.any() else 0.0
        terms = f.eval(x) * np.exp(log_w - shift)
        mean = float(terms.mean())
        value = math.exp(shift) * mean if mean != 0.0 else 0.0
    return Estimate(
        value=value,
        budget=BudgetPlan(batch.n, batch.n, 0, "single"),
        wall_time_s=time.perf_counter() - t0,
        max_log_weight=max_log_w,
        zero_denominator_hits=hits,
        method="UIS",
        seed=batch.seed,
    )


def snis_estimate(
    target: Target, f: Integrand, batch: SampleBatch, q_log_density: LogDensityFn
) -> Estimate:
    """Self-normalized IS: weights normalized over the batch, so the result
    is invariant to positive rescaling of the unnormalized target."""
    t0 = time.perf_counter()
    x = batch.data
    log_q = q_log_density(x)
    log_p = target.log_density(x)
    hits = int(np.sum(log_q == -np.inf))
    with np.errstate(invalid="ignore"):
        log_w = np.where(log_q == -np.inf, -np.inf, log_p - log_q)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise DegenerateWeightsError("all importance weights are zero")
    max_log_w = float(log_w[finite].max())
    w = np.exp(log_w - max_log_w)
    value = float(np.sum(w * f.eval(x)) / np.sum(w))
    return Estimate(
        value=value,
        budget=BudgetPlan(batch.n, batch.n, 0, "single"),
        wall_time_s=time.perf_counter() - t0,
        max_log_weight=max_log_w,
        zero_denominator_hits=hits,
        method="SNIS",
        seed=batch.seed,
    )


@dataclass(frozen=True)
class ReplicationStats:
    variance: float
    cov: float
    mean_log_abs_err: float
    n: int


def replication_stats(estimates: Sequence, true_value: float) -> ReplicationStats:
    """Unbiased variance, coefficient of variation and mean log absolute
    error across replications."""
    values = np.asarray([getattr(e, "value", e) for e in estimates], dtype=float)
    if values.size < 2:
        raise ValueError("need at least 2 replications")
    variance = float(np.var(values, ddof=1))
    cov = math.sqrt(variance) / true_value
    with np.errstate(divide="ignore"):
        mean_log_abs_err = float(np.mean(np.log(np.abs(values - true_value))))
    return ReplicationStats(variance, cov, mean_log_abs_err, values.size)


def estimates_to_csv(estimates: Sequence[Estimate], path) -> None:
    header = "method,scheme,S,S_plus,S_minus,value,flag_zero_denominator,time_s,seed"
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for e in estimates:
            fh.write(
                f"{e.method},{e.scheme},{e.budget.total},{e.budget.s_plus},"
                f"{e.budget.s_minus},{e.value:.17g},{int(e.flagged)},"
                f"{e.wall_time_s:.6g},{e.seed}\n"
            )
