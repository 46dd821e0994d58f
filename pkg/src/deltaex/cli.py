"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 usage/parse error,
3 starved budget, 4 low-density-valley pathology (zero-denominator flags
on more than half of the replications).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import StarvedBudgetError
from .estimators import (
    Integrand,
    Proposal,
    allocate_budget_log,
    delta_ex,
    estimates_to_csv,
    replication_stats,
    target_from_smm,
)
from .experiments import (
    Rq1Config,
    Rq2Config,
    run_rq1,
    run_rq2,
    write_metadata,
    write_sweep_csv,
)
from .mixtures import (
    GaussianLeaf,
    GaussianSum,
    SignedGaussianMixture,
    difference_form,
    load_model,
)
from .oracles import quadrature
from .samplers import (
    AritsConfig,
    ancestral_sample,
    arits_sample,
    derive_seed,
    stratified_sample,
    write_sample_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_STARVED = 3
EXIT_VALLEY = 4


def _load(path, square: bool) -> SignedGaussianMixture:
    try:
        return load_model(path, square=square)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise SystemExit(_usage_error(f"cannot load model {path}: {exc}"))


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def cmd_sample(args) -> int:
    smm = _load(args.model, args.square)
    if args.method == "arits":
        if args.part != "full":
            return _usage_error("arits samples the full mixture; use --part full")
        batch = arits_sample(smm, args.n, AritsConfig(), args.seed)
    else:
        if args.part not in ("plus", "minus"):
            return _usage_error(f"{args.method} requires --part plus or minus")
        diff = difference_form(smm)
        if args.part == "minus" and not diff.has_negative:
            return _usage_error("negative part empty")
        mix = diff.positive if args.part == "plus" else diff.negative
        draw = ancestral_sample if args.method == "ancestral" else stratified_sample
        batch = draw(mix, args.n, args.seed)
    write_sample_csv(batch, args.out)
    return EXIT_OK


def _load_integrand(path) -> Integrand:
    with open(path) as fh:
        doc = json.load(fh)
    leaves = tuple(
        GaussianLeaf(np.asarray(lf["mean"], float), np.asarray(lf["stddev"], float))
        for lf in doc["leaves"]
    )
    return Integrand.from_gaussian_sum(GaussianSum(np.asarray(doc["weights"], float), leaves))


def cmd_estimate(args) -> int:
    proposal_smm = _load(args.model, args.square)
    target_smm = _load(args.target, args.square_target)
    if args.f_one:
        integrand = Integrand.one()
        target = target_from_smm(target_smm, normalized=False)
    else:
        if not args.f:
            return _usage_error("pass --f FILE or --f-one")
        try:
            integrand = _load_integrand(args.f)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            return _usage_error(f"cannot load integrand {args.f}: {exc}")
        target = target_from_smm(target_smm, normalized=True)
    proposal = Proposal.from_smm(proposal_smm)
    estimates = []
    try:
        for rep in range(args.replications):
            budget = allocate_budget_log(
                proposal.diff.log_z_plus, proposal.diff.log_z_minus, args.s, args.scheme
            )
            estimates.append(
                delta_ex(target, integrand, proposal, budget, args.sampler,
                         derive_seed(args.seed, rep))
            )
    except StarvedBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARVED
    if args.out:
        estimates_to_csv(estimates, args.out)
    n_flagged = sum(1 for e in estimates if e.flagged)
    if args.replications > 1:
        values = np.asarray([e.value for e in estimates])
        mean = float(np.nanmean(values)) if np.isfinite(values).any() else math.nan
        stats = replication_stats(estimates, mean if mean else 1.0)
        print(f"value={mean:.10g}, cov={stats.cov:.6g}")
    else:
        print(f"value={estimates[0].value:.10g}")
    if n_flagged * 2 > args.replications:
        print(
            f"warning: {n_flagged}/{args.replications} replications hit zero-density "
            "valleys of the proposal; consider mixing in a safe component",
            file=sys.stderr,
        )
        return EXIT_VALLEY
    return EXIT_OK


def cmd_validate(args) -> int:
    smm = _load(args.model, args.square)
    ok = True
    rng = np.random.default_rng(0)

    def report(name: str, passed: bool | None):
        nonlocal ok
        if passed is None:
            print(f"SKIPPED {name}")
            return
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok = ok and passed

    z = smm.z_q
    report("normalization constant positive and finite", z.sign > 0 and math.isfinite(z.log_abs))
    if z.sign <= 0:
        print("remaining checks skipped: model is degenerate")
        return EXIT_VALIDATION

    pts = rng.normal(scale=3.0, size=(1000, smm.dim))
    signs, logs = smm.logdensity_batch(pts)
    report("density non-negative at random points", bool(np.all(signs >= 0)))

    diff = difference_form(smm)
    dsigns, dlogs = diff.logdensity_batch(pts)
    with np.errstate(invalid="ignore"):
        lhs = dsigns * np.exp(dlogs)
        rhs = signs * np.exp(logs)
    denom = np.maximum(np.abs(rhs), 1e-300)
    report("difference-form reconstruction", bool(np.all(np.abs(lhs - rhs) / denom < 1e-10)))

    if smm.dim <= 2:
        def norm_log(x):
            s, l = smm.logdensity_batch(x)
            return np.where(s > 0, l, -np.inf)
        total = quadrature(norm_log, dim=smm.dim)
        report("quadrature normalization", abs(total - 1.0) < 1e-6)
    else:
        report(f"quadrature normalization (d={smm.dim} > 2)", None)

    return EXIT_OK if ok else EXIT_VALIDATION


def _run_sweep(args, config_cls, runner, name: str) -> int:
    try:
        with open(args.config) as fh:
            cfg = config_cls.from_dict(json.load(fh))
    except (OSError, TypeError, ValueError, KeyError, json.JSONDecodeError) as exc:
        return _usage_error(f"invalid config {args.config}: {exc}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = runner(cfg)
    write_sweep_csv(rows, out_dir / f"{name}.csv")
    write_metadata(cfg, out_dir / f"{name}_metadata.json")
    print(f"wrote {len(rows)} rows to {out_dir / (name + '.csv')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltaex",
        description="Signed Gaussian mixtures: sampling, importance sampling "
        "estimation, validation and benchmark sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw samples and write a CSV dump")
    p.add_argument("model")
    p.add_argument("--square", action="store_true", help="model file is in pre-squaring form")
    p.add_argument("--method", choices=["ancestral", "stratified", "arits"], required=True)
    p.add_argument("--part", choices=["full", "plus", "minus"], default="full")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="run the difference-of-expectations estimator")
    p.add_argument("model", help="proposal model JSON")
    p.add_argument("--square", action="store_true")
    p.add_argument("--target", required=True, help="target model JSON")
    p.add_argument("--square-target", action="store_true")
    p.add_argument("--f", help="integrand JSON {weights, leaves}")
    p.add_argument("--f-one", action="store_true", help="estimate the target's normalizing constant")
    p.add_argument("--scheme", choices=["proportional", "equal"], default="proportional")
    p.add_argument("--sampler", choices=["stratified", "ancestral"], default="stratified")
    p.add_argument("-S", "--s", type=int, required=True, dest="s")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="run the model invariant battery")
    p.add_argument("model")
    p.add_argument("--square", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rq1", help="expectation benchmark sweep")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.set_defaults(func=lambda a: _run_sweep(a, Rq1Config, run_rq1, "rq1"))

    p = sub.add_parser("rq2", help="normalizing-constant study sweep")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.set_defaults(func=lambda a: _run_sweep(a, Rq2Config, run_rq2, "rq2"))

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
