"""
Command-line surface: estimate, select, transform, validate, bench, simulate.

Every subcommand is a function ``cmd_<name>(args, config) -> int`` returning
the process exit code. Library errors carry their own exit code, so main()
only has to catch BlockCanonError once:

    0 ok / valid    1 boundary        2 input error      3 degenerate data
    4 structure     5 singular        6 no real logarithm

LEARNING (Python):
  argparse sub-parsers with set_defaults(func=...) give one small function
  per subcommand and a dispatch that is a single attribute lookup.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import formats
from .bench import results_frame, run_bench
from .block_core import (
    BlockPartition,
    CanonicalForm,
    canonicalize,
    compress,
    decanonicalize,
    expand,
    infer_partition,
)
from .config import Config
from .errors import BlockCanonError, InputError, Singular
from .gaussian_mle import CorrelationEstimate
from .matrix_functions import (
    BlockCorrelation,
    Validity,
    inverse,
    is_valid_correlation,
    log_determinant,
    mexp,
    mlog,
    power,
)
from .panel import GroupedAssets, GroupMap, ReturnsPanel
from .selection import fit_level, report_table, select_models
from .simulate import simulate_panel

log = logging.getLogger(__name__)

VALIDATE_EXIT = {Validity.VALID: 0, Validity.BOUNDARY: 1, Validity.INVALID: 4}


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")
        log.info("Wrote %s", out)


# ── estimate ─────────────────────────────────────────────────


def estimate_record(grouped: GroupedAssets, estimate: CorrelationEstimate, level: int) -> dict:
    try:
        neg2 = estimate.neg2_loglik()
    except Singular:
        neg2 = None
    return {
        "level": level,
        "n": grouped.partition.n,
        "N": estimate.sample.N,
        "K": grouped.partition.K,
        "sizes": list(grouped.partition.sizes),
        "block_labels": list(grouped.block_labels),
        "asset_order": list(grouped.asset_ids),
        "variances": estimate.variances,
        "a_tilde": estimate.a_tilde,
        "rho": estimate.correlation.rho,
        "lambda_tilde": estimate.lambda_tilde,
        "lambda_contrast": estimate.lambda_contrast,
        "validity": {
            "status": estimate.validity.status.value,
            "min_eig_A": estimate.validity.min_eig_A,
            "offending_blocks": list(estimate.validity.offending_blocks),
        },
        "invalid_estimate": estimate.invalid_estimate,
        "neg2_loglik_per_obs": neg2,
    }


def cmd_estimate(args, config: Config) -> int:
    panel = ReturnsPanel.from_csv(args.returns)
    groups = GroupMap.from_csv(args.groups)
    grouped, estimate = fit_level(panel, groups, args.level, demean=args.demean)
    _emit(formats.dumps(estimate_record(grouped, estimate, args.level)), args.out)

    if args.emit_heatmap is not None:
        heatmap = pd.DataFrame(
            estimate.correlation.expand(),
            index=pd.Index(grouped.asset_ids, name="asset_id"),
            columns=grouped.asset_ids,
        )
        heatmap.to_csv(args.emit_heatmap, float_format="%.17g")
        log.info("Wrote %dx%d heatmap to %s", panel.n, panel.n, args.emit_heatmap)
    return 0


# ── select ───────────────────────────────────────────────────


def cmd_select(args, config: Config) -> int:
    panel = ReturnsPanel.from_csv(args.returns)
    groups = GroupMap.from_csv(args.groups)
    levels = args.levels if args.levels else tuple(range(groups.depth + 1))
    if len(levels) < 2:
        raise InputError("model selection needs at least two levels")

    reports = select_models(panel, groups, levels, demean=args.demean, weighted=not args.unweighted)
    table = report_table(reports, with_aic=args.with_aic)
    if args.format == "json":
        text = formats.dumps(
            [{"model": label, **row} for label, row in zip(table.index, table.to_dict("records"))]
        )
    else:
        text = table.to_csv(float_format="%.10g")
    _emit(text, args.out)
    return 0


# ── transform ────────────────────────────────────────────────


def apply_op(cf: CanonicalForm, op: str, config: Config) -> CanonicalForm:
    if op == "inv":
        return inverse(cf)
    if op == "exp":
        return mexp(cf)
    if op == "log":
        return mlog(cf, asym_tol=config.asym_tol, pd_rtol=config.pd_rtol)
    if op.startswith("pow:"):
        try:
            q = int(op.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad power in {op!r}") from None
        return power(cf, q)
    raise InputError(f"unknown op {op!r}")


def cmd_transform(args, config: Config) -> int:
    kind = formats.matrix_kind(args.input)
    if kind == "json":
        B = formats.read_block_json(args.input)
    else:
        M = formats.read_matrix(args.input)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InputError(f"{args.input}: matrix is {M.shape[0]}x{M.shape[1]}, not square")
        tol = config.struct_tol if args.tol is None else args.tol
        partition = BlockPartition(args.sizes) if args.sizes else infer_partition(M, tol)
        B = compress(M, partition, tol)
    log.info("Input %s: n=%d on %d blocks %s", args.input, B.partition.n, B.partition.K, B.partition.sizes)

    cf = canonicalize(B)
    if args.op == "det":
        sign, logabs = log_determinant(cf)
        value = 0.0 if sign == 0 else sign * float(np.exp(logabs))
        _emit(formats.dumps({"sign": sign, "log_abs_det": logabs, "det": value}), args.out)
        return 0

    result = decanonicalize(apply_op(cf, args.op, config))
    if kind == "json":
        _emit(formats.dumps(formats.block_matrix_to_dict(result)), args.out)
    elif args.out is not None:
        formats.write_matrix(args.out, expand(result))
        log.info("Wrote %s", args.out)
    elif kind == "bin":
        raise InputError("binary output needs --out")
    else:
        np.savetxt(sys.stdout, expand(result), delimiter=",", fmt="%.17g")
    return 0


# ── validate ─────────────────────────────────────────────────


def cmd_validate(args, config: Config) -> int:
    B = formats.read_block_json(args.input)
    C = BlockCorrelation.from_block_matrix(B, tol=config.recon_tol)
    report = is_valid_correlation(C, pd_rtol=config.pd_rtol)
    _emit(
        formats.dumps(
            {
                "status": report.status.value,
                "min_eig_A": report.min_eig_A,
                "offending_blocks": list(report.offending_blocks),
                "lambdas": list(report.lambdas),
            }
        ),
        args.out,
    )
    return VALIDATE_EXIT[report.status]


# ── bench ────────────────────────────────────────────────────


def cmd_bench(args, config: Config) -> int:
    seed = config.seed if args.seed is None else args.seed
    results = run_bench(args.n, args.K, reps=args.reps, seed=seed, N=args.N)
    _emit(results_frame(results).to_csv(index=False, float_format="%.6g"), args.out)
    return 0


# ── simulate ─────────────────────────────────────────────────


def cmd_simulate(args, config: Config) -> int:
    seed = config.seed if args.seed is None else args.seed
    sim = simulate_panel(args.branching, args.leaf_size, args.weights, args.N, seed=seed)
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    sim.panel.to_csv(out_dir / "returns.csv")
    sim.groups.to_csv(out_dir / "groups.csv")
    truth = {
        "sizes": list(sim.truth.partition.sizes),
        "rho": sim.truth.rho,
        "level": sim.level,
        "seed": seed,
    }
    (out_dir / "truth.json").write_text(formats.dumps(truth) + "\n")
    log.info("Wrote simulated panel to %s", out_dir)
    return 0


# ── Parser and entry point ───────────────────────────────────


def build_parser(config: Config) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="block-canon", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--log-level", default=config.log_level, help="logging level (default %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit the block correlation model at one level")
    p.add_argument("--returns", type=Path, required=True, help="returns CSV (date column, asset header)")
    p.add_argument("--groups", type=Path, required=True, help="group map CSV (asset_id,label)")
    p.add_argument("--level", type=int, default=1, help="label depth; 0 puts all assets in one block")
    p.add_argument("--demean", action="store_true", help="subtract column means first (no mean in the model)")
    p.add_argument("--emit-heatmap", type=Path, help="write the implied n x n correlation as CSV")
    p.add_argument("--out", type=Path, help="JSON output (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("select", help="compare levels by -2 log L, BIC and AIC")
    p.add_argument("--returns", type=Path, required=True)
    p.add_argument("--groups", type=Path, required=True)
    p.add_argument("--levels", type=_int_list, help="comma-separated levels (default 0..depth)")
    p.add_argument("--demean", action="store_true", help="subtract column means first (no mean in the model)")
    p.add_argument("--with-aic", action="store_true", help="add an AIC/(nN) column")
    p.add_argument("--unweighted", action="store_true", help="summaries over block coefficients")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("transform", help="inv, log, exp, pow:q or det of a block matrix")
    p.add_argument("input", type=Path, help=".json block matrix, .csv or .bin dense matrix")
    p.add_argument("--op", required=True, help="inv | log | exp | pow:<q> | det")
    p.add_argument("--sizes", type=_int_list, help="block sizes; inferred when omitted")
    p.add_argument("--tol", type=float, help="block structure tolerance")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("validate", help="check a block correlation matrix")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="time canonical against dense routines")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--N", type=int, default=10, help="observations for the loglik timing")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="write a synthetic panel with nested blocks")
    p.add_argument("--branching", type=_int_list, default=(4, 3))
    p.add_argument("--leaf-size", type=int, default=5)
    p.add_argument("--weights", type=_float_list, default=(0.2, 0.3))
    p.add_argument("--N", type=int, default=5000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    config = Config.from_env()
    args = build_parser(config).parse_args(argv)
    logging.getLogger().setLevel(args.log_level.upper())
    try:
        return args.func(args, config)
    except BlockCanonError as e:
        log.error("%s: %s", type(e).__name__, e.detail)
        return e.exit_code
