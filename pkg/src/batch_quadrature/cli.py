"""Command line for running benchmark problems and writing convergence traces."""

import argparse
import asyncio
import csv
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from batch_quadrature.benchmarks import (
    SyntheticProblem,
    compute_metrics,
    get_problem,
    list_problems,
    mc_baseline_estimate,
    metrics_hook,
    summarise_runs,
)
from batch_quadrature.config import configure_logging, get_settings
from batch_quadrature.exceptions import QuadratureError, UnknownProblemError
from batch_quadrature.models import (
    EngineConfig,
    EvidenceEstimate,
    Metrics,
    ProposalKind,
    TraceRecord,
)
from batch_quadrature.services.basq_engine import init, resume, run
from batch_quadrature.state import load_checkpoint

logger = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "evals", "overhead_ms", "Ez", "VarZ", "mae", "kl")

# Offset separating true-posterior draws from the engine's own stream.
_METRICS_SEED_OFFSET = 1_000_003


def create_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        prog="basq-bench",
        description="Batch Bayesian quadrature on synthetic benchmark likelihoods.",
    )
    parser.add_argument("--list", action="store_true", help="list registered problems and exit")
    subparsers = parser.add_subparsers(dest="command")

    run_parser = subparsers.add_parser("run", help="run a benchmark problem")
    run_parser.add_argument("--list", action="store_true", help="list registered problems and exit")
    run_parser.add_argument("--problem", help=f"one of: {', '.join(list_problems())}")
    run_parser.add_argument("--dim", type=int, default=2, help="input dimension (default: 2)")
    run_parser.add_argument("--batch", type=int, default=100, help="batch size n (default: 100)")
    run_parser.add_argument(
        "--budget", type=int, default=1000, help="batch evaluations allowed (default: 1000)"
    )
    run_parser.add_argument("--seed", type=int, default=0, help="first seed (default: 0)")
    run_parser.add_argument("--repeats", type=int, default=1, help="number of seeds (default: 1)")
    run_parser.add_argument("--r", type=float, default=0.5, help="AF share of proposal (default: 0.5)")
    run_parser.add_argument(
        "--proposal",
        choices=[kind.value for kind in ProposalKind],
        default=ProposalKind.IVR.value,
        help="proposal distribution (default: ivr)",
    )
    run_parser.add_argument("--baseline", choices=["mc"], help="also run a Monte-Carlo baseline")
    run_parser.add_argument("--out", type=Path, help="trace CSV path")
    run_parser.add_argument("--checkpoint", type=Path, help="checkpoint path; resumed if present")
    run_parser.add_argument("--n-recombination", type=int, default=20_000, help="N (default: 20000)")
    run_parser.add_argument("--n-nystrom", type=int, help="M (default: max(N/100, n))")
    run_parser.add_argument(
        "--supersample", type=int, default=100, help="SMC supersample ratio (default: 100)"
    )
    run_parser.add_argument(
        "--proper", action="store_true", help="enforce the residual-diagonal inequality"
    )
    run_parser.add_argument(
        "--threshold", type=float, default=1e-8, help="stop when Var[Z|y] <= this (default: 1e-8)"
    )
    run_parser.add_argument(
        "--problem-seed", type=int, default=0, help="seed for generated problems (default: 0)"
    )
    return parser


def _format(value: float | int | None) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_trace_csv(path: Path, records: Sequence[TraceRecord]) -> Path:
    """Write trace rows under the fixed header, UTF-8 with LF line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for record in records:
            writer.writerow(
                [
                    _format(record.iteration),
                    _format(record.evaluations),
                    f"{record.overhead_ms:.3f}",
                    _format(record.evidence_mean),
                    _format(record.evidence_variance),
                    _format(record.mae),
                    _format(record.kl),
                ]
            )
    return path


def _seed_path(path: Path, seed: int, repeats: int, suffix: str = "") -> Path:
    stem = path.stem if repeats == 1 else f"{path.stem}_seed{seed}"
    return path.with_name(f"{stem}{suffix}{path.suffix or '.csv'}")


def _engine_config(args: argparse.Namespace, seed: int) -> EngineConfig:
    settings = get_settings()
    return EngineConfig(
        batch_size=args.batch,
        n_recombination=args.n_recombination,
        n_nystrom=args.n_nystrom,
        r=args.r,
        proposal=ProposalKind(args.proposal),
        supersample_ratio=args.supersample,
        variance_threshold=args.threshold,
        max_evaluations=args.budget,
        seed=seed,
        proper=args.proper,
        serial_likelihood=settings.serial_likelihood,
        max_workers=settings.max_workers,
    )


async def _run_seed(
    problem: SyntheticProblem, args: argparse.Namespace, seed: int
) -> tuple[EvidenceEstimate, Metrics, list[TraceRecord], int]:
    cfg = _engine_config(args, seed)
    hook = metrics_hook(problem, rng=seed + _METRICS_SEED_OFFSET)
    checkpoint_path = None
    if args.checkpoint is not None:
        checkpoint_path = _seed_path(args.checkpoint, seed, args.repeats)
    if checkpoint_path is not None and checkpoint_path.exists():
        state = resume(load_checkpoint(checkpoint_path), problem.prior, problem, metrics_hook=hook)
    else:
        state = await init(problem.prior, problem, cfg=cfg, metrics_hook=hook)

    post, estimate, trace = await run(state, checkpoint_path=checkpoint_path)
    metrics = compute_metrics(problem, post, estimate, rng=seed + _METRICS_SEED_OFFSET)
    if args.out is not None:
        write_trace_csv(_seed_path(args.out, seed, args.repeats), trace)
    return estimate, metrics, trace, state.evaluations


async def _run_benchmark(problem: SyntheticProblem, args: argparse.Namespace) -> int:
    seeds = [args.seed + k for k in range(args.repeats)]
    estimates: list[EvidenceEstimate] = []
    metrics: list[Metrics] = []
    baselines: list[list[TraceRecord]] = []
    for seed in seeds:
        estimate, seed_metrics, _trace, evaluations = await _run_seed(problem, args, seed)
        estimates.append(estimate)
        metrics.append(seed_metrics)
        print(
            f"seed={seed} evaluations={evaluations} E[Z]={estimate.mean:.6g} "
            f"Var[Z]={estimate.variance:.3g} mae={_format(seed_metrics.mae)} "
            f"kl={_format(seed_metrics.kl)} rmse={_format(seed_metrics.conditional_rmse)}"
        )
        if args.baseline == "mc":
            baseline = mc_baseline_estimate(problem, evaluations, seed)
            baselines.append(baseline)
            print(f"seed={seed} mc E[Z]={baseline[-1].evidence_mean:.6g} mae={_format(baseline[-1].mae)}")
            if args.out is not None:
                write_trace_csv(_seed_path(args.out, seed, args.repeats, "_mc"), baseline)

    summary = summarise_runs(problem, seeds, estimates, metrics, baselines)
    print(
        f"{problem.name} d={problem.dim}: median mae={_format(summary.median_mae)} "
        f"(IQR {_format(summary.iqr_mae)}), median kl={_format(summary.median_kl)} "
        f"(IQR {_format(summary.iqr_kl)})"
    )
    if args.out is not None:
        summary_path = args.out.with_suffix(".json")
        summary_path.parent.mkdir(parents=True, exist_ok=True)
        summary_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Summary written to {summary_path}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of `basq-bench`.

    Returns:
        Process exit code.
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    configure_logging()

    if args.list:
        for name in list_problems():
            print(name)
        return 0
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return 2
    if not args.problem:
        parser.print_usage(sys.stderr)
        print("basq-bench: error: run requires --problem", file=sys.stderr)
        return 2

    try:
        problem = get_problem(args.problem, dim=args.dim, seed=args.problem_seed)
        return asyncio.run(_run_benchmark(problem, args))
    except UnknownProblemError as e:
        parser.print_usage(sys.stderr)
        print(f"basq-bench: error: {e.message}", file=sys.stderr)
        return 2
    except QuadratureError as e:
        logger.error(e.message)
        return 1
