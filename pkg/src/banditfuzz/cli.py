"""Command line front end: fuzz, train-merge, analyze, targets."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import StrategyRun, aggregate, resolve_checkpoints
from .campaign import STRATEGIES, CampaignConfig, run_campaign
from .executor import available_targets, get_target
from .scheduler import (
    DEFAULT_PRIOR,
    DEFAULT_REFRESH_EXECS,
    DEFAULT_REFRESH_SECS,
    empirical_distribution,
    load_counts,
    merge_counts,
    save_counts,
    save_distribution,
)


def _parse_prior(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"prior must look like A,B (got {text!r})")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditfuzz",
        description="Coverage-guided fuzzing with bandit-scheduled mutation operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fuzz = sub.add_parser("fuzz", help="run one fuzzing campaign")
    fuzz.add_argument("--target", required=True, help="built-in target name")
    fuzz.add_argument("--strategy", required=True, choices=STRATEGIES)
    fuzz.add_argument("--out", required=True, type=Path, help="campaign output directory")
    fuzz.add_argument("--seeds", type=Path, help="directory of seed inputs")
    tokens = fuzz.add_mutually_exclusive_group()
    tokens.add_argument("--dict", dest="dict_file", type=Path,
                        help="dictionary token file (kw=\"VALUE\" lines)")
    tokens.add_argument("--scrape", type=Path,
                        help="binary file to scrape string constants from")
    budget = fuzz.add_mutually_exclusive_group(required=True)
    budget.add_argument("--execs", type=int, help="execution budget (virtual clock)")
    budget.add_argument("--minutes", type=float, help="wall-clock budget")
    fuzz.add_argument("--stack", help="uniform (powers of two) or fixed:N")
    fuzz.add_argument("--prior", help="Beta prior shapes A,B (default 1,1000)")
    fuzz.add_argument("--refresh-secs", type=float, default=DEFAULT_REFRESH_SECS,
                      help="posterior resample cadence, seconds")
    fuzz.add_argument("--refresh-execs", type=int, default=DEFAULT_REFRESH_EXECS,
                      help="posterior resample cadence, executions")
    fuzz.add_argument("--seed", type=int, dest="rng_seed", help="campaign rng seed")
    fuzz.add_argument("--distribution", type=Path,
                      help="operator distribution file (empirical strategy)")

    merge = sub.add_parser(
        "train-merge",
        help="merge operator success counts from training runs",
    )
    merge.add_argument("counts", nargs="+", type=Path, metavar="COUNTS")
    merge.add_argument("-o", "--out", required=True, type=Path)
    merge.add_argument("--normalize", action="store_true",
                       help="write a probability distribution instead of raw counts")
    merge.add_argument("--add-one", action="store_true",
                       help="add-one smoothing while normalizing")

    analyze = sub.add_parser("analyze", help="compare finished campaigns")
    analyze.add_argument("--runs", nargs="+", required=True, type=Path, metavar="DIR")
    analyze.add_argument("--checkpoints", default="q1,q2,q3,q4",
                         help="comma list of q1..q4 or execution counts")
    analyze.add_argument("--out", required=True, type=Path, help="report CSV path")

    sub.add_parser("targets", help="list built-in targets")
    return parser


def _cmd_fuzz(args) -> int:
    config = CampaignConfig(
        target=args.target,
        strategy=args.strategy,
        out_dir=args.out,
        seeds_dir=args.seeds,
        dict_file=args.dict_file,
        scrape_file=args.scrape,
        distribution_file=args.distribution,
        budget_execs=args.execs,
        budget_secs=args.minutes * 60.0 if args.minutes is not None else None,
        stack_mode=args.stack,
        prior=_parse_prior(args.prior) if args.prior else DEFAULT_PRIOR,
        refresh_secs=args.refresh_secs,
        refresh_execs=args.refresh_execs,
        rng_seed=args.rng_seed,
    )
    campaign = run_campaign(config)
    clock = "virtual" if campaign.virtual_clock else "wall"
    print(f"[banditfuzz] {args.target} / {args.strategy}, seed {campaign.rng_seed}")
    print(
        f"[banditfuzz] {campaign.executions} execs, {len(campaign.corpus)} paths, "
        f"{len(campaign.corpus.crashes)} crashes, {len(campaign.corpus.hangs)} hangs, "
        f"{campaign.elapsed:.2f}s ({clock} clock)"
    )
    print(f"[banditfuzz] outputs in {campaign.out_dir}")
    return 0


def _cmd_train_merge(args) -> int:
    if args.add_one and not args.normalize:
        raise ValueError("--add-one only makes sense with --normalize")
    merged = merge_counts(load_counts(path) for path in args.counts)
    if args.normalize:
        save_distribution(args.out, empirical_distribution(merged, smoothing=args.add_one))
        kind = "distribution"
    else:
        save_counts(args.out, merged, header=f"merged from {len(args.counts)} runs")
        kind = "counts"
    print(f"[banditfuzz] wrote merged {kind} for {len(args.counts)} runs to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    runs = [StrategyRun.load(d) for d in args.runs]
    checkpoints = resolve_checkpoints(args.checkpoints.split(","), runs)
    report = aggregate(runs, checkpoints)
    report.write_report(args.out)
    final = checkpoints[-1]
    print(f"[banditfuzz] rel-cov at {final} execs over {len(report.programs)} program(s):")
    for s in report.strategies:
        wins = sum(report.wins[s].values())
        print(
            f"  {s:<10} {report.mean_rel_cov(s, final):.4f} "
            f"+- {report.stderr_rel_cov(s, final):.4f}  wins {wins}"
        )
    print(f"[banditfuzz] report written to {args.out}")
    return 0


def _cmd_targets(_args) -> int:
    for name in available_targets():
        tokens = len(get_target(name).dictionary)
        print(f"{name:<16} dictionary tokens: {tokens}")
    return 0


_HANDLERS = {
    "fuzz": _cmd_fuzz,
    "train-merge": _cmd_train_merge,
    "analyze": _cmd_analyze,
    "targets": _cmd_targets,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"banditfuzz: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
