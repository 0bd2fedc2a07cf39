"""
Command-line front end: gen, bench, train, eval, table

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import structlog

from .a2c_trainer import evaluate_policy, summarize_runs
from .cholesky_dag import export_dot, export_json, generate_cholesky_dag
from .config import configure_logging, get_settings
from .errors import SchedLabError
from .experiments import (
    bench,
    table_ablation,
    table_dag_stats,
    table_makespans,
    table_transfer,
    train_many,
    write_csv,
)
from .gcn_policy import GCNPolicy
from .models import Algorithm, EnvConfig, TrainConfig

logger = structlog.get_logger()

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = _Parser(prog="schedlab", description="Cholesky DAG scheduling lab")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="Generate the task DAG")
    gen.add_argument("--tiles", type=_positive_int, required=True)
    gen.add_argument("--out", type=Path)
    gen.add_argument("--format", choices=["dot", "json"], default="json")

    bench_p = sub.add_parser("bench", help="Run a baseline scheduler")
    bench_p.add_argument("--tiles", type=_positive_int, required=True)
    bench_p.add_argument("--procs", type=_positive_int, required=True)
    bench_p.add_argument("--algo", choices=[a.value for a in Algorithm], required=True)
    bench_p.add_argument("--seeds", type=_positive_int, default=10)
    bench_p.add_argument("--out", type=Path)

    train_p = sub.add_parser("train", help="Train seeded A2C agents")
    train_p.add_argument("--tiles", type=_positive_int, required=True)
    train_p.add_argument("--procs", type=_positive_int, required=True)
    train_p.add_argument("--window", type=_non_negative_int, default=settings.default_window)
    train_p.add_argument("--layers", type=_positive_int)
    train_p.add_argument("--no-cp-feature", action="store_true")
    train_p.add_argument("--steps", type=_non_negative_int, default=settings.total_steps)
    train_p.add_argument("--eval-every", type=_positive_int, default=settings.eval_every)
    train_p.add_argument("--seeds", type=_positive_int, default=10)
    train_p.add_argument("--first-seed", type=_non_negative_int, default=0)
    train_p.add_argument("--workers", type=_positive_int, default=1)
    train_p.add_argument("--out", type=Path, default=Path(settings.results_dir) / "train")

    eval_p = sub.add_parser("eval", help="Evaluate a checkpoint with greedy actions")
    eval_p.add_argument("--checkpoint", type=Path, required=True)
    eval_p.add_argument("--tiles", type=_positive_int, required=True)
    eval_p.add_argument("--procs", type=_positive_int, required=True)
    eval_p.add_argument("--window", type=_non_negative_int)
    eval_p.add_argument("--episodes", type=_positive_int, default=1)
    eval_p.add_argument("--trace", type=Path, help="Write the first episode's trace as JSON")

    table = sub.add_parser("table", help="Rebuild one of the reference result tables")
    table.add_argument("--which", type=int, choices=[2, 3, 4, 5], required=True)
    table.add_argument("--out", type=Path, required=True)
    table.add_argument("--steps", type=_non_negative_int, default=settings.total_steps)
    table.add_argument("--seeds", type=_positive_int, default=10)
    table.add_argument("--workers", type=_positive_int, default=1)
    table.add_argument("--skip-agent", action="store_true", help="Table 3 without the RL column")

    return parser


def cmd_gen(args) -> int:
    graph = generate_cholesky_dag(args.tiles)
    if args.out is not None:
        text = export_dot(graph) if args.format == "dot" else export_json(graph)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    print(f"|V|={len(graph)} W={graph.total_work:g} CP={graph.critical_path:g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    algorithm = Algorithm(args.algo)
    frame = bench(args.tiles, args.procs, algorithm, args.seeds)
    if args.out is not None:
        write_csv(frame, args.out, vars(args))
    if algorithm is Algorithm.RANDOM:
        print(f"{algorithm.value} T={args.tiles} p={args.procs} mean={frame.makespan.mean():.2f} "
              f"std={frame.makespan.std(ddof=0):.2f} seeds={len(frame)}")
    else:
        print(f"{algorithm.value} T={args.tiles} p={args.procs} makespan={frame.makespan.iloc[0]:g}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig.from_settings(get_settings(), total_steps=args.steps, eval_every=args.eval_every,
                                     layers=args.layers)


def cmd_train(args) -> int:
    env_config = EnvConfig(tiles=args.tiles, processors=args.procs, window=args.window,
                           use_cp_feature=not args.no_cp_feature)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    runs = train_many(env_config, _train_config(args), seeds, args.out, args.workers, vars(args))

    frame = pd.DataFrame(
        [{"seed": r.seed, "best_makespan": r.best_makespan, "checkpoint": r.checkpoint} for r in runs]
    )
    write_csv(frame, args.out / "summary.csv", vars(args))
    best, spread = summarize_runs(frame.best_makespan.tolist())
    print(f"best={best:g} std_top5={spread:.2f} seeds={len(runs)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    policy, meta = GCNPolicy.load(args.checkpoint, window=args.window)
    env_config = EnvConfig(tiles=args.tiles, processors=args.procs, window=policy.window,
                           use_cp_feature=policy.use_cp_feature)
    makespans: List[float] = []
    latencies: List[float] = []
    for episode in range(args.episodes):
        result = evaluate_policy(policy, env_config.model_copy(update={"seed": episode}),
                                 with_trace=episode == 0 and args.trace is not None)
        makespans.append(result.makespan)
        latencies.append(result.mean_decision_ms)
        if result.trace is not None:
            args.trace.parent.mkdir(parents=True, exist_ok=True)
            args.trace.write_text(result.trace.model_dump_json(indent=2))
    print(f"makespan={np.mean(makespans):g} episodes={len(makespans)} "
          f"mean_decision_ms={np.mean(latencies):.3f} trained_on=T{meta.get('tiles')}_p{meta.get('processors')}")
    return EXIT_OK


def cmd_table(args) -> int:
    train_config = TrainConfig.from_settings(get_settings(), total_steps=args.steps)
    run_dir = args.out.parent / f"{args.out.stem}_runs"
    if args.which == 2:
        frame = table_dag_stats()
    elif args.which == 3:
        frame = table_makespans(train_config, args.seeds, with_agent=not args.skip_agent,
                                out_dir=run_dir, workers=args.workers, flags=vars(args))
    elif args.which == 4:
        frame = table_ablation(train_config, args.seeds, out_dir=run_dir, workers=args.workers, flags=vars(args))
    else:
        frame = table_transfer(train_config, args.seeds, out_dir=run_dir, workers=args.workers, flags=vars(args))
    write_csv(frame, args.out, vars(args))
    print(frame.to_string(index=False))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "bench": cmd_bench, "train": cmd_train, "eval": cmd_eval, "table": cmd_table}


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    configure_logging(settings.log_level, settings.log_json)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except SchedLabError as e:
        logger.error("Command failed", command=args.command, error=str(e))
        return EXIT_RUNTIME
    except OSError as e:
        logger.error("I/O failure", command=args.command, error=str(e))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
