"""Command-line entry point: ``pmcts solve | eval | bench``.

Exit codes: 0 success, 2 search aborted, 64 config error, 65 bad dataset
or synthetic spec, 130 interrupted.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
from pathlib import Path

from . import prompts
from .config import AppConfig, ConfigError, load_config
from .evaluation import STRATEGIES, DatasetError, evaluate, load_dataset
from .gateway import API_KEY_ENV, CachingModel, ChatCompletionsModel, ResponseCache, load_script
from .search import SearchAborted, run_search
from .synthetic import SpecError, benchmark, format_bench, load_spec

EXIT_ABORTED = 2
EXIT_CONFIG = 64
EXIT_DATA = 65
EXIT_INTERRUPTED = 130


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="TOML config file")
    p.add_argument("--seed", type=int, default=d, help="global search seed")
    p.add_argument("--scripted", default=d, metavar="FILE", help="JSON script for an offline scripted model")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmcts",
        description="Prompt-based MCTS with decaying exploration and adaptive rollouts.",
        parents=[_common(False)],
        epilog=f"The model API credential is read from ${API_KEY_ENV}.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    solve = sub.add_parser("solve", parents=[common], help="answer one question")
    solve.add_argument("question")
    solve.add_argument("--trace", metavar="PATH", help="write the search tree export here")
    solve.add_argument("--iterations", type=int)

    ev = sub.add_parser("eval", parents=[common], help="evaluate JSONL datasets")
    ev.add_argument("datasets", nargs="*")
    ev.add_argument("--strategy", choices=STRATEGIES)
    ev.add_argument("--parallelism", type=int)
    ev.add_argument("--report-dir")
    ev.add_argument("--iterations", type=int)

    bench = sub.add_parser("bench", parents=[common], help="convergence runs on synthetic trees")
    bench.add_argument("--spec", metavar="PATH", help="fixed synthetic tree (JSON); random trees otherwise")
    bench.add_argument("--runs", type=int, default=100)
    bench.add_argument("--iterations", type=int, default=200)
    bench.add_argument("--depth", type=int, default=3)
    bench.add_argument("--branching", type=int, default=3)
    bench.add_argument("--margin", type=float, default=0.2)
    return parser


def resolve_config(args: argparse.Namespace) -> AppConfig:
    overrides = {
        "search": {"seed": args.seed, "iterations": getattr(args, "iterations", None)},
        "eval": {
            "strategy": getattr(args, "strategy", None),
            "parallelism": getattr(args, "parallelism", None),
        },
        "paths": {"report_dir": getattr(args, "report_dir", None)},
    }
    if getattr(args, "datasets", None):
        overrides["eval"]["datasets"] = list(args.datasets)
    return load_config(args.config, overrides)


def build_model(args: argparse.Namespace, cfg: AppConfig):
    """Returns (model, cache or None)."""
    if args.scripted:
        try:
            return load_script(args.scripted), None
        except (OSError, ValueError, KeyError) as exc:
            raise CommandError(f"cannot load script {args.scripted}: {exc}", EXIT_CONFIG) from exc
    if not cfg.model.endpoint:
        raise CommandError(
            "no model endpoint configured ([model] endpoint) and no --scripted script given",
            EXIT_CONFIG,
        )
    backend = ChatCompletionsModel(
        cfg.model.endpoint,
        cfg.model.model_name,
        timeout=cfg.model.timeout,
        connection_limit=cfg.model.connection_limit,
    )
    cache = ResponseCache(Path(cfg.paths.cache_dir) / "responses.cache")
    return CachingModel(backend, cache), cache


def cmd_solve(args, cfg: AppConfig, model) -> int:
    try:
        result = run_search(args.question, cfg.search, model)
    except SearchAborted as exc:
        trace_path = Path(args.trace) if args.trace else Path(cfg.paths.report_dir) / "partial-trace.jsonl"
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        trace_path.write_text(exc.trace, encoding="utf-8")
        print(f"error: {exc}; partial trace written to {trace_path}", file=sys.stderr)
        return EXIT_ABORTED
    if args.trace:
        Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
        Path(args.trace).write_text(result.trace, encoding="utf-8")
    print(f"answer: {result.answer}")
    for i, step in enumerate(result.steps, 1):
        print(f"  {i}. {step}")
    note = " (chain-of-thought fallback)" if result.fallback else ""
    print(f"best_q={result.best_q:.4f} root_visits={result.root_visits}{note}")
    return 0


def cmd_eval(args, cfg: AppConfig, model) -> int:
    if not cfg.eval.datasets:
        raise CommandError("no datasets given", EXIT_CONFIG)
    tasks = []
    try:
        for path in cfg.eval.datasets:
            tasks.extend(load_dataset(path))
    except DatasetError as exc:
        raise CommandError(f"dataset error: {exc}", EXIT_DATA) from exc
    except OSError as exc:
        raise CommandError(f"cannot read dataset: {exc}", EXIT_DATA) from exc
    if not tasks:
        raise CommandError("datasets contain no tasks", EXIT_DATA)
    seen: dict[str, str] = {}
    for t in tasks:
        if t.id in seen:
            raise CommandError(f"dataset error: duplicate id {t.id!r} across files", EXIT_DATA)
        seen[t.id] = t.part

    strategy = cfg.eval.strategy
    try:
        report, outcomes = evaluate(tasks, strategy, cfg.search, model, cfg.eval.parallelism)
    except SearchAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORTED

    out = Path(cfg.paths.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"report-{strategy}.json").write_text(report.to_json(), encoding="utf-8")
    (out / f"summary-{strategy}.csv").write_text(report.summary_csv(), encoding="utf-8")
    with open(out / f"outcomes-{strategy}.jsonl", "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps(dataclasses.asdict(o), ensure_ascii=False) + "\n")
    sys.stdout.write(report.summary_csv())
    return 0


def cmd_bench(args, cfg: AppConfig) -> int:
    spec = None
    if args.spec:
        try:
            spec = load_spec(args.spec)
        except (SpecError, OSError) as exc:
            raise CommandError(f"invalid synthetic spec: {exc}", EXIT_DATA) from exc
    if args.runs < 1:
        raise CommandError("--runs must be positive", EXIT_CONFIG)
    try:
        rows = benchmark(
            cfg.search,
            args.runs,
            spec=spec,
            depth=args.depth,
            branching=args.branching,
            margin=args.margin,
        )
    except SpecError as exc:
        raise CommandError(f"invalid synthetic spec: {exc}", EXIT_DATA) from exc
    sys.stdout.write(format_bench(rows))
    return 0


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    cache = None
    previous = signal.getsignal(signal.SIGTERM)
    signal.signal(signal.SIGTERM, _raise_interrupt)
    try:
        cfg = resolve_config(args)
        if cfg.paths.template_dir:
            prompts.load_template_dir(cfg.paths.template_dir)
        if args.command == "bench":
            return cmd_bench(args, cfg)
        model, cache = build_model(args, cfg)
        if args.command == "solve":
            return cmd_solve(args, cfg, model)
        return cmd_eval(args, cfg, model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    finally:
        if cache is not None:
            cache.close()
        signal.signal(signal.SIGTERM, previous)
        prompts.reset_templates()


if __name__ == "__main__":
    sys.exit(main())
