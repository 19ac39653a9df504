"""Command line front door: simulate, serve, ingest."""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from .concept_map import load_concept_map
from .io import load_question_bank
from .simulate import ConfigError, ExperimentConfig, run_experiment


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = ExperimentConfig.from_json(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    result.write_csv(csv_path)
    print(f"wrote {csv_path} ({len(result.rows)} rows)")
    for name in config.strategies:
        mean = result.mean_questions_to_mastery(name)
        print(f"  {name}: mean questions to mastery = {mean:.2f}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceConfig, ServiceConfigError, run

    try:
        config = ServiceConfig.from_json(args.config)
    except ServiceConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run(config)
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    bank_path = Path(args.bank)
    map_dir = Path(args.map)
    nodes_path = map_dir / "nodes.csv"
    arcs_path = map_dir / "arcs.csv"
    bank = load_question_bank(bank_path)
    cmap = load_concept_map(nodes_path, arcs_path)
    unmapped = sorted({q.id for q in bank} - set(cmap.question_ids))
    dangling = sorted(set(cmap.question_ids) - {q.id for q in bank})
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    shutil.copy(bank_path, data_dir / "bank.csv")
    shutil.copy(nodes_path, data_dir / "nodes.csv")
    shutil.copy(arcs_path, data_dir / "arcs.csv")
    print(f"ingested {len(bank)} questions, {len(cmap.nodes)} concepts, "
          f"{len(cmap.arcs)} arcs into {data_dir}")
    if unmapped:
        print(f"  note: {len(unmapped)} questions not on the concept map: "
              f"{', '.join(unmapped[:5])}{'...' if len(unmapped) > 5 else ''}")
    if dangling:
        print(f"  warning: concept map references unknown questions: "
              f"{', '.join(dangling[:5])}{'...' if len(dangling) > 5 else ''}")
    if cmap.cycle_warnings:
        print(f"  warning: concept cycles detected: {cmap.cycle_warnings}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="learnpath",
        description="Adaptive learning-path recommendation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate",
                           help="run a strategy benchmark from a JSON config")
    p_sim.add_argument("--config", required=True, help="experiment JSON path")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_serve = sub.add_parser("serve", help="start the HTTP session service")
    p_serve.add_argument("--config", required=True, help="service JSON path")
    p_serve.set_defaults(func=_cmd_serve)

    p_ingest = sub.add_parser(
        "ingest", help="validate a question bank and concept map pair")
    p_ingest.add_argument("--bank", required=True, help="question bank CSV")
    p_ingest.add_argument("--map", required=True,
                          help="directory holding nodes.csv and arcs.csv")
    p_ingest.add_argument("--data-dir", default="data",
                          help="where validated copies land (default: data)")
    p_ingest.set_defaults(func=_cmd_ingest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
