"""Command-line entry point.

Subcommands: ``import`` (convert a public corpus), ``calibrate`` (export
probability targets), ``synth`` (write a synthetic world), ``run``
(execute one experiment cell), ``report`` (combine persisted runs).
Exit codes: 0 success, 2 configuration error, 3 backend error, 1 other
failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from tomuq.errors import BackendError, ConfigError, TomuqError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomuq",
        description="Forecast and score interlocutor uncertainty in dialogue.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_import = sub.add_parser("import", help="convert a public corpus to the native schema")
    p_import.add_argument("--format", required=True, choices=["casino", "candor", "multiwoz"])
    p_import.add_argument("--input", required=True)
    p_import.add_argument("--out", required=True)

    p_cal = sub.add_parser("calibrate", help="export calibrated probability targets")
    p_cal.add_argument("--corpus", required=True)
    p_cal.add_argument("--tag", required=True)
    p_cal.add_argument("--question-key", required=True)
    p_cal.add_argument("--out", required=True)
    p_cal.add_argument("--strict", action="store_true", help="count ties as not exceeded")

    p_synth = sub.add_parser("synth", help="generate a synthetic world")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--n-dialogues", type=int, default=200)
    p_synth.add_argument("--sigma", type=float, default=0.1)
    p_synth.add_argument("--fun-std", type=float, default=0.15)
    p_synth.add_argument("--embedding-dim", type=int, default=768)
    p_synth.add_argument(
        "--embedding-mode", choices=["side_signal", "joint_only"], default="side_signal"
    )
    p_synth.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run one experiment cell")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--task", choices=["1tuq", "2tuq", "funq"])
    p_run.add_argument(
        "--method",
        choices=["df", "df_ls", "df_ps", "ft_l", "ft_nn", "ft_rf", "ft_rf_j"],
    )
    p_run.add_argument("--bot-n", type=int)
    p_run.add_argument("--demographics", action="store_true", default=None)
    p_run.add_argument("--seeds", help="comma-separated list, e.g. 1,2,3,4,5")
    p_run.add_argument("--train-n", type=int)
    p_run.add_argument("--greedy", action="store_true", help="temperature 0, single sample")
    p_run.add_argument(
        "--greedy-compare",
        action="store_true",
        help="run greedy and bagged variants and report both rows",
    )
    p_run.add_argument("--out", help="output directory root")

    p_report = sub.add_parser("report", help="combine persisted run directories")
    p_report.add_argument("--runs", nargs="+", required=True)
    p_report.add_argument("--out", help="path for the combined CSV")
    return parser


def _cmd_import(args) -> int:
    from tomuq.adapters import import_corpus
    from tomuq.corpus import save_corpus

    records = import_corpus(args.format, args.input)
    save_corpus(records, args.out)
    print(f"wrote {len(records)} dialogues to {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    from tomuq.calibrate import calibrate_corpus, save_targets
    from tomuq.corpus import load_corpus

    records = load_corpus(args.corpus, args.tag)
    targets = calibrate_corpus(records, args.question_key, strict=args.strict)
    save_targets(targets, args.out)
    print(f"wrote {len(targets)} targets to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    from tomuq.harness.synth import synth_world

    world = synth_world(
        seed=args.seed,
        n_dialogues=args.n_dialogues,
        sigma=args.sigma,
        fun_std=args.fun_std,
        embedding_dim=args.embedding_dim,
        embedding_mode=args.embedding_mode,
    )
    world.save(args.out)
    print(f"wrote {args.n_dialogues} dialogues and world.json to {args.out}")
    return 0


def _cmd_run(args) -> int:
    from tomuq.harness.config import Method, Task, parse_config
    from tomuq.harness.report import emit_report
    from tomuq.harness.runner import run_experiment, run_greedy_vs_bot

    config = parse_config(args.config)
    overrides = {
        "task": Task(args.task) if args.task else None,
        "method": Method(args.method) if args.method else None,
        "bot_n": args.bot_n,
        "include_demographics": args.demographics,
        "train_n": args.train_n,
        "output_dir": args.out,
    }
    if args.seeds:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.greedy:
        overrides["temperature"] = 0.0
        overrides["bot_n"] = 1
    config = config.with_overrides(**overrides)

    if args.greedy_compare:
        records = run_greedy_vs_bot(config, out_root=config.output_dir)
    else:
        records = [run_experiment(config, out_root=config.output_dir)]
    _, table = emit_report(records)
    print(table, end="")
    for record in records:
        if record.output_dir is not None:
            print(f"run directory: {record.output_dir}")
    return 0


def _cmd_report(args) -> int:
    from tomuq.harness.report import render_csv, render_table

    rows = []
    for run_dir in args.runs:
        csv_path = Path(run_dir) / "report.csv"
        if not csv_path.exists():
            raise ConfigError(f"{run_dir} does not look like a run directory")
        lines = csv_path.read_text().strip().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            rows.append(dict(zip(header, line.split(","))))
    table = render_table(rows)
    print(table, end="")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(render_csv(rows))
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "import": _cmd_import,
    "calibrate": _cmd_calibrate,
    "synth": _cmd_synth,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except TomuqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
