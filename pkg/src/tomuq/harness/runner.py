"""Experiment orchestration: forecasts or embeddings per dialogue, per-seed
fitting and prediction, micro-averaged scoring, and run persistence.

A run directory is named by a content hash of (canonical config, corpus
hash, code version), so identical experiments land in the same place and
re-running them rewrites identical bytes.  Wall-clock time and cache-hit
statistics live in ``meta.json``, outside the reproducible artifacts.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import tomuq
from tomuq.calibrate import CalibratedTarget, calibrate_corpus
from tomuq.corpus import DialogueRecord, load_corpus, make_split, record_to_json
from tomuq.errors import ConfigError, TomuqError
from tomuq.forecast import ForecastEstimate, bag_of_thoughts, direct_forecast
from tomuq.gateway.backends import SamplingOptions, embed
from tomuq.gateway.cache import ResponseCache
from tomuq.gateway.prompts import PromptBundle, PromptTask, build_prompt
from tomuq.harness.config import (
    HEAD_KIND_BY_METHOD,
    ExperimentConfig,
    Method,
    Task,
)
from tomuq.harness.synth import synth_world
from tomuq.metrics import RegressionReport, micro_average
from tomuq.regress.heads import concat_features, fit_head, fit_joint_head
from tomuq.regress.scaling import (
    apply_scaling,
    fit_linear_scaling,
    fit_platt_scaling,
)

# which prompt(s) a task needs; funq runs a forecast side and a world side
_TASK_SIDES: dict[Task, dict[str, PromptTask]] = {
    Task.ONE_TUQ: {"main": PromptTask.ONE_TUQ},
    Task.TWO_TUQ: {"main": PromptTask.TWO_TUQ},
    Task.FUNQ: {"forecast": PromptTask.TWO_TUQ, "world": PromptTask.FUNQ_WORLD_SIDE},
}


@dataclass
class RunRecord:
    """Everything one experiment produced, in memory."""

    config: dict
    run_id: str
    corpus_hash: str
    variant: str
    backend_id: str
    splits: dict[int, dict]
    rows: list[dict]  # {seed, dialogue_id, target, pred}
    forecasts: list[dict]
    report: RegressionReport
    wall_clock_s: float = 0.0
    cache_stats: dict = field(default_factory=dict)
    output_dir: Path | None = None


def _target_value(target: CalibratedTarget, task: Task) -> float | None:
    if task is Task.ONE_TUQ:
        return target.ground_truth
    if task is Task.TWO_TUQ:
        return target.forecast
    return target.false_uncertainty


def _side_target(target: CalibratedTarget, side: str, task: Task) -> float:
    if side == "forecast":
        return target.forecast
    if side == "world":
        return target.ground_truth
    return _target_value(target, task)


def _corpus_hash(records: list[DialogueRecord]) -> str:
    digest = hashlib.sha256()
    for record in records:
        digest.update(json.dumps(record_to_json(record), sort_keys=True).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def _resolve_inputs(config: ExperimentConfig):
    """Corpus records plus completion/embedding backends per the config."""
    backend = config.backend
    if backend["kind"] == "synthetic":
        world = synth_world(
            seed=backend.get("world_seed", 0),
            n_dialogues=backend.get("n_dialogues", 200),
            sigma=backend.get("sigma", 0.1),
            fun_std=backend.get("fun_std", 0.15),
            embedding_dim=backend.get("embedding_dim", 768),
            embedding_mode=backend.get("embedding_mode", "side_signal"),
            signal_sigma=backend.get("signal_sigma", 0.05),
        )
        return world.records, world.completion_backend(), world.embedding_backend()
    from tomuq.gateway.backends import (
        OpenAICompatibleBackend,
        OpenAICompatibleEmbeddingBackend,
    )

    records = load_corpus(config.corpus_path, config.corpus_tag)
    completion = OpenAICompatibleBackend(model=backend["model"])
    embedding = None
    if backend.get("embedding_model"):
        embedding = OpenAICompatibleEmbeddingBackend(model=backend["embedding_model"])
    return records, completion, embedding


def _forecast_one(
    prompt: PromptBundle,
    config: ExperimentConfig,
    backend,
    cache: ResponseCache | None,
) -> ForecastEstimate:
    sampling = SamplingOptions(
        temperature=config.temperature,
        max_new_tokens=config.max_new_tokens,
        retry_limit=config.retry_limit,
    )
    if config.bot_n == 1:
        return direct_forecast(prompt, backend, sampling=sampling, cache=cache)
    return bag_of_thoughts(
        prompt, backend, n_samples=config.bot_n, sampling=sampling, cache=cache
    )


def _gather(
    sides: dict[str, PromptTask],
    records: list[DialogueRecord],
    config: ExperimentConfig,
    worker,
    stage: str,
) -> dict[str, dict[str, object]]:
    """Fan one worker out over (side, dialogue) with bounded parallelism.

    Fails fast; errors are re-raised with the stage and dialogue id.
    """
    prompts = {
        (side, record.id): build_prompt(
            task,
            record,
            config.question_key,
            include_demographics=config.include_demographics,
            char_budget=config.char_budget,
        )
        for side, task in sides.items()
        for record in records
    }

    def tagged(key, exc):
        side, did = key
        return type(exc)(f"stage {stage}/{side}, dialogue {did!r}: {exc}")

    results: dict[str, dict[str, object]] = {side: {} for side in sides}
    if config.max_workers == 1:
        for key, prompt in prompts.items():
            try:
                results[key[0]][key[1]] = worker(prompt)
            except TomuqError as exc:
                raise tagged(key, exc) from exc
        return results
    with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
        futures = {
            key: pool.submit(worker, prompt) for key, prompt in prompts.items()
        }
        for key, future in futures.items():
            try:
                results[key[0]][key[1]] = future.result()
            except TomuqError as exc:
                raise tagged(key, exc) from exc
    return results


def _fit_side_scaling(config: ExperimentConfig, pairs: list[tuple[float, float]]):
    if config.method is Method.DF_LS:
        return fit_linear_scaling(pairs, output_range=(0.0, 1.0))
    return fit_platt_scaling(pairs)


def run_experiment(
    config: ExperimentConfig,
    out_root: str | Path | None = None,
    variant: str = "",
) -> RunRecord:
    """Execute one (task, method, options) cell and optionally persist it."""
    started = time.monotonic()
    records, completion_backend, embedding_backend = _resolve_inputs(config)
    if config.method in HEAD_KIND_BY_METHOD or config.method is Method.FT_RF_J:
        if embedding_backend is None:
            raise ConfigError("fine-tuned heads require an embedding backend")

    targets = {t.dialogue_id: t for t in calibrate_corpus(records, config.question_key)}
    eligible = [
        r
        for r in records
        if r.id in targets and _target_value(targets[r.id], config.task) is not None
    ]
    if config.train_n >= len(eligible):
        raise ConfigError(
            f"train_n={config.train_n} needs more than {len(eligible)} "
            "eligible dialogues"
        )
    sides = _TASK_SIDES[config.task]
    cache = ResponseCache(config.cache_dir) if config.cache_dir else None

    corpus_hash = _corpus_hash(records)
    canonical = config.canonical()
    run_id = hashlib.sha256(
        json.dumps(
            {"config": canonical, "corpus": corpus_hash, "version": tomuq.__version__},
            sort_keys=True,
        ).encode("utf-8")
    ).hexdigest()[:16]
    root = out_root or config.output_dir

    is_ft = config.method in (Method.FT_L, Method.FT_NN, Method.FT_RF, Method.FT_RF_J)
    if is_ft:
        features = _gather(
            sides,
            eligible,
            config,
            lambda prompt: embed(prompt, embedding_backend, cache=cache),
            stage="embed",
        )
        estimates: dict[str, dict[str, ForecastEstimate]] = {}
        backend_id = embedding_backend.backend_id
    else:
        estimates = _gather(
            sides,
            eligible,
            config,
            lambda prompt: _forecast_one(prompt, config, completion_backend, cache),
            stage="forecast",
        )
        features = {}
        backend_id = completion_backend.backend_id

    forecast_rows = [
        {
            "dialogue_id": est.dialogue_id,
            "task": est.task,
            "method_tag": est.method_tag,
            "value": est.value,
            "n_used": est.n_used,
            "backend_id": backend_id,
            "seed": None,
        }
        for side in sorted(estimates)
        for est in sorted(estimates[side].values(), key=lambda e: e.dialogue_id)
    ]

    splits: dict[int, dict] = {}
    rows: list[dict] = []
    per_split: list[tuple[list[float], list[float], float]] = []
    try:
        for seed in config.seeds:
            split = make_split(eligible, seed, config.train_n)
            train_ids = sorted(split.train_ids)
            test_ids = sorted(split.test_ids)
            y_train = [_target_value(targets[d], config.task) for d in train_ids]
            y_test = [_target_value(targets[d], config.task) for d in test_ids]
            train_mean = float(np.mean(y_train))
            try:
                preds = _predict_split(
                    config, sides, estimates, features, targets, train_ids, test_ids, seed
                )
            except TomuqError as exc:
                raise type(exc)(f"stage fit/predict, seed {seed}: {exc}") from exc
            splits[seed] = {
                "train_hash": hashlib.sha256(",".join(train_ids).encode()).hexdigest(),
                "test_hash": hashlib.sha256(",".join(test_ids).encode()).hexdigest(),
                "train_mean": train_mean,
                "n_train": len(train_ids),
                "n_test": len(test_ids),
            }
            rows.extend(
                {"seed": seed, "dialogue_id": d, "target": y, "pred": p}
                for d, y, p in zip(test_ids, y_test, preds)
            )
            per_split.append((y_test, preds, train_mean))
        report = micro_average(per_split, r2_train_mean=config.r2_train_mean)
    except TomuqError:
        # fail fast, but keep whatever estimates exist for debugging
        if root is not None and forecast_rows:
            partial_dir = Path(root) / f"run-{run_id}"
            partial_dir.mkdir(parents=True, exist_ok=True)
            with (partial_dir / "partial-forecasts.jsonl").open("w", encoding="utf-8") as fh:
                for row in forecast_rows:
                    fh.write(json.dumps(row, sort_keys=True))
                    fh.write("\n")
        raise

    record = RunRecord(
        config=canonical,
        run_id=run_id,
        corpus_hash=corpus_hash,
        variant=variant,
        backend_id=backend_id,
        splits=splits,
        rows=rows,
        forecasts=forecast_rows,
        report=report,
        wall_clock_s=time.monotonic() - started,
        cache_stats=cache.stats() if cache else {},
    )
    if root is not None:
        _persist(record, Path(root))
    return record


def _predict_split(
    config: ExperimentConfig,
    sides: dict[str, PromptTask],
    estimates: dict[str, dict[str, ForecastEstimate]],
    features: dict[str, dict[str, object]],
    targets: dict[str, CalibratedTarget],
    train_ids: list[str],
    test_ids: list[str],
    seed: int,
) -> list[float]:
    """Fit whatever the method needs on the train ids, predict the test ids."""
    method = config.method
    task = config.task

    if method is Method.DF:
        side_preds = {
            side: {d: estimates[side][d].value for d in test_ids} for side in sides
        }
    elif method in (Method.DF_LS, Method.DF_PS):
        side_preds = {}
        for side in sides:
            pairs = [
                (estimates[side][d].value, _side_target(targets[d], side, task))
                for d in train_ids
            ]
            params = _fit_side_scaling(config, pairs)
            side_preds[side] = {
                d: apply_scaling(params, estimates[side][d].value) for d in test_ids
            }
    elif method is Method.FT_RF_J:
        head = fit_joint_head(
            [features["forecast"][d] for d in train_ids],
            [features["world"][d] for d in train_ids],
            [targets[d].false_uncertainty for d in train_ids],
            seed=seed,
        )
        joined = np.stack(
            [
                concat_features(features["forecast"][d], features["world"][d]).values
                for d in test_ids
            ]
        )
        return head.predict_batch(joined).tolist()
    else:  # per-side fine-tuned heads
        kind = HEAD_KIND_BY_METHOD[method]
        side_preds = {}
        for side_index, side in enumerate(sorted(sides)):
            head = fit_head(
                [features[side][d] for d in train_ids],
                [_side_target(targets[d], side, task) for d in train_ids],
                kind,
                seed=seed + 1000 * side_index,
            )
            matrix = np.stack([features[side][d].values for d in test_ids])
            pred = head.predict_batch(matrix)
            side_preds[side] = dict(zip(test_ids, pred.tolist()))

    if task is Task.FUNQ:
        return [
            side_preds["forecast"][d] - side_preds["world"][d] for d in test_ids
        ]
    return [side_preds["main"][d] for d in test_ids]


def _persist(record: RunRecord, root: Path) -> None:
    run_dir = root / f"run-{record.run_id}"
    run_dir.mkdir(parents=True, exist_ok=True)
    record.output_dir = run_dir

    (run_dir / "config.json").write_text(
        json.dumps(record.config, sort_keys=True, indent=2) + "\n"
    )
    (run_dir / "splits.json").write_text(
        json.dumps(
            {str(seed): info for seed, info in sorted(record.splits.items())},
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )
    with (run_dir / "estimates.jsonl").open("w", encoding="utf-8") as fh:
        for row in sorted(record.rows, key=lambda r: (r["seed"], r["dialogue_id"])):
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
    if record.forecasts:
        with (run_dir / "forecasts.jsonl").open("w", encoding="utf-8") as fh:
            for row in record.forecasts:
                fh.write(json.dumps(row, sort_keys=True))
                fh.write("\n")

    from tomuq.harness.report import render_csv, render_table, report_row

    row = report_row(record)
    (run_dir / "report.csv").write_text(render_csv([row]))
    (run_dir / "report.txt").write_text(render_table([row]))
    (run_dir / "meta.json").write_text(
        json.dumps(
            {
                "run_id": record.run_id,
                "corpus_hash": record.corpus_hash,
                "code_version": tomuq.__version__,
                "wall_clock_s": record.wall_clock_s,
                "cache_stats": record.cache_stats,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )


def run_greedy_vs_bot(
    config: ExperimentConfig, out_root: str | Path | None = None
) -> list[RunRecord]:
    """Run the same cell greedily (temperature 0, single sample) and with
    bagged sampling, returning both records for side-by-side reporting."""
    bot_n = config.bot_n if config.bot_n > 1 else 10
    greedy = config.with_overrides(temperature=0.0, bot_n=1)
    bagged = config.with_overrides(bot_n=bot_n)
    return [
        run_experiment(greedy, out_root=out_root, variant="greedy"),
        run_experiment(bagged, out_root=out_root, variant="bot"),
    ]


def load_run(run_dir: str | Path) -> dict:
    """Read back a persisted run directory."""
    run_dir = Path(run_dir)
    data = {
        "config": json.loads((run_dir / "config.json").read_text()),
        "splits": json.loads((run_dir / "splits.json").read_text()),
        "meta": json.loads((run_dir / "meta.json").read_text()),
        "report_csv": (run_dir / "report.csv").read_text(),
        "rows": [],
    }
    with (run_dir / "estimates.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                data["rows"].append(json.loads(line))
    return data


def rescore_run(run_dir: str | Path) -> RegressionReport:
    """Recompute the pooled report from a run's stored estimates."""
    data = load_run(run_dir)
    by_seed: dict[int, list[dict]] = {}
    for row in data["rows"]:
        by_seed.setdefault(row["seed"], []).append(row)
    per_split = []
    for seed in sorted(by_seed):
        split_info = data["splits"][str(seed)]
        rows = by_seed[seed]
        per_split.append(
            (
                [r["target"] for r in rows],
                [r["pred"] for r in rows],
                split_info["train_mean"],
            )
        )
    mode = data["config"].get("r2_train_mean", "split_local")
    return micro_average(per_split, r2_train_mean=mode)
