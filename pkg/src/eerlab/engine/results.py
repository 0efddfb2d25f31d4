"""Writing and reading run artifacts.

Each run directory holds ``<strategy>_seed<k>.csv`` (per-iteration curve) and
``<strategy>_seed<k>.json`` (config echo, AUC, selections). CSV floats use
``repr`` so a rerun with the same seed is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from eerlab.engine.loop import ExperimentResult, IterationRecord
from eerlab.engine.metrics import compare_methods

RUN_COLUMNS = ("iteration", "n_labeled", "test_accuracy", "train_seconds", "score_seconds")
AGGREGATE_COLUMNS = ("strategy", "mean_auc", "std_auc")
SHIFT_PROXY = "lowest mean feature value"


def run_stem(strategy: str, seed: int) -> str:
    return f"{strategy}_seed{seed}"


def _cell(value) -> str:
    return "" if value is None else repr(value)


def run_csv_text(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_COLUMNS)
    for r in result.records:
        writer.writerow([r.iteration, r.n_labeled, repr(r.test_accuracy),
                         _cell(r.train_seconds), _cell(r.score_seconds)])
    return buf.getvalue()


def summary_dict(result: ExperimentResult) -> dict:
    config = dict(result.config)
    if config.get("shift") == "induced":
        config["shift_proxy"] = SHIFT_PROXY
    return {
        "config": config,
        "auc": result.auc,
        "auc_method": result.auc_method,
        "budgets": result.budgets,
        "accuracies": result.accuracies,
        "selections": result.selections,
        "flags": [r.flags for r in result.records],
    }


def write_run(result: ExperimentResult, outdir) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = run_stem(result.strategy, result.seed)
    csv_path = outdir / f"{stem}.csv"
    json_path = outdir / f"{stem}.json"
    csv_path.write_text(run_csv_text(result))
    json_path.write_text(json.dumps(summary_dict(result), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_run(json_path) -> ExperimentResult:
    """Rebuild a result from its JSON summary (timings are not kept there)."""
    data = json.loads(Path(json_path).read_text())
    config = {k: v for k, v in data["config"].items() if k != "shift_proxy"}
    records = [
        IterationRecord(i, n, acc, list(sel), flags=list(fl))
        for i, (n, acc, sel, fl) in enumerate(
            zip(data["budgets"], data["accuracies"], data["selections"], data["flags"]))
    ]
    return ExperimentResult(config, records, data["auc"], data["auc_method"])


def aggregate(results: list[ExperimentResult]) -> dict[str, np.ndarray]:
    """AUCs grouped by strategy, in first-seen order, sorted by seed within a group."""
    groups: dict[str, list[ExperimentResult]] = {}
    for r in results:
        groups.setdefault(r.strategy, []).append(r)
    return {s: np.array([r.auc for r in sorted(rs, key=lambda r: r.seed)]) for s, rs in groups.items()}


def _std(values: np.ndarray) -> float:
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def aggregate_csv_text(aucs: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for strategy, values in aucs.items():
        writer.writerow([strategy, repr(float(values.mean())), repr(_std(values))])
    return buf.getvalue()


def comparison_matrix_text(aucs: dict[str, np.ndarray]) -> str:
    """Row strategy versus column strategy; cells are win, tie, loss or n/a."""
    names = list(aucs)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", *names])
    for a in names:
        row = [a]
        for b in names:
            if aucs[a].size < 2 or aucs[b].size < 2:
                row.append("n/a")
            else:
                row.append(compare_methods(aucs[a], aucs[b]))
        writer.writerow(row)
    return buf.getvalue()
