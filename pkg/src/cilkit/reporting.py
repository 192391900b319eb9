"""Deterministic result files.

All floating-point text is rendered with 17 significant digits so reruns of
the same config produce byte-identical JSON and CSV. results.json follows
the JSON Schema shipped in cilkit/schemas/results.schema.json.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

from .errors import InputError
from .metrics import RoundReport, summarize_rounds

CURVES_HEADER = ["round", "method", "seed", "mean_accuracy",
                 "confusion_errors", "forgetting_errors"]
SUMMARY_HEADER = ["round", "method", "mean_accuracy",
                  "confusion_errors", "forgetting_errors"]
ABLATION_HEADER = ["m", "seed", "final_round_accuracy", "avg_over_rounds_accuracy"]


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise InputError(f"cannot render non-finite value {x}")
    return format(float(x), ".17g")


def dump_json(obj, indent: int = 0) -> str:
    """JSON with floats rendered at fixed 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{dump_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dump_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    raise InputError(f"cannot serialize {type(obj).__name__}")


def run_record(label: str, seed: int, reports: list[RoundReport],
               memory_snapshot: dict[str, list[int]]) -> dict:
    return {
        "label": label,
        "seed": int(seed),
        "rounds": [r.to_json_dict() for r in reports],
        "memory": memory_snapshot,
    }


def results_document(config_echo: dict, runs: list[dict]) -> dict:
    """Full results payload: config echo, per-run reports, per-label summary."""
    labels = []
    for run in runs:
        if run["label"] not in labels:
            labels.append(run["label"])
    summary = {}
    for label in labels:
        by_seed = {run["seed"]: run for run in runs if run["label"] == label}
        rounds = {seed: run["_reports"] for seed, run in by_seed.items()}
        summary[label] = summarize_rounds(rounds)
    cleaned = [{k: v for k, v in run.items() if not k.startswith("_")}
               for run in runs]
    return {"config": config_echo, "runs": cleaned, "summary": summary}


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_results_json(path, document: dict) -> None:
    write_text(path, dump_json(document) + "\n")


def curves_rows(label: str, seed: int, reports: list[RoundReport]) -> list[list]:
    return [[r.round_index, label, seed, format_float(r.mean_accuracy),
             r.confusion_errors, r.forgetting_errors] for r in reports]


def write_csv(path, header: list[str], rows: list[list]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def summary_rows(summary_by_label: dict[str, list[dict]]) -> list[list]:
    rows = []
    for label, per_round in summary_by_label.items():
        for entry in per_round:
            rows.append([entry["round"], label,
                         format_float(entry["mean_accuracy"]),
                         format_float(entry["confusion_errors"]),
                         format_float(entry["forgetting_errors"])])
    return rows


def render_summary_table(summary_by_label: dict[str, list[dict]]) -> str:
    """Human-readable per-round table, one block per label."""
    lines = []
    for label, per_round in summary_by_label.items():
        lines.append(f"{label}:")
        lines.append("  round  mean_acc  confusion  forgetting")
        for e in per_round:
            lines.append(f"  {e['round']:>5}  {e['mean_accuracy']:8.4f}  "
                         f"{e['confusion_errors']:9.1f}  {e['forgetting_errors']:10.1f}")
    return "\n".join(lines)


def load_results_schema() -> dict:
    ref = resources.files("cilkit").joinpath("schemas/results.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))
