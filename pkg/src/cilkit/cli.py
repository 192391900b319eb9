"""Command-line harness.

    cilkit run <config.toml>
    cilkit compare <config.toml> --methods distill_old_only,distill_old_plus_expert
    cilkit ablate <config.toml> --m 0,1,2

Exit codes: 0 success, 1 runtime failure, 2 invalid config or usage.
Set CILKIT_LOG=DEBUG|INFO|WARNING to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, build_dataset, build_rounds, config_echo, load_config
from .engine import METHODS, run_experiment_with_state
from .errors import CilkitError, ConfigError
from .metrics import RoundReport
from .plots import save_ablation_figure, save_curves_figure
from .reporting import (
    ABLATION_HEADER,
    CURVES_HEADER,
    SUMMARY_HEADER,
    curves_rows,
    format_float,
    render_summary_table,
    results_document,
    run_record,
    summary_rows,
    write_csv,
    write_results_json,
)

log = logging.getLogger("cilkit")


def run_all(cfg: ExperimentConfig, variants: list[tuple[str, dict]]):
    """Run every (label, method override) variant over the shared seeds and
    dataset; returns the run records plus reports grouped by label."""
    dataset = build_dataset(cfg.dataset)
    rounds = build_rounds(cfg.dataset, dataset)
    runs = []
    reports_by_label: dict[str, dict[int, list[RoundReport]]] = {}
    for label, override in variants:
        by_seed = {}
        for seed in cfg.seeds:
            method = cfg.method_for_seed(seed)
            if override:
                method = replace(method, **override)
            log.info("running %s seed=%d (%d rounds)", label, seed, len(rounds))
            reports, state = run_experiment_with_state(
                dataset, rounds, method, cfg.hidden_dims)
            by_seed[seed] = reports
            record = run_record(label, seed, reports, state.memory.to_json_dict())
            record["_reports"] = reports
            runs.append(record)
        reports_by_label[label] = by_seed
    return runs, reports_by_label


def _write_common(out_dir: Path, echo: dict, runs: list[dict],
                  reports_by_label) -> dict:
    document = results_document(echo, runs)
    write_results_json(out_dir / "results.json", document)
    rows = []
    for run in runs:
        rows.extend(curves_rows(run["label"], run["seed"], run["_reports"]))
    write_csv(out_dir / "curves.csv", CURVES_HEADER, rows)
    save_curves_figure(reports_by_label, out_dir / "curves.png")
    return document


def cmd_run(config_path: str) -> int:
    cfg = load_config(config_path)
    out_dir = Path(cfg.output_dir)
    runs, by_label = run_all(cfg, [(cfg.method.method, {})])
    _write_common(out_dir, config_echo(cfg), runs, by_label)
    log.info("wrote %s", out_dir / "results.json")
    return 0


def cmd_compare(config_path: str, methods: list[str]) -> int:
    if len(methods) < 2:
        raise ConfigError("--methods: need at least two methods")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"--methods: unknown method {m!r}")
    cfg = load_config(config_path)
    out_dir = Path(cfg.output_dir)
    variants = [(m, {"method": m}) for m in methods]
    runs, by_label = run_all(cfg, variants)
    document = _write_common(out_dir, config_echo(cfg), runs, by_label)
    write_csv(out_dir / "summary.csv", SUMMARY_HEADER,
              summary_rows(document["summary"]))
    print(render_summary_table(document["summary"]))
    return 0


def cmd_ablate(config_path: str, m_values: list[int]) -> int:
    """Sweep the per-new-class similar-old-class count, with the plain
    old-distillation baseline included as label B."""
    if not m_values:
        raise ConfigError("--m: need at least one value")
    if any(m < 0 for m in m_values):
        raise ConfigError("--m: values must be >= 0")
    cfg = load_config(config_path)
    out_dir = Path(cfg.output_dir)
    variants = [("B", {"method": "distill_old_only"})]
    variants += [(str(m), {"method": "distill_old_plus_expert", "m_similar": m})
                 for m in m_values]
    runs, by_label = run_all(cfg, variants)
    _write_common(out_dir, config_echo(cfg), runs, by_label)
    rows = []
    labels, final_means, avg_means = [], [], []
    for label, _ in variants:
        finals, avgs = [], []
        for run in runs:
            if run["label"] != label:
                continue
            reports = run["_reports"]
            final_acc = reports[-1].mean_accuracy
            avg_acc = sum(r.mean_accuracy for r in reports) / len(reports)
            rows.append([label, run["seed"], format_float(final_acc),
                         format_float(avg_acc)])
            finals.append(final_acc)
            avgs.append(avg_acc)
        labels.append(label)
        final_means.append(sum(finals) / len(finals))
        avg_means.append(sum(avgs) / len(avgs))
    write_csv(out_dir / "ablation.csv", ABLATION_HEADER, rows)
    save_ablation_figure(labels, final_means, avg_means, out_dir / "ablation.png")
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cilkit",
        description="Class-incremental continual learning experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the configured experiment per seed")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="run several methods on one benchmark")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--methods", required=True,
                       type=lambda s: [v for v in s.split(",") if v])
    p_abl = sub.add_parser("ablate",
                           help="sweep the similar-old-class count (plus baseline B)")
    p_abl.add_argument("config")
    p_abl.add_argument("--m", required=True, type=_int_list)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CILKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "compare":
            return cmd_compare(args.config, args.methods)
        return cmd_ablate(args.config, args.m)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CilkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
