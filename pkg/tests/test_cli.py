import csv
import json
from pathlib import Path

import jsonschema
import pytest

from cilkit.cli import main
from cilkit.reporting import load_results_schema


def tiny_config(tmp_path, out_name="out", seeds="[1, 2]", extra_method=""):
    text = f"""\
output_dir = "{(tmp_path / out_name).as_posix()}"
seeds = {seeds}

[dataset]
kind = "synthetic"
meta_classes = 2
classes_per_meta = 2
dim = 4
intra_spread = 1.0
inter_spread = 12.0
noise_std = 0.5
train_per_class = 16
test_per_class = 8
data_seed = 7
classes_per_round = 2
schedule_policy = "split_similar"

[model]
hidden_dims = [8]

[method]
memory_k = 16
epochs = 4
batch_size = 16
learning_rate = 0.05
expert_full_epochs = 3
expert_balanced_epochs = 2
{extra_method}
"""
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestRunCommand:
    def test_writes_results_and_curves(self, tmp_path):
        config = tiny_config(tmp_path)
        assert main(["run", str(config)]) == 0
        out = tmp_path / "out"
        document = json.loads((out / "results.json").read_text())
        jsonschema.validate(document, load_results_schema())
        assert len(document["runs"]) == 2  # one per seed
        assert all(len(run["rounds"]) == 2 for run in document["runs"])
        rows = read_csv(out / "curves.csv")
        assert rows[0] == ["round", "method", "seed", "mean_accuracy",
                           "confusion_errors", "forgetting_errors"]
        assert len(rows) == 1 + 2 * 2  # header + seeds x rounds
        assert (out / "curves.png").stat().st_size > 0

    def test_missing_config_exits_2(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.toml")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_invalid_config_exits_2_with_field_path(self, tmp_path, capsys):
        config = tiny_config(tmp_path, extra_method="lambda1 = -1.0\n")
        assert main(["run", str(config)]) == 2
        assert "lambda1" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        config = tiny_config(tmp_path)
        assert main(["run", str(config)]) == 0
        out = tmp_path / "out"
        first = {name: (out / name).read_bytes()
                 for name in ("results.json", "curves.csv")}
        assert main(["run", str(config)]) == 0
        for name, payload in first.items():
            assert (out / name).read_bytes() == payload


class TestCompareCommand:
    def test_two_method_families_in_one_csv(self, tmp_path, capsys):
        config = tiny_config(tmp_path, seeds="[1]")
        code = main(["compare", str(config),
                     "--methods", "distill_old_only,distill_old_plus_expert"])
        assert code == 0
        out = tmp_path / "out"
        rows = read_csv(out / "curves.csv")
        methods = {row[1] for row in rows[1:]}
        assert methods == {"distill_old_only", "distill_old_plus_expert"}
        summary = read_csv(out / "summary.csv")
        assert summary[0] == ["round", "method", "mean_accuracy",
                              "confusion_errors", "forgetting_errors"]
        printed = capsys.readouterr().out
        assert "distill_old_only" in printed

    def test_single_seed_summary_equals_run_values(self, tmp_path):
        config = tiny_config(tmp_path, seeds="[1]")
        main(["compare", str(config),
              "--methods", "finetune,distill_old_only"])
        out = tmp_path / "out"
        curve_rows = read_csv(out / "curves.csv")[1:]
        summary_rows = read_csv(out / "summary.csv")[1:]
        curve_acc = {(r[0], r[1]): r[3] for r in curve_rows}
        for round_idx, method, acc, conf, forg in summary_rows:
            assert float(acc) == pytest.approx(
                float(curve_acc[(round_idx, method)]))

    def test_fewer_than_two_methods_exits_2(self, tmp_path):
        config = tiny_config(tmp_path)
        assert main(["compare", str(config), "--methods", "finetune"]) == 2

    def test_unknown_method_exits_2(self, tmp_path, capsys):
        config = tiny_config(tmp_path)
        assert main(["compare", str(config), "--methods", "finetune,magic"]) == 2
        assert "magic" in capsys.readouterr().err


class TestAblateCommand:
    def test_rows_per_seed_include_baseline(self, tmp_path):
        config = tiny_config(tmp_path, seeds="[1, 2]")
        assert main(["ablate", str(config), "--m", "0,1"]) == 0
        out = tmp_path / "out"
        rows = read_csv(out / "ablation.csv")
        assert rows[0] == ["m", "seed", "final_round_accuracy",
                           "avg_over_rounds_accuracy"]
        labels = [(r[0], r[1]) for r in rows[1:]]
        assert sorted(labels) == sorted(
            [(m, s) for m in ("B", "0", "1") for s in ("1", "2")])
        assert (out / "ablation.png").stat().st_size > 0

    def test_avg_over_rounds_matches_curves_recomputation(self, tmp_path):
        config = tiny_config(tmp_path, seeds="[1]")
        main(["ablate", str(config), "--m", "0,1"])
        out = tmp_path / "out"
        curve_rows = read_csv(out / "curves.csv")[1:]
        by_label = {}
        for round_idx, label, seed, acc, conf, forg in curve_rows:
            by_label.setdefault((label, seed), []).append(float(acc))
        ablation = read_csv(out / "ablation.csv")[1:]
        for label, seed, final_acc, avg_acc in ablation:
            series = by_label[(label, seed)]
            assert float(avg_acc) == pytest.approx(sum(series) / len(series))
            assert float(final_acc) == pytest.approx(series[-1])

    def test_empty_m_list_exits_2(self, tmp_path):
        config = tiny_config(tmp_path)
        assert main(["ablate", str(config), "--m", ""]) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        config = tiny_config(tmp_path, seeds="[1]")
        main(["ablate", str(config), "--m", "0"])
        out = tmp_path / "out"
        first = {name: (out / name).read_bytes()
                 for name in ("results.json", "curves.csv", "ablation.csv")}
        main(["ablate", str(config), "--m", "0"])
        for name, payload in first.items():
            assert (out / name).read_bytes() == payload


class TestCsvDataset:
    def test_run_on_csv_files(self, tmp_path):
        from cilkit.data import LabeledSample, save_csv
        import numpy as np

        rng = np.random.default_rng(0)
        centres = {0: (0.0, 0.0), 1: (6.0, 0.0), 2: (0.0, 6.0), 3: (6.0, 6.0)}
        meta = {0: 0, 1: 0, 2: 1, 3: 1}

        def draw(n):
            return [LabeledSample(np.array(centres[c]) + 0.5 * rng.normal(size=2),
                                  c, meta[c])
                    for c in centres for _ in range(n)]

        save_csv(draw(12), tmp_path / "train.csv")
        save_csv(draw(6), tmp_path / "test.csv")
        config = tmp_path / "csv.toml"
        config.write_text(f"""\
output_dir = "{(tmp_path / 'out').as_posix()}"
seeds = [0]

[dataset]
kind = "csv"
train_path = "{(tmp_path / 'train.csv').as_posix()}"
test_path = "{(tmp_path / 'test.csv').as_posix()}"
classes_per_round = 2
schedule_policy = "id_order"

[model]
hidden_dims = [8]

[method]
memory_k = 12
epochs = 6
batch_size = 8
learning_rate = 0.05
expert_full_epochs = 4
expert_balanced_epochs = 2
""")
        assert main(["run", str(config)]) == 0
        document = json.loads((tmp_path / "out" / "results.json").read_text())
        assert len(document["runs"][0]["rounds"]) == 2


class TestParser:
    def test_unknown_command_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_missing_required_flag_exits_2(self, tmp_path, capsys):
        config = tiny_config(tmp_path)
        assert main(["compare", str(config)]) == 2


class TestDefaultBenchmarkComparison:
    def test_expert_method_confusion_at_final_round_not_worse(self, tmp_path, capsys):
        """On the shipped confusable benchmark, the expert-distillation
        variant's final-round confusion mean must not exceed the plain
        old-distillation baseline's in the emitted summary."""
        shipped = Path(__file__).resolve().parents[1] / "configs" / "benchmark.toml"
        text = shipped.read_text()
        out_dir = (tmp_path / "bench").as_posix()
        text = text.replace('output_dir = "out/benchmark"',
                            f'output_dir = "{out_dir}"')
        config = tmp_path / "benchmark.toml"
        config.write_text(text)
        code = main(["compare", str(config),
                     "--methods", "distill_old_only,distill_old_plus_expert"])
        assert code == 0
        rows = read_csv(tmp_path / "bench" / "summary.csv")[1:]
        final_round = max(int(r[0]) for r in rows)
        confusion = {r[1]: float(r[3]) for r in rows if int(r[0]) == final_round}
        assert (confusion["distill_old_plus_expert"]
                <= confusion["distill_old_only"])
