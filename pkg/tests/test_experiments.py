import csv
import json
from collections import Counter

import numpy as np
import pytest

from inkmotion.augment import base_id
from inkmotion.classifiers import Standardizer
from inkmotion.experiments import (
    AblationSpec,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    LeakageError,
    StageError,
    ablation_cells,
    check_leakage,
    config_notes,
    confusion_matrix,
    emit_report,
    emit_table,
    evaluate,
    load_config,
    prepare_rows,
    random_split,
    run_ablation,
    run_experiment,
    subject_split,
)
from inkmotion.preprocess import stack
from inkmotion.synth import gen_dataset

from conftest import random_rows


@pytest.fixture(scope="module")
def small_rows():
    return prepare_rows(ExperimentConfig(), gen_dataset(5, 2, seed=0))


def ids(rows):
    return [r.sequence_id for r in rows]


# ---------------------------------------------------------------- splits

def test_random_split_sizes_and_partition(rng):
    rows = random_rows(rng, 100, n=4)
    tr, dv, te = random_split(rows, seed=3)
    assert (len(tr), len(dv), len(te)) == (80, 10, 10)
    all_ids = ids(tr) + ids(dv) + ids(te)
    assert Counter(all_ids) == Counter(ids(rows))
    assert random_split(rows, seed=3) == (tr, dv, te)
    assert ids(random_split(rows, seed=4)[2]) != ids(te)


@pytest.mark.parametrize("n", [10, 37, 253])
def test_random_split_proportions(rng, n):
    tr, dv, te = random_split(random_rows(rng, n, n=4), seed=0)
    assert abs(len(tr) - 0.8 * n) <= 1 and abs(len(dv) - 0.1 * n) <= 1 and abs(len(te) - 0.1 * n) <= 1
    assert len(tr) + len(dv) + len(te) == n


def test_random_split_too_small(rng):
    with pytest.raises(ValueError):
        random_split(random_rows(rng, 9, n=4))


def test_subject_split_minimal(rng):
    rows = random_rows(rng, 50, n=4, n_subjects=5)
    tr, dv, te = subject_split(rows, seed=1)
    subj = lambda part: {r.subject_id for r in part}
    assert len(subj(tr)) == 1 and len(subj(dv)) == 2 and len(subj(te)) == 2
    assert not (subj(tr) & subj(dv) or subj(tr) & subj(te) or subj(dv) & subj(te))
    assert len(tr) + len(dv) + len(te) == 50
    assert [r for r in rows if r.subject_id in subj(te)] == te
    assert subject_split(rows, seed=1) == (tr, dv, te)


def test_subject_split_too_few(rng):
    with pytest.raises(ValueError):
        subject_split(random_rows(rng, 40, n=4, n_subjects=4))


def test_split_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"split": {"ratios": [80, 10, 5]}})


# ---------------------------------------------------------------- evaluation

class Fixed:
    def __init__(self, preds):
        self.preds = np.asarray(preds)

    def predict(self, x):
        return self.preds[: len(x)]


def test_evaluate_perfect_and_constant():
    y = np.arange(26)
    acc, cm = evaluate(Fixed(y), np.zeros((26, 4, 3)), y)
    assert acc == 1.0 and np.array_equal(cm, np.eye(26, dtype=int))
    acc, cm = evaluate(Fixed(np.zeros(26, dtype=int)), np.zeros((26, 4, 3)), y)
    assert acc == pytest.approx(1 / 26)
    assert cm[:, 0].sum() == 26


def test_evaluate_recount(rng):
    y = rng.integers(0, 26, 300)
    p = np.where(rng.random(300) < 0.4, y, rng.integers(0, 26, 300))
    acc, cm = evaluate(Fixed(p), np.zeros((300, 2, 3)), y)
    assert acc == sum(int(a == b) for a, b in zip(p, y)) / 300
    assert np.array_equal(cm.sum(axis=1), np.bincount(y, minlength=26))


def test_evaluate_empty():
    with pytest.raises(ValueError):
        evaluate(Fixed([]), np.zeros((0, 2, 3)), np.zeros(0, dtype=int))


def test_confusion_orientation():
    cm = confusion_matrix(np.array([2]), np.array([5]))
    assert cm[2, 5] == 1 and cm.sum() == 1


# ---------------------------------------------------------------- experiment

def test_knn_experiment_beats_chance(small_rows):
    rep = run_experiment(ExperimentConfig(model="knn"), small_rows)
    assert rep.accuracies["test"] > 1 / 26
    cm = np.array(rep.confusion)
    assert cm.shape == (26, 26)
    assert cm.trace() / cm.sum() == rep.accuracies["test"]
    assert rep.counts["test"] == cm.sum()
    assert rep.runtime_s is None
    assert rep.leakage["passed"] and rep.leakage["augmented_partitions"] == []


def test_experiment_deterministic(small_rows):
    cfg = ExperimentConfig(model="knn", aug=True, autoencoder=True, seed=5).with_seed(5)
    cfg.ae.epochs = 2
    cfg.augment.copies_per_sequence = 1
    a = run_experiment(cfg, small_rows).to_json()
    b = run_experiment(cfg, small_rows).to_json()
    assert a == b


def test_augmentation_only_touches_train(small_rows):
    cfg = ExperimentConfig(model="knn", aug=True)
    cfg.augment.copies_per_sequence = 2
    rep = run_experiment(cfg, small_rows)
    assert rep.leakage["augmented_partitions"] == ["train"]
    assert rep.leakage["augmentation"] == "train-only"
    assert rep.counts["train"] == 3 * round(0.8 * len(small_rows))
    assert rep.counts["dev"] + rep.counts["test"] == len(small_rows) - round(0.8 * len(small_rows))


def test_runtime_recorded_when_asked(small_rows):
    rep = run_experiment(ExperimentConfig(model="knn", record_runtime=True), small_rows)
    assert rep.runtime_s is not None and rep.runtime_s > 0


def test_stage_label_on_failure(small_rows):
    cfg = ExperimentConfig(model="knn")
    cfg.knn.k = 10_000
    with pytest.raises(StageError) as exc:
        run_experiment(cfg, small_rows)
    assert exc.value.stage == "train"


def test_rows_feature_mismatch(small_rows):
    with pytest.raises(StageError) as exc:
        run_experiment(ExperimentConfig(model="knn", n_features=50), small_rows)
    assert exc.value.stage == "preprocess"


def test_config_notes():
    cfg = ExperimentConfig(model="rnn")
    cfg.rnn.epochs, cfg.rnn.hidden = 60, 16
    notes = config_notes(cfg)
    assert "rnn epochs reduced from 250 to 60" in notes
    assert "rnn hidden size 16 instead of 128" in notes
    assert any("svm hyperparameters are defaults" in n for n in config_notes(ExperimentConfig(model="svm")))


# ---------------------------------------------------------------- leakage

def test_leakage_detects_dev_rows(small_rows):
    tr, dv, te = random_split(small_rows, seed=0)
    with pytest.raises(LeakageError):
        check_leakage(tr, dv, te, {"autoencoder": tr + dv[:1]}, None)


def test_leakage_detects_foreign_scaler(small_rows):
    tr, dv, te = random_split(small_rows, seed=0)
    x, _ = stack(tr + dv)
    with pytest.raises(LeakageError):
        check_leakage(tr, dv, te, {"classifier": tr}, Standardizer.fit(x))


def test_leakage_detects_overlap(small_rows):
    tr, dv, te = random_split(small_rows, seed=0)
    with pytest.raises(LeakageError):
        check_leakage(tr + te[:1], dv, te, {"classifier": tr}, None)


def test_leakage_accepts_augmented_train(small_rows):
    from inkmotion.augment import AugmentConfig, augment_dataset

    tr, dv, te = random_split(small_rows, seed=0)
    aug = augment_dataset(tr, AugmentConfig(copies_per_sequence=1))
    assert {base_id(r.sequence_id) for r in aug} == {r.sequence_id for r in tr}
    x, _ = stack(aug)
    res = check_leakage(tr, dv, te, {"augmentation": tr, "classifier": aug}, Standardizer.fit(x))
    assert res["passed"] and res["standardization"] == "train-only"


# ---------------------------------------------------------------- ablation

def test_ablation_cell_counts():
    assert len(ablation_cells(["knn"], [0])) == 2
    cells = ablation_cells(["knn", "svm", "cnn", "rnn"], [0])
    deep = [c for c in cells if c.model in ("cnn", "rnn")]
    assert len(deep) == 16 and len(cells) - len(deep) == 4
    assert len({c.name for c in cells}) == 20
    assert len(ablation_cells(["cnn"], [0, 1, 2], ["random"])) == 12


def test_ablation_spec_validation():
    with pytest.raises(ConfigError):
        AblationSpec(models=("knn", "tree"))
    with pytest.raises(ConfigError):
        AblationSpec(n_seeds=0)


def test_run_ablation_knn_and_table(small_rows, tmp_path):
    res = run_ablation(small_rows, ExperimentConfig(), seeds=[0, 1], models=["knn"])
    assert res.n_ok == 4
    rows = res.rows()
    assert [(r["model"], r["split"]) for r in rows] == [("knn", "random"), ("knn", "subject")]
    per_seed = [rep.accuracies["test"] for c, rep, _ in res.cells if c.split == "random"]
    assert rows[0]["test_acc"] == pytest.approx(np.mean(per_seed))
    files = emit_table(res, tmp_path)
    with open(tmp_path / "table.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["model", "split", "aug", "ae", "train_acc", "test_acc"]
    assert len(table) == 3
    assert (tmp_path / "table8.csv").exists() and (tmp_path / "cells.csv").exists()
    assert all(f.exists() for f in files)


def test_run_ablation_records_failures(small_rows):
    base = ExperimentConfig()
    base.knn.k = 10_000
    res = run_ablation(small_rows, base, seeds=[0], models=["knn", "svm"], splits=["random"])
    errs = {c.model: err for c, _, err in res.cells}
    assert errs["knn"] and "StageError" in errs["knn"]
    assert errs["svm"] is None and res.n_ok == 1


def test_ablation_default_seeds(small_rows):
    base = ExperimentConfig(seed=7)
    base.ablation.n_seeds = 2
    res = run_ablation(small_rows, base, models=["knn"], splits=["random"])
    assert [c.seed for c, _, _ in res.cells] == [7, 8]


def test_ablation_parallel_matches_serial(small_rows):
    a = run_ablation(small_rows, ExperimentConfig(), seeds=[0], models=["knn"], jobs=1)
    b = run_ablation(small_rows, ExperimentConfig(), seeds=[0], models=["knn"], jobs=2)
    assert [r.to_json() for _, r, _ in a.cells] == [r.to_json() for _, r, _ in b.cells]


# ---------------------------------------------------------------- report output

def test_emit_report_knn(small_rows, tmp_path):
    rep = run_experiment(ExperimentConfig(model="knn"), small_rows)
    files = emit_report(rep, tmp_path)
    assert sorted(f.name for f in files) == ["confusion.csv", "curves.csv", "report.json"]
    assert not (tmp_path / "curves.svg").exists()
    with open(tmp_path / "confusion.csv") as fh:
        body = list(csv.reader(fh))[1:]
    sums = [sum(int(v) for v in r[1:]) for r in body]
    assert sum(sums) == rep.counts["test"]
    assert sums == np.array(rep.confusion).sum(axis=1).tolist()
    d = json.loads((tmp_path / "report.json").read_text())
    assert set(d) >= {"config", "accuracies", "confusion", "curves", "runtime_s"}
    assert ExperimentConfig.from_dict(d["config"]).to_dict() == rep.config
    assert ExperimentReport.from_dict(d).to_json() == rep.to_json()


def test_emit_report_with_curves(tmp_path):
    rep = ExperimentReport(
        config=ExperimentConfig(model="cnn").to_dict(),
        accuracies={"train": 1.0, "dev": 0.5, "test": 0.5},
        confusion=np.zeros((26, 26), dtype=int).tolist(),
        curves=[{"epoch": e, "train_acc": e / 4, "dev_acc": e / 5} for e in range(1, 5)],
    )
    emit_report(rep, tmp_path)
    svg = (tmp_path / "curves.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    assert "validation" in svg and "train" in svg


# ---------------------------------------------------------------- config parsing

def test_config_unknown_key():
    with pytest.raises(ConfigError, match="modle"):
        ExperimentConfig.from_dict({"modle": "knn"})


def test_config_nested_unknown_key():
    with pytest.raises(ConfigError, match="cnn.epoch"):
        ExperimentConfig.from_dict({"cnn": {"epoch": 3}})


def test_config_bad_model():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": "tree"})


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict({"model": "cnn", "cnn": {"channels": [4, 4, 4]}, "split": {"kind": "subject"}})
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    back = load_config(tmp_path / "c.json")
    assert back.to_dict() == cfg.to_dict()
    assert back.cnn.channels == (4, 4, 4)


def test_with_seed_keys_all_streams():
    cfg = ExperimentConfig().with_seed(11)
    assert cfg.seed == cfg.split.seed == cfg.augment.seed == 11
