"""Split strategies, the end-to-end experiment pipeline, ablation grid and reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence as Seq

import numpy as np

from .augment import AugmentConfig, augment_dataset, base_id
from .autoencoder import AeConfig, denoise_dataset, fit_channel_autoencoders
from .classifiers import (
    MODELS,
    Classifier,
    CnnClassifier,
    CnnConfig,
    KnnClassifier,
    RnnClassifier,
    RnnConfig,
    Standardizer,
    SvmClassifier,
    SvmConfig,
)
from .preprocess import DEFAULT_N, ResampledSequence, preprocess_dataset, stack
from .sensor_data import LETTERS, N_CLASSES, Dataset

log = logging.getLogger(__name__)

PAPER_CNN_FC = (3200, 1600, 500)
PAPER_CNN_CHANNELS = (32, 64, 64)
DEFAULT_RNN_HIDDEN = 128
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_COPIES = 4
PAPER_RNN_EPOCHS = 250


class ConfigError(ValueError):
    pass


class LeakageError(AssertionError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


# ---------------------------------------------------------------- configuration

@dataclass
class SplitSpec:
    kind: str = "random"
    ratios: tuple[int, int, int] = (80, 10, 10)
    n_dev_subjects: int = 2
    n_test_subjects: int = 2
    seed: int = 0

    def __post_init__(self):
        self.ratios = tuple(int(r) for r in self.ratios)
        if self.kind not in ("random", "subject"):
            raise ConfigError(f"split.kind must be 'random' or 'subject', got {self.kind!r}")
        if len(self.ratios) != 3 or sum(self.ratios) != 100 or min(self.ratios) < 0:
            raise ConfigError(f"split.ratios must be three non-negative integers summing to 100, got {self.ratios}")
        if self.n_dev_subjects < 1 or self.n_test_subjects < 1:
            raise ConfigError("split subject counts must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ratios"] = list(self.ratios)
        return d


@dataclass
class KnnConfig:
    k: int = 4

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AblationSpec:
    """Which grid ``ablate`` runs: seeds are ``seed, seed + 1, ...`` of the base config."""

    n_seeds: int = 3
    models: tuple[str, ...] = MODELS
    splits: tuple[str, ...] = ("random", "subject")

    def __post_init__(self):
        self.models = tuple(self.models)
        self.splits = tuple(self.splits)
        if self.n_seeds < 1:
            raise ConfigError("ablation.n_seeds must be >= 1")
        bad = [m for m in self.models if m not in MODELS] + [s for s in self.splits if s not in ("random", "subject")]
        if bad or not self.models or not self.splits:
            raise ConfigError(f"ablation.models/splits invalid: {bad or 'empty'}")

    def to_dict(self) -> dict:
        return {"n_seeds": self.n_seeds, "models": list(self.models), "splits": list(self.splits)}


@dataclass
class ExperimentConfig:
    model: str = "knn"
    split: SplitSpec = field(default_factory=SplitSpec)
    aug: bool = False
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    autoencoder: bool = False
    ae: AeConfig = field(default_factory=AeConfig)
    n_features: int = DEFAULT_N
    calibrate: bool = True
    zero_origin: bool = True
    knn: KnnConfig = field(default_factory=KnnConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    rnn: RnnConfig = field(default_factory=RnnConfig)
    ablation: AblationSpec = field(default_factory=AblationSpec)
    seed: int = 0
    record_runtime: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.n_features < 2:
            raise ConfigError("n_features must be >= 2")
        if self.model == "cnn" and self.n_features < 1:
            raise ConfigError("cnn needs n_features >= 1")

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.to_dict() if hasattr(v, "to_dict") else v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with every random stream (split, augmentation, model) keyed to ``seed``."""
        cfg = ExperimentConfig.from_dict(self.to_dict())
        cfg.seed = seed
        cfg.split.seed = seed
        cfg.augment.seed = seed
        return cfg

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)


def desk_config(seed: int = 0) -> ExperimentConfig:
    """Reduced budgets for running the full ablation grid on one workstation.

    Narrower CNN, a 16-unit five-layer LSTM for 60 epochs at a higher learning
    rate, and one augmented copy per sequence. Each reduction is listed in the
    report notes of the affected cells.
    """
    return ExperimentConfig.from_dict(
        {
            "seed": seed,
            "augment": {"copies_per_sequence": 1},
            "cnn": {"channels": [8, 16, 16], "fc_widths": [128, 64, 32]},
            "rnn": {"hidden": 16, "epochs": 60, "learning_rate": 5e-3},
        }
    ).with_seed(seed)


_NESTED = {
    "split": SplitSpec,
    "augment": AugmentConfig,
    "ae": AeConfig,
    "knn": KnnConfig,
    "svm": SvmConfig,
    "cnn": CnnConfig,
    "rnn": RnnConfig,
    "ablation": AblationSpec,
}


def _coerce(value: Any, default: Any, key: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"config key {key!r} must be a list, got {value!r}")
        return tuple(_coerce(v, default[0] if default else 0, key) for v in value)
    return value


def _build(cls, d: Any, prefix: str):
    if not isinstance(d, dict):
        raise ConfigError(f"config section {prefix or '<root>'!r} must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in d.items():
        path = f"{prefix}{key}"
        if key not in names:
            raise ConfigError(f"unknown config key {path!r}")
        if cls is ExperimentConfig and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, path + ".")
        else:
            kwargs[key] = _coerce(value, getattr(defaults, key), path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config section {prefix.rstrip('.') or '<root>'!r}: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------- splits

Split = tuple[list[ResampledSequence], list[ResampledSequence], list[ResampledSequence]]


def random_split(rows: Seq[ResampledSequence], ratios=(80, 10, 10), seed: int = 0) -> Split:
    n = len(rows)
    if n < 10:
        raise ValueError(f"random split needs at least 10 rows, got {n}")
    if sum(ratios) != 100:
        raise ValueError("ratios must sum to 100")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * ratios[0] / 100))
    n_dev = int(round(n * ratios[1] / 100))
    parts = np.split(order, [n_train, n_train + n_dev])
    return tuple([rows[i] for i in sorted(p)] for p in parts)  # type: ignore[return-value]


def subject_split(rows: Seq[ResampledSequence], n_dev: int = 2, n_test: int = 2, seed: int = 0) -> Split:
    subjects = sorted({r.subject_id for r in rows})
    if len(subjects) < n_dev + n_test + 1:
        raise ValueError(
            f"subject split needs at least {n_dev + n_test + 1} subjects, got {len(subjects)}"
        )
    perm = np.random.default_rng(seed).permutation(len(subjects))
    dev_s = {subjects[i] for i in perm[:n_dev]}
    test_s = {subjects[i] for i in perm[n_dev : n_dev + n_test]}
    train = [r for r in rows if r.subject_id not in dev_s and r.subject_id not in test_s]
    dev = [r for r in rows if r.subject_id in dev_s]
    test = [r for r in rows if r.subject_id in test_s]
    return train, dev, test


def split_rows(rows: Seq[ResampledSequence], spec: SplitSpec) -> Split:
    if spec.kind == "random":
        return random_split(rows, spec.ratios, spec.seed)
    return subject_split(rows, spec.n_dev_subjects, spec.n_test_subjects, spec.seed)


# ---------------------------------------------------------------- evaluation

def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def evaluate(model: Classifier, rows: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """(accuracy, 26x26 confusion with rows = true label)."""
    if len(rows) == 0:
        raise ValueError("cannot evaluate on an empty set")
    cm = confusion_matrix(labels, model.predict(rows))
    return float(np.trace(cm) / cm.sum()), cm


def make_classifier(cfg: ExperimentConfig) -> Classifier:
    if cfg.model == "knn":
        return KnnClassifier(cfg.knn.k)
    if cfg.model == "svm":
        return SvmClassifier(cfg.svm)
    if cfg.model == "cnn":
        return CnnClassifier(cfg.cnn)
    return RnnClassifier(cfg.rnn)


# ---------------------------------------------------------------- experiment

@dataclass
class ExperimentReport:
    config: dict
    accuracies: dict
    confusion: list
    curves: list
    runtime_s: float | None = None
    counts: dict = field(default_factory=dict)
    leakage: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**{f.name: d[f.name] for f in dataclasses.fields(cls) if f.name in d})


def config_notes(cfg: ExperimentConfig) -> list[str]:
    notes = []
    if cfg.model == "rnn" and cfg.rnn.epochs < PAPER_RNN_EPOCHS:
        notes.append(f"rnn epochs reduced from {PAPER_RNN_EPOCHS} to {cfg.rnn.epochs}")
    if cfg.model == "rnn" and cfg.rnn.hidden != DEFAULT_RNN_HIDDEN:
        notes.append(f"rnn hidden size {cfg.rnn.hidden} instead of {DEFAULT_RNN_HIDDEN}")
    if cfg.model == "cnn" and tuple(cfg.cnn.channels) != PAPER_CNN_CHANNELS:
        notes.append(f"cnn channels {list(cfg.cnn.channels)} instead of {list(PAPER_CNN_CHANNELS)}")
    if cfg.model == "cnn" and tuple(cfg.cnn.fc_widths) != PAPER_CNN_FC:
        notes.append(f"cnn fc widths {list(cfg.cnn.fc_widths)} instead of {list(PAPER_CNN_FC)}")
    if cfg.model in ("cnn", "rnn"):
        lr = getattr(cfg, cfg.model).learning_rate
        if lr != DEFAULT_LEARNING_RATE:
            notes.append(f"{cfg.model} learning rate {lr:g} instead of {DEFAULT_LEARNING_RATE:g}")
    if cfg.aug and cfg.augment.copies_per_sequence != DEFAULT_COPIES:
        notes.append(f"{cfg.augment.copies_per_sequence} augmented copies per sequence instead of {DEFAULT_COPIES}")
    if cfg.model == "svm":
        notes.append(
            f"svm hyperparameters are defaults, not the published ones "
            f"(degree={cfg.svm.degree}, coef0={cfg.svm.coef0}, lambda={cfg.svm.lam})"
        )
    if cfg.model == "knn":
        notes.append("knn train accuracy is leave-self-in")
    if cfg.autoencoder:
        notes.append(
            "autoencoders fit on the training partition"
            + (" after augmentation" if cfg.aug else "")
        )
    return notes


def _ids(rows: Seq[ResampledSequence]) -> set[str]:
    return {base_id(r.sequence_id) for r in rows}


def check_leakage(
    train: Seq[ResampledSequence],
    dev: Seq[ResampledSequence],
    test: Seq[ResampledSequence],
    consumed: dict[str, Seq[ResampledSequence]],
    scaler: Standardizer | None,
) -> dict:
    """Assert every fitted stage saw only train-partition rows.

    ``consumed`` maps stage name to the rows that stage was fit on. The
    classifier's standardizer is additionally refit from those rows and must
    reproduce the stored statistics exactly.
    """
    train_ids = _ids(train)
    held_out = _ids(dev) | _ids(test)
    if train_ids & held_out:
        raise LeakageError("train partition shares rows with dev/test")
    result = {"augmented_partitions": ["train"] if "augmentation" in consumed else []}
    for stage, rows in consumed.items():
        ids = _ids(rows)
        if not ids <= train_ids:
            raise LeakageError(f"{stage} consumed {len(ids - train_ids)} rows outside the train partition")
        result[stage] = "train-only"
    if scaler is not None and "classifier" in consumed:
        x, _ = stack(list(consumed["classifier"]))
        ref = Standardizer.fit(x)
        if not (np.array_equal(ref.mean, scaler.mean) and np.array_equal(ref.std, scaler.std)):
            raise LeakageError("standardization statistics are not reproducible from the train partition")
        result["standardization"] = "train-only"
    result["passed"] = True
    return result


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (LeakageError, StageError):
        raise
    except Exception as exc:  # noqa: BLE001 - relabel with the pipeline stage
        raise StageError(name, exc) from exc


def prepare_rows(cfg: ExperimentConfig, data: Dataset | Seq[ResampledSequence]) -> list[ResampledSequence]:
    if isinstance(data, Dataset):
        return preprocess_dataset(data, cfg.n_features, cfg.calibrate, cfg.zero_origin)
    rows = list(data)
    if rows and rows[0].n_features != cfg.n_features:
        raise ValueError(f"rows have N={rows[0].n_features}, config asks for {cfg.n_features}")
    return rows


def run_experiment(cfg: ExperimentConfig, data: Dataset | Seq[ResampledSequence]) -> ExperimentReport:
    """preprocess -> split -> augment(train) -> autoencoders(fit on train) -> classifier -> evaluate."""
    t0 = time.perf_counter()
    rows = _stage("preprocess", prepare_rows, cfg, data)
    train, dev, test = _stage("split", split_rows, rows, cfg.split)
    consumed: dict[str, list[ResampledSequence]] = {}
    if cfg.aug:
        consumed["augmentation"] = train
        train = _stage("augment", augment_dataset, train, cfg.augment)
    if cfg.autoencoder:
        consumed["autoencoder"] = train
        aes = _stage("autoencoder", fit_channel_autoencoders, train, cfg.ae, cfg.seed)
        train, dev, test = (
            _stage("denoise", denoise_dataset, part, *aes.models()) for part in (train, dev, test)
        )
    consumed["classifier"] = train
    xtr, ytr = stack(train)
    xdv, ydv = stack(dev)
    xte, yte = stack(test)
    clf = make_classifier(cfg)
    _stage("train", clf.fit, xtr, ytr, cfg.seed, (xdv, ydv) if len(dev) else None)
    leakage = _stage("leakage", check_leakage, train, dev, test, consumed, clf.scaler)
    acc_train, _ = _stage("evaluate", evaluate, clf, xtr, ytr)
    acc_dev = _stage("evaluate", evaluate, clf, xdv, ydv)[0] if len(dev) else None
    acc_test, cm = _stage("evaluate", evaluate, clf, xte, yte)
    curves = [{"epoch": c["epoch"], "train_acc": c["train_acc"], "dev_acc": c["dev_acc"]} for c in clf.curves]
    runtime = time.perf_counter() - t0
    log.info("%s %s aug=%s ae=%s seed=%d: test %.3f (%.1fs)",
             cfg.model, cfg.split.kind, cfg.aug, cfg.autoencoder, cfg.seed, acc_test, runtime)
    return ExperimentReport(
        config=cfg.to_dict(),
        accuracies={"train": acc_train, "dev": acc_dev, "test": acc_test},
        confusion=cm.tolist(),
        curves=curves,
        runtime_s=round(runtime, 3) if cfg.record_runtime else None,
        counts={"train": len(train), "dev": len(dev), "test": len(test)},
        leakage=leakage,
        notes=config_notes(cfg),
    )


# ---------------------------------------------------------------- ablation

@dataclass(frozen=True)
class Cell:
    model: str
    split: str
    aug: bool
    ae: bool
    seed: int

    @property
    def name(self) -> str:
        return f"{self.model}_{self.split}_aug-{'on' if self.aug else 'off'}_ae-{'on' if self.ae else 'off'}_seed{self.seed}"


def ablation_cells(models: Seq[str], seeds: Seq[int], splits: Seq[str] = ("random", "subject")) -> list[Cell]:
    """Baselines run once per split; CNN/RNN cross augmentation x autoencoder."""
    cells = []
    for seed in seeds:
        for model in models:
            toggles = [(a, e) for a in (False, True) for e in (False, True)] if model in ("cnn", "rnn") else [(False, False)]
            for split in splits:
                for aug, ae in toggles:
                    cells.append(Cell(model, split, aug, ae, seed))
    return cells


def cell_config(base: ExperimentConfig, cell: Cell) -> ExperimentConfig:
    cfg = base.with_seed(cell.seed)
    cfg.model = cell.model
    cfg.split.kind = cell.split
    cfg.aug = cell.aug
    cfg.autoencoder = cell.ae
    return cfg


def _run_cell(args) -> tuple[Cell, ExperimentReport | None, str | None]:
    base, cell, rows = args
    try:
        return cell, run_experiment(cell_config(base, cell), rows), None
    except Exception as exc:  # noqa: BLE001 - failures are recorded per cell
        log.error("cell %s failed: %s", cell.name, exc)
        return cell, None, f"{type(exc).__name__}: {exc}"


@dataclass
class AblationResult:
    cells: list[tuple[Cell, ExperimentReport | None, str | None]]

    @property
    def n_ok(self) -> int:
        return sum(1 for _, r, _ in self.cells if r is not None)

    def rows(self) -> list[dict]:
        """Seed-averaged accuracies, one row per (model, split, aug, ae)."""
        groups: dict[tuple, list[ExperimentReport]] = {}
        order = []
        for cell, rep, _ in self.cells:
            key = (cell.model, cell.split, cell.aug, cell.ae)
            if key not in groups:
                groups[key] = []
                order.append(key)
            if rep is not None:
                groups[key].append(rep)
        out = []
        for key in order:
            reps = groups[key]
            model, split, aug, ae = key
            row = {"model": model, "split": split, "aug": "on" if aug else "off", "ae": "on" if ae else "off"}
            if reps:
                row["train_acc"] = float(np.mean([r.accuracies["train"] for r in reps]))
                row["test_acc"] = float(np.mean([r.accuracies["test"] for r in reps]))
            else:
                row["train_acc"] = row["test_acc"] = None
            row["n_seeds"] = len(reps)
            out.append(row)
        return out

    def mean_test(self, model: str, split: str, aug: bool, ae: bool) -> float:
        for row in self.rows():
            if (row["model"], row["split"], row["aug"], row["ae"]) == (model, split, "on" if aug else "off", "on" if ae else "off"):
                return row["test_acc"]
        raise KeyError((model, split, aug, ae))


def run_ablation(
    data: Dataset | Seq[ResampledSequence],
    base: ExperimentConfig,
    seeds: Seq[int] | None = None,
    models: Seq[str] | None = None,
    splits: Seq[str] | None = None,
    jobs: int = 1,
) -> AblationResult:
    """Run every grid cell; unspecified axes come from ``base.ablation``."""
    if seeds is None:
        seeds = [base.seed + k for k in range(base.ablation.n_seeds)]
    models = base.ablation.models if models is None else models
    splits = base.ablation.splits if splits is None else splits
    if not seeds:
        raise ValueError("run_ablation needs at least one seed")
    rows = prepare_rows(base, data)
    cells = ablation_cells(models, seeds, splits)
    args = [(base, c, rows) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, args))
    else:
        results = [_run_cell(a) for a in args]
    return AblationResult(results)


def _variant_name(model: str, aug: str, ae: str) -> str:
    tags = [t for t, on in (("aug", aug == "on"), ("AE", ae == "on")) if on]
    return model.upper() + (f"({'+'.join(tags)})" if tags else "")


def table8_rows(result: AblationResult) -> list[dict]:
    """Wide layout: one row per model variant, train/test columns per split."""
    wide: dict[str, dict] = {}
    for row in result.rows():
        name = _variant_name(row["model"], row["aug"], row["ae"])
        rec = wide.setdefault(name, {"model": name})
        rec[f"{row['split']}_train"] = row["train_acc"]
        rec[f"{row['split']}_test"] = row["test_acc"]
    return list(wide.values())


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def curves_svg(curves: list[dict], title: str = "accuracy") -> str:
    """Minimal line plot of train/dev accuracy against epoch."""
    W, H, L, R, T, B = 480, 300, 50, 110, 30, 40
    pw, ph = W - L - R, H - T - B
    n = max(c["epoch"] for c in curves)

    def pt(epoch, acc):
        x = L + (pw * (epoch - 1) / max(n - 1, 1))
        y = T + ph * (1.0 - acc)
        return f"{x:.1f},{y:.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>',
        f'<line x1="{L}" y1="{T + ph}" x2="{L + pw}" y2="{T + ph}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{T + ph}" stroke="black"/>',
        f'<text x="{L + pw / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="11" font-family="sans-serif">epoch</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = T + ph * (1 - frac)
        parts.append(f'<text x="{L - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10" font-family="sans-serif">{frac:.1f}</text>')
    parts.append(f'<text x="{L}" y="{T + ph + 14}" text-anchor="middle" font-size="10" font-family="sans-serif">1</text>')
    parts.append(f'<text x="{L + pw}" y="{T + ph + 14}" text-anchor="middle" font-size="10" font-family="sans-serif">{n}</text>')
    series = [("train_acc", "train", "#1f77b4"), ("dev_acc", "validation", "#d62728")]
    for k, (key, label, color) in enumerate(series):
        pts = [pt(c["epoch"], c[key]) for c in curves if c.get(key) is not None]
        if not pts:
            continue
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = T + 12 + 16 * k
        parts.append(f'<line x1="{L + pw + 10}" y1="{ly}" x2="{L + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{L + pw + 34}" y="{ly + 4}" font-size="11" font-family="sans-serif">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """report.json, confusion.csv, curves.csv and (when curves exist) curves.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "report.json"
    p.write_text(report.to_json())
    written.append(p)
    p = out / "confusion.csv"
    _write_csv(p, ["true\\pred"] + list(LETTERS), [[LETTERS[i]] + row for i, row in enumerate(report.confusion)])
    written.append(p)
    p = out / "curves.csv"
    _write_csv(p, ["epoch", "train_acc", "dev_acc"], [[c["epoch"], c["train_acc"], c["dev_acc"]] for c in report.curves])
    written.append(p)
    if report.curves:
        p = out / "curves.svg"
        cfg = report.config
        p.write_text(curves_svg(report.curves, f"{cfg['model'].upper()} {cfg['split']['kind']} split"))
        written.append(p)
    return written


TABLE_COLUMNS = ["model", "split", "aug", "ae", "train_acc", "test_acc"]


def emit_table(result: AblationResult, out_dir: str | Path, cell_reports: bool = True) -> list[Path]:
    """table.csv (long form), table8.csv (wide), cells.csv and per-cell report directories."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "table.csv"
    _write_csv(p, TABLE_COLUMNS, [[r[c] for c in TABLE_COLUMNS] for r in result.rows()])
    written.append(p)
    p = out / "table8.csv"
    cols = ["model", "random_train", "random_test", "subject_train", "subject_test"]
    _write_csv(p, cols, [[r.get(c) for c in cols] for r in table8_rows(result)])
    written.append(p)
    p = out / "cells.csv"
    _write_csv(
        p,
        ["cell", "model", "split", "aug", "ae", "seed", "train_acc", "dev_acc", "test_acc", "error"],
        [
            [c.name, c.model, c.split, c.aug, c.ae, c.seed]
            + ([rep.accuracies["train"], rep.accuracies["dev"], rep.accuracies["test"]] if rep else [None] * 3)
            + [err]
            for c, rep, err in result.cells
        ],
    )
    written.append(p)
    if cell_reports:
        for cell, rep, _ in result.cells:
            if rep is not None:
                written += emit_report(rep, out / "cells" / cell.name)
    return written
