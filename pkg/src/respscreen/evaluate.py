"""Nested cross-validation orchestration, reports, and sweeps.

The outer loop is ten user-disjoint 80/20 splits; the inner loop is a
5-fold user-disjoint grid search. Standardizer, PCA, and classifiers see
training rows only. Augmentation (when enabled, tasks 2-3) expands the
training negatives six-fold; the test side is never augmented and is
always class-balanced.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import augment as aug
from . import features as feat
from .audio_io import TARGET_SAMPLE_RATE, decode_wav, resample, trim_silence
from .dataset import (
    SampleRecord,
    apply_task,
    balance,
    split_users,
    task_spec,
)
from .embeddings import EmbeddingFrames, combine, pool
from .errors import ConfigError, SilentSample, TooShort
from .metrics import precision_recall, roc_auc
from .model import GridSpec, PCA_CUTOFFS, fit_pipeline, grid_search
from .util import write_text_atomic

MODALITY_CHOICES = ("cough", "breath", "combined")
FEATURE_TYPES = ("handcrafted", "vggish", "combined-A", "combined-B", "combined-C")
EMBEDDING_FEATURE_TYPES = ("vggish", "combined-A", "combined-B", "combined-C")


@dataclass(frozen=True)
class RunConfig:
    task_id: int
    modality: str = "cough"
    feature_type: str = "handcrafted"
    pca_cutoff: float = 0.95
    augment: bool = False
    seed: int = 0
    classifier: str | None = None  # default: lr for task 1, svm-rbf otherwise

    def __post_init__(self):
        if self.task_id not in (1, 2, 3):
            raise ConfigError(f"unknown task {self.task_id}")
        if self.modality not in MODALITY_CHOICES:
            raise ConfigError(f"unknown modality {self.modality!r}")
        if self.feature_type not in FEATURE_TYPES:
            raise ConfigError(f"unknown feature type {self.feature_type!r}")
        if self.pca_cutoff not in PCA_CUTOFFS:
            raise ConfigError(f"pca_cutoff must be one of {PCA_CUTOFFS}")
        if self.augment and self.task_id == 1:
            raise ConfigError("augmentation is restricted to tasks 2 and 3")
        if self.classifier not in (None, "lr", "svm-rbf"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")

    @property
    def classifier_kind(self) -> str:
        if self.classifier:
            return self.classifier
        return "lr" if self.task_id == 1 else "svm-rbf"


@dataclass(frozen=True)
class FoldResult:
    auc: float
    precision: float
    recall: float
    hyperparameters: dict
    pca_k: int
    n_train: int
    n_test: int
    n_test_users: int


@dataclass(frozen=True)
class EvaluationReport:
    config: RunConfig
    folds: tuple[FoldResult, ...]
    aggregate: dict  # metric -> {"mean": ..., "std": ...}


def aggregate_folds(folds) -> dict:
    out = {}
    for metric in ("auc", "precision", "recall"):
        vals = np.array([getattr(f, metric) for f in folds])
        out[metric] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


class FeatureStore:
    """Caches per-recording features so folds and sweep cells share work."""

    def __init__(self, base_dir, embeddings: dict[str, EmbeddingFrames] | None = None):
        self.base_dir = Path(base_dir)
        self.embeddings = embeddings
        self._segments: dict[str, object] = {}
        self._handcrafted: dict[str, feat.HandcraftedVector] = {}
        self._aug_handcrafted: dict[tuple, feat.HandcraftedVector] = {}

    def segment(self, record: SampleRecord):
        key = record.sample_id
        if key not in self._segments:
            data = (self.base_dir / record.audio_path).read_bytes()
            seg = trim_silence(resample(decode_wav(data), TARGET_SAMPLE_RATE))
            self._segments[key] = seg
        return self._segments[key]

    def handcrafted(self, record: SampleRecord) -> feat.HandcraftedVector:
        key = record.sample_id
        if key not in self._handcrafted:
            self._handcrafted[key] = feat.extract_handcrafted(self.segment(record))
        return self._handcrafted[key]

    def pooled(self, record: SampleRecord):
        if self.embeddings is None:
            raise ConfigError("this feature type needs --embeddings")
        if record.sample_id not in self.embeddings:
            raise ConfigError(f"no embedding frames for sample {record.sample_id!r}")
        return pool(self.embeddings[record.sample_id])

    def vector(self, record: SampleRecord, feature_type: str) -> np.ndarray:
        if feature_type == "handcrafted":
            return self._handcrafted_values(self.handcrafted(record))
        if feature_type == "vggish":
            return self.pooled(record).values
        variant = feature_type.split("-")[1]
        return combine(self.handcrafted(record), self.pooled(record), variant).values

    def augmented_vectors(
        self, record: SampleRecord, feature_type: str, cfg: aug.AugmentConfig
    ) -> list[np.ndarray]:
        """Handcrafted vectors of the six augmented variants of a recording.

        Embedding halves cannot be recomputed without the external network,
        so augmentation supports the handcrafted feature type only.
        """
        if feature_type != "handcrafted":
            raise ConfigError("augmentation requires feature-type=handcrafted")
        out = []
        for variant in aug.augment_six(self.segment(record), record.sample_id, cfg):
            key = (record.sample_id, variant.method, variant.copy_index, cfg.rng_seed)
            if key not in self._aug_handcrafted:
                self._aug_handcrafted[key] = feat.extract_handcrafted(variant.segment)
            out.append(self._handcrafted_values(self._aug_handcrafted[key]))
        return out

    @staticmethod
    def _handcrafted_values(v: feat.HandcraftedVector) -> np.ndarray:
        return v.values


@dataclass(frozen=True)
class Unit:
    """One classification instance: a recording, or a cough+breath pair."""

    key: str
    user_id: str
    label: int
    records: tuple[SampleRecord, ...]


def build_units(positives, negatives, modality: str) -> list[Unit]:
    """Classification units for a modality choice; `combined` pairs the two
    modalities of the same user session and drops unpaired sessions."""
    units: list[Unit] = []
    for label, records in ((1, positives), (0, negatives)):
        if modality in ("cough", "breath"):
            for r in sorted(records, key=lambda r: r.sample_id):
                units.append(Unit(r.sample_id, r.user_id, label, (r,)))
        else:
            by_session: dict[tuple, dict[str, SampleRecord]] = {}
            for r in records:
                by_session.setdefault((r.user_id, r.collected_at), {})[r.modality] = r
            for (user_id, ts), mods in sorted(by_session.items()):
                if "cough" in mods and "breath" in mods:
                    units.append(
                        Unit(f"{user_id}@{ts}", user_id, label, (mods["cough"], mods["breath"]))
                    )
    return units


def unit_vector(unit: Unit, store: FeatureStore, feature_type: str) -> np.ndarray:
    return np.concatenate([store.vector(r, feature_type) for r in unit.records])


def run_nested_cv(
    records: list[SampleRecord],
    config: RunConfig,
    base_dir=".",
    embeddings: dict[str, EmbeddingFrames] | None = None,
    grid: GridSpec = GridSpec(),
    store: FeatureStore | None = None,
) -> EvaluationReport:
    if config.feature_type in EMBEDDING_FEATURE_TYPES and embeddings is None:
        raise ConfigError(
            f"feature-type {config.feature_type} requires an embeddings file (--embeddings)"
        )
    modalities = ("cough", "breath") if config.modality == "combined" else (config.modality,)
    spec = task_spec(config.task_id, modalities)
    positives, negatives = apply_task(records, spec)
    units = build_units(positives, negatives, config.modality)

    if store is None:
        store = FeatureStore(base_dir, embeddings)
    elif embeddings is not None and store.embeddings is None:
        store.embeddings = embeddings

    pos_units = [u for u in units if u.label == 1]
    neg_units = [u for u in units if u.label == 0]
    plan = split_users(pos_units, neg_units, config.seed)

    aug_cfg = aug.AugmentConfig(rng_seed=config.seed)
    folds = []
    for fold_idx, (train_users, test_users) in enumerate(plan.folds):
        assert not train_users & test_users
        train = [u for u in units if u.user_id in train_users]
        test = [u for u in units if u.user_id in test_users]
        for u in test:
            assert u.user_id not in train_users

        test_keep = balance(None, [u.label for u in test], seed=hash((config.seed, fold_idx)) % 2**32)
        test = [test[i] for i in test_keep]
        if not config.augment:
            train_keep = balance(None, [u.label for u in train], seed=hash((config.seed, fold_idx, 1)) % 2**32)
            train = [train[i] for i in train_keep]

        X_train = [unit_vector(u, store, config.feature_type) for u in train]
        y_train = [u.label for u in train]
        users_train = [u.user_id for u in train]
        if config.augment:
            # negatives only, training only; originals are retained
            for u in train:
                if u.label != 0:
                    continue
                per_record = [
                    store.augmented_vectors(r, config.feature_type, aug_cfg) for r in u.records
                ]
                for variant_idx in range(len(per_record[0])):
                    X_train.append(np.concatenate([vecs[variant_idx] for vecs in per_record]))
                    y_train.append(0)
                    users_train.append(u.user_id)

        X_train = np.asarray(X_train)
        y_train = np.asarray(y_train)
        X_test = np.asarray([unit_vector(u, store, config.feature_type) for u in test])
        y_test = np.asarray([u.label for u in test])

        kind = config.classifier_kind
        params = grid_search(X_train, y_train, users_train, kind, grid,
                             seed=config.seed + fold_idx, pca_cutoff=config.pca_cutoff)
        pipeline = fit_pipeline(X_train, y_train, kind, params, config.pca_cutoff)
        scores = pipeline.decision_scores(X_test)
        pr = precision_recall(scores, y_test, pipeline.classifier.threshold)
        folds.append(
            FoldResult(
                auc=roc_auc(scores, y_test),
                precision=pr.precision,
                recall=pr.recall,
                hyperparameters=params,
                pca_k=pipeline.pca.k,
                n_train=len(y_train),
                n_test=len(y_test),
                n_test_users=len({u.user_id for u in test}),
            )
        )
    return EvaluationReport(config, tuple(folds), aggregate_folds(folds))


# --- report and sweep serialization ----------------------------------------


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "config": asdict(report.config),
        "folds": [asdict(f) for f in report.folds],
        "aggregate": report.aggregate,
    }


def save_report(report: EvaluationReport, path) -> None:
    write_text_atomic(path, json.dumps(report_to_dict(report), indent=2))


SWEEP_COLUMNS = (
    "task",
    "modality",
    "feature_type",
    "pca_cutoff",
    "auc_mean",
    "auc_std",
    "precision_mean",
    "precision_std",
    "recall_mean",
    "recall_std",
    "status",
)


@dataclass(frozen=True)
class SweepRow:
    task: int
    modality: str
    feature_type: str
    pca_cutoff: float
    auc_mean: float | None = None
    auc_std: float | None = None
    precision_mean: float | None = None
    precision_std: float | None = None
    recall_mean: float | None = None
    recall_std: float | None = None
    status: str = "ok"


def sweep(
    records: list[SampleRecord],
    task_id: int,
    seed: int,
    base_dir=".",
    embeddings: dict[str, EmbeddingFrames] | None = None,
    grid: GridSpec = GridSpec(),
    feature_types=FEATURE_TYPES,
    modalities=MODALITY_CHOICES,
    cutoffs=PCA_CUTOFFS,
) -> list[SweepRow]:
    """Cross product over modalities x cutoffs x feature types.

    Cells needing embeddings are marked `skipped` when none are loaded;
    per-cell failures are recorded as `error:<type>` and the sweep continues.
    """
    store = FeatureStore(base_dir, embeddings)
    rows = []
    for modality in modalities:
        for cutoff in cutoffs:
            for feature_type in feature_types:
                base = dict(task=task_id, modality=modality, feature_type=feature_type,
                            pca_cutoff=cutoff)
                if feature_type in EMBEDDING_FEATURE_TYPES and embeddings is None:
                    rows.append(SweepRow(**base, status="skipped"))
                    continue
                config = RunConfig(
                    task_id=task_id, modality=modality, feature_type=feature_type,
                    pca_cutoff=cutoff, seed=seed,
                )
                try:
                    report = run_nested_cv(
                        records, config, base_dir=base_dir, embeddings=embeddings,
                        grid=grid, store=store,
                    )
                except Exception as exc:  # record and continue
                    rows.append(SweepRow(**base, status=f"error:{type(exc).__name__}"))
                    continue
                agg = report.aggregate
                rows.append(
                    SweepRow(
                        **base,
                        auc_mean=agg["auc"]["mean"],
                        auc_std=agg["auc"]["std"],
                        precision_mean=agg["precision"]["mean"],
                        precision_std=agg["precision"]["std"],
                        recall_mean=agg["recall"]["mean"],
                        recall_std=agg["recall"]["std"],
                    )
                )
    return rows


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.task,
                r.modality,
                r.feature_type,
                repr(r.pca_cutoff),
                *["" if v is None else repr(v) for v in (
                    r.auc_mean, r.auc_std, r.precision_mean, r.precision_std,
                    r.recall_mean, r.recall_std,
                )],
                r.status,
            ]
        )
    return buf.getvalue()


def sweep_rows_from_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != SWEEP_COLUMNS:
        raise ValueError(f"unexpected sweep header {header}")
    rows = []
    for row in reader:
        metrics = [None if v == "" else float(v) for v in row[4:10]]
        rows.append(
            SweepRow(
                task=int(row[0]),
                modality=row[1],
                feature_type=row[2],
                pca_cutoff=float(row[3]),
                auc_mean=metrics[0],
                auc_std=metrics[1],
                precision_mean=metrics[2],
                precision_std=metrics[3],
                recall_mean=metrics[4],
                recall_std=metrics[5],
                status=row[10],
            )
        )
    return rows


def save_sweep(rows: list[SweepRow], path) -> None:
    write_text_atomic(path, sweep_rows_to_csv(rows))
