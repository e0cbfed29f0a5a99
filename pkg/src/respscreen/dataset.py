"""Manifest ingestion, cohort filtering, downsampling, user-disjoint splits.

Manifest CSV schema (header mandatory, UTF-8):
  sample_id, user_id, modality, audio_path, covid_tested_positive,
  symptoms, medical_history, smoker, country, collected_at, [split]
symptoms and medical_history are semicolon-joined token sets; smoker is
one of never/ex/current/unknown; covid_tested_positive is true/false.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateSample, EmptyCohort, SchemaError, TooFewUsers

MODALITIES = ("cough", "breath")
SMOKER_VALUES = ("never", "ex", "current", "unknown")

# Countries where the disease was not prevalent during collection; the
# negative-class filter for all tasks requires membership here.
DEFAULT_COUNTRY_ALLOWLIST = frozenset(
    {"AL", "BG", "CY", "GR", "JO", "LB", "LK", "TN", "VN"}
)

MANIFEST_COLUMNS = (
    "sample_id",
    "user_id",
    "modality",
    "audio_path",
    "covid_tested_positive",
    "symptoms",
    "medical_history",
    "smoker",
    "country",
    "collected_at",
)

N_OUTER_FOLDS = 10
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    user_id: str
    modality: str
    audio_path: str
    covid_tested_positive: bool
    symptoms: frozenset[str]
    medical_history: frozenset[str]
    smoker: str
    country: str | None
    collected_at: str
    split: str | None = None


@dataclass(frozen=True)
class TaskSpec:
    """A binary cohort definition. Filters are disjoint by construction:
    positives always require a declared positive test, negatives its absence."""

    task_id: int
    modalities: tuple[str, ...]
    country_allowlist: frozenset[str] = DEFAULT_COUNTRY_ALLOWLIST

    def positive_filter(self, r: SampleRecord) -> bool:
        if not r.covid_tested_positive:
            return False
        if self.task_id == 1:
            return True
        return "cough" in r.symptoms  # tasks 2 and 3

    def negative_filter(self, r: SampleRecord) -> bool:
        if r.covid_tested_positive:
            return False
        if r.country not in self.country_allowlist:
            return False
        if self.task_id == 1:
            return not r.symptoms and not r.medical_history and r.smoker == "never"
        if self.task_id == 2:
            return (
                "cough" in r.symptoms
                and not (r.symptoms - {"cough"})
                and not r.medical_history
                and r.smoker == "never"
            )
        return "cough" in r.symptoms and "asthma" in r.medical_history


def task_spec(task_id: int, modalities: tuple[str, ...] = MODALITIES) -> TaskSpec:
    if task_id not in (1, 2, 3):
        raise ValueError(f"unknown task {task_id}")
    return TaskSpec(task_id, modalities)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    folds: tuple[tuple[frozenset[str], frozenset[str]], ...]  # (train_users, test_users)


def _parse_bool(value: str, line_no: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise SchemaError(f"row {line_no}: bad boolean {value!r}")


def _parse_tokens(value: str) -> frozenset[str]:
    return frozenset(t.strip() for t in value.split(";") if t.strip())


def parse_manifest_rows(rows, columns) -> list[SampleRecord]:
    """Validate dict-style rows (used by both CSV loading and tests)."""
    has_split = "split" in columns
    missing = [c for c in MANIFEST_COLUMNS if c not in columns]
    if missing:
        raise SchemaError(f"missing columns: {missing}")

    records: list[SampleRecord] = []
    seen: set[tuple[str, str]] = set()
    for line_no, row in enumerate(rows, start=2):
        modality = row["modality"].strip()
        if modality not in MODALITIES:
            raise SchemaError(f"row {line_no}: unknown modality {modality!r}")
        smoker = row["smoker"].strip() or "unknown"
        if smoker not in SMOKER_VALUES:
            raise SchemaError(f"row {line_no}: unknown smoker value {smoker!r}")
        user_id = row["user_id"].strip()
        if not user_id:
            raise SchemaError(f"row {line_no}: empty user_id")
        key = (row["sample_id"].strip(), modality)
        if key in seen:
            raise DuplicateSample(f"row {line_no}: duplicate {key}")
        seen.add(key)
        records.append(
            SampleRecord(
                sample_id=key[0],
                user_id=user_id,
                modality=modality,
                audio_path=row["audio_path"].strip(),
                covid_tested_positive=_parse_bool(row["covid_tested_positive"], line_no),
                symptoms=_parse_tokens(row["symptoms"]),
                medical_history=_parse_tokens(row["medical_history"]),
                smoker=smoker,
                country=row["country"].strip() or None,
                collected_at=row["collected_at"].strip(),
                split=(row.get("split") or "").strip() or None if has_split else None,
            )
        )
    return records


def load_manifest(path) -> list[SampleRecord]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty manifest")
        return parse_manifest_rows(reader, reader.fieldnames)


def apply_task(records, spec: TaskSpec) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Partition records into (positives, negatives); non-matching rows drop out."""
    in_modality = [r for r in records if r.modality in spec.modalities]
    positives = [r for r in in_modality if spec.positive_filter(r)]
    negatives = [r for r in in_modality if spec.negative_filter(r)]
    if not {r.user_id for r in positives}:
        raise EmptyCohort(f"task {spec.task_id}: no positive users")
    if not {r.user_id for r in negatives}:
        raise EmptyCohort(f"task {spec.task_id}: no negative users")
    return positives, negatives


def split_users(
    positives, negatives, seed: int, n_folds: int = N_OUTER_FOLDS
) -> SplitPlan:
    """Ten independent seeded 80/20 user partitions, stratified per class."""
    pos_users = sorted({r.user_id for r in positives})
    neg_users = sorted({r.user_id for r in negatives})
    if len(pos_users) < 2 or len(neg_users) < 2:
        raise TooFewUsers("need at least 2 users per class")

    folds = []
    for fold in range(n_folds):
        rng = np.random.default_rng(np.random.SeedSequence([seed, fold]))
        test: set[str] = set()
        train: set[str] = set()
        for users in (pos_users, neg_users):
            perm = list(rng.permutation(users))
            n_test = max(1, round(TEST_FRACTION * len(users)))
            n_test = min(n_test, len(users) - 1)  # keep at least one train user
            test.update(perm[:n_test])
            train.update(perm[n_test:])
        assert not train & test
        folds.append((frozenset(train), frozenset(test)))
    return SplitPlan(seed, tuple(folds))


def balance(samples, labels, seed: int) -> list[int]:
    """Indices of a class-balanced subset (majority downsampled, seeded,
    without replacement). Returns sorted indices into `samples`."""
    labels = np.asarray(labels)
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    n = min(len(pos_idx), len(neg_idx))
    rng = np.random.default_rng(seed)
    keep = []
    for idx in (pos_idx, neg_idx):
        if len(idx) > n:
            keep.extend(rng.choice(idx, size=n, replace=False))
        else:
            keep.extend(idx)
    return sorted(int(i) for i in keep)


def balance_split(
    train_labels, test_labels, seed: int, balance_train: bool = True
) -> tuple[list[int], list[int]]:
    """Balanced index subsets for a fold: the test side is always balanced
    exactly; the train side is balanced unless augmentation defers it."""
    test_keep = balance(None, test_labels, seed)
    if balance_train:
        train_keep = balance(None, train_labels, seed + 1)
    else:
        train_keep = list(range(len(np.asarray(train_labels))))
    return train_keep, test_keep
