"""Synthetic patient cohorts and the CSV dataset format.

A cohort has one disease class per patient. Each patient shifts its class
center by a private offset, so the same class looks different from patient to
patient; per-sample noise is added on top. Patient sizes follow a truncated
discrete power law, and a fraction of patients per class is held out for test.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpecError, ParseError
from .pool import Dataset


@dataclass(frozen=True)
class CohortSpec:
    num_classes: int = 3
    num_patients: int = 60
    feature_dim: int = 8
    class_separation: float = 2.0
    patient_offset_scale: float = 1.0
    noise_scale: float = 0.25
    size_alpha: float = 1.5
    min_samples_per_patient: int = 1
    max_samples_per_patient: int = 40
    test_patient_fraction: float = 0.25
    # relative patient share per class; None means equal shares
    class_weights: tuple[float, ...] | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 2:
            raise InvalidSpecError("num_classes must be >= 2")
        if self.feature_dim < 1:
            raise InvalidSpecError("feature_dim must be >= 1")
        if self.num_patients < self.num_classes:
            raise InvalidSpecError(
                f"num_patients ({self.num_patients}) must be >= num_classes ({self.num_classes})"
            )
        if self.num_patients < 2 * self.num_classes:
            raise InvalidSpecError("need at least two patients per class to split train and test")
        if not 1 <= self.min_samples_per_patient <= self.max_samples_per_patient:
            raise InvalidSpecError("require 1 <= min_samples_per_patient <= max_samples_per_patient")
        if self.patient_offset_scale < 0 or self.noise_scale < 0:
            raise InvalidSpecError("offset and noise scales must be non-negative")
        if not self.size_alpha > 0:
            raise InvalidSpecError("size_alpha must be positive")
        if not 0 < self.test_patient_fraction < 1:
            raise InvalidSpecError("test_patient_fraction must lie in (0, 1)")
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=np.float64)
            if w.shape != (self.num_classes,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise InvalidSpecError("class_weights needs one positive weight per class")


@dataclass(frozen=True)
class Cohort:
    train: Dataset
    test: Dataset
    patient_classes: dict[int, int]
    patient_offsets: dict[int, np.ndarray]


def class_centers(spec: CohortSpec, rng: np.random.Generator) -> np.ndarray:
    c, d = spec.num_classes, spec.feature_dim
    if c <= d:
        return spec.class_separation * np.eye(c, d)
    dirs = rng.normal(size=(c, d))
    return spec.class_separation * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def patients_per_class(spec: CohortSpec) -> np.ndarray:
    """Largest-remainder allocation of patients to classes, at least two each."""
    c, n = spec.num_classes, spec.num_patients
    w = np.ones(c) if spec.class_weights is None else np.asarray(spec.class_weights, dtype=np.float64)
    spare = n - 2 * c
    quota = spare * w / w.sum()
    counts = np.floor(quota).astype(np.int64)
    leftover = spare - counts.sum()
    counts[np.argsort(-(quota - counts), kind="stable")[:leftover]] += 1
    return counts + 2


def power_law_sizes(spec: CohortSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    support = np.arange(spec.min_samples_per_patient, spec.max_samples_per_patient + 1)
    p = support.astype(np.float64) ** -spec.size_alpha
    return rng.choice(support, size=count, p=p / p.sum())


def generate_cohort(spec: CohortSpec, rng: np.random.Generator | None = None) -> Cohort:
    spec.validate()
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    centers = class_centers(spec, rng)
    counts = patients_per_class(spec)
    classes = np.repeat(np.arange(spec.num_classes), counts)
    n = spec.num_patients
    offsets = rng.normal(scale=spec.patient_offset_scale, size=(n, spec.feature_dim))
    sizes = power_law_sizes(spec, n, rng)

    test_patients: set[int] = set()
    for c in range(spec.num_classes):
        members = np.flatnonzero(classes == c)
        n_test = int(np.clip(round(spec.test_patient_fraction * len(members)), 1, len(members) - 1))
        test_patients.update(rng.choice(members, size=n_test, replace=False).tolist())
    train_patients = [p for p in range(n) if p not in test_patients]
    if set(train_patients) & test_patients:
        raise AssertionError("train and test patients overlap")

    def build(patient_list):
        feats, labels, pids = [], [], []
        for p in patient_list:
            m = int(sizes[p])
            noise = rng.normal(scale=spec.noise_scale, size=(m, spec.feature_dim))
            feats.append(centers[classes[p]] + offsets[p] + noise)
            labels.extend([classes[p]] * m)
            pids.extend([p] * m)
        order = rng.permutation(len(labels))
        return Dataset(
            features=np.concatenate(feats)[order],
            labels=np.asarray(labels)[order],
            patient_ids=np.asarray(pids)[order],
            num_classes=spec.num_classes,
        )

    train = build(train_patients)
    test = build(sorted(test_patients))
    if set(train.patient_ids.tolist()) & set(test.patient_ids.tolist()):
        raise AssertionError("train and test patients overlap")
    return Cohort(
        train=train,
        test=test,
        patient_classes={p: int(classes[p]) for p in range(n)},
        patient_offsets={p: offsets[p] for p in range(n)},
    )


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Header ``sample_id,patient_id,label,f0..f{D-1}``; floats written with repr (round-trip exact)."""
    d = dataset.feature_dim
    header = ["sample_id", "patient_id", "label"] + [f"f{j}" for j in range(d)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(dataset)):
            row = [str(i), str(int(dataset.patient_ids[i])), str(int(dataset.labels[i]))]
            row += [repr(float(v)) for v in dataset.features[i]]
            fh.write(",".join(row) + "\n")


def load_dataset_csv(path, num_classes: int | None = None) -> Dataset:
    """Parse the CSV format above.

    ``num_classes`` defaults to ``max(label) + 1``; when given, any label at or
    above it is a parse error.
    """
    path = Path(path)
    features, labels, pids = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        d = len(header) - 3
        expected = ["sample_id", "patient_id", "label"] + [f"f{j}" for j in range(d)]
        if d < 1 or header != expected:
            raise ParseError(path, 1, f"unexpected header {header!r}")
        for row in reader:
            line = reader.line_num
            if len(row) != d + 3:
                raise ParseError(path, line, f"expected {d + 3} fields, got {len(row)}")
            try:
                sid, pid, lab = int(row[0]), int(row[1]), int(row[2])
                feat = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise ParseError(path, line, str(exc)) from None
            if sid != len(labels):
                raise ParseError(path, line, f"sample_id {sid} out of sequence (expected {len(labels)})")
            if lab < 0 or (num_classes is not None and lab >= num_classes):
                raise ParseError(path, line, f"label {lab} outside [0, {num_classes})")
            if not all(np.isfinite(feat)):
                raise ParseError(path, line, "non-finite feature value")
            features.append(feat)
            labels.append(lab)
            pids.append(pid)
    if not labels:
        raise ParseError(path, 2, "no data rows")
    c = num_classes if num_classes is not None else max(labels) + 1
    if len(set(labels)) < c:
        missing = sorted(set(range(c)) - set(labels))
        raise ParseError(path, reader.line_num, f"classes with no samples: {missing}")
    return Dataset(np.array(features), np.array(labels), np.array(pids), max(c, 2))
