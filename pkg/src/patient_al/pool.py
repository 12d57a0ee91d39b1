"""Dataset container, labeled/unlabeled bookkeeping and the patient partition."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExhaustedError, InvalidInputError, InvalidSelectionError


@dataclass(frozen=True)
class Sample:
    id: int
    patient_id: int
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus per-sample labels and patient ids.

    Sample ids are implicit: row ``i`` is sample ``i``.
    """

    features: np.ndarray
    labels: np.ndarray
    patient_ids: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        patient_ids = np.asarray(self.patient_ids, dtype=np.int64)
        if features.ndim != 2 or features.shape[1] < 1:
            raise InvalidInputError("features must be a 2-D array with at least one column")
        n = features.shape[0]
        if labels.shape != (n,) or patient_ids.shape != (n,):
            raise InvalidInputError("labels and patient_ids must have one entry per sample")
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be at least 2")
        if not np.all(np.isfinite(features)):
            raise InvalidInputError("features must be finite")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InvalidInputError(f"labels must lie in [0, {self.num_classes})")
        missing = set(range(self.num_classes)) - set(labels.tolist())
        if missing:
            raise InvalidInputError(f"classes with no samples: {sorted(missing)}")
        for arr in (features, labels, patient_ids):
            arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "patient_ids", patient_ids)

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(int(i), int(self.patient_ids[i]), self.features[i], int(self.labels[i]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.patient_ids, other.patient_ids)
        )

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], num_classes: int) -> Dataset:
        for i, s in enumerate(samples):
            if s.id != i:
                raise InvalidInputError(f"sample ids must be dense from 0; got {s.id} at position {i}")
        return cls(
            features=np.array([s.features for s in samples], dtype=np.float64),
            labels=np.array([s.label for s in samples], dtype=np.int64),
            patient_ids=np.array([s.patient_id for s in samples], dtype=np.int64),
            num_classes=num_classes,
        )

    def patient_map(self) -> dict[int, list[int]]:
        """Patient id -> ascending sample ids, over the whole dataset."""
        groups: dict[int, list[int]] = {}
        for i, p in enumerate(self.patient_ids.tolist()):
            groups.setdefault(p, []).append(i)
        return groups


@dataclass(frozen=True)
class PoolState:
    """Immutable labeled/unlabeled split; both sides kept in ascending id order."""

    labeled_ids: tuple[int, ...]
    unlabeled_ids: tuple[int, ...]

    @classmethod
    def initial(cls, n: int) -> PoolState:
        return cls((), tuple(range(n)))

    def validate(self, dataset: Dataset) -> None:
        lab, unl = set(self.labeled_ids), set(self.unlabeled_ids)
        if lab & unl:
            raise InvalidInputError(f"ids both labeled and unlabeled: {sorted(lab & unl)}")
        if lab | unl != set(range(len(dataset))):
            raise InvalidInputError("labeled and unlabeled ids do not cover the dataset")


@dataclass(frozen=True)
class PatientPartition:
    """Unlabeled ids grouped by patient.

    Groups are inserted in order of each patient's smallest unlabeled id, and
    ids inside a group are ascending. Empty groups are never stored.
    """

    groups: dict[int, list[int]] = field(default_factory=dict)

    @property
    def num_patients(self) -> int:
        return len(self.groups)

    def sizes(self) -> dict[int, int]:
        return {p: len(ids) for p, ids in self.groups.items()}


def partition_by_patient(dataset: Dataset, pool: PoolState) -> PatientPartition:
    groups: dict[int, list[int]] = {}
    for i in pool.unlabeled_ids:
        groups.setdefault(int(dataset.patient_ids[i]), []).append(i)
    return PatientPartition(groups)


def label_samples(pool: PoolState, ids: Iterable[int]) -> PoolState:
    ids = [int(i) for i in ids]
    if not ids:
        return pool
    unlabeled = set(pool.unlabeled_ids)
    labeled = set(pool.labeled_ids)
    seen: set[int] = set()
    for i in ids:
        if i in seen:
            raise InvalidSelectionError(i, "selected twice")
        if i in labeled:
            raise InvalidSelectionError(i, "already labeled")
        if i not in unlabeled:
            raise InvalidSelectionError(i, "unknown sample id")
        seen.add(i)
    return PoolState(
        labeled_ids=tuple(sorted(labeled | seen)),
        unlabeled_ids=tuple(i for i in pool.unlabeled_ids if i not in seen),
    )


def seed_initial(pool: PoolState, b0: int, rng: np.random.Generator) -> PoolState:
    """Move ``b0`` uniformly drawn unlabeled ids into the labeled set."""
    n_unlabeled = len(pool.unlabeled_ids)
    if b0 < 0:
        raise InvalidInputError("initial budget must be non-negative")
    if b0 > n_unlabeled:
        raise BudgetExhaustedError(f"initial budget {b0} exceeds {n_unlabeled} unlabeled samples")
    if b0 == 0:
        return pool
    picks = rng.choice(n_unlabeled, size=b0, replace=False)
    return label_samples(pool, [pool.unlabeled_ids[j] for j in picks])
