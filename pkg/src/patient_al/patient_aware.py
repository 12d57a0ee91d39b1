"""Patient-aware wrapper: each round draws its K samples from K distinct patients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhaustedError, InsufficientPatientsError, InvalidInputError
from .model import ModelState, grad_embedding
from .pool import Dataset, PoolState, partition_by_patient
from .strategies import QueryStrategy, kmeanspp_select, score_samples

PATIENT_PICKS = ("informed", "random")


@dataclass(frozen=True)
class PatientAwareConfig:
    base_strategy: QueryStrategy
    k: int
    allow_refill: bool = True
    patient_pick: str = "informed"

    def __post_init__(self):
        object.__setattr__(self, "base_strategy", QueryStrategy.parse(self.base_strategy))
        if self.k < 1:
            raise InvalidInputError("k must be at least 1")
        if self.patient_pick not in PATIENT_PICKS:
            raise InvalidInputError(f"patient_pick must be one of {PATIENT_PICKS}, got {self.patient_pick!r}")


def _champions(ids: np.ndarray, patients: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best sample per patient, returned in descending score order (ties: lowest id)."""
    order = np.lexsort((ids, -scores))
    _, first = np.unique(patients[order], return_index=True)
    best = order[np.sort(first)]
    return ids[best], patients[best]


def _random_patients(patients: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    # Patients enumerated in order of first appearance among the (ascending) ids,
    # so that one-sample-per-patient pools reproduce the unwrapped random draw.
    _, first = np.unique(patients, return_index=True)
    order = patients[np.sort(first)]
    return order[rng.choice(len(order), size=count, replace=False)]


def _informed_pass(ids, patients, scores, need):
    chosen, _ = _champions(ids, patients, scores)
    return chosen[:need].tolist()


def _random_pass(ids, patients, scores, need, rng):
    """Uniform patients; within each, the best-scoring sample or (no scores) a uniform one."""
    n_patients = len(np.unique(patients))
    out = []
    for p in _random_patients(patients, min(need, n_patients), rng):
        members = np.flatnonzero(patients == p)
        if scores is not None:
            pick, _ = _champions(ids[members], patients[members], scores[members])
            out.append(int(pick[0]))
        elif len(members) == 1:
            out.append(int(ids[members[0]]))
        else:
            out.append(int(ids[members[rng.integers(len(members))]]))
    return out


def patient_aware_select(
    cfg: PatientAwareConfig,
    model: ModelState,
    pool: PoolState,
    dataset: Dataset,
    rng: np.random.Generator,
) -> list[int]:
    """Select ``cfg.k`` unlabeled ids, at most one per patient per pass.

    A pass covers every patient that still has unselected samples; if the batch
    is not full after a pass, the next pass runs over what remains (only when
    ``allow_refill``), so a patient then contributes a second sample.
    """
    k = cfg.k
    unlabeled = np.asarray(pool.unlabeled_ids, dtype=np.int64)
    if k > len(unlabeled):
        raise BudgetExhaustedError(f"requested {k} samples from {len(unlabeled)} unlabeled")
    partition = partition_by_patient(dataset, pool)
    if partition.num_patients < k and not cfg.allow_refill:
        raise InsufficientPatientsError(
            f"only {partition.num_patients} patients have unlabeled samples, need {k}"
        )
    patients = dataset.patient_ids[unlabeled]
    base = cfg.base_strategy

    if base is QueryStrategy.BADGE:
        emb = grad_embedding(model, dataset.features[unlabeled])
        if cfg.patient_pick == "random":
            keep = np.isin(patients, _random_patients(patients, min(k, partition.num_patients), rng))
            unlabeled, patients, emb = unlabeled[keep], patients[keep], emb[keep]
        return kmeanspp_select(unlabeled, emb, k, rng, groups=patients)

    scores = None
    if base.is_uncertainty:
        scores = score_samples(base, model, dataset.features[unlabeled])

    selected: list[int] = []
    remaining = np.ones(len(unlabeled), dtype=bool)
    while len(selected) < k:
        ids, pts = unlabeled[remaining], patients[remaining]
        sc = None if scores is None else scores[remaining]
        need = k - len(selected)
        if base is QueryStrategy.RANDOM or cfg.patient_pick == "random":
            batch = _random_pass(ids, pts, sc, need, rng)
        else:
            batch = _informed_pass(ids, pts, sc, need)
        selected.extend(batch)
        remaining &= ~np.isin(unlabeled, batch)
    return selected
