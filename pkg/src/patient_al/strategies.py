"""Query strategies: uncertainty scores, top-k selection and BADGE seeding.

Every score is oriented so that a higher value means a more informative
sample; ties are broken by the lowest sample id.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .errors import BudgetExhaustedError, InvalidInputError
from .model import ModelState, grad_embedding, predict_proba
from .pool import Dataset, PoolState


class QueryStrategy(str, Enum):
    RANDOM = "random"
    LEAST_CONFIDENCE = "least_confidence"
    MARGIN = "margin"
    ENTROPY = "entropy"
    BADGE = "badge"

    @classmethod
    def parse(cls, name) -> QueryStrategy:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = " | ".join(s.value for s in cls)
            raise InvalidInputError(f"unknown strategy {name!r}; expected one of {choices}") from None

    @property
    def is_uncertainty(self) -> bool:
        return self in (QueryStrategy.LEAST_CONFIDENCE, QueryStrategy.MARGIN, QueryStrategy.ENTROPY)


def score_least_confidence(p) -> np.ndarray:
    return 1.0 - np.max(p, axis=-1)


def score_margin(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    top2 = np.partition(p, -2, axis=-1)[..., -2:]
    return -(top2[..., 1] - top2[..., 0])


def score_entropy(p) -> np.ndarray:
    """Shannon entropy in nats, with 0 log 0 taken as 0."""
    p = np.asarray(p, dtype=np.float64)
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(p * np.log(safe), axis=-1)


SCORERS = {
    QueryStrategy.LEAST_CONFIDENCE: score_least_confidence,
    QueryStrategy.MARGIN: score_margin,
    QueryStrategy.ENTROPY: score_entropy,
}


def score_samples(strategy: QueryStrategy, model: ModelState, features: np.ndarray) -> np.ndarray:
    return SCORERS[QueryStrategy.parse(strategy)](predict_proba(model, np.atleast_2d(features)))


def top_k(ids: Sequence[int], scores: np.ndarray, k: int) -> list[int]:
    """The ``k`` highest scores, ties broken by lowest id."""
    ids = np.asarray(ids, dtype=np.int64)
    order = np.lexsort((ids, -np.asarray(scores, dtype=np.float64)))
    return ids[order[:k]].tolist()


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    # guard the floating edge u * total == total
    return min(idx, int(np.flatnonzero(weights > 0)[-1]))


def kmeanspp_select(
    ids: Sequence[int],
    embeddings: np.ndarray,
    k: int,
    rng: np.random.Generator,
    groups: Sequence[int] | None = None,
) -> list[int]:
    """D^2 seeding over ``embeddings``, returning the ids of the ``k`` chosen rows.

    The first center is drawn proportional to the squared norm, every later one
    proportional to the squared distance to the nearest chosen center. When
    ``groups`` is given, once a row is chosen every other row of its group is
    masked for the rest of the pass; a new pass starts (lifting the masks) only
    when every unchosen row is masked. If all candidate weights are zero the draw
    falls back to uniform over the candidates.
    """
    ids = np.asarray(ids, dtype=np.int64)
    E = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    n = len(ids)
    if k > n:
        raise BudgetExhaustedError(f"requested {k} centers from {n} embeddings")
    if E.shape[0] != n:
        raise InvalidInputError("ids and embeddings differ in length")
    groups = np.arange(n) if groups is None else np.asarray(groups)

    picked = np.zeros(n, dtype=bool)
    available = np.ones(n, dtype=bool)
    d2 = np.einsum("ij,ij->i", E, E)
    chosen: list[int] = []
    while len(chosen) < k:
        if not available.any():
            available = ~picked
        weights = np.where(available, d2, 0.0)
        if weights.sum() > 0:
            idx = _draw(weights, rng)
        else:
            candidates = np.flatnonzero(available)
            idx = int(candidates[rng.integers(len(candidates))])
        chosen.append(idx)
        picked[idx] = True
        available &= groups != groups[idx]
        diff = E - E[idx]
        dist = np.einsum("ij,ij->i", diff, diff)
        d2 = dist if len(chosen) == 1 else np.minimum(d2, dist)
    return ids[chosen].tolist()


def select_batch(
    strategy: QueryStrategy,
    model: ModelState,
    pool: PoolState,
    dataset: Dataset,
    k: int,
    rng: np.random.Generator,
) -> list[int]:
    strategy = QueryStrategy.parse(strategy)
    unlabeled = np.asarray(pool.unlabeled_ids, dtype=np.int64)
    if k > len(unlabeled):
        raise BudgetExhaustedError(f"requested {k} samples from {len(unlabeled)} unlabeled")
    if k == 0:
        return []
    if strategy is QueryStrategy.RANDOM:
        return unlabeled[rng.choice(len(unlabeled), size=k, replace=False)].tolist()
    X = dataset.features[unlabeled]
    if strategy is QueryStrategy.BADGE:
        return kmeanspp_select(unlabeled, grad_embedding(model, X), k, rng)
    return top_k(unlabeled, score_samples(strategy, model, X), k)
