"""Round loop, multi-seed runs, learning-curve summaries and CSV output."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen import CohortSpec, generate_cohort, load_dataset_csv
from .errors import ActiveLearningError, ConfigError, InvalidInputError, ShapeMismatchError
from .model import ModelConfig, evaluate_accuracy, init_model, train_to_threshold
from .patient_aware import PATIENT_PICKS, PatientAwareConfig, patient_aware_select
from .pool import Dataset, PoolState, label_samples, seed_initial
from .strategies import QueryStrategy, select_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "entropy"
    patient_aware: bool = False
    patient_pick: str = "informed"
    allow_refill: bool = True
    initial_budget: int = 128
    per_round_k: int = 128
    num_rounds: int = 10
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    master_seed: int = 0
    warm_start: bool = False
    train_csv: str | None = None
    test_csv: str | None = None
    cohort: CohortSpec | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    output: str | None = None

    def __post_init__(self):
        QueryStrategy.parse(self.strategy)
        if self.patient_pick not in PATIENT_PICKS:
            raise InvalidInputError(f"patient_pick must be one of {PATIENT_PICKS}")
        if self.initial_budget < 0 or self.per_round_k < 1 or self.num_rounds < 0:
            raise InvalidInputError("need initial_budget >= 0, per_round_k >= 1, num_rounds >= 0")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise InvalidInputError("seeds must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise InvalidInputError(f"seeds must be distinct: {seeds}")
        if min(seeds) < 0 or self.master_seed < 0:
            raise InvalidInputError("seeds must be non-negative")
        object.__setattr__(self, "seeds", seeds)
        if bool(self.train_csv) != bool(self.test_csv):
            raise InvalidInputError("train_csv and test_csv must be given together")

    @property
    def budget(self) -> int:
        return self.initial_budget + self.num_rounds * self.per_round_k


@dataclass(frozen=True)
class RoundRecord:
    """One train/evaluate step; ``selected_ids`` are the ids that joined the labeled set for it."""

    round: int
    labeled_count: int
    test_accuracy: float
    epochs_run: int
    threshold_reached: bool
    selected_ids: tuple[int, ...]


@dataclass
class SeedResult:
    seed: int
    records: list[RoundRecord]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class CurveSummary:
    rounds: np.ndarray
    labeled_counts: np.ndarray
    mean_accuracy: np.ndarray
    stderr: np.ndarray
    num_seeds: int


def load_data(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if config.train_csv:
        train = load_dataset_csv(config.train_csv)
        test = load_dataset_csv(config.test_csv, num_classes=train.num_classes)
    elif config.cohort is not None:
        cohort = generate_cohort(config.cohort)
        train, test = cohort.train, cohort.test
    else:
        raise ConfigError("no dataset source: give train_csv/test_csv or cohort.* keys")
    if train.feature_dim != test.feature_dim:
        raise ConfigError("train and test feature dimensions differ")
    return train, test


def seed_streams(master_seed: int, seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per purpose, so that changing the selection rule
    leaves model init, the initial pool and batch shuffling untouched."""
    children = np.random.SeedSequence([master_seed, seed]).spawn(4)
    names = ("init", "initial_pool", "shuffle", "selection")
    return {name: np.random.default_rng(ss) for name, ss in zip(names, children)}


def select(config: ExperimentConfig, model, pool, dataset, rng) -> list[int]:
    strategy = QueryStrategy.parse(config.strategy)
    if config.patient_aware:
        pa = PatientAwareConfig(strategy, config.per_round_k, config.allow_refill, config.patient_pick)
        return patient_aware_select(pa, model, pool, dataset, rng)
    return select_batch(strategy, model, pool, dataset, config.per_round_k, rng)


def run_seed(config: ExperimentConfig, train: Dataset, test: Dataset, seed: int) -> SeedResult:
    rngs = seed_streams(config.master_seed, seed)
    result = SeedResult(seed, [])
    try:
        initial = init_model(config.model, (train.feature_dim, train.num_classes), rngs["init"])
        pool = seed_initial(PoolState.initial(len(train)), config.initial_budget, rngs["initial_pool"])
        joined = pool.labeled_ids
        current = initial
        for r in range(config.num_rounds + 1):
            ids = np.asarray(pool.labeled_ids, dtype=np.int64)
            start = current if config.warm_start else initial
            current, report = train_to_threshold(
                start, train.features[ids], train.labels[ids], config.model, rngs["shuffle"]
            )
            acc = evaluate_accuracy(current, test.features, test.labels)
            result.records.append(
                RoundRecord(r, len(ids), acc, report.epochs_run, report.threshold_reached, tuple(joined))
            )
            log.info("seed %d round %d: %d labeled, acc %.4f", seed, r, len(ids), acc)
            if r < config.num_rounds:
                joined = select(config, current, pool, train, rngs["selection"])
                pool = label_samples(pool, joined)
    except ActiveLearningError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        log.warning("seed %d failed: %s", seed, result.error)
    return result


def run_experiment(
    config: ExperimentConfig, data: tuple[Dataset, Dataset] | None = None
) -> list[SeedResult]:
    train, test = data if data is not None else load_data(config)
    return [run_seed(config, train, test, seed) for seed in config.seeds]


def summarize(curves: Sequence[Sequence[RoundRecord]]) -> CurveSummary:
    """Per-round mean accuracy and standard error (sample std / sqrt(seeds))."""
    if not curves:
        raise ShapeMismatchError("no curves to summarize")
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"curves have different lengths: {sorted(lengths)}")
    counts = np.array([[r.labeled_count for r in c] for c in curves])
    if not np.all(counts == counts[0]):
        raise ShapeMismatchError("curves disagree on labeled counts per round")
    acc = np.array([[r.test_accuracy for r in c] for c in curves], dtype=np.float64)
    n = acc.shape[0]
    stderr = acc.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(acc.shape[1])
    return CurveSummary(
        rounds=np.array([r.round for r in curves[0]]),
        labeled_counts=counts[0],
        mean_accuracy=acc.mean(axis=0),
        stderr=stderr,
        num_seeds=n,
    )


def _num(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_summary(summary: CurveSummary, path) -> None:
    _write_rows(
        Path(path),
        ["round", "labeled_count", "mean_acc", "stderr"],
        (
            [int(r), int(c), _num(m), _num(s)]
            for r, c, m, s in zip(summary.rounds, summary.labeled_counts, summary.mean_accuracy, summary.stderr)
        ),
    )


def write_outputs(results: Sequence[SeedResult], train: Dataset, out_dir) -> Path:
    """Per-seed curve and selection CSVs, failures.csv, and summary.csv over successful seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        _write_rows(
            out / f"curve_seed{res.seed}.csv",
            ["round", "labeled_count", "test_accuracy", "epochs_run"],
            ([r.round, r.labeled_count, _num(r.test_accuracy), r.epochs_run] for r in res.records),
        )
        _write_rows(
            out / f"selections_seed{res.seed}.csv",
            ["round", "sample_id", "patient_id"],
            ([r.round, i, int(train.patient_ids[i])] for r in res.records for i in r.selected_ids),
        )
    _write_rows(
        out / "failures.csv",
        ["seed", "error"],
        ([res.seed, res.error] for res in results if not res.ok),
    )
    good = [res.records for res in sorted(results, key=lambda res: res.seed) if res.ok]
    if good:
        write_summary(summarize(good), out / "summary.csv")
    return out


def read_curve_csv(path) -> list[RoundRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            RoundRecord(
                int(row["round"]),
                int(row["labeled_count"]),
                float(row["test_accuracy"]),
                int(row["epochs_run"]),
                False,
                (),
            )
            for row in reader
        ]


def summarize_dir(out_dir) -> CurveSummary:
    """Rebuild summary.csv from the curve_seed<i>.csv files in ``out_dir``."""
    out = Path(out_dir)
    failed = set()
    if (out / "failures.csv").exists():
        with open(out / "failures.csv", encoding="utf-8", newline="") as fh:
            failed = {row["seed"] for row in csv.DictReader(fh)}
    paths = sorted(
        (p for p in out.glob("curve_seed*.csv") if p.stem[len("curve_seed"):] not in failed),
        key=lambda p: int(p.stem[len("curve_seed"):]),
    )
    if not paths:
        raise ShapeMismatchError(f"no curve_seed*.csv files in {out}")
    summary = summarize([read_curve_csv(p) for p in paths])
    write_summary(summary, out / "summary.csv")
    return summary
