"""Pool-based active learning with a patient-aware selection wrapper."""

from .datagen import Cohort, CohortSpec, generate_cohort, load_dataset_csv, write_dataset_csv
from .harness import ExperimentConfig, RoundRecord, run_experiment, summarize
from .model import (
    ModelConfig,
    ModelState,
    evaluate_accuracy,
    grad_embedding,
    init_model,
    predict_proba,
    train_to_threshold,
)
from .patient_aware import PatientAwareConfig, patient_aware_select
from .pool import Dataset, PatientPartition, PoolState, Sample, label_samples, partition_by_patient, seed_initial
from .strategies import (
    QueryStrategy,
    kmeanspp_select,
    score_entropy,
    score_least_confidence,
    score_margin,
    select_batch,
)

__version__ = "0.1.0"

__all__ = [
    "Cohort",
    "CohortSpec",
    "Dataset",
    "ExperimentConfig",
    "ModelConfig",
    "ModelState",
    "PatientAwareConfig",
    "PatientPartition",
    "PoolState",
    "QueryStrategy",
    "RoundRecord",
    "Sample",
    "evaluate_accuracy",
    "generate_cohort",
    "grad_embedding",
    "init_model",
    "kmeanspp_select",
    "label_samples",
    "load_dataset_csv",
    "partition_by_patient",
    "patient_aware_select",
    "predict_proba",
    "run_experiment",
    "score_entropy",
    "score_least_confidence",
    "score_margin",
    "seed_initial",
    "select_batch",
    "summarize",
    "train_to_threshold",
    "write_dataset_csv",
]
