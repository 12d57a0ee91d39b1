import numpy as np
import pytest

from patient_al import Dataset, ModelConfig, init_model


def random_dataset(rng, n, d=4, c=3, n_patients=None):
    """Random dataset with every class present; patient ids in [0, n_patients)."""
    n_patients = n_patients or max(1, n // 3)
    labels = rng.integers(0, c, size=n)
    labels[:c] = np.arange(c)
    rng.shuffle(labels)
    return Dataset(
        features=rng.normal(size=(n, d)),
        labels=labels,
        patient_ids=rng.integers(0, n_patients, size=n),
        num_classes=c,
    )


def random_model(rng, d=4, c=3, hidden=0, scale=1.0):
    model = init_model(ModelConfig(hidden_units=hidden), (d, c), rng)
    for w in model.weights:
        w *= scale
    for b in model.biases:
        b[:] = rng.normal(scale=0.1 * scale, size=b.shape)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
