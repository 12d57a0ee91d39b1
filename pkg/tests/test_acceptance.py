"""Exit criteria. Each test prints one PASS/FAIL line (also collected into the
terminal summary) and then asserts at the stated tolerance."""

import csv
import math
from dataclasses import replace
import time
from pathlib import Path

import numpy as np
import pytest

from patient_al import (
    CohortSpec,
    Dataset,
    PatientAwareConfig,
    PoolState,
    QueryStrategy,
    generate_cohort,
    grad_embedding,
    kmeanspp_select,
    patient_aware_select,
    predict_proba,
    score_entropy,
    select_batch,
)
from patient_al.cli import main as cli_main
from patient_al.config import load_experiment_config
from patient_al.harness import load_data, run_experiment, write_outputs
from patient_al.model import _forward, loss_and_gradients
from patient_al.pool import label_samples

from conftest import ACCEPTANCE_LINES, random_model

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# ---- independent oracles ----


def oracle_score(strategy, p):
    p = [float(v) for v in p]
    if strategy is QueryStrategy.LEAST_CONFIDENCE:
        return 1.0 - max(p)
    if strategy is QueryStrategy.MARGIN:
        a, b = sorted(p, reverse=True)[:2]
        return -(a - b)
    return -sum(v * math.log(v) for v in p if v > 0)


def oracle_top_k(ids, scores, k):
    return [i for _, i in sorted(zip(scores, ids), key=lambda t: (-t[0], t[1]))[:k]]


def ce_loss(model, X, y):
    logits, _ = _forward(model, np.atleast_2d(X))
    total = 0.0
    for row, label in zip(logits, y):
        m = max(row)
        total += -(row[label] - m - math.log(sum(math.exp(z - m) for z in row)))
    return total / len(y)


def fd_grad(f, param, h=1e-6):
    g = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        old = param[idx]
        param[idx] = old + h
        up = f()
        param[idx] = old - h
        down = f()
        param[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def audit_budget(out_dir, b0, k):
    """Labeled count per round is b0 + r*k and no id is selected twice (from the CSVs)."""
    problems = []
    for curve in sorted(Path(out_dir).glob("curve_seed*.csv")):
        seed = curve.stem[len("curve_seed"):]
        rows = read_csv(curve)
        sel = read_csv(Path(out_dir) / f"selections_seed{seed}.csv")
        ids = [int(r["sample_id"]) for r in sel]
        if len(ids) != len(set(ids)):
            problems.append(f"seed {seed}: repeated ids")
        per_round = {}
        for r in sel:
            per_round[int(r["round"])] = per_round.get(int(r["round"]), 0) + 1
        cumulative = 0
        for row in rows:
            r = int(row["round"])
            cumulative += per_round.get(r, 0)
            if int(row["labeled_count"]) != b0 + r * k or cumulative != b0 + r * k:
                problems.append(f"seed {seed} round {r}")
    return problems


# ---- criteria ----


def test_01_strategy_oracle_equivalence():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    mismatches = 0
    checks = 0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        c = int(rng.integers(2, min(6, n + 1)))
        d = int(rng.integers(1, 6))
        labels = rng.integers(0, c, size=n)
        labels[:c] = np.arange(c)
        ds = Dataset(rng.normal(size=(n, d)) * 2, labels, rng.integers(0, 10, size=n), c)
        model = random_model(rng, d=d, c=c, hidden=int(rng.choice([0, 5])), scale=float(rng.uniform(0.1, 4)))
        pool = label_samples(PoolState.initial(n), rng.choice(n, size=int(rng.integers(0, n)), replace=False))
        unl = list(pool.unlabeled_ids)
        k = int(rng.integers(0, len(unl) + 1))
        for strategy in (QueryStrategy.LEAST_CONFIDENCE, QueryStrategy.MARGIN, QueryStrategy.ENTROPY):
            scores = [oracle_score(strategy, predict_proba(model, ds.features[i])) for i in unl]
            got = select_batch(strategy, model, pool, ds, k, rng)
            mismatches += got != oracle_top_k(unl, scores, k)
            checks += 1
    elapsed = time.perf_counter() - start
    report(1, "strategy oracle equivalence", mismatches == 0 and elapsed < 10,
           f"{checks - mismatches}/{checks} selections match brute force, {elapsed:.2f}s (< 10s)")


def test_02_gradient_correctness():
    rng = np.random.default_rng(2)
    worst = 0.0
    for trial in range(50):
        d, c = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        model = random_model(rng, d=d, c=c, hidden=[0, 6][trial % 2], scale=1.5)
        x = rng.normal(size=d)
        y = int(rng.integers(0, c))
        _, gw, gb = loss_and_gradients(model, x[None], [y])
        for analytic, param in zip(gw + gb, model.weights + model.biases):
            worst = max(worst, rel_err(analytic, fd_grad(lambda: ce_loss(model, x[None], [y]), param)))
        pseudo = int(np.argmax(predict_proba(model, x)))
        numeric = fd_grad(lambda: ce_loss(model, x[None], [pseudo]), model.weights[-1])
        worst = max(worst, rel_err(grad_embedding(model, x), numeric))
    report(2, "gradient correctness", worst < 1e-4, f"max relative error {worst:.2e} over 50 pairs (< 1e-4)")


def test_03_probability_normalization():
    rng = np.random.default_rng(3)
    worst_sum, worst_shift = 0.0, 0.0
    for _ in range(1000):
        d, c = int(rng.integers(1, 8)), int(rng.integers(2, 8))
        model = random_model(rng, d=d, c=c, hidden=int(rng.choice([0, 4])), scale=float(rng.uniform(0.1, 10)))
        x = rng.normal(size=d) * float(rng.uniform(0.1, 10))
        p = predict_proba(model, x)
        worst_sum = max(worst_sum, abs(p.sum() - 1.0))
        model.biases[-1] += rng.uniform(-50, 50)
        worst_shift = max(worst_shift, float(np.abs(predict_proba(model, x) - p).max()))
    ok = worst_sum <= 1e-9 and worst_shift <= 1e-12
    report(3, "probability normalization", ok,
           f"max |sum-1| {worst_sum:.1e} (<= 1e-9), max shift change {worst_shift:.1e} (<= 1e-12)")


def test_04_entropy_analytics():
    worst = max(abs(float(score_entropy(np.full(c, 1.0 / c))) - math.log(c)) for c in range(2, 11))
    one_hot = [float(score_entropy(np.eye(c)[j])) for c in range(2, 11) for j in range(c)]
    ok = worst <= 1e-12 and all(v == 0.0 for v in one_hot)
    report(4, "entropy analytics", ok, f"uniform error {worst:.1e} (<= 1e-12), one-hot exactly 0: {ok}")


@pytest.fixture(scope="module")
def uniqueness_runs(tmp_path_factory):
    cohort = CohortSpec(num_patients=60, min_samples_per_patient=2, max_samples_per_patient=40, seed=5)
    base = load_experiment_config(CONFIGS / "desk.cfg")
    runs = {}
    for strategy in QueryStrategy:
        cfg = replace(base, strategy=strategy.value, patient_aware=True, initial_budget=24, per_round_k=12,
                      num_rounds=15, seeds=(0, 1), cohort=cohort)
        data = load_data(cfg)
        out = tmp_path_factory.mktemp(f"unique_{strategy.value}")
        results = run_experiment(cfg, data)
        write_outputs(results, data[0], out)
        runs[strategy] = (cfg, data, results, out)
    return runs


def test_05_patient_uniqueness(uniqueness_runs):
    violations, batches = 0, 0
    for strategy, (cfg, (train, _), results, _) in uniqueness_runs.items():
        for res in results:
            assert res.ok, res.error
            labeled = set(res.records[0].selected_ids)
            for r in res.records[1:]:
                remaining = {int(train.patient_ids[i]) for i in range(len(train)) if i not in labeled}
                pts = {int(train.patient_ids[i]) for i in r.selected_ids}
                if len(remaining) >= 12:
                    batches += 1
                    violations += len(r.selected_ids) != 12 or len(pts) != 12
                labeled |= set(r.selected_ids)
    rng = np.random.default_rng(5)
    reduction_fail = 0
    for trial in range(20):
        n = 50
        ds = Dataset(rng.normal(size=(n, 4)), np.arange(n) % 3, rng.permutation(500)[:n], 3)
        pool = label_samples(PoolState.initial(n), rng.choice(n, size=10, replace=False))
        model = random_model(rng, hidden=[0, 5][trial % 2], scale=2.0)
        for strategy in QueryStrategy:
            wrapped = patient_aware_select(PatientAwareConfig(strategy, 12), model, pool, ds, np.random.default_rng(trial))
            plain = select_batch(strategy, model, pool, ds, 12, np.random.default_rng(trial))
            reduction_fail += wrapped != plain
    ok = violations == 0 and reduction_fail == 0 and batches > 0
    report(5, "patient uniqueness", ok,
           f"{batches - violations}/{batches} batches with 12 distinct patients; "
           f"reduction mismatches {reduction_fail}/100")


def test_06_kmeanspp_d2_sampling():
    a, b, c = 0, 1, 2
    pts = np.array([(0.0, 0.0), (3.0, 0.0), (3.0001, 0.0)])
    norms = (pts**2).sum(1)
    analytic = 0.0
    for first in (b, c):
        d2 = ((pts - pts[first]) ** 2).sum(1)
        d2[first] = 0.0
        analytic += norms[first] / norms.sum() * d2[a] / d2.sum()
    rng = np.random.default_rng(6)
    trials = 10_000
    hits = sum(kmeanspp_select([a, b, c], pts, 2, rng)[1] == a for _ in range(trials))
    freq = hits / trials
    report(6, "k-means++ D^2 sampling", abs(freq - analytic) <= 0.01,
           f"second pick = a in {freq:.4f} of {trials} trials vs analytic {analytic:.10f} (+/- 0.01)")


def test_07_split_hygiene():
    rng = np.random.default_rng(7)
    leaks = 0
    for seed in range(100):
        c = int(rng.integers(2, 6))
        spec = CohortSpec(
            num_classes=c,
            num_patients=int(rng.integers(2 * c, 80)),
            feature_dim=int(rng.integers(1, 10)),
            patient_offset_scale=float(rng.uniform(0, 3)),
            noise_scale=float(rng.uniform(0, 1)),
            size_alpha=float(rng.uniform(0.1, 5)),
            min_samples_per_patient=1,
            max_samples_per_patient=int(rng.integers(1, 30)),
            test_patient_fraction=float(rng.uniform(0.05, 0.95)),
            seed=seed,
        )
        cohort = generate_cohort(spec)
        leaks += bool(set(cohort.train.patient_ids.tolist()) & set(cohort.test.patient_ids.tolist()))
    report(7, "split hygiene", leaks == 0, f"{100 - leaks}/100 random cohorts with disjoint train/test patients")


def test_08_reproducibility(tmp_path):
    differing = []
    runs = [
        ("desk.cfg", []),
        ("desk.cfg", ["--patient-aware", "--strategy", "badge", "--seeds", "3,1"]),
        ("desk.cfg", ["--patient-aware", "--strategy", "random"]),
    ]
    for n, (name, flags) in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"run{n}_{rep}"
            assert cli_main(["run", "--config", str(CONFIGS / name), *flags, "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.name for p in outs[0].iterdir())
        assert files == sorted(p.name for p in outs[1].iterdir())
        differing += [f for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    report(8, "reproducibility", not differing,
           f"{len(runs)} configs run twice, byte-identical CSVs" if not differing else f"differ: {differing}")


@pytest.fixture(scope="module")
def behavioral_runs(tmp_path_factory):
    base = load_experiment_config(CONFIGS / "desk.cfg")
    data = load_data(base)
    out = {}
    start = time.perf_counter()
    for strategy in ("entropy", "random"):
        for aware in (False, True):
            cfg = replace(base, strategy=strategy, patient_aware=aware)
            results = run_experiment(cfg, data)
            d = tmp_path_factory.mktemp(f"{strategy}_{'pa' if aware else 'plain'}")
            write_outputs(results, data[0], d)
            out[(strategy, aware)] = (cfg, results, d)
    return out, time.perf_counter() - start


def final_stats(results):
    acc = np.array([r.records[-1].test_accuracy for r in results])
    return acc.mean(), acc.std(ddof=1) / math.sqrt(len(acc))


def test_09_behavioral_analog(behavioral_runs):
    runs, elapsed = behavioral_runs
    cohort = runs[("entropy", False)][0].cohort
    assert cohort.num_classes == 3 and cohort.num_patients == 60
    assert cohort.patient_offset_scale / cohort.noise_scale >= 2
    details, ok = [], elapsed < 300
    for strategy in ("entropy", "random"):
        m_plain, se_plain = final_stats(runs[(strategy, False)][1])
        m_pa, se_pa = final_stats(runs[(strategy, True)][1])
        pooled = math.sqrt((se_plain**2 + se_pa**2) / 2)
        ok &= m_pa >= m_plain - pooled
        details.append(f"{strategy}: aware {m_pa:.4f} vs plain {m_plain:.4f} (pooled SE {pooled:.4f})")
    report(9, "behavioral analog", ok, "; ".join(details) + f"; {elapsed:.1f}s (< 300s)")


def test_10_budget_arithmetic(behavioral_runs, uniqueness_runs):
    problems, audited = [], 0
    for cfg, _, out in behavioral_runs[0].values():
        problems += audit_budget(out, cfg.initial_budget, cfg.per_round_k)
        audited += 1
    for cfg, _, _, out in uniqueness_runs.values():
        problems += audit_budget(out, cfg.initial_budget, cfg.per_round_k)
        audited += 1
    report(10, "budget arithmetic", not problems,
           f"{audited} experiments audited from selections CSVs" + (f"; problems: {problems[:5]}" if problems else ""))
