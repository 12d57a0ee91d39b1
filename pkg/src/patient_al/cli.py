"""Command line entry point: ``gen-data``, ``run`` and ``summarize``.

Exit codes: 0 success, 2 config error, 3 runtime or budget error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_cohort_spec, load_experiment_config
from .datagen import generate_cohort, write_dataset_csv
from .errors import ActiveLearningError, ConfigError, InvalidInputError, InvalidSpecError
from .harness import load_data, run_experiment, summarize_dir, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patient-al", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-round progress")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic patient cohort as train/test CSVs")
    gen.add_argument("--spec", required=True, help="cohort spec file (key = value)")
    gen.add_argument("--out-train", required=True)
    gen.add_argument("--out-test", required=True)

    run = sub.add_parser("run", help="run an active-learning experiment over several seeds")
    run.add_argument("--config", required=True)
    run.add_argument("--patient-aware", action="store_true", default=None)
    run.add_argument("--strategy", choices=["random", "least_confidence", "margin", "entropy", "badge"])
    run.add_argument("--seeds", type=_seed_list)
    run.add_argument("--warm-start", action="store_true", default=None)
    run.add_argument("--out", help="output directory (defaults to the config's output key)")

    summ = sub.add_parser("summarize", help="rebuild summary.csv from curve_seed<i>.csv files")
    summ.add_argument("dir")
    return parser


def _gen_data(args) -> int:
    spec = load_cohort_spec(args.spec)
    cohort = generate_cohort(spec)
    write_dataset_csv(cohort.train, args.out_train)
    write_dataset_csv(cohort.test, args.out_test)
    print(
        f"train: {len(cohort.train)} samples -> {args.out_train}\n"
        f"test: {len(cohort.test)} samples -> {args.out_test}"
    )
    return EXIT_OK


def _run(args) -> int:
    config = load_experiment_config(
        args.config,
        patient_aware=args.patient_aware,
        strategy=args.strategy,
        seeds=args.seeds,
        warm_start=args.warm_start,
    )
    out = args.out or config.output
    if not out:
        raise ConfigError("no output directory: pass --out or set 'output' in the config")
    try:
        data = load_data(config)
    except (InvalidSpecError, InvalidInputError) as exc:
        raise ConfigError(str(exc)) from None
    results = run_experiment(config, data)
    write_outputs(results, data[0], out)
    for res in results:
        if res.ok:
            last = res.records[-1]
            print(f"seed {res.seed}: {last.labeled_count} labeled, final accuracy {last.test_accuracy:.4f}")
        else:
            print(f"seed {res.seed}: FAILED {res.error}", file=sys.stderr)
    return EXIT_OK if all(r.ok for r in results) else EXIT_RUNTIME


def _summarize(args) -> int:
    summary = summarize_dir(args.dir)
    print("round,labeled_count,mean_acc,stderr")
    for r, c, m, s in zip(summary.rounds, summary.labeled_counts, summary.mean_accuracy, summary.stderr):
        print(f"{int(r)},{int(c)},{float(m)!r},{float(s)!r}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"gen-data": _gen_data, "run": _run, "summarize": _summarize}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ActiveLearningError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
