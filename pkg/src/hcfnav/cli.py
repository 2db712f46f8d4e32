"""
Command-line entry point.

Subcommands::

    hcfnav generate  --out DIR               build train.csv / test.csv
    hcfnav train     --data DIR --out DIR    fit the ensemble, write model.json
    hcfnav evaluate  --model FILE --out DIR  Monte-Carlo comparison report
    hcfnav run       --strategy S --out DIR  one filter run, per-epoch series

Every subcommand accepts ``--config FILE``, a JSON document whose top-level
keys are :class:`~hcfnav.harness.RunConfig` fields, plus optional
``dataset`` (``window``, ``train_fraction``, ``grid``) and ``training``
(``n_trees``, ``min_leaf``) sections. Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import build_dataset, noise_grid, read_dataset, write_dataset
from .eskf import ProcessNoiseSpec
from .harness import RunConfig, monte_carlo, run_filter
from .qstrategy import parse_strategy
from .trees import TreeEnsemble, evaluate_mse, fit_ensemble

_SECTIONS = {
    "dataset": {"window": 200, "train_fraction": 0.8, "grid": [0.001, 0.05, 15]},
    "training": {"n_trees": 30, "min_leaf": 8},
}


def _load_config(path):
    doc = json.loads(Path(path).read_text()) if path else {}
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    sections = {}
    for name, defaults in _SECTIONS.items():
        given = doc.pop(name, {})
        unknown = set(given) - set(defaults)
        if unknown:
            raise ValueError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
        sections[name] = {**defaults, **given}
    return doc, sections


def _run_config(args, doc) -> RunConfig:
    doc = dict(doc)
    for flag, key in (("seed", "seed"), ("runs", "runs"), ("trajectory", "trajectory"),
                      ("model", "model"), ("duration", "duration")):
        value = getattr(args, flag, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "strategy", None):
        doc["strategies"] = list(args.strategy)
    return RunConfig.from_dict(doc)


def _load_model(cfg: RunConfig, needed: bool):
    if cfg.model is None:
        if needed:
            raise ValueError("the learned strategy needs --model (or 'model' in the config)")
        return None
    return TreeEnsemble.load(cfg.model)


def _strategies(cfg: RunConfig, ensemble):
    base = ProcessNoiseSpec(*cfg.adaptive_base)
    return [parse_strategy(s, ensemble, base, cfg.tuning_rate) for s in cfg.strategies]


def cmd_generate(args, doc, sections) -> None:
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    ds = sections["dataset"]
    window = args.window or ds["window"]
    lo, hi, n = ds["grid"]
    train, test = build_dataset(grid=noise_grid(lo, hi, int(n)), n=int(window),
                                train_fraction=ds["train_fraction"], seed=int(seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(train, out / "train.csv")
    write_dataset(test, out / "test.csv")
    print(f"wrote {len(train)} train and {len(test)} test rows to {out} (seed={seed})")


def cmd_train(args, doc, sections) -> None:
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    tr = sections["training"]
    n_trees = args.trees or tr["n_trees"]
    min_leaf = args.min_leaf or tr["min_leaf"]
    data = Path(args.data)
    train = read_dataset(data / "train.csv")
    test = read_dataset(data / "test.csv")
    ens = fit_ensemble(train.features, train.label, n_trees=int(n_trees), min_leaf=int(min_leaf),
                       seed=int(seed), n_jobs=args.jobs)
    mse = evaluate_mse(ens, test.features, test.label)
    baseline = float(np.mean((test.label - train.label.mean()) ** 2))
    ens = dataclasses.replace(ens, metadata={
        "train_rows": len(train),
        "test_rows": len(test),
        "dataset_seed": train.metadata.get("seed"),
        "test_mse": mse,
        "mean_predictor_mse": baseline,
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ens.save(out / "model.json")
    report = (f"format_version=1\nseed={seed}\nn_trees={n_trees}\nmin_leaf={min_leaf}\n"
              f"test_mse={mse!r}\nmean_predictor_mse={baseline!r}\nratio={mse / baseline!r}\n")
    (out / "train_report.txt").write_text(report)
    print(report, end="")


def cmd_evaluate(args, doc, sections) -> None:
    cfg = _run_config(args, doc)
    ens = _load_model(cfg, any(s.partition(":")[0].strip().lower() == "learned" for s in cfg.strategies))
    report = monte_carlo(cfg, _strategies(cfg, ens), n_jobs=args.jobs)
    report.metadata["model"] = Path(cfg.model).name if cfg.model else "none"
    out = Path(args.out)
    report.write(out)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(report.to_text(), end="")


def cmd_run(args, doc, sections) -> None:
    if not args.strategy and "strategies" not in doc:
        doc = {**doc, "strategies": ["constant:0.01,0.001"]}
    cfg = _run_config(args, doc)
    if len(cfg.strategies) != 1:
        raise ValueError("run takes exactly one --strategy")
    learned = cfg.strategies[0].partition(":")[0].strip().lower() == "learned"
    strategy = _strategies(cfg, _load_model(cfg, learned))[0]
    seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    m = run_filter(cfg, cfg.make_run(seed), strategy, record_velocity=True)

    buf = io.StringIO()
    buf.write(f"# format_version=1\n# seed={cfg.seed}\n# strategy={strategy.name}\n"
              f"# trajectory={cfg.trajectory}\n# srmse={m.srmse!r}\n# smae={m.smae!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "vn", "ve", "vd", "err_n", "err_e", "err_d", "nu_n", "nu_e", "nu_d", "q_trace"])
    for i in range(len(m.t)):
        w.writerow([repr(float(x)) for x in (m.t[i], *m.v_est[i], *m.vel_err[i], *m.innovations[i],
                                             m.q_trace[i])])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.csv").write_text(buf.getvalue())
    print(f"{strategy.name}: srmse={m.srmse:.4f} m/s smae={m.smae:.4f} m/s "
          f"({len(m.t)} DVL epochs, seed={cfg.seed})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hcfnav", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", default=out_default, help="output directory")

    g = sub.add_parser("generate", help="build the labelled window dataset")
    common(g, "data")
    g.add_argument("--window", type=int, help="window length N")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit the bagged tree ensemble")
    common(t, "model")
    t.add_argument("--data", default="data", help="directory holding train.csv and test.csv")
    t.add_argument("--trees", type=int, help="number of trees")
    t.add_argument("--min-leaf", type=int, help="minimum examples per leaf")
    t.add_argument("--jobs", type=int, default=1, help="parallel tree fits")
    t.set_defaults(func=cmd_train)

    for name, helptext, func, default in (
        ("evaluate", "Monte-Carlo comparison of strategies", cmd_evaluate, "report"),
        ("run", "single filter run with one strategy", cmd_run, "run"),
    ):
        e = sub.add_parser(name, help=helptext)
        common(e, default)
        e.add_argument("--model", help="model.json from the train step")
        e.add_argument("--strategy", action="append",
                       help="constant[:QF,QW] | adaptive[:XI] | learned (repeatable)")
        e.add_argument("--trajectory", help="trajectory id, e.g. eval-lawnmower")
        e.add_argument("--duration", type=float, help="run length in seconds")
        if name == "evaluate":
            e.add_argument("--runs", type=int, help="Monte-Carlo runs")
            e.add_argument("--jobs", type=int, default=1, help="parallel runs")
        e.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "runs", None) is not None and args.runs < 1:
        parser.error("--runs must be >= 1")
    try:
        doc, sections = _load_config(args.config)
        args.func(args, doc, sections)
    except (ValueError, TypeError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"hcfnav {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
