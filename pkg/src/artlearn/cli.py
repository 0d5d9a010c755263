"""Command-line entry point: ``artlearn {fit,predict,importance,sim}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Diagnostics go to stderr; data go to files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import ArtError, ConfigurationError, DataError, Loss, NumericalError, Task, read_csv
from .learners import make_learner
from .persist import load_model, save_model
from .pipeline import ArtConfig, WeightMode, art_iam_fit, variable_importance
from .simbench import _test_error
from .suites import PROFILES, SIM_NAMES, build_suite, run_sweeps

logger = logging.getLogger("artlearn")

# Options that may come from --config; the value is the default when neither
# the file nor the command line sets them.
_FIT_DEFAULTS = {
    "primary": None,
    "aux": [],
    "response": None,
    "task": "regression",
    "learner": [],
    "loss": None,
    "tau": 0.5,
    "seed": 0,
    "lambda": None,
    "splits": 10,
    "split_ratio": 0.5,
    "weight_mode": "sequential",
    "priors": None,
    "out": None,
    "report": None,
    "jobs": 1,
}
_SIM_DEFAULTS = {"profile": "full", "seed": 0, "out": None, "jobs": 1}
_LOSSES = ("squared", "asymmetric", "cross-entropy")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_learner(text: str):
    """``name`` or ``name:key=value,key=value`` -> ``(name, params)``."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigurationError(f"learner: expected key=value in {text!r}")
        params[key.strip().replace("-", "_")] = _parse_value(value.strip())
    return name.strip(), params


def _parse_priors(value):
    if value is None or isinstance(value, list):
        return value
    try:
        return [float(x) for x in str(value).split(",")]
    except ValueError:
        raise ConfigurationError(f"priors: expected a comma-separated list of numbers, got {value!r}") from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config: top level must be an object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    file_cfg = _load_config(getattr(args, "config", None))
    unknown = sorted(set(file_cfg) - set(defaults))
    if unknown:
        raise ConfigurationError(f"config: unknown field(s) {', '.join(unknown)}")
    merged = dict(defaults)
    merged.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None and value != []:
            merged[key] = value
    return merged


def _make_loss(cfg, task: Task) -> Loss:
    kind = cfg["loss"] or ("squared" if task is Task.REGRESSION else "cross-entropy")
    if kind == "squared":
        return Loss.squared()
    if kind == "asymmetric":
        return Loss.asymmetric_squared(float(cfg["tau"]))
    if kind == "cross-entropy":
        if task is not Task.CLASSIFICATION:
            raise ConfigurationError("loss: cross-entropy needs --task classification")
        return Loss.cross_entropy()
    raise ConfigurationError(f"loss: unknown loss {kind!r}; choose from {', '.join(_LOSSES)}")


def _make_learners(cfg, task: Task):
    entries = cfg["learner"] or ["ols" if task is Task.REGRESSION else "logistic"]
    learners = []
    for entry in entries:
        if isinstance(entry, dict):
            name, params = entry.get("name"), dict(entry.get("params", {}))
        else:
            name, params = parse_learner(str(entry))
        learner = make_learner(name, **params)
        if task not in learner.tasks:
            raise ConfigurationError(f"learner: {name!r} does not support {task.value} data")
        learners.append(learner)
    return learners


def _art_config(cfg) -> ArtConfig:
    try:
        mode = WeightMode(cfg["weight_mode"])
    except ValueError:
        raise ConfigurationError(f"weight-mode: expected sequential or simplified, got {cfg['weight_mode']!r}") from None
    return ArtConfig(
        lam=None if cfg["lambda"] is None else float(cfg["lambda"]),
        priors=_parse_priors(cfg["priors"]),
        split_ratio=float(cfg["split_ratio"]),
        n_splits=int(cfg["splits"]),
        weight_mode=mode,
        seed=int(cfg["seed"]),
        n_jobs=int(cfg["jobs"]),
    )


def weight_report(model, dataset_names) -> str:
    """Aligned table of every candidate's final weight."""
    R = len(model.learner_names)
    lines = [f"# lambda={model.lam!r} weight_mode={model.config_used.weight_mode.value} seed={model.config_used.seed}"]
    rows = [("candidate", "dataset", "learner", "weight")]
    for c, (w, g) in enumerate(zip(model.final_weights, model.candidates)):
        m, r = divmod(c, R)
        rows.append((g.label, dataset_names[m], model.learner_names[r], f"{w:.6f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    for row in rows:
        lines.append("  ".join(cell.ljust(wd) for cell, wd in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    cfg = _merge(args, _FIT_DEFAULTS)
    if cfg["primary"] is None:
        raise ConfigurationError("primary: a primary CSV is required")
    if cfg["response"] is None:
        raise ConfigurationError("response: the response column name is required")
    if cfg["out"] is None:
        raise ConfigurationError("out: a model output path is required")
    try:
        task = Task(cfg["task"])
    except ValueError:
        raise ConfigurationError(f"task: expected regression or classification, got {cfg['task']!r}") from None
    learners = _make_learners(cfg, task)
    loss = _make_loss(cfg, task)
    config = _art_config(cfg)

    primary, names = read_csv(cfg["primary"], cfg["response"], task)
    auxiliaries = [read_csv(p, cfg["response"], task, columns=names)[0] for p in cfg["aux"]]
    model = art_iam_fit(primary, auxiliaries, learners, loss, config)
    save_model(cfg["out"], model, names, cfg["response"], loss, [l.params for l in learners])

    report = weight_report(model, ["primary"] + [Path(p).name for p in cfg["aux"]])
    if cfg["report"]:
        Path(cfg["report"]).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)
    return 0


def _write_or_print(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_predict(args) -> int:
    model, meta = load_model(args.model)
    with open(args.data, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    header = [h.strip() for h in header]
    response = meta["response"] if meta["response"] in header else None
    data, _ = read_csv(args.data, response, model.task if response else Task.REGRESSION, columns=meta["feature_names"])
    if data.n == 0:
        raise DataError(f"{args.data}: no data rows")
    prob = model.predict(data.features)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if model.task is Task.CLASSIFICATION:
        w.writerow(["probability", "label"])
        for p in prob:
            w.writerow([repr(float(p)), int(p > 0.5)])
    else:
        w.writerow(["prediction"])
        for p in prob:
            w.writerow([repr(float(p))])
    _write_or_print(buf.getvalue(), args.out)

    if response is not None:
        err = _test_error(model.task, prob, data.response)
        kind = "misclassification rate" if model.task is Task.CLASSIFICATION else "mean squared error"
        line = f"{time.strftime('%Y-%m-%dT%H:%M:%S')} predict model={args.model} data={args.data} n={data.n} {kind}={err!r}"
        logger.info(line)
        if args.log:
            with open(args.log, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
    return 0


def cmd_importance(args) -> int:
    model, meta = load_model(args.model)
    vi = variable_importance(model).vi
    order = sorted(range(vi.size), key=lambda j: (-vi[j], j))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "importance"])
    for j in order:
        w.writerow([meta["feature_names"][j], repr(float(vi[j]))])
    _write_or_print(buf.getvalue(), args.out)
    return 0


def cmd_sim(args) -> int:
    cfg = _merge(args, _SIM_DEFAULTS)
    if cfg["out"] is None:
        raise ConfigurationError("out: an output directory is required")
    sweeps, reps = build_suite(args.name, cfg["profile"], int(cfg["seed"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = run_sweeps(sweeps, reps, n_jobs=int(cfg["jobs"]))
    wall = time.perf_counter() - start

    (out / "results.csv").write_text(result.to_csv(), encoding="utf-8")
    (out / "summary.csv").write_text(result.summary_csv(), encoding="utf-8")
    files = ["results.csv", "summary.csv"]
    if result.importance:
        (out / "importance.csv").write_text(result.importance_csv(), encoding="utf-8")
        files.append("importance.csv")
    manifest = {
        "name": args.name,
        "profile": cfg["profile"],
        "seed": int(cfg["seed"]),
        "replications": reps,
        "sweeps": [sw.describe() for sw in sweeps],
        "files": files,
        "version": __version__,
        "wall_time_seconds": round(wall, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("%s (%s profile) finished in %.1f s", args.name, cfg["profile"], wall)
    return 0


def _add_art_flags(p):
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--lambda", dest="lambda", type=float, help="temperature; default follows the sample-size rule")
    p.add_argument("--splits", type=int, help="maximum number of random primary splits (default 10)")
    p.add_argument("--split-ratio", dest="split_ratio", type=float, help="training share of each split (default 0.5)")
    p.add_argument("--weight-mode", dest="weight_mode", choices=[m.value for m in WeightMode])
    p.add_argument("--priors", help="comma-separated prior weights, one per candidate")
    p.add_argument("--jobs", type=int, help="worker threads (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artlearn", description="Transfer learning by aggregating auxiliary-data candidates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit an aggregated model and write a model file")
    fit.add_argument("--config", help="JSON file with any of the fit options; flags override it")
    fit.add_argument("--primary", help="primary CSV")
    fit.add_argument("--aux", action="append", default=[], help="auxiliary CSV (repeatable)")
    fit.add_argument("--response", help="name of the response column")
    fit.add_argument("--task", choices=[t.value for t in Task])
    fit.add_argument(
        "--learner", action="append", default=[], help="learner as name[:key=value,...] (repeatable); e.g. knn:k=7"
    )
    fit.add_argument("--loss", choices=_LOSSES)
    fit.add_argument("--tau", type=float, help="asymmetry of the asymmetric squared loss")
    fit.add_argument("--out", help="model file to write")
    fit.add_argument("--report", help="write the weight report here instead of stdout")
    _add_art_flags(fit)
    fit.set_defaults(func=cmd_fit)

    pred = sub.add_parser("predict", help="predict with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True, help="CSV with the model's feature columns")
    pred.add_argument("--out", help="predictions CSV (default stdout)")
    pred.add_argument("--log", help="run log to append the test error to when the response column is present")
    pred.set_defaults(func=cmd_predict)

    imp = sub.add_parser("importance", help="variable importance of a saved model")
    imp.add_argument("--model", required=True)
    imp.add_argument("--out", help="importance CSV (default stdout)")
    imp.set_defaults(func=cmd_importance)

    sim = sub.add_parser("sim", help="run a benchmark suite")
    sim.add_argument("name", help=f"one of: {', '.join(SIM_NAMES)}")
    sim.add_argument("--config", help="JSON file with profile/seed/out/jobs; flags override it")
    sim.add_argument("--profile", choices=sorted(PROFILES))
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--jobs", type=int, help="replications run on this many threads")
    sim.set_defaults(func=cmd_sim)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ArtError as exc:
        print(f"artlearn {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"artlearn {args.command}: numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except OSError as exc:
        print(f"artlearn {args.command}: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
