"""Command-line entry point: ``dpmerf <subcommand> [flags]``.

Settings are resolved in increasing precedence:

1. built-in defaults (see :class:`dpmerf.pipeline.RunConfig`),
2. the ``[DEFAULT]`` section of ``--config FILE``,
3. the section of that file named after the subcommand (e.g. ``[train]``),
4. command-line flags.

Config files are INI-style ``key = value`` text.  Keys use the RunConfig
field names; kebab-case spellings are accepted too.

Exit codes: 0 ok, 2 invalid input or config, 3 unsatisfiable budget,
4 model-file version mismatch.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
import warnings
from dataclasses import fields

from . import modelfile
from .data import GridMixture, Schema, load_tabular, make_gaussian_grid, nll
from .errors import DPMerfError, InvalidConfig, ModelVersionError, Unsatisfiable
from .evaluate import EvalReport, mode_coverage, train_eval_classifier
from .generator import sample
from .pipeline import RunConfig, release_metadata, release_phase, training_phase
from .privacy import DEFAULT_ORDERS, PrivacyBudget, calibrate_sigma, error_bound

log = logging.getLogger("dpmerf")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_VERSION = 0, 2, 3, 4

# options of the non-train subcommands: name -> (type, default, help)
_OPTIONS = {
    "make-gaussians": {
        "out_dir": (str, "gaussians", "directory for train.csv, test.csv, schema.json"),
        "seed": (int, 0, "sampling seed"),
        "spacing": (float, 1.0, "distance between neighbouring grid means"),
        "std": (float, 0.2, "per-component standard deviation"),
        "grid_size": (int, 5, "components per grid side"),
        "samples_per_component": (int, 4000, "rows drawn per component"),
        "test_fraction": (float, 0.1, "held-out share of each component"),
    },
    "calibrate": {
        "epsilon": (float, 1.0, "target epsilon"),
        "delta": (float, 1e-5, "target delta"),
        "num_releases": (int, 1, "Gaussian releases sharing one sigma"),
        "conversion": (str, "improved", "RDP to DP conversion: improved or classic"),
    },
    "sample": {
        "model": (str, "run/model.bin", "model file written by train"),
        "n": (int, 1000, "rows to generate"),
        "seed": (int, 0, "sampling seed"),
        "out": (str, "synthetic.csv", "output CSV"),
    },
    "evaluate": {
        "train": (str, "", "CSV to fit classifiers on (usually synthetic)"),
        "test": (str, "", "held-out real CSV"),
        "schema": (str, "", "schema for both files"),
        "test_schema": (str, "", "schema for the test file if it differs"),
        "classifier": (str, "all", "logreg, nearest_centroid or all"),
        "seed": (int, 0, "classifier seed"),
        "grid": (bool, False, "also report NLL and mode coverage on the default grid mixture"),
    },
    "bound": {
        "num_features": (int, 10000, "number of random features D"),
        "num_samples": (int, 60000, "dataset size m"),
        "sigma": (float, 0.0, "noise multiplier"),
    },
}

_TRAIN_HELP = {
    "data": "training CSV", "schema": "schema JSON", "out_dir": "output directory",
    "mode": "unlabeled, balanced, imbalanced or hetero",
    "bandwidth": "kernel length scale in normalized units, or 'median'",
    "num_features": "number of random features D (even)",
    "undersample": "keep this share of the majority class",
    "hidden": "comma-separated hidden widths",
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _coerce_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpmerf", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI-style config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="release private statistics and fit a generator")
    for f in fields(RunConfig):
        # defaults are applied later so the config file can sit in between
        extra = {"nargs": "?", "const": "true"} if f.type == "bool" else {}
        train.add_argument(_flag(f.name), dest=f.name, default=None, **extra,
                           help=f"{_TRAIN_HELP.get(f.name, '')} (default: {f.default})".strip())
    for command, options in _OPTIONS.items():
        p = sub.add_parser(command)
        for name, (kind, default, text) in options.items():
            extra = {"nargs": "?", "const": "true"} if kind is bool else {}
            p.add_argument(_flag(name), dest=name, default=None, **extra,
                           help=f"{text} (default: {default})")
    return parser


def _file_settings(path, command) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config file: {exc}", "config") from None
    except configparser.Error as exc:
        raise InvalidConfig(f"malformed config file: {exc}", "config") from None
    section = cp[command] if cp.has_section(command) else cp.defaults()
    return {k.replace("-", "_"): v for k, v in section.items()}


def resolve(args: argparse.Namespace, known) -> dict:
    """Merge config-file values and flags for the fields in ``known``."""
    settings = _file_settings(args.config, args.command)
    unknown = sorted(set(settings) - set(known))
    if unknown:
        raise InvalidConfig(f"unknown config key {unknown[0]!r}", unknown[0])
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    return settings


def _typed_options(command, args) -> dict:
    options = _OPTIONS[command]
    raw = resolve(args, options)
    out = {}
    for name, (kind, default, _) in options.items():
        if name not in raw:
            out[name] = default
            continue
        try:
            out[name] = _coerce_bool(raw[name]) if kind is bool else kind(raw[name])
        except (TypeError, ValueError):
            raise InvalidConfig(f"{name}: cannot interpret {raw[name]!r}", name) from None
    return out


def _emit(**values) -> None:
    print(" ".join(f"{k}={_fmt(v)}" for k, v in values.items()))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# --- subcommands ----------------------------------------------------------

def cmd_make_gaussians(opts: dict) -> int:
    try:
        mixture = GridMixture(spacing=opts["spacing"], std=opts["std"], grid_size=opts["grid_size"],
                              samples_per_component=opts["samples_per_component"],
                              test_fraction=opts["test_fraction"])
    except ValueError as exc:
        raise InvalidConfig(str(exc), getattr(exc, "field", None) or "grid") from None
    train, test, mixture = make_gaussian_grid(opts["seed"], mixture)
    os.makedirs(opts["out_dir"], exist_ok=True)
    train.write_csv(os.path.join(opts["out_dir"], "train.csv"))
    test.write_csv(os.path.join(opts["out_dir"], "test.csv"))
    mixture.schema().save(os.path.join(opts["out_dir"], "schema.json"))
    _emit(train_rows=len(train), test_rows=len(test), out_dir=opts["out_dir"])
    return EXIT_OK


def cmd_calibrate(opts: dict) -> int:
    budget = PrivacyBudget(opts["epsilon"], opts["delta"], opts["num_releases"])
    if opts["conversion"] not in ("improved", "classic"):
        raise InvalidConfig("conversion must be 'improved' or 'classic'", "conversion")
    cal = calibrate_sigma(budget, conversion=opts["conversion"])
    _emit(sigma=cal.sigma, epsilon=cal.epsilon, order=cal.order, delta=budget.delta,
          num_releases=budget.num_releases, conversion=opts["conversion"])
    _emit(grid_size=len(DEFAULT_ORDERS), grid_min=float(DEFAULT_ORDERS[0]),
          grid_max=float(DEFAULT_ORDERS[-1]), grid="geometric")
    return EXIT_OK


def cmd_train(config: RunConfig) -> int:
    """Steps run in order; the data file is read only inside release_phase."""
    if not config.data or not config.schema:
        raise InvalidConfig("train needs --data and --schema", "data" if not config.data else "schema")
    rel = release_phase(config)
    result, probs = training_phase(rel, config)

    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "config.echo"), "w", encoding="utf-8") as fh:
        cp = configparser.ConfigParser()
        cp["train"] = {k: str(v) for k, v in config.to_dict().items()}
        cp.write(fh)
    stored = {k: v for k, v in config.to_dict().items() if k != "out_dir"}
    meta = release_metadata(rel)
    bundle = modelfile.ModelBundle(rel.fmap, result.params, rel.schema, tuple(probs), meta, stored)
    modelfile.save(os.path.join(config.out_dir, "model.bin"), bundle)
    with open(os.path.join(config.out_dir, "trace.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(result.losses):
            writer.writerow([step, repr(float(loss))])
    report = dict(mode=config.mode, rows=rel.release.num_samples, releases=meta["num_releases"],
                  sigma=meta["sigma"], epsilon_target=meta["epsilon_target"],
                  epsilon_consumed=meta["epsilon_achieved"], delta=meta["delta"],
                  rdp_order=meta["rdp_order"], bandwidth=rel.fmap.bandwidth,
                  final_loss=float(result.losses[-1]) if len(result.losses) else float("nan"))
    with open(os.path.join(config.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        for k, v in report.items():
            fh.write(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n")
    _emit(**{k: report[k] for k in ("sigma", "epsilon_consumed", "delta", "final_loss")},
          out_dir=config.out_dir)
    return EXIT_OK


def cmd_sample(opts: dict) -> int:
    if opts["n"] < 0:
        raise InvalidConfig("n must be >= 0", "n")
    try:
        bundle = modelfile.load(opts["model"])
    except OSError as exc:
        raise InvalidConfig(f"cannot read model: {exc}", "model") from None
    ds = sample(bundle.params, opts["n"], bundle.label_distribution, opts["seed"], bundle.schema)
    ds.write_csv(opts["out"])
    _emit(rows=len(ds), out=opts["out"])
    return EXIT_OK


def cmd_evaluate(opts: dict) -> int:
    if not (opts["train"] and opts["test"] and opts["schema"]):
        missing = next(k for k in ("train", "test", "schema") if not opts[k])
        raise InvalidConfig(f"evaluate needs --{missing}", missing)
    schema = Schema.load(opts["schema"])
    test_schema = Schema.load(opts["test_schema"]) if opts["test_schema"] else schema
    train = load_tabular(opts["train"], schema)
    test = load_tabular(opts["test"], test_schema)
    kinds = ("logreg", "nearest_centroid") if opts["classifier"] == "all" else (opts["classifier"],)
    reports = []
    for kind in kinds:
        reports.extend(train_eval_classifier(train, test, kind, opts["seed"]))
    if opts["grid"]:
        mixture = GridMixture()
        pts = train.numeric_raw()
        reports.append(EvalReport("nll", nll(pts, train.y, mixture)))
        reports.append(EvalReport("mode_coverage", mode_coverage(pts, train.y, mixture)))
    for r in reports:
        print(r.format())
    return EXIT_OK


def cmd_bound(opts: dict) -> int:
    value = error_bound(opts["num_features"], opts["num_samples"], opts["sigma"])
    _emit(error_bound=value)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        if args.command == "train":
            names = [f.name for f in fields(RunConfig)]
            return cmd_train(RunConfig(**resolve(args, names)))
        opts = _typed_options(args.command, args)
        handler = {"make-gaussians": cmd_make_gaussians, "calibrate": cmd_calibrate,
                   "sample": cmd_sample, "evaluate": cmd_evaluate, "bound": cmd_bound}[args.command]
        return handler(opts)
    except Unsatisfiable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ModelVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except InvalidConfig as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DPMerfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
