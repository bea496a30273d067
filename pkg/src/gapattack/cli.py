"""Command-line front end.

Subcommands: attack, transform, make-synthetic, train-toy, report. Exit
codes: 0 success, 1 usage/config error, 2 unusable input image, 3
oracle/backend failure. All outputs land under --out; payloads carry no
timestamps, so identical config + seed reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .attack import AttackParams, run_attack, trace_summary, trace_to_csv
from .errors import (
    DegenerateImageError,
    GapAttackError,
    MalformedFileError,
    OracleError,
    ShapeMismatchError,
)
from .image import Image, load_image, save_image
from .netlib import (
    dense,
    forward,
    load_architecture,
    load_weights,
    random_model,
    relu,
    save_architecture,
    save_weights,
    softmax,
    train_toy,
)
from .oracle import InProcessOracle, Oracle, ReplayOracle, SubprocessOracle
from .report import build_report
from .synthetic import load_dataset, make_dataset, save_dataset
from .transforms import apply_spec, parse_spec


class _UsageError(Exception):
    """Bad flags or config → exit 1."""


class _InputError(Exception):
    """Input image/dataset unusable → exit 2."""


class _BackendError(Exception):
    """Victim could not be brought up → exit 3."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2
    # for bad input images, so usage problems exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise _UsageError(f"{what} file not found: {path}")
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{what} file {path} is not valid JSON: {exc}")


def _build_oracle(spec) -> Oracle:
    if not isinstance(spec, dict) or "backend" not in spec:
        raise _UsageError("victim spec must be an object with a 'backend' key")
    backend = spec["backend"]
    try:
        if backend == "in_process":
            arch_path = spec.get("architecture")
            if not arch_path:
                raise _UsageError("in_process victim needs an 'architecture' file")
            input_shape, layers, class_count = load_architecture(arch_path)
            model = random_model(
                layers, input_shape, seed=int(spec.get("init_seed", 0)),
                class_count=class_count,
            )
            if spec.get("weights"):
                model = load_weights(spec["weights"], model)
            return InProcessOracle(model)
        if backend == "subprocess":
            command = spec.get("command")
            if not isinstance(command, list) or not command:
                raise _UsageError("subprocess victim needs a 'command' argv list")
            return SubprocessOracle([str(part) for part in command])
        if backend == "replay":
            table = spec.get("table")
            if not table:
                raise _UsageError("replay victim needs a 'table' file")
            return ReplayOracle.from_file(table)
    except FileNotFoundError as exc:
        raise _BackendError(f"victim file missing: {exc.filename or exc}")
    except (MalformedFileError, ValueError) as exc:
        raise _BackendError(f"cannot load victim: {exc}")
    raise _UsageError(f"unknown victim backend {backend!r}")


def _load_input(spec) -> Image:
    if not isinstance(spec, dict):
        raise _UsageError("input spec must be an object")
    try:
        if "image" in spec:
            return load_image(spec["image"])
        if "dataset" in spec:
            dataset = load_dataset(spec["dataset"])
            split = spec.get("split", "test")
            if split not in ("train", "test"):
                raise _UsageError(f"input split must be train or test, got {split!r}")
            examples = dataset.train if split == "train" else dataset.test
            index = int(spec.get("index", 0))
            if not 0 <= index < len(examples):
                raise _InputError(
                    f"input index {index} out of range for {len(examples)} {split} images"
                )
            return examples[index][0]
    except FileNotFoundError as exc:
        raise _InputError(f"input not found: {exc.filename or exc}")
    except (MalformedFileError, ValueError) as exc:
        raise _InputError(f"cannot load input: {exc}")
    raise _UsageError("input spec needs an 'image' path or a 'dataset' directory")


def _attack_params(section, overrides) -> AttackParams:
    if not isinstance(section, dict):
        raise _UsageError("config needs an 'attack' section")
    known = {field.name for field in AttackParams.__dataclass_fields__.values()}
    unknown = set(section) - known
    if unknown:
        raise _UsageError(f"unknown attack parameter(s): {sorted(unknown)}")
    merged = dict(section)
    merged.update(overrides)
    if "max_distance" not in merged:
        raise _UsageError("attack section must set max_distance")
    try:
        return AttackParams(**merged)
    except (TypeError, ValueError) as exc:
        raise _UsageError(f"bad attack parameters: {exc}")


def cmd_attack(args) -> int:
    config = _read_json(args.config, "config")
    overrides = {}
    if args.max_distance is not None:
        overrides["max_distance"] = args.max_distance
    params = _attack_params(config.get("attack", {}), overrides)
    img = _load_input(config.get("input"))
    formats = config.get("outputs", {}).get("formats", ["png"])
    for fmt in formats:
        if fmt not in ("png", "ppm"):
            raise _UsageError(f"unknown output format {fmt!r}")

    oracle = _build_oracle(config.get("victim"))
    try:
        trace = run_attack(
            oracle, img, params, distance_sd=args.distance_sd, jobs=args.jobs
        )
    finally:
        if isinstance(oracle, SubprocessOracle):
            oracle.close()

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trace.csv"), "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(trace))
    summary = trace_summary(trace, params)
    with open(os.path.join(args.out, "trace.summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for fmt in formats:
        save_image(img, os.path.join(args.out, f"original.{fmt}"), format=fmt)
        save_image(trace.final_image, os.path.join(args.out, f"final.{fmt}"), format=fmt)
        if trace.misclassified_image is not None:
            save_image(
                trace.misclassified_image,
                os.path.join(args.out, f"misclassified.{fmt}"),
                format=fmt,
            )
    for row in trace.rows:
        if row.snapshot is not None:
            save_image(
                row.snapshot,
                os.path.join(args.out, f"snapshot_{row.iteration:04d}.png"),
                format="png",
            )

    mis = trace.first_misclassification_iteration
    print(
        f"attack: target={trace.target} termination={trace.termination} "
        f"iterations={trace.iterations} "
        f"misclassified_at={mis if mis is not None else 'never'} "
        f"distance={trace.final_distance:.4f} queries={trace.total_queries}"
    )
    return 0


def cmd_transform(args) -> int:
    try:
        img = load_image(args.image)
    except FileNotFoundError:
        raise _InputError(f"input not found: {args.image}")
    except (MalformedFileError, ValueError) as exc:
        raise _InputError(f"cannot load input: {exc}")
    try:
        specs = [parse_spec(text) for text in args.spec]
    except ValueError as exc:
        raise _UsageError(str(exc))

    ext = os.path.splitext(args.image)[1].lower()
    fmt = "ppm" if ext in (".ppm", ".pgm", ".pnm") else "png"
    stem = os.path.splitext(os.path.basename(args.image))[0]
    os.makedirs(args.out, exist_ok=True)

    outputs = []
    for spec in specs:
        result = apply_spec(img, spec)
        path = os.path.join(args.out, f"{stem}_{spec.label()}{ext or '.png'}")
        save_image(result, path, format=fmt)
        outputs.append((spec.label(), result))
        print(f"transform: wrote {path}")

    if args.victim:
        victim_spec = _read_json(args.victim, "victim")
        oracle = _build_oracle(victim_spec)
        try:
            lines = ["transform,predicted_class,confidence"]
            for label, picture in [("none", img)] + outputs:
                probs = oracle.classify(picture)
                best = probs.argmax()
                lines.append(f"{label},{best},{float(probs.scores[best])!r}")
        finally:
            if isinstance(oracle, SubprocessOracle):
                oracle.close()
        table = os.path.join(args.out, "transforms.csv")
        with open(table, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"transform: wrote {table}")
    return 0


def cmd_make_synthetic(args) -> int:
    try:
        height, width = (int(part) for part in args.size.lower().split("x"))
    except ValueError:
        raise _UsageError(f"--size must look like 8x8, got {args.size!r}")
    try:
        dataset = make_dataset(
            args.classes, args.per_class, (height, width), seed=args.seed
        )
    except ValueError as exc:
        raise _UsageError(str(exc))
    save_dataset(dataset, args.out)
    total = len(dataset.train) + len(dataset.test)
    print(
        f"make-synthetic: {total} images ({len(dataset.train)} train / "
        f"{len(dataset.test)} test), {dataset.class_count} classes, in {args.out}"
    )
    return 0


def cmd_train_toy(args) -> int:
    try:
        dataset = load_dataset(args.dataset)
    except FileNotFoundError as exc:
        raise _InputError(f"dataset not found: {exc.filename or exc}")
    except MalformedFileError as exc:
        raise _InputError(str(exc))
    layers = []
    if args.hidden > 0:
        layers += [dense(args.hidden), relu()]
    layers += [dense(dataset.class_count), softmax()]
    try:
        result = train_toy(dataset.train, layers, args.epochs, args.lr, args.seed)
    except ValueError as exc:
        raise _UsageError(str(exc))

    hits = sum(
        1 for img, label in dataset.test if forward(result.model, img).argmax() == label
    )
    test_accuracy = hits / len(dataset.test) if dataset.test else float("nan")

    os.makedirs(args.out, exist_ok=True)
    save_architecture(result.model, os.path.join(args.out, "arch.json"))
    save_weights(result.model, os.path.join(args.out, "weights.capw"))
    summary = {
        "dataset": args.dataset,
        "hidden": args.hidden,
        "epochs": args.epochs,
        "lr": args.lr,
        "seed": args.seed,
        "final_loss": result.loss_history[-1],
        "train_accuracy": result.train_accuracy,
        "test_accuracy": test_accuracy,
    }
    with open(os.path.join(args.out, "train_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"train-toy: train_accuracy={result.train_accuracy:.4f} "
        f"test_accuracy={test_accuracy:.4f} final_loss={result.loss_history[-1]:.6f}"
    )
    return 0


def cmd_report(args) -> int:
    try:
        written = build_report(args.traces, args.out)
    except FileNotFoundError as exc:
        raise _InputError(f"trace not found: {exc.filename or exc}")
    except (MalformedFileError, ValueError, KeyError) as exc:
        raise _InputError(f"cannot read traces: {exc}")
    for path in written:
        print(f"report: wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gapattack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="run the greedy attack from a config file")
    p_attack.add_argument("--config", required=True, help="experiment config (JSON)")
    p_attack.add_argument("--out", default="out", help="output directory")
    p_attack.add_argument("--seed", type=int, default=0, help="unused by the attack itself; accepted for sweep uniformity")
    p_attack.add_argument("--jobs", type=int, default=1, help="parallel probe threads (backend must be concurrency-safe)")
    p_attack.add_argument(
        "--distance-sd", choices=("original", "current"), default="original",
        dest="distance_sd", help="distance denominator: frozen original sd map or per-round recompute",
    )
    p_attack.add_argument("--max-distance", type=float, default=None, dest="max_distance", help="override the config's distance budget")
    p_attack.set_defaults(func=cmd_attack)

    p_transform = sub.add_parser("transform", help="apply affine transforms to an image")
    p_transform.add_argument("image", help="input image (ppm/pgm/png)")
    p_transform.add_argument(
        "--spec", action="append", required=True,
        help="rotate:DEG | shift:DX,DY | zoom:FACTOR (repeatable)",
    )
    p_transform.add_argument("--out", default="transformed", help="output directory")
    p_transform.add_argument("--victim", default=None, help="victim spec (JSON) to classify each output")
    p_transform.set_defaults(func=cmd_transform)

    p_make = sub.add_parser("make-synthetic", help="generate the glyph dataset")
    p_make.add_argument("--classes", type=int, default=10)
    p_make.add_argument("--per-class", type=int, default=50, dest="per_class")
    p_make.add_argument("--size", default="8x8", help="image size, HxW")
    p_make.add_argument("--seed", type=int, default=0)
    p_make.add_argument("--out", default="dataset", help="output directory")
    p_make.set_defaults(func=cmd_make_synthetic)

    p_train = sub.add_parser("train-toy", help="train a softmax victim on a dataset")
    p_train.add_argument("--dataset", required=True, help="dataset directory (with manifest.json)")
    p_train.add_argument("--hidden", type=int, default=0, help="hidden units (0 = plain logistic)")
    p_train.add_argument("--epochs", type=int, default=400)
    p_train.add_argument("--lr", type=float, default=0.5)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", default="victim", help="output directory")
    p_train.set_defaults(func=cmd_train_toy)

    p_report = sub.add_parser("report", help="summarize attack traces")
    p_report.add_argument("traces", nargs="+", help="trace CSV files (summary JSONs must sit beside them)")
    p_report.add_argument("--out", default="report", help="output directory")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"gapattack: error: {exc}", file=sys.stderr)
        return 1
    except (_InputError, DegenerateImageError, ShapeMismatchError) as exc:
        print(f"gapattack: input error: {exc}", file=sys.stderr)
        return 2
    except (_BackendError, OracleError) as exc:
        print(f"gapattack: oracle error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"gapattack: error: {exc}", file=sys.stderr)
        return 1
    except GapAttackError as exc:
        print(f"gapattack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
