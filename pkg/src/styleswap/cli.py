"""Command-line surface for the pipeline: dataset generation, training,
image conversion, evaluation, the gram/swd comparison, and the
verification suites.

Every command is a pure function of its flags plus the referenced config
files; the effective seed is recorded in each output artifact.  Exit codes:
0 success, 1 validation error (bad flags, missing or invalid inputs),
2 runtime failure.  All errors go to stderr prefixed with ``error:``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import ppm
from . import training as tr
from .data import (DatasetSpec, load_dataset, make_dataset,
                   replicate_channels, save_dataset)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

ADAPT_MANIFEST_SCHEMA_VERSION = 1


class UsageError(Exception):
    """Rejected flags or unusable input files; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_text(path_str: str, what: str) -> str:
    path = Path(path_str)
    if not path.exists():
        raise UsageError(f"missing {what} file: {path}")
    return path.read_text()


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise UsageError("at least one seed is required")
    return seeds


def _image_files(dir_str: str, what: str) -> list[Path]:
    root = Path(dir_str)
    if not root.is_dir():
        raise UsageError(f"{what} directory does not exist: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix in (".ppm", ".pgm"))
    if not files:
        raise UsageError(f"no .ppm/.pgm images under {root}")
    return files


def _load_image_stack(files: list[Path]) -> np.ndarray:
    return np.stack([replicate_channels(ppm.read_image(p)) for p in files])


# ---------------------------------------------------------------------------
# verb handlers


def _cmd_gen_data(args) -> int:
    spec = DatasetSpec.from_json(_read_text(args.spec, "dataset spec"))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    train, test = make_dataset(spec)
    manifest = save_dataset(args.out, spec, train, test)
    n = 2 * (spec.num_train + spec.num_test)
    print(f"wrote {n} samples and {manifest} (seed={spec.seed})")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = tr.TrainConfig.from_json(_read_text(args.config, "train config"))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    _, train_split, _ = load_dataset(args.data)
    state, rows = tr.run_training(cfg, train_split, out_dir=args.out,
                                  resume=args.resume)
    print(f"trained to iteration {state.iteration} (seed={cfg.seed}, "
          f"style_loss_kind={cfg.style_loss_kind})")
    if rows:
        last = rows[-1][1]
        print("final: " + " ".join(
            f"{k}={last[k]:.4f}" for k in
            ("loss_rec_x", "loss_rec_y", "loss_content", "total")))
    print(f"checkpoint at {Path(args.out) / 'checkpoint.ckpt'}")
    return EXIT_OK


def _cmd_adapt(args) -> int:
    cfg, state = tr.load_checkpoint(args.checkpoint)
    input_files = _image_files(args.input, "input")
    style_files = _image_files(args.target_styles, "target-styles")
    src, dst = ("X", "Y") if args.direction == "x_to_y" else ("Y", "X")
    content = _load_image_stack(input_files)
    pool = _load_image_stack(style_files)
    pairing = [i % len(pool) for i in range(len(content))]
    converted = ev.convert_images(state, content, pool[pairing], src, dst)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for path, pick, image in zip(input_files, pairing, converted):
        name = path.stem + ".ppm"
        ppm.write_image(out / name, image)
        entries.append({"input": path.name, "style": style_files[pick].name,
                        "output": name})
    manifest = {
        "schema_version": ADAPT_MANIFEST_SCHEMA_VERSION,
        "checkpoint": str(args.checkpoint),
        "direction": args.direction,
        "train_seed": cfg.seed,
        "images": entries,
    }
    (out / "adapt_manifest.json").write_text(json.dumps(manifest, indent=2)
                                             + "\n")
    print(f"converted {len(entries)} images into {out} "
          f"(direction={args.direction}, train seed={cfg.seed})")
    return EXIT_OK


def _cmd_eval(args) -> int:
    spec, train_split, test_split = load_dataset(args.data)
    report = ev.evaluate_checkpoint(args.checkpoint, spec, train_split,
                                    test_split)
    report_path = Path(args.report)
    if report_path.parent != Path(""):
        report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    for row in report["results"]:
        print(f"{row['direction']}: source_only="
              f"{row['accuracy_source_only']:.4f} "
              f"adapted={row['accuracy_adapted']:.4f}")
    print(f"report written to {report_path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = tr.TrainConfig.from_json(_read_text(args.config, "train config"))
    seeds = _parse_seeds(args.seeds)
    if args.data_spec is not None:
        spec = DatasetSpec.from_json(_read_text(args.data_spec,
                                                "dataset spec"))
    else:
        spec = ev.default_dataset_spec()
    report = ev.compare_style_losses(cfg, spec, seeds=seeds,
                                     out_dir=args.out, jobs=args.jobs)
    for row in report["table"]:
        print(f"{row['direction']} {row['style_loss_kind']}: "
              f"adapted {row['accuracy_adapted_mean']:.4f} "
              f"+/- {row['accuracy_adapted_std']:.4f} "
              f"(source-only {row['accuracy_source_only_mean']:.4f})")
    print(f"artifacts under {args.out}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    report = ev.gradcheck_suite(args.scope)
    print(report.to_json())
    return EXIT_OK if report.passed else EXIT_RUNTIME


def _cmd_oracle(args) -> int:
    if args.cases < 1:
        raise UsageError(f"--cases must be >= 1, got {args.cases}")
    report = ev.run_sw1d_oracle(cases=args.cases)
    print(report.to_json())
    return EXIT_OK if report.passed else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="styleswap",
        description="Content/style disentangled two-domain image adaptation "
                    "with gram and sliced-Wasserstein style losses.")
    sub = parser.add_subparsers(dest="verb", metavar="VERB",
                                parser_class=_Parser, required=True)

    p = sub.add_parser("gen-data",
                       help="render the synthetic two-domain glyph dataset",
                       description="Render the synthetic two-domain glyph "
                                   "dataset described by a spec file into "
                                   "PGM/PPM images plus a JSON manifest.")
    p.add_argument("--spec", required=True, metavar="SPEC.json",
                   help="dataset spec JSON (sizes, seed, domain styles)")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="output directory for images and manifest.json")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="override the spec's seed")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train",
                       help="train one adaptation run from a config file",
                       description="Train the encoder/separator/generator/"
                                   "discriminator stack on a generated "
                                   "dataset directory.")
    p.add_argument("--config", required=True, metavar="CFG.json",
                   help="train config JSON (weights, iterations, seed, ...)")
    p.add_argument("--data", required=True, metavar="DIR",
                   help="dataset directory written by gen-data")
    p.add_argument("--out", required=True, metavar="RUNDIR",
                   help="run directory for metrics.csv and checkpoints")
    p.add_argument("--resume", default=None, metavar="CKPT",
                   help="resume from this checkpoint instead of initializing")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="override the config's seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("adapt",
                       help="re-render images in the other domain's style",
                       description="Convert every image in the input "
                                   "directory using a trained checkpoint, "
                                   "pairing each input with a style image "
                                   "(cycled in sorted order).")
    p.add_argument("--checkpoint", required=True, metavar="CKPT",
                   help="trained checkpoint file")
    p.add_argument("--input", required=True, metavar="DIR",
                   help="directory of content images (.ppm/.pgm)")
    p.add_argument("--target-styles", required=True, metavar="DIR",
                   help="directory of style images (.ppm/.pgm)")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="output directory for converted .ppm images")
    p.add_argument("--direction", choices=("x_to_y", "y_to_x"),
                   default="x_to_y",
                   help="which domain the inputs belong to (default x_to_y)")
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("eval",
                       help="accuracy report for one trained checkpoint",
                       description="Measure source-only and adapted "
                                   "classification accuracy in both "
                                   "directions for one checkpoint.")
    p.add_argument("--checkpoint", required=True, metavar="CKPT",
                   help="trained checkpoint file")
    p.add_argument("--data", required=True, metavar="DIR",
                   help="dataset directory written by gen-data")
    p.add_argument("--report", required=True, metavar="OUT.json",
                   help="where to write the JSON report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare",
                       help="gram vs swd paired-seed comparison",
                       description="Train both style-loss variants on "
                                   "identical seeds, then report adapted "
                                   "accuracy as a table, JSON report, and "
                                   "sample grids.")
    p.add_argument("--config", required=True, metavar="CFG.json",
                   help="train config JSON; style_loss_kind is overridden "
                        "per variant")
    p.add_argument("--seeds", default="5688,9901,2516", metavar="A,B,C",
                   help="comma-separated run seeds (default 5688,9901,2516)")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="output directory for runs, table, report, grids")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="parallel training processes (default 1)")
    p.add_argument("--data-spec", default=None, metavar="SPEC.json",
                   help="dataset spec JSON (default: the standard desk-scale "
                        "dataset)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gradcheck",
                       help="finite-difference verification of gradients",
                       description="Check reverse-mode gradients against "
                                   "central finite differences and print the "
                                   "report JSON.")
    p.add_argument("--scope", required=True,
                   choices=("ops", "losses", "end_to_end"),
                   help="which gradient suite to run")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("oracle",
                       help="brute-force verification of the 1-D transport "
                            "solver",
                       description="Compare the sorted 1-D transport cost "
                                   "against exhaustive assignment search and "
                                   "print the report JSON.")
    p.add_argument("--which", required=True, choices=("sw1d",),
                   help="which oracle to run")
    p.add_argument("--cases", type=int, default=200, metavar="N",
                   help="number of random instances (default 200)")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except tr.TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
