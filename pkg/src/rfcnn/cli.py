"""Command-line entry point.

Verbs: gen-data, train, eval, predict, learning-curve. Exit status is 0 on
success, 2 for usage, configuration or I/O problems, and 3 when training
diverges.
"""

import argparse
import logging
import sys

from rfcnn import __version__, pipeline
from rfcnn.config import load_config
from rfcnn.errors import ConfigError, FormatError, TrainingError

EXIT_OK, EXIT_USAGE, EXIT_TRAINING = 0, 2, 3

log = logging.getLogger("rfcnn")


def _common():
    # SUPPRESS lets the flags appear either before or after the verb
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="key=value config file")
    p.add_argument("--seed", type=int, metavar="N", default=argparse.SUPPRESS, help="override the config seed")
    p.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log warnings")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="rfcnn", parents=[common],
                                     description="Eye-region detection and strabismus classification pipeline.")
    parser.add_argument("--version", action="version", version=f"rfcnn {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    sub.add_parser("gen-data", parents=[common], help="render the synthetic dataset into --out")

    p = sub.add_parser("train", parents=[common], help="train detector then classifier; models go to --out")
    p.add_argument("--data", required=True, metavar="DIR", help="dataset root or train split directory")

    p = sub.add_parser("eval", parents=[common], help="score a labeled test split")
    p.add_argument("--models", required=True, metavar="DIR")
    p.add_argument("--data", required=True, metavar="DIR", help="dataset root or test split directory")

    p = sub.add_parser("predict", parents=[common], help="write one report row per image in --input")
    p.add_argument("--models", required=True, metavar="DIR")
    p.add_argument("--input", required=True, metavar="DIR")

    p = sub.add_parser("learning-curve", parents=[common], help="classifier metrics versus training-set size")
    p.add_argument("--sizes", metavar="N,N,...", help="comma-separated ascending sizes (default: config curve_sizes)")
    return parser


def _parse_sizes(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad --sizes {text!r}") from None


def _dispatch(args, cfg):
    out = getattr(args, "out", None)
    if args.verb != "predict" and out is None:
        raise ConfigError(f"{args.verb} needs --out DIR")
    if args.verb == "gen-data":
        counts = pipeline.run_gen_data(cfg, out)
        for split in ("train", "test"):
            c = counts[split]
            print(f"{split}: {c['strabismus'] + c['normal']} images "
                  f"({c['strabismus']} strabismus, {c['normal']} normal)")
    elif args.verb == "train":
        pipeline.run_train(cfg, args.data, out)
    elif args.verb == "eval":
        result = pipeline.run_eval(cfg, args.models, args.data, out)
        print(",".join(("TP", "TN", "FP", "FN", "Se", "Sp", "Acc", "AUC")))
        print(",".join(result["report"].csv_row()))
        print(f"mean IoU {result['mean_iou']:.4f}, no detection {result['n_no_detection']}")
    elif args.verb == "predict":
        result = pipeline.run_predict(cfg, args.models, args.input, out or ".")
        print(f"{result['n_images']} images, {result['status'].count('OK')} scored")
    elif args.verb == "learning-curve":
        sizes = _parse_sizes(args.sizes) if args.sizes else list(cfg.curve_sizes)
        for row in pipeline.run_learning_curve(cfg, sizes, out):
            print(",".join(row))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(getattr(args, "config", None), getattr(args, "seed", None))
        _dispatch(args, cfg)
    except TrainingError as exc:
        log.error("training failed in the %s stage: %s", exc.stage or "unknown", exc)
        return EXIT_TRAINING
    except (ConfigError, FormatError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
