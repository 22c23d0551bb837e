from __future__ import annotations

import argparse
import sys
from typing import Optional

import penaltylearn.cli.commands
import penaltylearn.const
import penaltylearn.log
import penaltylearn.settings
from penaltylearn.errors import PenaltyLearnError, UserInputError


class GlobalContext:
    """State shared by the subcommands: the settings defaults layer"""

    settings: penaltylearn.settings.Settings

    def __init__(self, settings: Optional[penaltylearn.settings.Settings] = None):
        self.settings = settings or penaltylearn.settings.Settings()
        return

    @property
    def kmax(self) -> int:
        return self.settings.getint("Segmentation", "kmax", penaltylearn.const.DEFAULT_KMAX)

    @property
    def seed(self) -> int:
        return self.settings.getint("Experiment", "seed", penaltylearn.const.DEFAULT_SEED)


#
# The application context, set by `PenaltyLearnCli`
#
context: GlobalContext


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors, those are user errors here"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(UserInputError.exit_code, f"{self.prog}: error: {message}\n")


def version_string() -> str:
    return (
        f"{penaltylearn.const.PROGNAME} {penaltylearn.const.VERSION} "
        f"(config schema {penaltylearn.const.CONFIG_SCHEMA_VERSION})"
    )


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog=penaltylearn.const.PROGNAME, description=penaltylearn.const.DESCRIPTION)
    parser.add_argument("--version", action="version", version=version_string())
    parser.add_argument("--debug", action="store_true", help="show debug logs")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    cmd = sub.add_parser("segment", help="optimal segmentation of every sequence")
    cmd.add_argument("--sequences", required=True, help="sequences CSV (sequenceID,position,value)")
    group = cmd.add_mutually_exclusive_group(required=True)
    group.add_argument("--penalty", type=float, help="penalty lambda > 0, shared by every sequence")
    group.add_argument("--predictions", help="predictions CSV: segment each sequence at exp(pred_log_lambda)")
    cmd.add_argument("--out", help="segments CSV (default: standard output)")

    cmd = sub.add_parser("path", help="exact penalty path of every sequence")
    cmd.add_argument("--sequences", required=True)
    cmd.add_argument("--kmax", type=int, help="largest model size (default: min(N, 25))")
    cmd.add_argument("--out", help="path CSV (default: standard output)")

    cmd = sub.add_parser("targets", help="target log(lambda) interval of every labeled sequence")
    cmd.add_argument("--sequences", required=True)
    cmd.add_argument("--labels", required=True, help="labels CSV (sequenceID,start,end,changes)")
    cmd.add_argument("--kmax", type=int)
    cmd.add_argument("--cache-dir", help="read/write error functions in this directory")
    cmd.add_argument("--out", help="targets CSV (default: standard output)")

    cmd = sub.add_parser("features", help="feature catalog of every sequence")
    cmd.add_argument("--sequences", required=True)
    cmd.add_argument("--out", help="features CSV (default: standard output)")

    cmd = sub.add_parser("train", help="train one model on all labeled sequences")
    cmd.add_argument("--model", required=True, help="model name, e.g. mlp.4")
    cmd.add_argument("--config", help="JSON experiment configuration")
    cmd.add_argument("--sequences")
    cmd.add_argument("--labels")
    cmd.add_argument("--seed", type=int)
    cmd.add_argument("--kmax", type=int)
    cmd.add_argument("--out", required=True, help="model JSON document")

    cmd = sub.add_parser("predict", help="predict log(lambda) with a trained model")
    cmd.add_argument("--model", required=True, help="model JSON document")
    cmd.add_argument("--sequences", required=True)
    cmd.add_argument("--out", help="predictions CSV (default: standard output)")

    cmd = sub.add_parser("cv", help="cross-validate the models")
    cmd.add_argument("--config", help="JSON experiment configuration")
    cmd.add_argument("--sequences")
    cmd.add_argument("--labels")
    cmd.add_argument("--folds-file", help="folds CSV (sequenceID,fold), replaces the hashed assignment")
    cmd.add_argument("--models", help="comma-separated model names")
    cmd.add_argument("--folds", type=int)
    cmd.add_argument("--seed", type=int)
    cmd.add_argument("--kmax", type=int)
    cmd.add_argument("--threads", type=int, help="worker threads (default: machine parallelism)")
    cmd.add_argument("--selection-metric", choices=("accuracy", "hinge"))
    cmd.add_argument("--cache-dir")
    cmd.add_argument("--record-timings", action="store_true", default=None)
    cmd.add_argument("--out", required=True, help="results CSV; summary.csv is written next to it")

    cmd = sub.add_parser("report", help="median and interquartile range of fold accuracies")
    cmd.add_argument("--results", required=True)
    cmd.add_argument("--out", help="summary CSV (default: standard output)")

    cmd = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    cmd.add_argument("--config", help="JSON synthetic corpus configuration")
    cmd.add_argument("--n-sequences", type=int)
    cmd.add_argument("--seed", type=int)
    cmd.add_argument("--out", required=True, help="output directory for sequences.csv and labels.csv")

    return parser


def PenaltyLearnCli(argv: list[str]) -> int:
    """Entry point of the CLI

    Args:
        argv (list[str]): the arguments, without the program name

    Returns:
        int: the exit status, 0 on success, 1 on user error and 2 on runtime failure
    """
    global context

    args = build_parser().parse_args(argv)
    if args.debug:
        penaltylearn.const.DEBUG = True
    penaltylearn.log.setup_stderr(penaltylearn.const.DEBUG)

    context = GlobalContext()
    penaltylearn.log.dbg(f"Running '{args.command}' with {vars(args)}")

    try:
        match args.command:
            case "segment":
                penaltylearn.cli.commands.segment(args, context)
            case "path":
                penaltylearn.cli.commands.path(args, context)
            case "targets":
                penaltylearn.cli.commands.targets(args, context)
            case "features":
                penaltylearn.cli.commands.features(args, context)
            case "train":
                penaltylearn.cli.commands.train(args, context)
            case "predict":
                penaltylearn.cli.commands.predict(args, context)
            case "cv":
                penaltylearn.cli.commands.cv(args, context)
            case "report":
                penaltylearn.cli.commands.report(args, context)
            case "synth":
                penaltylearn.cli.commands.synth(args, context)
    except PenaltyLearnError as e:
        penaltylearn.log.error(str(e))
        return e.exit_code
    except OSError as e:
        penaltylearn.log.exception(f"I/O failure: {e}")
        return PenaltyLearnError.exit_code
    except Exception as e:
        penaltylearn.log.exception(f"Unexpected {e.__class__.__name__}: {e}")
        return PenaltyLearnError.exit_code

    return 0
