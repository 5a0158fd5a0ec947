"""
Command-line entry point for the whole typo-squatting pipeline.

USAGE:
    python typoswype.py render --domain facebook.com --out x.png --seed 7
    python typoswype.py gen-train --domains majestic_million.csv --top 200 --out pairs.tsv
    python typoswype.py gen-test --domains majestic_million.csv --top 50 --out test.tsv
    python typoswype.py train --pairs pairs.tsv --checklist majestic_million.csv --top 200 --loss nl --out model.tsw
    python typoswype.py index --model model.tsw --checklist majestic_million.csv --top 200 --out index.tsi
    python typoswype.py query --model model.tsw --index index.tsi --domain faceb0ok.com --json
    python typoswype.py eval --model model.tsw --index index.tsi --testset test.tsv --out-dir report/model
    python typoswype.py baseline --checklist majestic_million.csv --top 200 --testset test.tsv --out-dir report/dld
    python typoswype.py export-embeddings --model model.tsw --domains list.txt --out emb.tsv

Exit codes: 0 success, 1 usage error, 2 data or format error.
"""

import argparse
import json
import os
import sys

import numpy as np
import torch

from detect import DEFAULT_THRESHOLD, build_index, load_index, query_batch, save_index
from evaluate import BaselineDetector, ModelDetector, evaluate, export_embeddings, write_report
from generate_data import (
    DEFAULT_RULES,
    generate_test_set,
    generate_training_pairs,
    ingest_domain_list,
    load_test_set,
    load_training_pairs,
    parse_rules,
)
from swype import RenderConfig, export_image, render
from train import TrainConfig, save_training_run, train
from utils.encoder import load_weights
from utils.errors import TyposwypeError
from utils.io import write_metadata
from utils.logger import add_file_handler, logger, set_verbosity
from utils.losses import LossConfig


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports bad usage as an exception instead of exiting with 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _checklist(args):
    return [record.name for record in ingest_domain_list(args.checklist, args.top)]


# --- subcommands -----------------------------------------------------------


def cmd_render(args):
    image = render(args.domain, RenderConfig(seed=args.seed))
    export_image(image, args.out)
    write_metadata(args.out, seed=args.seed, params={"domain": args.domain})
    return 0


def cmd_gen_train(args):
    records = ingest_domain_list(args.domains, args.top)
    rules = parse_rules(args.rules)
    generate_training_pairs(
        records,
        rules=rules,
        rng=np.random.default_rng(args.seed),
        out=args.out,
        max_per_domain=args.max_per_domain,
    )
    write_metadata(
        args.out,
        seed=args.seed,
        inputs=[args.domains],
        params={"top": args.top, "rules": list(rules), "max_per_domain": args.max_per_domain},
    )
    return 0


def cmd_gen_test(args):
    records = ingest_domain_list(args.domains, args.top)
    generate_test_set(records, out=args.out, insertion_mode=args.insertion_mode)
    write_metadata(
        args.out,
        inputs=[args.domains],
        params={"top": args.top, "insertion_mode": args.insertion_mode},
    )
    return 0


def cmd_train(args):
    config = TrainConfig(
        loss_kind=args.loss,
        batch_size=args.batch,
        refresh_interval=args.refresh,
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        loss=LossConfig(
            margin=args.margin,
            temperature=args.tau,
            negatives=args.bn,
            denominator_includes_positive=not args.exclude_positive,
        ),
    )
    pairs = load_training_pairs(args.pairs)
    model, report = train(pairs, _checklist(args), config)
    report_path = save_training_run(model, report, args.out)
    write_metadata(
        args.out,
        seed=args.seed,
        inputs=[args.pairs, args.checklist],
        params={"report": os.path.basename(report_path), **report.config},
    )
    return 0


def cmd_index(args):
    model = load_weights(args.model)
    index = build_index(_checklist(args), model, threshold=args.threshold)
    save_index(index, args.out)
    write_metadata(
        args.out,
        inputs=[args.model, args.checklist],
        params={"threshold": args.threshold, "top": args.top},
    )
    return 0


def cmd_query(args):
    model = load_weights(args.model)
    index = load_index(args.index)
    if args.stdin:
        domains = [line.strip() for line in sys.stdin if line.strip()]
    else:
        domains = [args.domain]
    for result in query_batch(domains, index, model, top_k=args.top_k):
        if args.json or args.stdin:
            print(json.dumps(result.to_dict()))
        else:
            verdict = "FLAGGED" if result.flagged else "ok"
            print(f"{result.query}\t{verdict}\t{result.match}\t{result.distance:.6f}")
    return 0


def cmd_eval(args):
    model = load_weights(args.model)
    index = load_index(args.index)
    cases = load_test_set(args.testset)
    report = evaluate(ModelDetector(model, index), cases, seed=args.seed)
    metrics_path, roc_path = write_report(report, args.out_dir)
    for path in (metrics_path, roc_path):
        write_metadata(path, seed=args.seed, inputs=[args.model, args.index, args.testset])
    return 0


def cmd_baseline(args):
    cases = load_test_set(args.testset)
    report = evaluate(BaselineDetector(_checklist(args), args.threshold), cases, seed=args.seed)
    metrics_path, roc_path = write_report(report, args.out_dir)
    for path in (metrics_path, roc_path):
        write_metadata(
            path,
            seed=args.seed,
            inputs=[args.checklist, args.testset],
            params={"top": args.top, "threshold": args.threshold},
        )
    return 0


def cmd_export_embeddings(args):
    model = load_weights(args.model)
    domains = [record.name for record in ingest_domain_list(args.domains, args.top)]
    export_embeddings(domains, model, args.out)
    write_metadata(args.out, inputs=[args.model, args.domains], params={"top": args.top})
    return 0


# --- parser ----------------------------------------------------------------


def build_parser():
    parser = ArgumentParser(
        prog="typoswype",
        description="Detect typo-squatting domains by embedding swype-like keyboard traces.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("USAGE:")[1],
    )
    parser.add_argument("--threads", type=_positive_int, default=1, help="Torch threads; 1 is reproducible (default: %(default)s)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log debug detail")
    verbosity.add_argument("--quiet", action="store_true", help="Log warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("render", help="Render one domain as a swype PNG")
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gen-train", help="Fuzz a domain list into training pairs")
    p.add_argument("--domains", required=True, help="Ranked domain list (text or Majestic CSV)")
    p.add_argument("--top", type=_positive_int, default=None)
    p.add_argument("--rules", default=",".join(DEFAULT_RULES), help="Comma list, or 'default' / 'all'")
    p.add_argument("--max-per-domain", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_train)

    p = sub.add_parser("gen-test", help="Build the keyboard-labelled test set")
    p.add_argument("--domains", required=True)
    p.add_argument("--top", type=_positive_int, default=100)
    p.add_argument("--insertion-mode", choices=("min", "both"), default="min")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_test)

    p = sub.add_parser("train", help="Train the encoder")
    p.add_argument("--pairs", required=True)
    p.add_argument("--checklist", required=True)
    p.add_argument("--top", type=_positive_int, default=None, help="Use the first N checklist domains")
    p.add_argument("--loss", choices=("tl", "nl"), default="nl")
    p.add_argument("--batch", type=_positive_int, default=64)
    p.add_argument("--epochs", type=_positive_int, default=1)
    p.add_argument("--refresh", type=_positive_int, default=100)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--exclude-positive", action="store_true", help="NT-Xent denominator sums negatives only")
    p.add_argument("--bn", type=_positive_int, default=8, help="Hard negatives per anchor")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("index", help="Embed the checking list into an index")
    p.add_argument("--model", required=True)
    p.add_argument("--checklist", required=True)
    p.add_argument("--top", type=_positive_int, default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="Check domains against an index")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--domain")
    source.add_argument("--stdin", action="store_true", help="One domain per line; JSON-lines out")
    p.add_argument("--json", action="store_true")
    p.add_argument("--top-k", type=int, default=5, help="Runner-ups to report")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="Score the model on a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="Seed of the run, echoed into the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="Score the DLD baseline on a test set")
    p.add_argument("--checklist", required=True)
    p.add_argument("--top", type=_positive_int, default=None)
    p.add_argument("--testset", required=True)
    p.add_argument("--threshold", type=_positive_int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("export-embeddings", help="Write embeddings as TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--domains", required=True)
    p.add_argument("--top", type=_positive_int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def run(argv=None):
    """Parse `argv`, run the subcommand, and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return e.code or 0

    if args.verbose:
        set_verbosity("DEBUG")
    elif args.quiet:
        set_verbosity("WARNING")
    torch.set_num_threads(args.threads)

    try:
        return args.func(args)
    except (TyposwypeError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    except ValueError as e:
        logger.error(f"{args.command}: {e}")
        return 1


if __name__ == "__main__":
    add_file_handler()
    sys.exit(run())
