"""Command-line entry point: one subcommand per toolkit operation.

Exit status: 0 on success, 1 on data errors (unparseable files, misaligned
datasets, checkpoint format problems, failed checks), 2 on usage errors.
Stochastic commands (noise, split) echo their effective seed to stderr.
All file I/O is UTF-8; reports are JSON or TSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    CorpusError,
    FormatOptions,
    label_inventory,
    load_dataset,
    save_dataset,
    split_dataset,
    unseen_label_report,
    validate_bio,
)
from .correlation import CorrelationError, correlate, pearson, spearman
from .evaluate import EvalError, evaluate, span_f1
from .noise import (
    NoiseConfig,
    NoiseError,
    OpWeights,
    load_alphabet,
    noise_dataset,
)
from .normalize import normalize_text, trace_token
from .pipeline import PipelineError, run_pipeline
from .subword import SubwordError, SubwordVocab, split_word_ratio
from .surgery import (
    CheckpointFormatError,
    NamingScheme,
    SchemeError,
    SurgeryError,
    mav_report,
    revert_layers,
    swap_layers,
)

CORPUS_FORMAT_VERSION = 1
CONTAINER_FORMAT_VERSION = 1

DATA_ERRORS = (
    CorpusError,
    EvalError,
    NoiseError,
    SubwordError,
    CorrelationError,
    CheckpointFormatError,
    SurgeryError,
    SchemeError,
    PipelineError,
    OSError,
    ValueError,
    json.JSONDecodeError,
)


def _write_report(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _format_options(args: argparse.Namespace) -> FormatOptions:
    return FormatOptions(
        token_col=args.token_col,
        tag_col=args.tag_col,
        require_intent=not args.no_require_intent,
        variety=args.variety,
    )


def _add_format_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--token-col", type=int, default=0, help="token column index")
    parser.add_argument("--tag-col", type=int, default=1, help="slot tag column index")
    parser.add_argument(
        "--no-require-intent", action="store_true",
        help="accept blocks without an '# intent:' comment",
    )
    parser.add_argument("--variety", default=None, help="variety for blocks without a comment")


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_parse_check(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.infile, _format_options(args))
    violations = [v for utt in dataset for v in validate_bio(utt)]
    report = {
        "file": args.infile,
        "utterances": len(dataset),
        "violations": len(violations),
        "details": [
            {"utterance": v.utterance_id, "position": v.position, "kind": v.kind, "detail": v.detail}
            for v in violations
        ],
    }
    _write_report(json.dumps(report, ensure_ascii=False, indent=2), args.out)
    return 1 if violations else 0


def cmd_stats(args: argparse.Namespace) -> int:
    options = _format_options(args)
    dataset = load_dataset(args.infile, options)
    inventory = label_inventory(dataset)
    if args.unseen_from is None:
        text = inventory.to_json() if args.report == "json" else inventory.to_tsv()
    else:
        train = load_dataset(args.unseen_from, options)
        unseen = unseen_label_report(train, dataset)
        if args.report == "json":
            text = json.dumps(
                {"inventory": json.loads(inventory.to_json()), "unseen": json.loads(unseen.to_json())},
                ensure_ascii=False, indent=2,
            )
        else:
            text = inventory.to_tsv() + "\n" + unseen.to_tsv()
    _write_report(text, args.out)
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    options = _format_options(args)
    dataset = load_dataset(args.infile, options)
    print(f"seed: {args.seed}", file=sys.stderr)
    part1, part2 = split_dataset(
        dataset, args.ratio, args.seed,
        strategy=args.strategy, group_delimiter=args.group_delimiter,
    )
    save_dataset(part1, args.out1, options)
    save_dataset(part2, args.out2, options)
    return 0


def cmd_noise(args: argparse.Namespace) -> int:
    if args.config is not None:
        cfg = NoiseConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        if args.fraction is not None or args.alphabet_from is not None:
            raise NoiseError("--config cannot be combined with --fraction/--alphabet-from")
        if args.seed is not None:
            cfg = NoiseConfig(
                word_fraction=cfg.word_fraction, alphabet=cfg.alphabet,
                op_weights=cfg.op_weights, seed=args.seed,
            )
    else:
        if args.fraction is None or args.alphabet_from is None:
            raise NoiseError("either --config or both --fraction and --alphabet-from are required")
        weights = OpWeights()
        if args.op_weights is not None:
            parts = args.op_weights.split(",")
            if len(parts) != 3:
                raise NoiseError("--op-weights expects three comma-separated numbers: delete,insert,both")
            weights = OpWeights(delete=float(parts[0]), insert=float(parts[1]), both=float(parts[2]))
        cfg = NoiseConfig(
            word_fraction=args.fraction,
            alphabet=load_alphabet(args.alphabet_from),
            op_weights=weights,
            seed=args.seed if args.seed is not None else 0,
        )
    print(f"seed: {cfg.seed}", file=sys.stderr)
    options = _format_options(args)
    dataset = load_dataset(args.infile, options)
    save_dataset(noise_dataset(dataset, cfg), args.out, options)
    return 0


def cmd_normalize(args: argparse.Namespace) -> int:
    text = Path(args.infile).read_text(encoding="utf-8")
    Path(args.out).write_text(normalize_text(text), encoding="utf-8")
    if args.trace is not None:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for token in text.split():
                trace = trace_token(token)
                if trace.applied:
                    fh.write(trace.to_json() + "\n")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    options = _format_options(args)
    gold = load_dataset(args.gold, options)
    pred = load_dataset(args.pred, options)
    report = evaluate(gold, pred, repair=args.repair, group_by=args.group_by)
    if args.mode == "all":
        text = report.to_json() if args.report == "json" else report.to_tsv()
    else:
        if args.mode in ("strict", "loose", "unlabelled"):
            prf = getattr(report, args.mode)
        else:  # loose-unlabelled diagnostic mode
            from .corpus import extract_spans

            pred_by_id = pred.by_id()
            gold_spans = [extract_spans(g.slot_tags, args.repair) for g in gold]
            pred_spans = [extract_spans(pred_by_id[g.id].slot_tags, args.repair) for g in gold]
            prf = span_f1(gold_spans, pred_spans, "loose-unlabelled")
        payload = {
            "mode": args.mode,
            "intent_accuracy": report.intent_accuracy,
            args.mode: prf.to_dict(),
        }
        if args.report == "json":
            text = json.dumps(payload, ensure_ascii=False, indent=2)
        else:
            text = (
                "mode\tintent_accuracy\tprecision\trecall\tf1\n"
                f"{args.mode}\t{report.intent_accuracy:.6f}\t"
                f"{prf.precision:.6f}\t{prf.recall:.6f}\t{prf.f1:.6f}\n"
            )
    _write_report(text, args.out)
    return 0


def cmd_subword_ratio(args: argparse.Namespace) -> int:
    vocab = SubwordVocab.from_file(args.vocab, continuation_marker=args.marker, unk_token=args.unk)

    def corpus_of(path: str):
        if args.format == "conll":
            return load_dataset(path, _format_options(args))
        return Path(path).read_text(encoding="utf-8")

    ratio = split_word_ratio(vocab, corpus_of(args.infile), letters_only=args.letters_only)
    payload: dict = {"file": args.infile, "split_word_ratio": ratio}
    if args.compare is not None:
        other = split_word_ratio(vocab, corpus_of(args.compare), letters_only=args.letters_only)
        payload.update(
            compare_file=args.compare, compare_ratio=other, ratio_difference=abs(ratio - other)
        )
    _write_report(json.dumps(payload, ensure_ascii=False, indent=2), args.out)
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    rows = [
        line.split("\t")
        for line in Path(args.infile).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not rows:
        raise CorrelationError(f"{args.infile}: empty table")

    def column(spec: str) -> list[float]:
        if spec.lstrip("-").isdigit():
            idx, start = int(spec), 0
            header_cells = rows[0]
            if any(not _is_number(c) for c in header_cells):
                start = 1  # numeric column index with a header row present
        else:
            try:
                idx = rows[0].index(spec)
            except ValueError:
                raise CorrelationError(f"column {spec!r} not found in header {rows[0]}") from None
            start = 1
        try:
            return [float(row[idx]) for row in rows[start:]]
        except (IndexError, ValueError) as exc:
            raise CorrelationError(f"column {spec!r}: {exc}") from exc

    x, y = column(args.x), column(args.y)
    if args.method == "t":
        result = correlate(x, y)
    else:
        r, p_r = pearson(x, y)
        rho, p_rho = spearman(x, y, method="exact")
        from .correlation import CorrelationResult

        result = CorrelationResult(r=r, p_r=p_r, rho=rho, p_rho=p_rho, n=len(x))
    _write_report(result.to_json() if args.report == "json" else result.to_tsv(), args.out)
    return 0


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _parse_layers(spec: str | None) -> list[int]:
    if not spec:
        return []
    return [int(part) for part in spec.split(",") if part != ""]


def _load_scheme(path: str | None) -> NamingScheme:
    if path is None:
        return NamingScheme()
    return NamingScheme.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_surgery(args: argparse.Namespace) -> int:
    scheme = _load_scheme(args.scheme)
    layers = _parse_layers(args.layers)
    if args.action == "revert":
        groups: list = list(layers)
        if args.embeddings:
            groups.append("embeddings")
        if args.heads:
            groups.append("heads")
        revert_layers(args.a, args.b, groups, scheme, args.out)
        return 0
    if args.action == "swap":
        if args.heads:
            raise SurgeryError("task heads are never swapped")
        swap_layers(args.a, args.b, layers, scheme, args.out, include_embeddings=args.embeddings)
        return 0
    report = mav_report(args.a, args.b, scheme)
    _write_report(report.to_json(), args.out)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    return run_pipeline(args.config, args.manifest)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sidkit",
        description="Tooling for dialectal slot-and-intent detection experiments.",
    )
    parser.add_argument(
        "--version", action="version",
        version=(
            f"sidkit {__version__} "
            f"(corpus format v{CORPUS_FORMAT_VERSION}, container format v{CONTAINER_FORMAT_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-check", help="parse a dataset and report BIO violations")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    _add_format_flags(p)
    p.set_defaults(handler=cmd_parse_check)

    p = sub.add_parser("stats", help="label/intent inventory, optionally with unseen-label report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--unseen-from", default=None, help="training set to compare against")
    p.add_argument("--report", choices=("json", "tsv"), default="json")
    p.add_argument("--out", default=None)
    _add_format_flags(p)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("split", help="deterministic train/dev split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--strategy", choices=("uniform", "grouped"), default="uniform")
    p.add_argument("--group-delimiter", default="-")
    p.add_argument("--out1", required=True)
    p.add_argument("--out2", required=True)
    _add_format_flags(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("noise", help="inject seeded character-level noise")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--alphabet-from", default=None, help="text file supplying insertion letters")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--op-weights", default=None, help="delete,insert,both weights (e.g. 1,1,1)")
    p.add_argument("--config", default=None, help="JSON noise config mirroring these flags")
    _add_format_flags(p)
    p.set_defaults(handler=cmd_noise)

    p = sub.add_parser("normalize", help="normalize dialect-transcription spellings")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="write per-token rule traces as JSONL")
    p.set_defaults(handler=cmd_normalize)

    p = sub.add_parser("evaluate", help="intent accuracy and span F1 report")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--group-by", choices=("none", "variety"), default="none")
    p.add_argument(
        "--mode", choices=("all", "strict", "loose", "unlabelled", "loose-unlabelled"),
        default="all",
    )
    p.add_argument("--repair", choices=("lenient", "strict"), default="lenient")
    p.add_argument("--report", choices=("json", "tsv"), default="json")
    p.add_argument("--out", default=None)
    _add_format_flags(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("subword-ratio", help="split-word ratio under a vocabulary")
    p.add_argument("--vocab", required=True, help="one subword per line")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--compare", default=None, help="second corpus; also report the ratio difference")
    p.add_argument("--format", choices=("text", "conll"), default="text")
    p.add_argument("--letters-only", action="store_true")
    p.add_argument("--marker", default="##", help="continuation marker")
    p.add_argument("--unk", default="[UNK]")
    p.add_argument("--out", default=None)
    _add_format_flags(p)
    p.set_defaults(handler=cmd_subword_ratio)

    p = sub.add_parser("correlate", help="Pearson/Spearman with two-tailed p-values")
    p.add_argument("--in", dest="infile", required=True, help="TSV table")
    p.add_argument("--x", required=True, help="column name or 0-based index")
    p.add_argument("--y", required=True, help="column name or 0-based index")
    p.add_argument("--method", choices=("t", "exact"), default="t")
    p.add_argument("--report", choices=("json", "tsv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_correlate)

    p = sub.add_parser("surgery", help="checkpoint layer reverting/swapping and MAV diagnostics")
    p.add_argument("action", choices=("revert", "swap", "mav"))
    p.add_argument("--a", required=True,
                   help="revert: fine-tuned file; swap: recipient; mav: first file")
    p.add_argument("--b", required=True,
                   help="revert: pretrained file; swap: donor; mav: second file")
    p.add_argument("--out", default=None, help="output checkpoint (revert/swap) or MAV report")
    p.add_argument("--layers", default=None, help="comma-separated layer indices, e.g. 0,1")
    p.add_argument("--embeddings", action="store_true", help="include the embeddings group")
    p.add_argument("--heads", action="store_true", help="include task heads (revert only)")
    p.add_argument("--scheme", default=None, help="JSON naming scheme")
    p.set_defaults(handler=cmd_surgery)

    p = sub.add_parser("pipeline", help="run an ordered step list with a provenance manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", default=None, help="defaults to <config>.manifest.json")
    p.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "surgery" and args.action in ("revert", "swap") and args.out is None:
        parser.error("surgery revert/swap require --out")
    try:
        return args.handler(args)
    except DATA_ERRORS as exc:
        print(f"sidkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
