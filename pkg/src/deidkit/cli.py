"""Operator surface: subcommands wiring all modules together.

Exit codes: 0 ok, 1 error, 2 leak detected. Logs go to stderr as structured
lines; stdout carries only data. Every command is deterministic given
(inputs, config, seed).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from pathlib import Path

from . import conll as conll_io
from .annotations import Document, Repair, bio_to_spans, sentence_from_tokens
from .augment import (
    ENGLISH_LOW_RESOURCE_TARGETS,
    ExternalTranslator,
    FakeChunkTable,
    IdentityTranslator,
    OriginalChunkTable,
    augment_corpus,
)
from .config import EngineConfig, load_config
from .errors import DeidError
from .evaluation import (
    aggregate_macro,
    chunk_report_to_csv,
    chunk_report_to_table,
    evaluate_chunks,
    evaluate_tokens,
    report_to_json,
    round_half_up,
    token_report_to_table,
)
from .markup import build_prompt, parse_markup
from .pipeline import detect, leak_check, mask, obfuscate
from .tokenization import word_punct_tokenize

logger = logging.getLogger("deidkit")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LEAK = 2


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _dump_json(payload) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _load_annotations(path: str) -> dict[str, tuple[Document, list]]:
    """Read span-JSON or CoNLL into doc_id -> (document, spans)."""
    data = Path(path).read_bytes()
    if path.endswith((".conll", ".bio", ".txt.conll")) or _looks_like_conll(data):
        records = conll_io.read_conll(data)
        out = {}
        for index, record in enumerate(records):
            doc_id = record.doc_id or f"doc{index}"
            spans = []
            offset = 0
            texts = []
            for sentence in record.sentences:
                rebuilt = sentence_from_tokens(list(sentence.tokens), start=offset)
                spans.extend(bio_to_spans(rebuilt, sentence.tags, Repair.RELAXED))
                text = " ".join(sentence.tokens)
                texts.append(text)
                offset += len(text) + 1
            out[doc_id] = (Document(doc_id, "\n".join(texts)), spans)
        return out
    annotated = conll_io.read_span_json(data)
    return {ad.document.doc_id: (ad.document, list(ad.spans)) for ad in annotated}


def _looks_like_conll(data: bytes) -> bool:
    head = data.lstrip()[:1]
    return head not in (b"{", b"[")


def _deid_one(doc: Document, config: EngineConfig, context, given_spans=None):
    labels, rules, backend, policy, table = context
    if given_spans is None:
        spans = detect(doc, labels, rules, backend, policy)
    else:
        spans = sorted(given_spans)
    original_chunks = [doc.text[s.start : s.end] for s in spans]
    surrogate_map = None
    if config.mode == "obfuscate":
        new_text, surrogate_map, audit = obfuscate(
            doc,
            spans,
            table,
            config.seed,
            date_order=config.date_order,
            age_over_89_policy=config.age_over_89_policy,
            mask_format=config.mask_format,
        )
    else:
        new_text, audit = mask(doc, spans, config.mask_format)
    leaks = leak_check(new_text, original_chunks)
    audit_payload = {
        "doc_id": doc.doc_id,
        "mode": config.mode,
        "replacements": [r.to_dict() for r in audit],
        "leaks": [{"start": l.start, "end": l.end} for l in leaks],
    }
    return new_text, audit_payload, surrogate_map, leaks


def cmd_deid(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    labels = config.load_labels()
    rules = config.load_rules(labels)
    backend = config.build_backend(labels)
    table = config.load_table()
    context = (labels, rules, backend, config.merge(), table)

    jobs = []
    for path in args.inputs:
        if path.endswith(".json") or args.format == "spans":
            for doc_id, (doc, spans) in _load_annotations(path).items():
                jobs.append((path, doc, spans))
        else:
            text = _read_text(path)
            doc_id = "stdin" if path == "-" else Path(path).stem
            jobs.append((path, Document(doc_id, text, config.language), None))

    out_dir = Path(args.out_dir) if args.out_dir else None
    exit_code = EXIT_OK

    def process(job):
        _, doc, spans = job
        try:
            return _deid_one(doc, config, context, spans)
        except DeidError as exc:
            return exc

    if config.jobs > 1:
        # Output ordering follows input order regardless of completion order.
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(process, jobs))
    else:
        results = []
        for job in jobs:
            result = process(job)
            results.append(result)
            if isinstance(result, Exception) and config.fail_fast:
                break

    for job, result in zip(jobs, results):
        path, doc, _ = job
        if isinstance(result, Exception):
            logger.error("failed on %s: %s", path, result)
            exit_code = max(exit_code, EXIT_ERROR)
            continue
        new_text, audit_payload, surrogate_map, leaks = result
        if leaks:
            logger.error("leak check failed for %s: %d finding(s)", doc.doc_id, len(leaks))
            exit_code = max(exit_code, EXIT_LEAK)
        if args.stdout:
            sys.stdout.write(new_text)
        else:
            base = out_dir if out_dir else Path(path).parent
            stem = doc.doc_id
            _write_text(base / f"{stem}.deid.txt", new_text)
            _write_text(base / f"{stem}.audit.json", _dump_json(audit_payload))
            if surrogate_map is not None and config.write_surrogate_map:
                _write_text(base / f"{stem}.surrogates.json", _dump_json(surrogate_map.to_dict()))
    return exit_code


def cmd_eval(args: argparse.Namespace) -> int:
    if args.aggregate_only:
        import csv as csv_module

        with open(args.gold, encoding="utf-8", newline="") as fh:
            rows = [row for row in csv_module.reader(fh) if row]
        value_column = -1
        if rows and rows[0][0].strip().lower() in ("label", "tag"):
            header = [cell.strip().lower() for cell in rows[0]]
            if "f1" in header:
                value_column = header.index("f1")
            rows = rows[1:]
        scores = {
            row[0].strip(): float(row[value_column])
            for row in rows
            if row[0].strip().lower() not in ("macro avg", "micro avg", "accuracy")
        }
        macro = aggregate_macro(scores)
        sys.stdout.write(f"macro {round_half_up(macro):.3f}\n")
        return EXIT_OK

    if args.mode == "token":
        gold = conll_io.read_conll(Path(args.gold).read_bytes())
        pred = conll_io.read_conll(Path(args.pred).read_bytes())
        report = evaluate_tokens(gold, pred)
        sys.stdout.write(token_report_to_table(report))
    else:
        gold_docs = _load_annotations(args.gold)
        pred_docs = _load_annotations(args.pred)
        gold = {doc_id: spans for doc_id, (_, spans) in gold_docs.items()}
        pred = {doc_id: spans for doc_id, (_, spans) in pred_docs.items()}
        report = evaluate_chunks(gold, pred, lenient_overlap=args.lenient)
        sys.stdout.write(chunk_report_to_table(report))
        if args.csv:
            _write_text(Path(args.csv), chunk_report_to_csv(report))
    if args.report:
        _write_text(Path(args.report), report_to_json(report))
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if config.seed is None:
        logger.error("augment requires --seed")
        return EXIT_ERROR
    labels = config.load_labels()
    records = conll_io.read_conll(Path(args.corpus).read_bytes())
    if args.originals_only:
        table = OriginalChunkTable()
    elif args.table:
        table = FakeChunkTable.from_file(args.table)
    else:
        logger.error("augment requires --table or --originals-only")
        return EXIT_ERROR
    if args.translator == "identity":
        translator = IdentityTranslator()
    else:
        translator = ExternalTranslator(tuple(args.translator.split()))
    if args.targets == "en-low-resource":
        targets = set(ENGLISH_LOW_RESOURCE_TARGETS)
    elif args.targets:
        targets = set(args.targets.split(","))
    else:
        targets = set(labels.labels)
    out = augment_corpus(records, targets, table, translator, config.seed, labels)
    Path(args.out).write_bytes(conll_io.write_conll(out))
    logger.info("augmented %d record(s) -> %s", len(out), args.out)
    return EXIT_OK


def cmd_parse_llm(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    labels = config.load_labels()
    original = Document(Path(args.original).stem, _read_text(args.original), config.language)
    marked = _read_text(args.marked)
    result = parse_markup(original, marked, labels)
    payload = conll_io.write_span_json(
        [conll_io.AnnotatedDoc(original, result.spans)]
    ).decode("utf-8")
    if args.out:
        _write_text(Path(args.out), payload)
    else:
        sys.stdout.write(payload)
    diagnostics = {
        "alignment_score": result.alignment_score,
        "diagnostics": [
            {"kind": d.kind.value, "location": d.location, "detail": d.detail}
            for d in result.diagnostics
        ],
    }
    if args.diagnostics:
        _write_text(Path(args.diagnostics), _dump_json(diagnostics))
    return EXIT_OK


def cmd_prompt(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    labels = config.load_labels()
    note = Document(Path(args.note).stem if args.note != "-" else "stdin", _read_text(args.note))
    sys.stdout.write(build_prompt(note, labels))
    return EXIT_OK


def cmd_tokenize(args: argparse.Namespace) -> int:
    text = args.text if args.text is not None else _read_text(args.file or "-")
    tokens = word_punct_tokenize(text)
    sys.stdout.write(
        _dump_json([{"text": t.text, "start": t.start, "end": t.end} for t in tokens])
    )
    return EXIT_OK


def cmd_healthcheck(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    labels = config.load_labels()
    client = config.build_backend(labels)
    if client is None:
        logger.error("no backend configured")
        return EXIT_ERROR
    info = client.healthcheck()
    sys.stdout.write(
        _dump_json(
            {
                "model_id": info.model_id,
                "label_set_hash": info.label_set_hash,
                "max_batch": info.max_batch,
            }
        )
    )
    return EXIT_OK


_CONFIG_FLAGS = (
    ("language", str),
    ("label_set", str),
    ("backend_transport", str),
    ("backend_endpoint", str),
    ("merge_policy", str),
    ("mode", str),
    ("mask_format", str),
    ("seed", int),
    ("fake_chunk_table", str),
    ("date_order", str),
    ("age_over_89_policy", str),
    ("jobs", int),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file path (or $DEID_CONFIG)")
    for name, kind in _CONFIG_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind)
    parser.add_argument("--rule-file", dest="rule_files", action="append")
    parser.add_argument(
        "--write-surrogate-map", dest="write_surrogate_map", action="store_true", default=None
    )
    parser.add_argument("--fail-fast", dest="fail_fast", action="store_true", default=None)


def _config_from_args(args: argparse.Namespace) -> EngineConfig:
    overrides = {
        name: getattr(args, name, None)
        for name, _ in _CONFIG_FLAGS
    }
    overrides["rule_files"] = getattr(args, "rule_files", None)
    overrides["write_surrogate_map"] = getattr(args, "write_surrogate_map", None)
    overrides["fail_fast"] = getattr(args, "fail_fast", None)
    return load_config(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deidkit", description="Clinical text de-identification engine"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deid", help="detect PHI and rewrite text")
    p.add_argument("inputs", nargs="+", help="text files, span-JSON files, or -")
    p.add_argument("--out-dir")
    p.add_argument("--stdout", action="store_true", help="write rewritten text to stdout")
    p.add_argument("--format", choices=("auto", "text", "spans"), default="auto")
    _add_config_flags(p)
    p.set_defaults(func=cmd_deid)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("gold")
    p.add_argument("pred", nargs="?")
    p.add_argument("--mode", choices=("chunk", "token"), default="chunk")
    p.add_argument("--lenient", action="store_true", help="diagnostics-only overlap matching")
    p.add_argument("--report", help="write JSON report here")
    p.add_argument("--csv", help="write per-label CSV here")
    p.add_argument(
        "--aggregate-only",
        action="store_true",
        help="gold is a CSV of per-label F1 values; print their macro average",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="synthesize training sentences")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--targets",
        help="comma-separated labels, or the preset 'en-low-resource' (default: all)",
    )
    p.add_argument("--table")
    p.add_argument("--originals-only", action="store_true")
    p.add_argument("--translator", default="identity")
    _add_config_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("parse-llm", help="parse marked-up LLM output into spans")
    p.add_argument("--original", required=True)
    p.add_argument("--marked", required=True)
    p.add_argument("--out")
    p.add_argument("--diagnostics")
    _add_config_flags(p)
    p.set_defaults(func=cmd_parse_llm)

    p = sub.add_parser("prompt", help="build the extraction prompt for a note")
    p.add_argument("--note", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("tokenize", help="word-punct tokenize text")
    p.add_argument("text", nargs="?")
    p.add_argument("--file")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("healthcheck", help="verify the backend label set")
    _add_config_flags(p)
    p.set_defaults(func=cmd_healthcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except DeidError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
