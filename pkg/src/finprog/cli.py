"""Command-line interface for the program toolchain.

Subcommands: validate, exec, equiv, eval, retrieve, stats, linearize, mask.
Exit codes: 0 success, 1 completed with findings (diagnostics, rejects, or an
execution failure), 2 usage or IO errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .context import EvidenceContext
from .corpus import FileUnreadable, SchemaError, candidate_facts, dataset_stats, linearize_table, load_records
from .decoding import build_vocabulary, next_token_mask, replay
from .dsl import ProgramError, is_valid, parse_program, tokenize_program, validate
from .equiv import compare_programs
from .evaluate import breakdown_report, load_predictions
from .executor import ExecutionError, execute, render_value
from .numeric import TolerancePolicy
from .retrieve import build_index, corpus_recall, rank


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finprog",
        description="Parse, validate, execute, and compare financial reasoning programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output(p):
        p.add_argument("--out", help="write the report to this path instead of stdout")
        p.add_argument(
            "--format",
            choices=("table", "machine"),
            default="table",
            help="human-readable table or machine-readable JSON",
        )

    def add_record_selector(p, required=False):
        p.add_argument("--records", required=required, help="record file (JSON lines or array)")
        p.add_argument("--id", help="record id supplying the evidence context")

    p = sub.add_parser("validate", help="check a program and print diagnostics")
    p.add_argument("program")
    add_record_selector(p)
    p.add_argument("--symbolic", action="store_true", help="allow free symbols as arguments")

    p = sub.add_parser("exec", help="execute a program and print its value")
    p.add_argument("program")
    add_record_selector(p)
    p.add_argument("--strict-grounding", action="store_true")

    p = sub.add_parser("equiv", help="decide whether two programs are equivalent")
    p.add_argument("program_a")
    p.add_argument("program_b")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=32)

    p = sub.add_parser("eval", help="score predictions against a record file")
    p.add_argument("--records", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--abs-tol", type=float, default=1e-5)
    p.add_argument("--rel-tol", type=float, default=1e-4)
    p.add_argument("--no-gold-rounding", action="store_true", help="disable the gold-precision rounding clause")
    p.add_argument("--percent-insensitive", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--strict-grounding", action="store_true")
    add_output(p)

    p = sub.add_parser("retrieve", help="rank facts and report corpus recall@k")
    p.add_argument("--records", required=True)
    p.add_argument("--k", type=int, default=3)
    add_output(p)

    p = sub.add_parser("stats", help="dataset statistics for a record file")
    p.add_argument("--records", required=True)
    add_output(p)

    p = sub.add_parser("linearize", help="print templated sentences for table rows")
    p.add_argument("--records", required=True)
    p.add_argument("--id", help="only this record")
    p.add_argument("--out")

    p = sub.add_parser("mask", help="legal next tokens for a program prefix")
    p.add_argument("--prefix", default="", help="program prefix, e.g. 'add ('")
    add_record_selector(p)
    p.add_argument("--max-steps", type=int, default=5)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    else:
        print(text)


def _load_context(args):
    """The evidence context selected by --records/--id, or an empty one."""
    records_path = getattr(args, "records", None)
    record_id = getattr(args, "id", None)
    if not records_path:
        return EvidenceContext.empty(), None
    loaded = load_records(records_path)
    if record_id is None:
        if len(loaded.records) == 1:
            return loaded.records[0].context(), loaded.records[0]
        raise SchemaError("--id is required when the record file has several records")
    for record in loaded.records:
        if record.id == record_id:
            return record.context(), record
    raise SchemaError(f"no record with id {record_id!r}")


def _cmd_validate(args) -> int:
    try:
        program = parse_program(args.program)
    except ProgramError as exc:
        print(f"invalid: {exc}")
        return 1
    ctx, _ = _load_context(args)
    ctx = ctx if getattr(args, "records", None) else None
    diagnostics = validate(program, ctx, allow_symbols=args.symbolic)
    if not diagnostics:
        print("valid")
        return 0
    for diag in diagnostics:
        where = f" (step {diag.step})" if diag.step is not None else ""
        print(f"{diag.severity}: {diag.code}{where}: {diag.message}")
    return 0 if is_valid(diagnostics) else 1


def _cmd_exec(args) -> int:
    try:
        program = parse_program(args.program)
    except ProgramError as exc:
        print(f"invalid: {exc}")
        return 1
    ctx, _ = _load_context(args)
    try:
        value = execute(program, ctx, strict_grounding=args.strict_grounding)
    except ExecutionError as exc:
        print(f"error: {type(exc).__name__}: {exc}")
        return 1
    print(render_value(value))
    return 0


def _cmd_equiv(args) -> int:
    try:
        a = parse_program(args.program_a)
        b = parse_program(args.program_b)
    except ProgramError as exc:
        print(f"invalid program: {exc}", file=sys.stderr)
        return 2
    report = compare_programs(a, b, samples=args.samples, seed=args.seed)
    print("equivalent" if report.equivalent else "not equivalent")
    print(f"reason: {report.reason}")
    print(f"canonical a: {report.canonical_left}")
    print(f"canonical b: {report.canonical_right}")
    return 0


def _cmd_eval(args) -> int:
    loaded = load_records(args.records)
    preds = load_predictions(args.preds)
    policy = TolerancePolicy.from_floats(
        abs_tol=args.abs_tol,
        rel_tol=args.rel_tol,
        round_to_reference=not args.no_gold_rounding,
        percent_insensitive=args.percent_insensitive,
    )
    report = breakdown_report(
        preds,
        loaded.records,
        policy,
        samples=args.samples,
        seed=args.seed,
        strict_grounding=args.strict_grounding,
    )
    if args.format == "machine":
        payload = report.to_dict()
        payload["rejects"] = [
            {"id": r.id, "field": r.field_path, "reason": r.reason} for r in loaded.rejects
        ]
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        text = report.format_table()
        if loaded.rejects:
            text += f"\nrejected records        {len(loaded.rejects)}"
        _emit(text, args.out)
    return 1 if loaded.rejects else 0


def _cmd_retrieve(args) -> int:
    loaded = load_records(args.records)
    if not loaded.records:
        print("no records loaded", file=sys.stderr)
        return 2
    mean, per_record = corpus_recall(loaded.records, args.k)
    rankings = {}
    for record in loaded.records:
        index = build_index(candidate_facts(record))
        ranked = rank(record.question, index, args.k)
        rankings[record.id] = [{"fact": fid, "score": score} for fid, score in ranked]
    if args.format == "machine":
        payload = {
            "k": args.k,
            "recall_at_k": mean,
            "per_record": [{"id": rid, "recall": r} for rid, r in per_record],
            "rankings": rankings,
        }
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        lines = [f"recall@{args.k}  {100 * mean:.2f}%  over {len(per_record)} records"]
        for rid, recall in per_record:
            top = ", ".join(entry["fact"] for entry in rankings[rid])
            lines.append(f"  {rid}: recall {100 * recall:.2f}%  top: {top}")
        _emit("\n".join(lines), args.out)
    return 1 if loaded.rejects else 0


def _cmd_stats(args) -> int:
    loaded = load_records(args.records)
    if not loaded.records:
        print("no records loaded", file=sys.stderr)
        return 2
    report = dataset_stats(loaded.records)
    if args.format == "machine":
        _emit(json.dumps(report.to_dict(), indent=2), args.out)
    else:
        _emit(report.format_table(), args.out)
    return 1 if loaded.rejects else 0


def _cmd_linearize(args) -> int:
    loaded = load_records(args.records)
    lines = []
    for record in loaded.records:
        if args.id and record.id != args.id:
            continue
        for sentence in linearize_table(record.table):
            lines.append(sentence)
    if args.id and not lines:
        print(f"no record with id {args.id!r}", file=sys.stderr)
        return 2
    _emit("\n".join(lines), args.out)
    return 0


def _cmd_mask(args) -> int:
    ctx, _ = _load_context(args)
    vocab = build_vocabulary(ctx, max_steps=args.max_steps)
    tokens = [t for t, _ in tokenize_program(args.prefix)] if args.prefix.strip() else []
    try:
        state = replay(tokens, vocab)
    except Exception as exc:
        print(f"prefix is not mask-legal: {exc}", file=sys.stderr)
        return 1
    allowed = sorted(next_token_mask(state, vocab))
    if state.is_complete:
        print("(may stop here)")
    for token in allowed:
        print(token)
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "exec": _cmd_exec,
    "equiv": _cmd_equiv,
    "eval": _cmd_eval,
    "retrieve": _cmd_retrieve,
    "stats": _cmd_stats,
    "linearize": _cmd_linearize,
    "mask": _cmd_mask,
}


def cli_dispatch(argv: list[str]) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (FileUnreadable, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
