"""Command-line surface for every pipeline.

Exit codes are a stable contract: 0 success (possibly with a warning field
in the stats sidecar), 1 runtime failure, 2 usage error, 3 backend failure.
Every dataset/report run writes a manifest next to its output with the run
id, config digest, input digests, and component versions.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .artifacts import (
    digest_file,
    digest_text,
    jsonable,
    make_run_id,
    write_jsonl,
    write_manifest,
)
from .compress import CompressionConstraint
from .config import EngineConfig
from .curation import curate_ctd_raw, curate_mcqr, load_corpus, structure_ctd
from .engine import CompressionEngine
from .errors import BackendError, EngineError
from .evalharness import MODE_PROMPT_AGNOSTIC, MODE_PROMPT_AWARE, load_cases, run_eval, write_report
from .reward import emit_sft_dataset
from .textseg import SEGMENTER_RULE_VERSION, RawDocument

_EXIT_CODES_HELP = """\
exit codes:
  0  success (stats carry a warning field when the selection is empty)
  1  runtime failure (bad input data, IO)
  2  usage error
  3  backend failure
"""


def _versions() -> dict[str, str]:
    return {"engine": __version__, "segmenter_rules": SEGMENTER_RULE_VERSION}


def _input_digest(path: Path) -> str:
    if path.is_dir():
        rows = [(f.name, digest_file(f)) for f in sorted(path.glob("*.txt"))]
        return digest_text(json.dumps(rows))
    return digest_file(path)


def _load_engine(config_path: str | None) -> CompressionEngine:
    config = EngineConfig.from_file(config_path) if config_path else EngineConfig()
    return CompressionEngine(config)


def _constraint_from_args(args) -> CompressionConstraint:
    if args.budget is not None:
        return CompressionConstraint.budget(args.budget)
    if args.ratio is not None:
        return CompressionConstraint.from_ratio(args.ratio)
    return CompressionConstraint.top_k(args.top_k)


def _cmd_compress(args) -> int:
    engine = _load_engine(args.config)
    text = Path(args.infile).read_text(encoding="utf-8") if args.infile else sys.stdin.read()
    outcome = engine.compress_text(text, question=args.question, constraint=_constraint_from_args(args))
    compressed = outcome.compressed
    if args.out:
        Path(args.out).write_text(compressed.text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(compressed.text + "\n")
    if args.stats:
        stats = {
            "selected_indices": list(compressed.selected_indices),
            "scores": [s.score for s in compressed.selected],
            "tokens": compressed.total_tokens,
            "achieved_ratio": compressed.achieved_ratio,
            "dropped_oversize": list(compressed.dropped_oversize),
            "config_digest": engine.config_digest,
        }
        if compressed.warning:
            stats["warning"] = compressed.warning
        if not outcome.question_supplied:
            stats["task_description"] = outcome.task_description.text
        Path(args.stats).write_text(json.dumps(jsonable(stats), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if compressed.warning:
        print(f"warning: {compressed.warning}", file=sys.stderr)
    return 0


def _cmd_curate_pairs(args) -> int:
    engine = _load_engine(args.config)
    corpus = load_corpus(Path(args.corpus))
    params = engine.config.generation_params()
    result = curate_ctd_raw(corpus, engine.suite.descriptor, params, max_workers=args.max_workers)
    if args.stage == "structured":
        raw_pairs = list(result.records)
        structured = structure_ctd(
            raw_pairs,
            engine.suite.descriptor,
            params,
            shared_template=args.shared_template,
            max_workers=args.max_workers,
        )
        records = structured.records
        rejects = result.rejects + structured.rejects
    else:
        records, rejects = result.records, result.rejects
    out = Path(args.out)
    count = write_jsonl(out, (p.as_row() for p in records))
    write_jsonl(out.with_name(out.stem + ".rejects.jsonl"), (r.as_row() for r in rejects))
    inputs = {"corpus": _input_digest(Path(args.corpus))}
    run_id = make_run_id(engine.config_digest, engine.config.seed, inputs.values())
    write_manifest(
        out,
        run_id=run_id,
        config_digest=engine.config_digest,
        count=count,
        inputs=inputs,
        versions=_versions(),
    )
    print(f"wrote {count} pairs, {len(rejects)} rejects -> {out}")
    return 0


def _cmd_curate_multihop(args) -> int:
    engine = _load_engine(args.config)
    corpus = load_corpus(Path(args.corpus))
    result = curate_mcqr(
        corpus,
        engine.suite.descriptor,
        engine.config.generation_params(),
        seed=engine.config.seed,
        negatives_per_tuple=engine.config.negatives_per_tuple,
        fan_out=args.fan_out,
        tokenizer=engine.config.tokenizer_id,
        max_workers=args.max_workers,
    )
    out = Path(args.out)
    count = write_jsonl(out, (t.as_row(args.positive_export) for t in result.records))
    write_jsonl(out.with_name(out.stem + ".rejects.jsonl"), (r.as_row() for r in result.rejects))
    inputs = {"corpus": _input_digest(Path(args.corpus))}
    run_id = make_run_id(engine.config_digest, engine.config.seed, inputs.values())
    write_manifest(
        out,
        run_id=run_id,
        config_digest=engine.config_digest,
        count=count,
        inputs=inputs,
        versions=_versions(),
    )
    print(f"wrote {count} tuples, {len(result.rejects)} rejects -> {out}")
    return 0


def _cmd_reward_refine(args) -> int:
    engine = _load_engine(args.config)
    doc_path = Path(args.doc)
    document = RawDocument(id=doc_path.stem, text=doc_path.read_text(encoding="utf-8"))
    constraint = None
    if args.ratio is not None:
        constraint = CompressionConstraint.from_ratio(args.ratio)
    sft, records = engine.refine(document, args.n, constraint)
    sys.stdout.write(json.dumps(jsonable(sft.as_row()), sort_keys=True) + "\n")
    if args.out:
        emit_sft_dataset(
            [sft], args.out, run_id=engine.run_id, config_digest=engine.config_digest
        )
    if args.rewards_out:
        rows = [
            {
                "candidate_rank": r.candidate.candidate_rank,
                "candidate": r.candidate.text,
                "reward": r.reward,
                "per_position_kl": list(r.per_position_kl),
                "reduction": r.reduction,
                "truncation_note": r.truncation_note,
                "surrogate": r.surrogate,
                "selected_indices": list(r.compressed.selected_indices),
            }
            for r in records
        ]
        write_jsonl(args.rewards_out, rows)
    return 0


def _cmd_eval(args) -> int:
    engine = _load_engine(args.config)
    cases = load_cases(args.cases)
    report = run_eval(cases, engine, args.mode, max_workers=args.max_workers)
    write_report(report, args.out, args.csv)
    inputs = {"cases": digest_file(args.cases)}
    write_manifest(
        args.out,
        run_id=engine.run_id,
        config_digest=engine.config_digest,
        count=len(report.per_case),
        inputs=inputs,
        versions=_versions(),
    )
    print(f"evaluated {len(cases)} cases -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptpress",
        description="Sentence-level prompt compression and its data pipelines",
        epilog=_EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"promptpress {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a document from a file or stdin")
    p.add_argument("--in", dest="infile", help="input text file (default: stdin)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--question", help="explicit question; skips description generation")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--budget", type=int, help="token budget")
    group.add_argument("--ratio", type=float, help="compression ratio, e.g. 5 for 5x")
    group.add_argument("--top-k", type=int, help="number of sentences to keep")
    p.add_argument("--stats", help="write a JSON sidecar with selection details")
    p.add_argument("--config", help="engine config JSON")
    p.set_defaults(func=_cmd_compress)

    c = sub.add_parser("curate", help="build training datasets")
    csub = c.add_subparsers(dest="curate_kind", required=True)

    cp = csub.add_parser("pairs", help="(prompt, question) pairs for the task descriptor")
    cp.add_argument("--corpus", required=True, help="directory of .txt files or a JSONL file")
    cp.add_argument("--out", required=True, help="pairs JSONL path")
    cp.add_argument("--stage", choices=["raw", "structured"], default="structured")
    cp.add_argument("--shared-template", action="store_true")
    cp.add_argument("--max-workers", type=int, default=1)
    cp.add_argument("--config", help="engine config JSON")
    cp.set_defaults(func=_cmd_curate_pairs)

    cm = csub.add_parser("multihop", help="multi-hop question tuples for encoder training")
    cm.add_argument("--corpus", required=True)
    cm.add_argument("--out", required=True)
    cm.add_argument("--fan-out", type=int, default=1)
    cm.add_argument("--positive-export", choices=["set", "head"], default="set")
    cm.add_argument("--max-workers", type=int, default=1)
    cm.add_argument("--config", help="engine config JSON")
    cm.set_defaults(func=_cmd_curate_multihop)

    r = sub.add_parser("reward", help="reward-guided candidate selection")
    rsub = r.add_subparsers(dest="reward_kind", required=True)
    rr = rsub.add_parser("refine", help="best-of-n selection over one document")
    rr.add_argument("--doc", required=True, help="document text file")
    rr.add_argument("--n", type=int, required=True, help="number of candidates")
    rr.add_argument("--ratio", type=float, help="compression ratio (default from config)")
    rr.add_argument("--out", help="emit the SFT record as a JSONL dataset here")
    rr.add_argument("--rewards-out", help="write all candidate reward records here")
    rr.add_argument("--config", help="engine config JSON")
    rr.set_defaults(func=_cmd_reward_refine)

    e = sub.add_parser("eval", help="run the evaluation harness over a case file")
    e.add_argument("--cases", required=True, help="cases JSONL file")
    e.add_argument("--mode", choices=[MODE_PROMPT_AWARE, MODE_PROMPT_AGNOSTIC], required=True)
    e.add_argument("--out", required=True, help="report JSON path")
    e.add_argument("--csv", help="optional per-case CSV path")
    e.add_argument("--max-workers", type=int, default=1)
    e.add_argument("--config", help="engine config JSON")
    e.set_defaults(func=_cmd_eval)

    s = sub.add_parser("serve", help="run the HTTP compression service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--config", help="engine config JSON")
    s.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 3
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
