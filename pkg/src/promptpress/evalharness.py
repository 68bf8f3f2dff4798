"""Desk-scale benchmark runner over compression plus an answering backend.

Each case is compressed (question-guided or description-guided), the
answering backend replies from the compressed prompt, and the reply is
scored against the reference with the metric its task kind dictates. The
report records per-case token counts and achieved ratios alongside scores,
with per-case failures captured instead of aborting the run.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import write_json
from .backends import GenerationParams
from .errors import EngineError
from .metrics import edit_similarity, rouge_l, token_f1
from .textseg import RawDocument

MODE_PROMPT_AWARE = "prompt_aware"
MODE_PROMPT_AGNOSTIC = "prompt_agnostic"

TASK_KINDS = ("qa", "summarization", "code", "synthetic")

_METRICS = {
    "qa": ("token_f1", token_f1),
    "summarization": ("rouge_l", rouge_l),
    "code": ("edit_similarity", edit_similarity),
    "synthetic": ("token_f1", token_f1),
}


@dataclass(frozen=True)
class EvalCase:
    id: str
    context: RawDocument
    reference: str
    task_kind: str
    question: str | None = None

    def __post_init__(self):
        if not self.reference.strip():
            raise ValueError(f"case {self.id!r} has an empty reference")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"case {self.id!r} has unknown task_kind {self.task_kind!r}")


@dataclass
class EvalReport:
    run_id: str
    config_digest: str
    mode: str
    per_case: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_digest": self.config_digest,
            "mode": self.mode,
            "per_case": self.per_case,
            "aggregates": self.aggregates,
        }


def load_cases(path: str | Path) -> list[EvalCase]:
    """Read cases from JSON-Lines rows {id, context, question?, reference, task_kind}."""
    cases = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            cases.append(
                EvalCase(
                    id=str(row["id"]),
                    context=RawDocument(id=str(row["id"]), text=row["context"]),
                    question=row.get("question"),
                    reference=row["reference"],
                    task_kind=row["task_kind"],
                )
            )
    return cases


def write_report(report: EvalReport, path: str | Path, csv_path: str | Path | None = None) -> None:
    write_json(path, report.as_dict())
    if csv_path is not None:
        import csv

        fields = ["id", "metric_name", "score", "compressed_tokens", "achieved_ratio", "failure"]
        with Path(csv_path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in report.per_case:
                writer.writerow({k: row.get(k, "") for k in fields})


def run_eval(
    cases: list[EvalCase],
    engine,
    mode: str,
    *,
    max_workers: int = 1,
) -> EvalReport:
    """Compress, answer, and score every case; aggregate means per task kind.

    In prompt-aware mode every case must carry an explicit question and the
    descriptor is bypassed; in prompt-agnostic mode the question is hidden
    from compression but still posed to the answering backend.
    """
    if mode not in (MODE_PROMPT_AWARE, MODE_PROMPT_AGNOSTIC):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == MODE_PROMPT_AWARE:
        missing = [c.id for c in cases if not c.question]
        if missing:
            raise ValueError(f"prompt-aware mode needs questions; missing for {missing}")

    def one(case: EvalCase) -> dict:
        metric_name, metric = _METRICS[case.task_kind]
        try:
            outcome = engine.compress_text(
                case.context.text,
                question=case.question if mode == MODE_PROMPT_AWARE else None,
                doc_id=case.id,
            )
            answer_prompt = outcome.compressed.text
            if case.question:
                answer_prompt = f"{answer_prompt}\n\n{case.question}"
            answer = engine.suite.responder.generate(answer_prompt, GenerationParams())[0].text
            return {
                "id": case.id,
                "task_kind": case.task_kind,
                "metric_name": metric_name,
                "score": metric(answer, case.reference),
                "compressed_tokens": outcome.compressed.total_tokens,
                "achieved_ratio": outcome.compressed.achieved_ratio,
            }
        except EngineError as exc:
            return {
                "id": case.id,
                "task_kind": case.task_kind,
                "metric_name": metric_name,
                "failure": f"{type(exc).__name__}: {exc}",
            }

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one, cases))
    else:
        rows = [one(c) for c in cases]
    rows.sort(key=lambda r: r["id"])

    sums: dict[str, list[float]] = {}
    for row in rows:
        if "score" in row:
            sums.setdefault(row["task_kind"], []).append(row["score"])
    aggregates = {kind: sum(vals) / len(vals) for kind, vals in sorted(sums.items())}
    return EvalReport(
        run_id=engine.run_id,
        config_digest=engine.config_digest,
        mode=mode,
        per_case=rows,
        aggregates=aggregates,
    )
