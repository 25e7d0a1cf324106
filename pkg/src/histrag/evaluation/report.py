"""Evaluation report container with JSON, CSV and aligned-text renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .benchmark import check_rates


@dataclass
class EvalReport:
    retrieval: dict[str, Any] = field(default_factory=dict)  # {"summary": ..., "per_query": [...]}
    latent: dict[str, Any] | None = None
    qa: list[dict[str, Any]] = field(default_factory=list)
    ner: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"retrieval": self.retrieval, "latent": self.latent, "qa": self.qa, "ner": self.ner}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvalReport":
        return cls(d.get("retrieval", {}), d.get("latent"), list(d.get("qa", [])), d.get("ner"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def validate(self) -> None:
        check_rates(self.to_dict())

    def to_text(self) -> str:
        parts = []
        s = self.retrieval.get("summary")
        if s:
            secs = s.get("seconds", {})
            parts.append("Dense retrieval (D) vs. fusion (F)")
            parts.append(table(
                ["Provider", "@1 (D)", "@5 (D)", "Δ1→2 (D)", "@1 (F)", "@5 (F)", "Δ1→2 (F)", "Time (s)"],
                [[s["provider_id"], s.get("recall_at_1_dense"), s.get("recall_at_5_dense"), s.get("drop_dense"),
                  s.get("recall_at_1_fused"), s.get("recall_at_5_fused"), s.get("drop_fused"),
                  sum(secs.values()) if secs else None]],
            ))
            parts.append(table(
                ["Provider", "Top-5 (D)", "Top-5 (F)", "Drop (D)", "Dim."],
                [[s["provider_id"], s.get("top5_dense"), s.get("top5_fused"), s.get("drop_dense"), s["dim"]]],
            ))
            parts.append(table(
                ["Query", "Category", "Dense rank", "Fused rank", "Δ1→2 (D)", "Δ1→2 (F)"],
                [[r["query_id"], r["category"], _ranks(r.get("dense_rank")), _ranks(r.get("fused_rank")),
                  r.get("drop_dense"), r.get("drop_fused")] if "error" not in r else
                 [r["query_id"], r["category"], "ERROR", r["error"][:40], None, None]
                 for r in self.retrieval.get("per_query", [])],
            ))
        if self.latent:
            lat = self.latent
            parts.append("Latent space structure")
            parts.append(table(["k", "Silhouette", "DB (↓)", "CH (↑)"],
                               [[lat["k"], lat["silhouette"], lat["davies_bouldin"], lat["calinski_harabasz"]]]))
        if self.qa:
            parts.append("Answer quality")
            parts.append(table(
                ["Question (Category)", "Abstained", "Faithfulness", "Answer Relevancy"],
                [[f"{r['question'][:60]} ({r['category']})", "yes" if r["abstained"] else "no",
                  r["faithfulness"], r["answer_relevancy"] if r["answer_relevancy"] is not None else "unavailable"]
                 for r in self.qa],
            ))
        if self.ner:
            n = self.ner
            parts.append("Entity extraction")
            parts.append(table(["SynRel", "Entities/text", "Texts", "Time (s)"],
                               [[n["syntactic_relevance"], n["entities_per_text"], n["texts"], n["timing_s"]]]))
        return "\n\n".join(parts) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["query_id", "category", "drop_dense", "drop_fused", "dense_rank", "fused_rank"])
        for r in self.retrieval.get("per_query", []):
            w.writerow([r["query_id"], r["category"], r.get("drop_dense"), r.get("drop_fused"),
                        _ranks(r.get("dense_rank")), _ranks(r.get("fused_rank"))])
        return buf.getvalue()


def _ranks(d: Mapping[str, Any] | None) -> str:
    if not d:
        return "-"
    return ",".join("-" if v is None else str(v) for v in d.values())


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def table(header: list[str], rows: list[list[Any]]) -> str:
    cells = [header] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [line]
    for j, row in enumerate(cells):
        out.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if j == 0:
            out.append(line)
    out.append(line)
    return "\n".join(out)
