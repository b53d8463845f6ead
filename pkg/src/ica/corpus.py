"""Incident record data model, JSONL ingestion and repeatedness analysis."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .textprep import non_stop_counts

SEVERITIES = (0, 1, 2)


class CorpusError(ValueError):
    """Raised for malformed corpus files or inconsistent record sets."""


@dataclass
class InvestigationUpdate:
    ts: datetime
    text: str


@dataclass
class PrbRecord:
    """One raw incident investigation document."""

    id: str
    subject: str
    severity: int
    created_at: datetime
    investigation: list[InvestigationUpdate] = field(default_factory=list)
    resolution_doc: str = ""
    rca_doc: str = ""
    host: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("record id must be non-empty")
        if self.severity not in SEVERITIES:
            raise CorpusError(f"severity must be one of {SEVERITIES}, got {self.severity}")

    def investigation_text(self) -> str:
        return " ".join(u.text for u in self.investigation)


def _parse_ts(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _format_ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def record_to_dict(rec: PrbRecord) -> dict:
    out = {
        "id": rec.id,
        "subject": rec.subject,
        "severity": rec.severity,
        "created_at": _format_ts(rec.created_at),
        "investigation": [{"ts": _format_ts(u.ts), "text": u.text} for u in rec.investigation],
        "resolution_doc": rec.resolution_doc,
        "rca_doc": rec.rca_doc,
    }
    if rec.host is not None:
        out["host"] = rec.host
    return out


def record_from_dict(obj: dict) -> PrbRecord:
    return PrbRecord(
        id=obj["id"],
        subject=obj["subject"],
        severity=int(obj["severity"]),
        created_at=_parse_ts(obj["created_at"]),
        investigation=[
            InvestigationUpdate(_parse_ts(u["ts"]), u["text"])
            for u in obj.get("investigation", [])
        ],
        resolution_doc=obj.get("resolution_doc", ""),
        rca_doc=obj.get("rca_doc", ""),
        host=obj.get("host"),
    )


def load_corpus(path: str) -> list[PrbRecord]:
    """Load one-JSON-object-per-line incident records, in file order."""
    records: list[PrbRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            try:
                rec = record_from_dict(obj)
            except (KeyError, ValueError) as exc:
                raise CorpusError(f"line {lineno}: {exc}") from None
            if rec.id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def save_corpus(records: list[PrbRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), sort_keys=True) + "\n")


def corpus_hash(records: list[PrbRecord]) -> str:
    """Stable content hash binding downstream artifacts to a corpus."""
    h = hashlib.sha256()
    for rec in records:
        h.update(json.dumps(record_to_dict(rec), sort_keys=True).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()[:16]


@dataclass
class RepeatednessReport:
    """Word-overlap of each incident against all earlier incidents."""

    max_overlap: dict[str, float]
    quarterly: dict[str, dict[str, int]]
    by_severity: dict[int, dict[str, int]]
    mode: str
    repeated_threshold: float

    THRESHOLDS = ((">=0.25", 0.25), (">=0.5", 0.5), (">=0.75", 0.75), ("~1.0", 0.999))


def _quarter_key(dt: datetime) -> str:
    return f"{dt.year}Q{(dt.month - 1) // 3 + 1}"


def repeatedness(corpus: list[PrbRecord], extracted: dict[str, "object"],
                 mode: str = "recall", repeated_threshold: float = 0.5) -> RepeatednessReport:
    """Max word-overlap of symptom+root-cause+resolution vs. past incidents.

    Overlap of incident i against past incident j is the multiset recall
    of i's non-stop words (`mode="recall"`, default) or the multiset
    Jaccard (`mode="jaccard"`). "Past" means strictly earlier created_at,
    ties broken by id.
    """
    if mode not in ("recall", "jaccard"):
        raise ValueError(f"unknown overlap mode {mode!r}")
    for rec in corpus:
        if rec.id not in extracted:
            raise CorpusError(f"missing extraction for incident {rec.id!r}")

    def concat_counts(rec: PrbRecord) -> Counter:
        ext = extracted[rec.id]
        parts = [ext.symptom]
        if ext.root_causes:
            parts.append(ext.root_causes[0][0])
        if ext.resolutions:
            parts.append(ext.resolutions[0][0])
        return non_stop_counts(" ".join(parts))

    ordered = sorted(corpus, key=lambda r: (r.created_at, r.id))
    counts = [concat_counts(r) for r in ordered]
    max_overlap: dict[str, float] = {}
    for i, rec in enumerate(ordered):
        ci = counts[i]
        best = 0.0
        if ci:
            for j in range(i):
                inter = sum((ci & counts[j]).values())
                if mode == "recall":
                    ov = inter / sum(ci.values())
                else:
                    union = sum((ci | counts[j]).values())
                    ov = inter / union if union else 0.0
                if ov > best:
                    best = ov
        max_overlap[rec.id] = best

    quarterly: dict[str, dict[str, int]] = {}
    by_severity: dict[int, dict[str, int]] = {s: {"repeated": 0, "non_repeated": 0} for s in SEVERITIES}
    for rec in ordered:
        q = quarterly.setdefault(_quarter_key(rec.created_at), {"total": 0})
        q["total"] += 1
        ov = max_overlap[rec.id]
        for name, thr in RepeatednessReport.THRESHOLDS:
            if ov >= thr:
                q[name] = q.get(name, 0) + 1
        key = "repeated" if ov >= repeated_threshold else "non_repeated"
        by_severity[rec.severity][key] += 1
    return RepeatednessReport(max_overlap, quarterly, by_severity, mode, repeated_threshold)
