"""Serialising a `QcReport` to TSV or JSON."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from .errors import DvarsError, InvalidInputError
from .qc import QcReport

TSV_COLUMNS = ("frame", "dvars", "dvars_star", "dvars_star_star", "flag")
MISSING = "n/a"


def _fmt(value) -> str:
    return MISSING if value is None else f"{value:.6g}"


def report_to_tsv(r: QcReport) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for rec in r.records():
        lines.append(
            "\t".join(
                [str(rec["frame"]), _fmt(rec["dvars"]), _fmt(rec["dvars_star"]),
                 _fmt(rec["dvars_star_star"]), str(rec["flag"])]
            )
        )
    return "\n".join(lines) + "\n"


def report_to_json(r: QcReport) -> str:
    doc = {"meta": r.meta, "summary": r.summary, "frames": r.records()}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(r: QcReport, path, fmt: str = "tsv") -> None:
    """Write `r` to `path` (``"-"`` for stdout). Output is byte-deterministic."""
    if fmt == "tsv":
        text = report_to_tsv(r)
    elif fmt == "json":
        text = report_to_json(r)
    else:
        raise InvalidInputError(f"unknown report format {fmt!r}; expected tsv or json")
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise DvarsError(f"{path}: cannot write report ({exc.strerror})") from None


def read_report(path) -> QcReport:
    """Parse a report written by `write_report` (format chosen by content)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        frames = doc["frames"]
        meta, summary = doc.get("meta", {}), doc.get("summary", {})
        cols = {k: [f[k] for f in frames] for k in TSV_COLUMNS}
    else:
        rows = [line.split("\t") for line in text.splitlines()]
        if not rows or tuple(rows[0]) != TSV_COLUMNS:
            raise InvalidInputError(f"{path}: not a DVARS report")
        cols = {k: [None if r[j] == MISSING else float(r[j]) for r in rows[1:]]
                for j, k in enumerate(TSV_COLUMNS)}
        meta, summary = {}, {}

    def opt(name):
        vals = cols[name]
        return None if any(v is None for v in vals) else np.array(vals, dtype=np.float64)

    return QcReport(
        np.array(cols["dvars"], dtype=np.float64),
        opt("dvars_star"),
        opt("dvars_star_star"),
        np.array(cols["flag"], dtype=np.int64),
        meta=meta,
        summary=summary,
    )
