"""Readers for the two JSONL sentence-file shapes the toolchain produces.

A corpus file has one sentence per line (``sentence_id``/``text`` fields);
a matrix-instance file has one instance per line whose ``context`` and
``answers`` arrays hold the sentences.  Both reduce to an ordered list of
(sentence_id, text) pairs; instance files are deduplicated keeping the
first occurrence so the export order matches the input order.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Tuple

from .errors import InputFormatError


def _instance_sentences(obj: dict, seen: set, out: List[Tuple[str, str]],
                        lineno: int) -> None:
    for part in ("context", "answers"):
        rows = obj.get(part)
        if not isinstance(rows, list):
            raise InputFormatError(f"line {lineno}: instance lacks a "
                                   f"{part!r} array")
        for row in rows:
            sid, text = row.get("sentence_id"), row.get("text")
            if not isinstance(sid, str) or not isinstance(text, str):
                raise InputFormatError(f"line {lineno}: {part} rows need "
                                       "string sentence_id and text")
            if sid not in seen:
                seen.add(sid)
                out.append((sid, text))


def read_sentences(path) -> List[Tuple[str, str]]:
    """(sentence_id, text) pairs in input order from either file shape."""
    path = Path(path)
    pairs: List[Tuple[str, str]] = []
    seen: set = set()
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"line {lineno}: not valid JSON: {exc}") \
                from exc
        if not isinstance(obj, dict):
            raise InputFormatError(f"line {lineno}: expected a JSON object")
        if "instance_id" in obj:
            _instance_sentences(obj, seen, pairs, lineno)
            continue
        sid, text = obj.get("sentence_id"), obj.get("text")
        if not isinstance(sid, str) or not isinstance(text, str):
            raise InputFormatError(f"line {lineno}: expected sentence_id and "
                                   "text strings or an instance row")
        if sid in seen:
            raise InputFormatError(f"line {lineno}: duplicate sentence_id "
                                   f"{sid!r}")
        seen.add(sid)
        pairs.append((sid, text))
    return pairs
