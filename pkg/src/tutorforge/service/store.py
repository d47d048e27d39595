"""Append-only JSONL record log.

One JSON object per line, discriminated by ``kind``: ``usage`` (query +
response), ``rating``, ``labels`` (imported coder labels), and
``error`` (failed generations; kept for completeness, excluded from
usage analytics). Ratings and labels arrive after their usage record,
so readers fold the stream into merged usage records. The same schema,
pseudonymized, is the public dataset format.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .models import Query, RatingRecord, ResponseDocument


class RecordLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def _append(self, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True)
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(line + "\n")

    def append_usage(self, query: Query, response: ResponseDocument,
                     version: str) -> None:
        self._append({
            "kind": "usage",
            "version": version,
            "query": query.to_dict(),
            "response": response.to_dict(),
        })

    def append_rating(self, rating: RatingRecord) -> None:
        self._append({"kind": "rating", **rating.to_dict()})

    def append_labels(self, response_id: str, labels: dict) -> None:
        self._append({"kind": "labels", "response_id": response_id, "labels": labels})

    def append_error(self, query: Query, error_kind: str, detail: str,
                     version: str) -> None:
        self._append({
            "kind": "error",
            "version": version,
            "query": query.to_dict(),
            "error": {"type": error_kind, "detail": detail},
        })

    def read_raw(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def load_usage_records(self) -> list[dict]:
        """Fold the event stream into merged usage records.

        Shape matches the analytics input: ``{version, query, response,
        rating?, labels?}``; later ratings/labels attach to the usage
        record with the same response id (first rating wins, matching
        the one-rating-per-response rule).
        """
        usages: list[dict] = []
        by_response: dict[str, dict] = {}
        for raw in self.read_raw():
            kind = raw.get("kind")
            if kind == "usage":
                rec = {
                    "version": raw.get("version", "v2"),
                    "query": raw["query"],
                    "response": raw["response"],
                    "rating": None,
                }
                usages.append(rec)
                by_response[raw["response"]["id"]] = rec
            elif kind == "rating":
                rec = by_response.get(raw["response_id"])
                if rec is not None and rec["rating"] is None:
                    rec["rating"] = {"stars": raw["stars"], "reason": raw.get("reason", ""),
                                     "created_at": raw.get("created_at", "")}
            elif kind == "labels":
                rec = by_response.get(raw["response_id"])
                if rec is not None:
                    rec["labels"] = raw["labels"]
        return usages
