"""Aggregate statistics over the usage log.

Covers the deployment-analysis toolkit: per-feature usage counts and
rating summaries (split by system version), correctness/helpfulness
rates from human coder labels, directness distribution, inter-rater
reliability, smoothed daily usage, and dataset export with
pseudonymized users.

The platform never labels correctness itself; coder labels arrive via
import from offline human coding.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DenominatorZero, LengthMismatch

QUERY_CATEGORIES = (
    "error-message-interpretation",
    "problem-source-identification",
    "buggy-code-resolution",
    "explain-error-message",
    "code-execution-probes",
    "code-and-conceptual-clarification",
    "function-specification-queries",
    "high-level-coding-guidance",
    "direct-code-solution",
    "explain-code",
)

DIRECTNESS_CODES = (
    "exact-solution-code",
    "exact-solution-pseudo-code",
    "step-to-fix-semantic-issue",
    "step-to-fix-syntax-issue",
    "step-to-fix-external-issue",
    "example-high-level-code",
    "example-high-level-pseudo-code",
    "conceptual-explanation",
    "n/a",
)

CORRECTNESS_CODES = ("correct", "incorrect")
HELPFULNESS_CODES = ("helpful", "not-helpful", "n/a")


@dataclass(frozen=True)
class CoderLabels:
    query_category: str
    directness: str
    correctness: str
    helpfulness: str
    coder_id: str

    def __post_init__(self):
        if self.query_category not in QUERY_CATEGORIES:
            raise ValueError(f"unknown query category {self.query_category!r}")
        if self.directness not in DIRECTNESS_CODES:
            raise ValueError(f"unknown directness code {self.directness!r}")
        if self.correctness not in CORRECTNESS_CODES:
            raise ValueError(f"unknown correctness code {self.correctness!r}")
        if self.helpfulness not in HELPFULNESS_CODES:
            raise ValueError(f"unknown helpfulness code {self.helpfulness!r}")
        # helpfulness is judged only for correct responses
        if (self.helpfulness == "n/a") != (self.correctness == "incorrect"):
            raise ValueError("helpfulness must be n/a exactly when correctness is incorrect")

    def to_dict(self) -> dict:
        return {
            "query_category": self.query_category,
            "directness": self.directness,
            "correctness": self.correctness,
            "helpfulness": self.helpfulness,
            "coder_id": self.coder_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoderLabels":
        return cls(
            query_category=data["query_category"],
            directness=data["directness"],
            correctness=data["correctness"],
            helpfulness=data["helpfulness"],
            coder_id=data.get("coder_id", ""),
        )


def percent_round_half_up(rate: float) -> int:
    """Integer percent with exact half-up rounding (79.5 -> 80)."""
    return int(math.floor(rate * 100 + 0.5))


@dataclass(frozen=True)
class RateReport:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise DenominatorZero("rate needs a positive denominator")
        if not 0 <= self.numerator <= self.denominator:
            raise ValueError("numerator out of range")

    @property
    def rate(self) -> float:
        return self.numerator / self.denominator

    @property
    def percent(self) -> int:
        return percent_round_half_up(self.rate)

    def to_dict(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator,
                "rate": self.rate, "percent": self.percent}


@dataclass
class FeatureStats:
    count: int = 0
    ratings: list[int] = field(default_factory=list)

    @property
    def rating_mean(self) -> float | None:
        if not self.ratings:
            return None
        return sum(self.ratings) / len(self.ratings)

    @property
    def rating_sd(self) -> float | None:
        """Sample standard deviation (n-1); absent for n < 2."""
        n = len(self.ratings)
        if n < 2:
            return None
        mean = sum(self.ratings) / n
        return math.sqrt(sum((r - mean) ** 2 for r in self.ratings) / (n - 1))

    def row(self) -> dict:
        mean = self.rating_mean
        sd = self.rating_sd
        return {
            "count": self.count,
            "rating_mean": None if mean is None else round(mean, 2),
            "rating_sd": None if sd is None else round(sd, 2),
            "rating_n": len(self.ratings),
        }


@dataclass
class UsageStats:
    per_feature: dict[tuple[str, str], FeatureStats] = field(default_factory=dict)
    followups_by_parent_feature: dict[str, int] = field(default_factory=dict)
    followup_origins_by_parent_feature: dict[str, int] = field(default_factory=dict)
    daily: dict[str, tuple[int, int]] = field(default_factory=dict)  # date -> (queries, users)

    def to_dict(self) -> dict:
        return {
            "per_feature": {
                f"{feature}/{version}": stats.row()
                for (feature, version), stats in sorted(self.per_feature.items())
            },
            "followups_by_parent_feature": dict(sorted(self.followups_by_parent_feature.items())),
            "followup_origins_by_parent_feature": dict(
                sorted(self.followup_origins_by_parent_feature.items())),
            "daily": {d: {"queries": q, "unique_users": u}
                      for d, (q, u) in sorted(self.daily.items())},
        }


def _record_date(record: dict, tz: timezone) -> str:
    ts = record["query"]["created_at"]
    dt = datetime.fromisoformat(ts)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(tz).date().isoformat()


def feature_usage_stats(records: Iterable[dict], tz: timezone = timezone.utc) -> UsageStats:
    """Per-feature counts and rating summaries, grouped by version tag."""
    stats = UsageStats()
    by_id: dict[str, dict] = {}
    users_by_date: dict[str, set] = defaultdict(set)
    records = list(records)
    for rec in records:
        by_id[rec["response"]["id"]] = rec
    for rec in records:
        feature = rec["query"]["feature"]
        version = rec.get("version", "v2")
        key = (feature, version)
        fs = stats.per_feature.setdefault(key, FeatureStats())
        fs.count += 1
        rating = rec.get("rating")
        if rating is not None:
            fs.ratings.append(rating["stars"])
        date = _record_date(rec, tz)
        q, _ = stats.daily.get(date, (0, 0))
        stats.daily[date] = (q + 1, 0)
        users_by_date[date].add(rec["query"]["user_id"])
        parent = rec["query"].get("parent_response")
        if parent is not None:
            parent_rec = by_id.get(parent)
            parent_feature = parent_rec["query"]["feature"] if parent_rec else "unknown"
            stats.followups_by_parent_feature[parent_feature] = \
                stats.followups_by_parent_feature.get(parent_feature, 0) + 1
    # distinct parents that received at least one follow-up
    origin_parents: dict[str, set] = defaultdict(set)
    for rec in records:
        parent = rec["query"].get("parent_response")
        if parent is not None:
            parent_rec = by_id.get(parent)
            parent_feature = parent_rec["query"]["feature"] if parent_rec else "unknown"
            origin_parents[parent_feature].add(parent)
    stats.followup_origins_by_parent_feature = {
        k: len(v) for k, v in origin_parents.items()
    }
    stats.daily = {d: (q, len(users_by_date[d])) for d, (q, _) in stats.daily.items()}
    return stats


def render_usage_table(stats: UsageStats) -> str:
    """Text table in the deployment-report layout (count, M=, SD=)."""
    lines = [f"{'Feature':28s} {'Version':8s} {'Count':>6s}  Rating"]
    for (feature, version), fs in sorted(stats.per_feature.items()):
        row = fs.row()
        if row["rating_mean"] is None:
            rating = "-"
        elif row["rating_sd"] is None:
            rating = f"M={row['rating_mean']:.2f}"
        else:
            rating = f"M={row['rating_mean']:.2f}, SD={row['rating_sd']:.2f}"
        lines.append(f"{feature:28s} {version:8s} {row['count']:>6d}  {rating}")
    return "\n".join(lines)


def quality_rates(labeled_records: Sequence[dict]) -> dict:
    """Correctness, helpfulness-given-correct, and directness distribution."""
    labels = [CoderLabels.from_dict(rec["labels"]) for rec in labeled_records
              if rec.get("labels")]
    if not labels:
        raise DenominatorZero("no labeled records")
    total = len(labels)
    correct = sum(1 for l in labels if l.correctness == "correct")
    out = {
        "correctness": RateReport(correct, total),
        "directness_distribution": directness_distribution(labels),
        "category_distribution": category_distribution(labels),
    }
    if correct:
        helpful = sum(1 for l in labels
                      if l.correctness == "correct" and l.helpfulness == "helpful")
        out["helpfulness_given_correct"] = RateReport(helpful, correct)
    return out


def directness_distribution(labels: Sequence[CoderLabels]) -> dict[str, dict]:
    counts = Counter(l.directness for l in labels)
    total = len(labels)
    return {
        code: {"count": counts.get(code, 0), "proportion": counts.get(code, 0) / total}
        for code in DIRECTNESS_CODES
    }


def category_distribution(labels: Sequence[CoderLabels]) -> dict[str, dict]:
    counts = Counter(l.query_category for l in labels)
    total = len(labels)
    return {
        code: {"count": counts.get(code, 0), "proportion": counts.get(code, 0) / total}
        for code in QUERY_CATEGORIES
    }


def inter_rater(labels_a: Sequence[str], labels_b: Sequence[str]) -> dict:
    """Percent agreement and Cohen's kappa for two parallel codings.

    kappa = (p_o - p_e) / (1 - p_e), expected agreement from marginal
    products; reported as absent when p_e == 1 (degenerate marginals).
    """
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise LengthMismatch("need at least one pair of labels")
    matches = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    p_o = matches / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    p_e = sum(count_a[k] * count_b.get(k, 0) for k in count_a) / (n * n)
    kappa = None if p_e == 1.0 else (p_o - p_e) / (1 - p_e)
    return {"percent_agreement": p_o, "kappa": kappa, "n": n}


def daily_series(
    records: Iterable[dict],
    smoothing_window: int,
    tz: timezone = timezone.utc,
    start: str | None = None,
    end: str | None = None,
) -> dict:
    """Daily query and unique-user counts with a centered moving average.

    The window is truncated at the range edges; even window sizes round
    up to the next odd width. Unique users are counted per day before
    smoothing.
    """
    if smoothing_window < 1:
        raise ValueError("smoothing window must be >= 1")
    counts: dict[str, int] = defaultdict(int)
    users: dict[str, set] = defaultdict(set)
    for rec in records:
        date = _record_date(rec, tz)
        counts[date] += 1
        users[date].add(rec["query"]["user_id"])
    if not counts and (start is None or end is None):
        return {"dates": [], "queries": [], "unique_users": [],
                "queries_smoothed": [], "unique_users_smoothed": []}
    first = datetime.fromisoformat(start or min(counts)).date()
    last = datetime.fromisoformat(end or max(counts)).date()
    dates = []
    day = first
    while day <= last:
        dates.append(day.isoformat())
        day += timedelta(days=1)
    queries = [counts.get(d, 0) for d in dates]
    uniques = [len(users.get(d, ())) for d in dates]
    half = smoothing_window // 2

    def smooth(series: list[int]) -> list[float]:
        out = []
        for i in range(len(series)):
            lo = max(0, i - half)
            hi = min(len(series), i + half + 1)
            out.append(sum(series[lo:hi]) / (hi - lo))
        return out

    return {
        "dates": dates,
        "queries": queries,
        "unique_users": uniques,
        "queries_smoothed": smooth(queries),
        "unique_users_smoothed": smooth(uniques),
    }


def pseudonymize(user_id: str, salt: str = "tutorforge") -> str:
    digest = hashlib.sha256(f"{salt}:{user_id}".encode()).hexdigest()
    return f"user-{digest[:12]}"


def export_dataset(
    records: Iterable[dict],
    path: str | Path,
    redaction: str = "pseudonymize",
    salt: str = "tutorforge",
) -> int:
    """Write the public dataset: JSON Lines, users pseudonymized or dropped."""
    if redaction not in ("pseudonymize", "drop"):
        raise ValueError("redaction must be 'pseudonymize' or 'drop'")
    count = 0
    with open(path, "w") as fh:
        for rec in records:
            out = json.loads(json.dumps(rec))  # deep copy
            if redaction == "drop":
                out["query"].pop("user_id", None)
            else:
                out["query"]["user_id"] = pseudonymize(out["query"]["user_id"], salt)
            fh.write(json.dumps(out, sort_keys=True) + "\n")
            count += 1
    return count


def import_dataset(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
