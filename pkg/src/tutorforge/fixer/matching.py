"""Line matching between buggy and fixed code, and label derivation.

The matcher is a longest common subsequence over normalized line text
with a canonical tie-break (earliest buggy index, then earliest fixed
index), followed by a secondary pass that pairs leftover adjacent lines
whose identifier-token Jaccard similarity reaches 0.5 as modified. The
construction is deterministic and checkable against brute force.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

MATCH_EQUAL = "equal"
MATCH_MODIFIED = "modified"

LABEL_CHANGED = "changed"
LABEL_REMOVED = "removed"
LABEL_ADDED = "added"

MODIFIED_SIMILARITY_THRESHOLD = 0.5

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class MatchedPair:
    buggy: int
    fixed: int
    kind: str  # equal | modified


@dataclass(frozen=True)
class LineMatching:
    pairs: tuple[MatchedPair, ...]

    def __post_init__(self):
        prev_b, prev_f = -1, -1
        for p in self.pairs:
            if p.buggy <= prev_b or p.fixed <= prev_f:
                raise ValueError("matching must be strictly increasing on both sides")
            prev_b, prev_f = p.buggy, p.fixed

    def buggy_indices(self) -> set[int]:
        return {p.buggy for p in self.pairs}

    def fixed_indices(self) -> set[int]:
        return {p.fixed for p in self.pairs}


def token_jaccard(a: str, b: str) -> float:
    """Jaccard similarity over the sets of identifier tokens."""
    ta = set(_IDENT_RE.findall(a))
    tb = set(_IDENT_RE.findall(b))
    if not ta and not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _lcs_pairs(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    """Canonical maximum matching of equal lines.

    ``L[i][j]`` holds the LCS length of the suffixes. The walk picks,
    among all maximum matchings, the lexicographically smallest pair
    sequence: at each step the earliest buggy line that still extends
    to a full-length matching, paired with its earliest such fixed
    line. Checked against brute force in the acceptance suite.
    """
    n, m = len(a), len(b)
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = L[i], L[i + 1]
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                row[j] = max(row[j + 1], nxt[j])
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while L[i][j] > 0:
        target = L[i][j]
        found = None
        for bi in range(i, n):
            if L[bi][j] < target:
                break
            for fi in range(j, m):
                if a[bi] == b[fi] and L[bi + 1][fi + 1] + 1 == target:
                    found = (bi, fi)
                    break
            if found:
                break
        pairs.append(found)
        i, j = found[0] + 1, found[1] + 1
    return pairs


def match_lines(buggy_lines: list[str], fixed_lines: list[str]) -> LineMatching:
    """Match normalized buggy lines against normalized fixed lines."""
    equal = _lcs_pairs(buggy_lines, fixed_lines)
    pairs: list[MatchedPair] = [MatchedPair(b, f, MATCH_EQUAL) for b, f in equal]

    # secondary pass: inside each gap between consecutive equal matches,
    # pair leftover lines positionally and keep the similar ones
    bounds = [(-1, -1), *equal, (len(buggy_lines), len(fixed_lines))]
    extra: list[MatchedPair] = []
    for (b0, f0), (b1, f1) in zip(bounds, bounds[1:]):
        gap_b = range(b0 + 1, b1)
        gap_f = range(f0 + 1, f1)
        for bi, fi in zip(gap_b, gap_f):
            sim = token_jaccard(buggy_lines[bi], fixed_lines[fi])
            if sim >= MODIFIED_SIMILARITY_THRESHOLD:
                extra.append(MatchedPair(bi, fi, MATCH_MODIFIED))
    merged = sorted(pairs + extra, key=lambda p: p.buggy)
    return LineMatching(tuple(merged))


@dataclass(frozen=True)
class AnnotationLabel:
    kind: str                    # changed | removed | added
    anchor_line: int | None = None   # buggy line index (changed/removed)
    anchor_gap: int | None = None    # insertion point: lines before it (added)
    explanation: str = ""

    def __post_init__(self):
        if self.kind in (LABEL_CHANGED, LABEL_REMOVED):
            if self.anchor_line is None or self.anchor_gap is not None:
                raise ValueError(f"{self.kind} labels anchor to a buggy line")
        elif self.kind == LABEL_ADDED:
            if self.anchor_gap is None or self.anchor_line is not None:
                raise ValueError("added labels anchor to a gap")
        else:
            raise ValueError(f"unknown label kind {self.kind!r}")

    def with_explanation(self, text: str) -> "AnnotationLabel":
        return AnnotationLabel(self.kind, self.anchor_line, self.anchor_gap, text)

    def sort_key(self) -> int:
        if self.kind == LABEL_ADDED:
            return 2 * self.anchor_gap
        return 2 * self.anchor_line + 1


def annotate(
    buggy_lines: list[str],
    fixed_lines: list[str],
    matching: LineMatching,
) -> list[AnnotationLabel]:
    """Derive annotation labels from a matching.

    Modified pairs mark the buggy line as changed; unmatched buggy
    lines are removed; unmatched fixed lines become an added
    placeholder in the gap after the nearest preceding matched buggy
    line. Returned labels are ordered by document position.
    """
    labels: list[AnnotationLabel] = []
    matched_b = matching.buggy_indices()
    matched_f = matching.fixed_indices()
    for pair in matching.pairs:
        if pair.kind == MATCH_MODIFIED:
            labels.append(AnnotationLabel(LABEL_CHANGED, anchor_line=pair.buggy))
    for i in range(len(buggy_lines)):
        if i not in matched_b:
            labels.append(AnnotationLabel(LABEL_REMOVED, anchor_line=i))
    pair_list = list(matching.pairs)
    for j in range(len(fixed_lines)):
        if j in matched_f:
            continue
        gap = 0
        for pair in pair_list:
            if pair.fixed < j:
                gap = pair.buggy + 1
            else:
                break
        labels.append(AnnotationLabel(LABEL_ADDED, anchor_gap=gap))
    labels.sort(key=AnnotationLabel.sort_key)
    return labels
