"""Help-fix-code pipeline: normalize, match, annotate, explain.

The buggy code is repaired by the LLM but the repaired code itself is
never shown; students only see their own lines labelled as changed,
removed, or needing an addition, each with an explanation.
"""

from .normalize import SourceLine, normalize_lines, reformat, strip_comments
from .matching import (
    AnnotationLabel,
    LineMatching,
    MatchedPair,
    annotate,
    match_lines,
    token_jaccard,
)
from .pipeline import (
    AnnotatedRow,
    FixResponse,
    run_fix_pipeline,
    scan_for_leaks,
    stream_fix_pipeline,
)

__all__ = [
    "SourceLine",
    "strip_comments",
    "reformat",
    "normalize_lines",
    "MatchedPair",
    "LineMatching",
    "AnnotationLabel",
    "match_lines",
    "annotate",
    "token_jaccard",
    "AnnotatedRow",
    "FixResponse",
    "run_fix_pipeline",
    "stream_fix_pipeline",
    "scan_for_leaks",
]
