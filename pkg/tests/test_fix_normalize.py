import random

import pytest
from hypothesis import given, settings, strategies as st

from tutorforge.fixer import normalize_lines, reformat, strip_comments


# hand-built lexer case table: (input, expected)
STRIP_CASES = [
    ("int a; // note", "int a; "),
    ("int a;", "int a;"),
    ('char *s = "//not a comment";', 'char *s = "//not a comment";'),
    ("/* a\n b */ int x;", "\n int x;"),
    ("x = 1; /* inline */ y = 2;", "x = 1;  y = 2;"),
    ("// whole line\nint b;", "\nint b;"),
    ("int c; /* spans\nlines\n*/ int d;", "int c; \n\n int d;"),
    ('printf("a /* b */ c");', 'printf("a /* b */ c");'),
    ("char c = '/'; // after char", "char c = '/'; "),
    ("char q = '\\''; // escaped quote", "char q = '\\''; "),
    ('char *e = "esc \\" // still string";', 'char *e = "esc \\" // still string";'),
    ("a /= b; // divide-assign is not a comment start", "a /= b; "),
    ("/**/int f;", "int f;"),
    ("/* unterminated", ""),
    ("int g; /* unterminated\nmore", "int g; \n"),
    ("url = \"http://example.com\";", "url = \"http://example.com\";"),
    ("//", ""),
    ("///", ""),
    ("int h; //", "int h; "),
    ("/* outer /* not nested */ int i;", " int i;"),
    ('"unterminated string // keeps', '"unterminated string // keeps'),
    ("'c' + '/'", "'c' + '/'"),
    ("x//a\ny//b", "x\ny"),
    ("", ""),
    ("no comments at all", "no comments at all"),
    ("slash / alone", "slash / alone"),
    ("star * alone", "star * alone"),
    ("a = b / *p; // pointer divide", "a = b / *p; "),
    ("/* c1 */ mid /* c2 */", " mid "),
    ('s = "\\\\"; // backslash pair ends string', 's = "\\\\"; '),
]


@pytest.mark.parametrize("source,expected", STRIP_CASES)
def test_strip_comments_table(source, expected):
    assert strip_comments(source) == expected


def test_strip_comments_reports_unterminated():
    warnings = []
    strip_comments("int a; /* oops", warnings)
    assert warnings == ["unterminated block comment; remainder stripped"]


def test_strip_comments_preserves_line_count():
    src = "one // c\ntwo /* x\ny */ three\nfour"
    assert strip_comments(src).count("\n") == src.count("\n")


def test_strip_comments_idempotent():
    for source, _ in STRIP_CASES:
        once = strip_comments(source)
        assert strip_comments(once) == once


def test_reformat_canonical_indentation():
    src = "int main(void) {\nif (x) {\ny();\n}\nreturn 0;\n}"
    assert reformat(src) == (
        "int main(void) {\n"
        "    if (x) {\n"
        "        y();\n"
        "    }\n"
        "    return 0;\n"
        "}"
    )


def test_reformat_strips_and_collapses():
    assert reformat("  int x;   ") == "int x;"
    assert reformat("a;\n\n\n\nb;") == "a;\n\nb;"
    assert reformat("\n\nint x;\n\n") == "int x;"


def test_reformat_idempotent_on_cases():
    samples = [
        "int main(void) {\n    while (1) {\n        break;\n    }\n}",
        "  messy();\n\twith\ttabs;\n",
        "",
        "}}}",
        "{ \"brace in string }\" ; }",
    ]
    for s in samples:
        once = reformat(s)
        assert reformat(once) == once


def test_reformat_recovers_canonical_after_perturbation():
    canonical = reformat(
        "int f(int n) {\n"
        "int s = 0;\n"
        "for (int i = 0; i < n; i++) {\n"
        "s += i;\n"
        "}\n"
        "return s;\n"
        "}"
    )
    rng = random.Random(3)
    for _ in range(50):
        lines = canonical.split("\n")
        noisy = [
            "\t" * rng.randint(0, 2) + " " * rng.randint(0, 8)
            + ln.strip() + " " * rng.randint(0, 3) + "\t" * rng.randint(0, 1)
            for ln in lines
        ]
        # leading/trailing blank padding is also recoverable
        noisy = [""] * rng.randint(0, 2) + noisy + [""] * rng.randint(0, 2)
        assert reformat("\n".join(noisy)) == canonical


@given(st.text(alphabet='ab{}";/\\*\' \n\t', max_size=120))
@settings(max_examples=300)
def test_reformat_idempotent_fuzz(text):
    once = reformat(text)
    assert reformat(once) == once


@given(st.text(alphabet='ab{}";/\\*\' \n\t', max_size=120))
@settings(max_examples=300)
def test_strip_comments_total_and_idempotent_fuzz(text):
    once = strip_comments(text)
    assert strip_comments(once) == once


def test_normalize_lines_shapes():
    lines = normalize_lines("int  a; // hey\n\n\n  int b;")
    assert [l.raw for l in lines] == ["int  a;", "", "int b;"]
    assert [l.normalized for l in lines] == ["int a;", "", "int b;"]
    assert [l.index for l in lines] == [0, 1, 2]
