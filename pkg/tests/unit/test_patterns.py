"""Tests for the config grammar patterns."""

from rnpsim.parser.patterns import (
    COMMENT_PATTERN,
    FALSE_WORDS,
    KEY_VALUE_PATTERN,
    NONE_WORDS,
    SECTION_PATTERN,
    TRUE_WORDS,
)


class TestSectionPattern:
    """Tests for section headers."""

    def test_matches_rnp(self):
        match = SECTION_PATTERN.match("[rnp]")
        assert match is not None
        assert match.group("section") == "rnp"

    def test_allows_inner_whitespace(self):
        match = SECTION_PATTERN.match("[ cho ]")
        assert match is not None
        assert match.group("section") == "cho"

    def test_no_match_on_assignment(self):
        assert SECTION_PATTERN.match("nx = 64") is None

    def test_no_match_on_unclosed_header(self):
        assert SECTION_PATTERN.match("[rnp") is None


class TestKeyValuePattern:
    """Tests for assignment lines."""

    def test_matches_standard_line(self):
        match = KEY_VALUE_PATTERN.match("P0_const = 0.5")
        assert match is not None
        assert match.group("key") == "P0_const"
        assert match.group("value") == "0.5"

    def test_matches_without_spaces(self):
        match = KEY_VALUE_PATTERN.match("lambda=1e-3")
        assert match is not None
        assert match.group("key") == "lambda"
        assert match.group("value") == "1e-3"

    def test_empty_value_still_matches(self):
        match = KEY_VALUE_PATTERN.match("tau =")
        assert match is not None
        assert match.group("value") == ""

    def test_no_match_on_bare_word(self):
        assert KEY_VALUE_PATTERN.match("tau") is None

    def test_no_match_on_leading_digit(self):
        assert KEY_VALUE_PATTERN.match("1tau = 3") is None


class TestCommentPattern:
    """Tests for trailing comments."""

    def test_strips_trailing_comment(self):
        assert COMMENT_PATTERN.sub("", "tau = 1e-4   # stability check") == "tau = 1e-4"

    def test_strips_full_line_comment(self):
        assert COMMENT_PATTERN.sub("", "# heading") == ""

    def test_leaves_plain_line(self):
        assert COMMENT_PATTERN.sub("", "nx = 32") == "nx = 32"


class TestLiteralWords:
    """Tests for boolean and default spellings."""

    def test_true_and_false_are_disjoint(self):
        assert not TRUE_WORDS & FALSE_WORDS

    def test_auto_means_default(self):
        assert "auto" in NONE_WORDS
        assert "none" in NONE_WORDS
