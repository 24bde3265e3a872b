"""Compiled regex patterns for the key = value configuration grammar."""

import re

# Section header selecting the model
# Example: [rnp]
SECTION_PATTERN = re.compile(r"^\[\s*(?P<section>[A-Za-z_][A-Za-z0-9_]*)\s*\]$")

# Assignment line
# Example: P0_const = 0.5
KEY_VALUE_PATTERN = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*?)$")

# Trailing comment, stripped before matching
# Example: tau = 1e-4   # stability check
COMMENT_PATTERN = re.compile(r"\s*#.*$")

# Literal spellings accepted for booleans
TRUE_WORDS = {"true", "on", "yes", "1"}
FALSE_WORDS = {"false", "off", "no", "0"}

# Literal spellings meaning "resolve the default"
NONE_WORDS = {"none", "auto", ""}
