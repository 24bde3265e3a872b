"""Config parser - converts key = value text into a typed run configuration."""

import dataclasses
import math
import re
import types
from pathlib import Path
from typing import Any, Union, get_args, get_origin

from rnpsim.config.settings import ChoConfig, SolverConfig
from rnpsim.core.errors import ConfigError
from rnpsim.parser.patterns import (
    COMMENT_PATTERN,
    FALSE_WORDS,
    KEY_VALUE_PATTERN,
    NONE_WORDS,
    SECTION_PATTERN,
    TRUE_WORDS,
)

SECTIONS: dict[str, type] = {
    SolverConfig.SECTION: SolverConfig,
    ChoConfig.SECTION: ChoConfig,
}


def _unwrap_optional(annotation: Any) -> tuple[Any, bool]:
    if get_origin(annotation) in (Union, types.UnionType):
        args = [a for a in get_args(annotation) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return annotation, False


def coerce_value(raw: str, annotation: Any) -> Any:
    """
    Convert a raw config value to the field's annotated type.

    Args:
        raw: Value text with comments and surrounding whitespace removed
        annotation: Field type (int, float, bool, str, or Optional of those)

    Returns:
        The typed value

    Raises:
        ValueError: If the text is not a valid literal for the type
    """
    target, optional = _unwrap_optional(annotation)
    if optional and raw.lower() in NONE_WORDS:
        return None
    if not raw:
        raise ValueError("empty value")

    if target is bool:
        word = raw.lower()
        if word in TRUE_WORDS:
            return True
        if word in FALSE_WORDS:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if target is int:
        return int(raw)
    if target is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return value
    return raw


def _line_for_message(message: str, key_lines: dict[str, int], default: int) -> int:
    """Latest line among the keys a validation message mentions."""
    mentioned = [
        line for key, line in key_lines.items() if re.search(rf"\b{re.escape(key)}\b", message)
    ]
    return max(mentioned) if mentioned else default


def parse_config(text: str) -> Union[SolverConfig, ChoConfig]:
    """
    Parse a configuration file body.

    The first non-comment line must be a section header ([rnp] or [cho]); every
    following non-blank line is ``key = value``. Unknown and duplicate keys are
    rejected, and the resolved config must pass its own validation.

    Args:
        text: Config file contents

    Returns:
        SolverConfig for [rnp], ChoConfig for [cho]

    Raises:
        ConfigError: With the offending line number
    """
    config_cls = None
    section_line = 1
    values: dict[str, Any] = {}
    key_lines: dict[str, int] = {}
    fields: dict[str, dataclasses.Field] = {}

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = COMMENT_PATTERN.sub("", raw_line).strip()
        if not line:
            continue

        section = SECTION_PATTERN.match(line)
        if section:
            if config_cls is not None:
                raise ConfigError("only one section header is allowed", line_no)
            name = section.group("section").lower()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}], expected [rnp] or [cho]", line_no)
            config_cls = SECTIONS[name]
            section_line = line_no
            fields = config_cls.field_map()
            continue

        match = KEY_VALUE_PATTERN.match(line)
        if not match:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", line_no)
        if config_cls is None:
            raise ConfigError("missing section header [rnp] or [cho]", line_no)

        key, raw_value = match.group("key"), match.group("value").strip()
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{config_cls.SECTION}]", line_no)
        if key in key_lines:
            raise ConfigError(
                f"duplicate key {key!r} (lines {key_lines[key]} and {line_no})", line_no
            )
        try:
            values[fields[key].name] = coerce_value(raw_value, fields[key].type)
        except ValueError as e:
            raise ConfigError(f"cannot parse {key!r}: {e}", line_no) from e
        key_lines[key] = line_no

    if config_cls is None:
        raise ConfigError("missing section header [rnp] or [cho]", 1)

    config = config_cls(**values)
    errors = config.validate()
    if errors:
        line_no = _line_for_message(errors[0], key_lines, section_line)
        raise ConfigError("; ".join(errors), line_no)
    return config


def load_config(path: Union[str, Path]) -> Union[SolverConfig, ChoConfig]:
    """Read and parse a UTF-8 config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return parse_config(text)


def config_from_mapping(section: str, values: dict[str, Any]) -> Union[SolverConfig, ChoConfig]:
    """
    Rebuild a configuration from a manifest echo (config-file keys to typed values).

    Raises:
        ConfigError: On an unknown section or key, or when validation fails
    """
    config_cls = SECTIONS.get(section)
    if config_cls is None:
        raise ConfigError(f"unknown section [{section}], expected [rnp] or [cho]")
    fields = config_cls.field_map()
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(unknown)}")
    config = config_cls(**{fields[key].name: value for key, value in values.items()})
    errors = config.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def render_config(config: Union[SolverConfig, ChoConfig]) -> str:
    """Inverse of parse_config: the resolved config as a config file body."""
    lines = [f"[{config.SECTION}]"]
    for key, value in config.to_dict().items():
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
