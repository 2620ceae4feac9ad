"""Rollout text parsing: format tags and the predicted index sequence.

Format checking is strict: a response passes only when it is exactly one
reasoning block followed by exactly one answer block (surrounding whitespace
ignored).  ``<thinking>`` is the default reasoning tag with ``<think>``
accepted as an alias, but one response must not mix the two styles.
Everything here is pure and stateless.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

from .types import AvJigsawError

_TAGS = {
    "think": ("<think>", "</think>"),
    "thinking": ("<thinking>", "</thinking>"),
}


class ParseErrorCode(str, enum.Enum):
    EMPTY_ANSWER = "EMPTY_ANSWER"
    NON_INTEGER_TOKEN = "NON_INTEGER_TOKEN"
    MISSING_ANSWER_BLOCK = "MISSING_ANSWER_BLOCK"


class RolloutParseError(AvJigsawError):
    def __init__(self, code: ParseErrorCode, message: str = ""):
        self.parse_code = code
        super().__init__(code.value, message)


class FormatCheck(NamedTuple):
    ok: bool
    think_text: Optional[str]
    answer_text: Optional[str]


@dataclass(frozen=True)
class ParsedRollout:
    think_text: str
    answer_text: str
    indices: Optional[List[int]]
    format_ok: bool
    parse_error: Optional[ParseErrorCode] = None


def check_format(raw: str, tag_style: str = "thinking") -> FormatCheck:
    """Strict structural check; returns the extracted blocks on success."""
    if tag_style not in _TAGS:
        raise AvJigsawError("BAD_TAG_STYLE", tag_style)
    alias = "think" if tag_style == "thinking" else "thinking"
    if raw.count("<answer>") != 1 or raw.count("</answer>") != 1:
        return FormatCheck(False, None, None)
    for style in (tag_style, alias):
        open_tag, close_tag = _TAGS[style]
        other_open, other_close = _TAGS[alias if style == tag_style else tag_style]
        if raw.count(open_tag) != 1 or raw.count(close_tag) != 1:
            continue
        if other_open in raw or other_close in raw:
            return FormatCheck(False, None, None)  # mixed tag styles
        pattern = (rf"\s*{re.escape(open_tag)}(.*?){re.escape(close_tag)}"
                   rf"\s*<answer>(.*?)</answer>\s*")
        m = re.fullmatch(pattern, raw, re.DOTALL)
        if m:
            return FormatCheck(True, m.group(1), m.group(2))
        return FormatCheck(False, None, None)
    return FormatCheck(False, None, None)


def extract_answer_block(raw: str) -> Optional[str]:
    """Content of the single <answer> block, or None if absent or ambiguous."""
    if raw.count("<answer>") != 1 or raw.count("</answer>") != 1:
        return None
    start = raw.find("<answer>")
    end = raw.find("</answer>")
    if end < start:
        return None
    return raw[start + len("<answer>"): end]


_INT_TOKEN = re.compile(r"[+-]?\d+")


def parse_index_sequence(answer_text: str, n: Optional[int] = None) -> List[int]:
    """Parse a comma-separated index list such as ``2, 3, 1, 4, 6, 5``.

    Tolerates surrounding whitespace and one trailing period after the final
    index; any other deviation raises.  Length and permutation checks are the
    grader's job, so wrong-length or out-of-range sequences come back as-is.
    """
    text = answer_text.strip()
    if text.endswith("."):
        text = text[:-1]
    if not text.strip():
        raise RolloutParseError(ParseErrorCode.EMPTY_ANSWER)
    indices = []
    for token in text.split(","):
        token = token.strip()
        if not _INT_TOKEN.fullmatch(token):
            raise RolloutParseError(ParseErrorCode.NON_INTEGER_TOKEN, repr(token))
        indices.append(int(token))
    return indices


def format_index_sequence(indices: List[int]) -> str:
    return ", ".join(str(i) for i in indices)


def parse_rollout(raw: str, tag_style: str = "thinking") -> ParsedRollout:
    """Full parse of one model response; never raises.

    The index sequence is recovered from the single answer block even when the
    overall format check fails (the format reward is withheld separately), so
    grading stays element-wise rather than all-or-nothing.
    """
    fmt = check_format(raw, tag_style)
    answer_text = fmt.answer_text if fmt.ok else extract_answer_block(raw)
    indices = None
    error = None
    if answer_text is None:
        error = ParseErrorCode.MISSING_ANSWER_BLOCK
        answer_text = ""
    else:
        try:
            indices = parse_index_sequence(answer_text)
        except RolloutParseError as e:
            error = e.parse_code
    return ParsedRollout(
        think_text=fmt.think_text or "",
        answer_text=answer_text,
        indices=indices,
        format_ok=fmt.ok,
        parse_error=error,
    )
