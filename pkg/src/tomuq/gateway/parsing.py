"""Extract the reported certainty from a model completion."""

from __future__ import annotations

import re

from tomuq.errors import CertaintyParseError

# keyword, optional ':'/'=' separator amid whitespace, then a numeric token
_CERTAINTY_RE = re.compile(
    r"certainty\s*[:=]?\s*(\d+(?:\.\d+)?)", re.IGNORECASE
)
_KEYWORD_RE = re.compile(r"certainty", re.IGNORECASE)


def parse_certainty(text: str) -> float:
    """Return the reported certainty as a value on the grid 0.1 .. 1.0.

    The completion must contain the keyword CERTAINTY followed by an
    integer from 1 to 10; the last such report wins when the model
    restates itself.  Missing keyword, non-integer values, and values off
    the 1-10 scale all raise :class:`CertaintyParseError`.
    """
    matches = list(_CERTAINTY_RE.finditer(text))
    if not matches:
        if _KEYWORD_RE.search(text):
            raise CertaintyParseError("keyword present but no value follows")
        raise CertaintyParseError("keyword absent")
    token = matches[-1].group(1)
    if "." in token:
        raise CertaintyParseError(f"non-integer certainty {token!r}")
    value = int(token)
    if not 1 <= value <= 10:
        raise CertaintyParseError(f"certainty {value} outside the 1-10 scale")
    return value / 10.0
