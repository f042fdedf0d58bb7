"""Turn free-text model responses into candidate answer strings."""

from __future__ import annotations

import re

from ..text import ANSWER_OPTS, normalize

# ''...'' | "..." | «...» | “...”
_QUOTED = re.compile(r"''(.+?)''|\"(.+?)\"|«(.+?)»|“(.+?)”")


def _segments(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        for match in _QUOTED.finditer(line):
            segment = next(g for g in match.groups() if g is not None).strip()
            if segment:
                out.append(segment)
    return out


def _is_sentinel(text: str, sentinel: str) -> bool:
    target = normalize(sentinel, ANSWER_OPTS)
    return bool(target) and target in normalize(text, ANSWER_OPTS)


def parse_response(text: str, sentinel: str) -> list[str]:
    """Quoted segments of ``text`` in order; prose and the sentinel are dropped."""
    return [s for s in _segments(text) if not _is_sentinel(s, sentinel)]


def response_status(text: str, sentinel: str) -> str:
    """``"answers"``, ``"no_answer"`` (sentinel only) or ``"unparseable"``."""
    if parse_response(text, sentinel):
        return "answers"
    if _is_sentinel(text, sentinel):
        return "no_answer"
    return "unparseable"
