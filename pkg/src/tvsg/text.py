"""Shared tokenizer used by statistics, retrieval, and the encoder.

One rule everywhere: punctuation is split off as its own token, then the text
is whitespace-split. Case handling is left to the caller (the encoder
lowercases, statistics count surface forms as-is).
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def split_tokens(text: str) -> list[str]:
    """Split ``text`` into word and single-punctuation tokens.

    >>> split_tokens("We were on a break!")
    ['We', 'were', 'on', 'a', 'break', '!']
    """
    return _TOKEN_RE.findall(text)


def count_tokens(text: str) -> int:
    return len(_TOKEN_RE.findall(text))
