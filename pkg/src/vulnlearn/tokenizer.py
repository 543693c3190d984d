"""Source-code tokenization and corpus token statistics.

Two strategies are supported:

``Strategy.RAW``
    Comments are kept as text and every special symbol is emitted as its own
    one-character token.
``Strategy.FILTERED``
    Comments are stripped first and special symbols are dropped.

Identifiers are normalized by splitting camelCase humps, lowercasing and
joining with underscores, so ``StringBuilder`` becomes ``string_builder``.
"""
from __future__ import annotations

import csv
import enum
import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SPECIAL_SYMBOLS = frozenset("{},.;:[])(+-=|&!?*^\\<>@\"'~#%")

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z])(?=[A-Z])")


class Strategy(str, enum.Enum):
    RAW = "raw"
    FILTERED = "filtered"


class UnterminatedCommentWarning(UserWarning):
    """A block comment was opened but never closed."""


@dataclass(frozen=True)
class TokenStream:
    file_id: str
    tokens: tuple[str, ...]
    strategy: Strategy

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass
class TokenStats:
    histogram: Counter
    vulnerable_vocab: set[str] = field(default_factory=set)
    nonvulnerable_vocab: set[str] = field(default_factory=set)

    @property
    def common(self) -> set[str]:
        return self.vulnerable_vocab & self.nonvulnerable_vocab

    @property
    def counts(self) -> tuple[int, int, int]:
        """(vulnerable, non-vulnerable, common) vocabulary sizes."""
        return len(self.vulnerable_vocab), len(self.nonvulnerable_vocab), len(self.common)

    @property
    def total_tokens(self) -> int:
        return sum(self.histogram.values())

    def occurrence_histogram(self, bucket_width: int = 1) -> list[tuple[int, int]]:
        """Number of distinct tokens per occurrence-count bucket.

        Bucket ``b`` covers counts in ``[b, b + bucket_width)``.
        """
        if bucket_width < 1:
            raise ValueError("bucket_width must be >= 1")
        buckets: Counter = Counter()
        for count in self.histogram.values():
            buckets[((count - 1) // bucket_width) * bucket_width + 1] += 1
        return sorted(buckets.items())

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["token", "count", "in_vulnerable", "in_nonvulnerable"])
            for token in sorted(self.histogram):
                writer.writerow([
                    token,
                    self.histogram[token],
                    int(token in self.vulnerable_vocab),
                    int(token in self.nonvulnerable_vocab),
                ])

    def write_histogram_csv(self, path: str | Path, bucket_width: int = 1) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["occurrence_bucket", "token_count"])
            writer.writerows(self.occurrence_histogram(bucket_width))


def strip_comments(source: str) -> str:
    """Remove ``//`` line comments and ``/* */`` block comments.

    String literals, character literals and text blocks are tracked so that
    comment-like sequences inside them (``"http://x"``) survive. The newline
    that ends a line comment is kept.
    """
    out: list[str] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            end = source.find("\n", i)
            i = n if end < 0 else end
        elif ch == "/" and i + 1 < n and source[i + 1] == "*":
            end = source.find("*/", i + 2)
            if end < 0:
                warnings.warn("unterminated block comment; stripped to end of input",
                              UnterminatedCommentWarning, stacklevel=2)
                i = n
            else:
                i = end + 2
                # a comment between two non-space characters still separates them
                if out and i < n and not out[-1].isspace() and not source[i].isspace():
                    out.append(" ")
        elif source.startswith('"""', i):
            end = source.find('"""', i + 3)
            end = n if end < 0 else end + 3
            out.append(source[i:end])
            i = end
        elif ch in "\"'":
            j = _literal_end(source, i)
            out.append(source[i:j])
            i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _literal_end(source: str, start: int) -> int:
    # Literals end at the matching quote or, if malformed, at end of line.
    quote = source[start]
    i, n = start + 1, len(source)
    while i < n:
        ch = source[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            return i + 1
        if ch == "\n":
            return i
        i += 1
    return n


def _drop_literal_contents(source: str) -> str:
    out: list[str] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if source.startswith('"""', i):
            end = source.find('"""', i + 3)
            i = n if end < 0 else end + 3
            out.append('""')
        elif ch in "\"'":
            j = _literal_end(source, i)
            out.append(ch * 2)
            i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def normalize_identifier(token: str) -> str:
    """``StringBuilder`` -> ``string_builder``; other tokens are lowercased."""
    return _CAMEL_BOUNDARY.sub("_", token).lower()


def _split(text: str) -> list[str]:
    # runs of "/" form their own token so "//" survives in raw streams
    tokens: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch == "/":
            if buf and buf[-1] != "/":
                tokens.append("".join(buf))
                buf = []
            buf.append(ch)
        elif buf and buf[-1] == "/":
            tokens.append("".join(buf))
            buf = []
            if ch in SPECIAL_SYMBOLS:
                tokens.append(ch)
            elif not ch.isspace():
                buf.append(ch)
        elif ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf = []
        elif ch in SPECIAL_SYMBOLS:
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
        else:
            buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    return tokens


def tokenize(
    source: str,
    strategy: Strategy | str = Strategy.FILTERED,
    *,
    file_id: str = "",
    normalize: bool = True,
    drop_strings: bool = False,
) -> TokenStream:
    """Split source text into a :class:`TokenStream`.

    Parameters
    ----------
    source : str
        Raw file contents.
    strategy : Strategy
        ``RAW`` keeps comments and symbols; ``FILTERED`` removes both.
    normalize : bool
        Apply camelCase splitting and lowercasing to every token.
    drop_strings : bool
        Blank out string and character literal contents before splitting.
    """
    strategy = Strategy(strategy)
    text = unicodedata.normalize("NFC", source)
    if strategy is Strategy.FILTERED:
        text = strip_comments(text)
    if drop_strings:
        text = _drop_literal_contents(text)
    tokens = _split(text)
    if strategy is Strategy.FILTERED:
        tokens = [t for t in tokens if t not in SPECIAL_SYMBOLS]
    if normalize:
        tokens = [normalize_identifier(t) for t in tokens]
    return TokenStream(file_id=file_id, tokens=tuple(tokens), strategy=strategy)


def tokenize_file(path: str | Path, strategy: Strategy | str = Strategy.FILTERED,
                  file_id: str | None = None, **kwargs) -> TokenStream:
    path = Path(path)
    text = path.read_text(encoding="utf-8", errors="replace")
    return tokenize(text, strategy, file_id=file_id if file_id is not None else str(path), **kwargs)


def corpus_stats(streams: Iterable[tuple[Sequence[str] | TokenStream, int]]) -> TokenStats:
    """Token histogram plus per-label vocabularies for a labeled corpus."""
    stats = TokenStats(histogram=Counter())
    for stream, label in streams:
        if label not in (0, 1):
            raise ValueError(f"labels must be binary, got {label!r}")
        tokens = stream.tokens if isinstance(stream, TokenStream) else stream
        stats.histogram.update(tokens)
        (stats.vulnerable_vocab if label == 1 else stats.nonvulnerable_vocab).update(tokens)
    return stats
