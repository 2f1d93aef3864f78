"""Rule-based shallow parsing of questions."""
from __future__ import annotations

from dataclasses import replace
from typing import Iterable

from .chunker import (
    FUNC,
    NOUN,
    OTHER,
    VERB,
    TemporalKeywords,
    Token,
    TokenSeq,
    candidate_spans,
    classify_temporal_sensitivity,
    extract_action_phrase,
    tokenize,
    word_tokens,
)
from .lexicon import VerbLexicon, default_keywords, default_lexicon, read_entries


def annotate(records: Iterable, keywords: TemporalKeywords | None = None) -> list:
    """Fill ``action_phrase`` and ``temporal_sensitive`` on question records.

    Values already present on a record are kept as they are.
    """
    out = []
    for rec in records:
        phrase = rec.action_phrase if rec.action_phrase is not None else extract_action_phrase(rec.question_text)
        out.append(
            replace(
                rec,
                action_phrase=phrase,
                temporal_sensitive=(
                    rec.temporal_sensitive
                    if rec.temporal_sensitive is not None
                    else classify_temporal_sensitivity(rec.question_text, keywords)
                ),
            )
        )
    return out


__all__ = [
    "FUNC", "NOUN", "OTHER", "VERB", "TemporalKeywords", "Token", "TokenSeq",
    "VerbLexicon", "annotate", "candidate_spans", "classify_temporal_sensitivity",
    "default_keywords", "default_lexicon", "extract_action_phrase", "read_entries", "tokenize",
    "word_tokens",
]
