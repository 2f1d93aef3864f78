"""Lexicon-driven tokenizer, action-phrase chunker and temporal-keyword filter."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lexicon import VerbLexicon, boundary_phrases, default_keywords, default_lexicon, function_words, read_entries

VERB, NOUN, FUNC, OTHER = "VERB", "NOUN", "FUNC", "OTHER"

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z]+)?|[^\w\s]")
_WH = frozenset({"what", "where", "why", "how", "who", "whom", "whose", "which"})
# A word right after one of these is read as a noun ("the train", "a while").
_DETERMINERS = frozenset(
    {"a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every",
     "another", "his", "her", "its", "their", "our", "my", "your"}
)
_TRAILING_CONJ = frozenset({"and", "or", "but", "so"})
# read as directions, not past tense of "leave", right after an action verb
_DIRECTIONS = frozenset({"left", "right"})


@dataclass(frozen=True)
class Token:
    surface: str
    tag: str
    start: int
    end: int
    lemma: str | None = None
    stop: bool = False


@dataclass(frozen=True)
class TokenSeq:
    text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def reconstruct(self) -> str:
        parts, pos = [], 0
        for tok in self.tokens:
            parts.append(self.text[pos:tok.start])
            parts.append(tok.surface)
            pos = tok.end
        parts.append(self.text[pos:])
        return "".join(parts)


def word_tokens(text: str) -> list[str]:
    """Lowercased token surfaces, without tagging."""
    return [m.group().lower() for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str, lexicon: VerbLexicon | None = None) -> TokenSeq:
    lexicon = lexicon or default_lexicon()
    func = function_words()
    tokens: list[Token] = []
    prev_low = None
    prev_action = False
    for m in _TOKEN_RE.finditer(text):
        surface = m.group()
        low = surface.lower()
        lemma = None
        stop = False
        if not surface[0].isalnum():
            tag = OTHER
        elif low in _WH or low.isdigit():
            tag = OTHER
        elif low in func:
            tag = FUNC
        elif prev_low in _DETERMINERS or (prev_action and low in _DIRECTIONS):
            tag = NOUN
        else:
            lemma = lexicon.lemma(low)
            if lemma is not None:
                tag = VERB
                stop = lexicon.is_stopverb(low, lemma)
            else:
                tag = NOUN
        tokens.append(Token(surface, tag, m.start(), m.end(), lemma, stop))
        prev_low = low
        prev_action = tag == VERB and not stop
    return TokenSeq(text, tuple(tokens))


def _boundary_at(seq: TokenSeq, i: int, boundaries: Sequence[tuple[str, ...]]) -> bool:
    toks = seq.tokens
    for phrase in boundaries:
        n = len(phrase)
        if i + n > len(toks):
            continue
        if all(toks[i + k].surface.lower() == phrase[k] for k in range(n)):
            # "a while" is a noun phrase, not the conjunction
            if n == 1 and i > 0 and toks[i - 1].surface.lower() in _DETERMINERS:
                continue
            return True
    return False


def candidate_spans(seq: TokenSeq) -> list[tuple[int, int]]:
    """``(first, last)`` token index pairs of every verb-headed candidate phrase."""
    boundaries = boundary_phrases()
    toks = seq.tokens
    spans = []
    for i, tok in enumerate(toks):
        if tok.tag != VERB or tok.stop:
            continue
        j = i + 1
        while j < len(toks) and toks[j].tag != VERB and not _boundary_at(seq, j, boundaries):
            j += 1
        last = j - 1
        while last > i and toks[last].surface.lower() in _TRAILING_CONJ:
            last -= 1
        spans.append((i, last))
    return spans


def extract_action_phrase(text: str, lexicon: VerbLexicon | None = None) -> str | None:
    """Shortest verb-headed phrase of ``text`` (earliest wins ties), or None."""
    seq = tokenize(text, lexicon)
    spans = candidate_spans(seq)
    if not spans:
        return None
    first, last = min(spans, key=lambda s: (s[1] - s[0], s[0]))
    return text[seq.tokens[first].start:seq.tokens[last].end]


class TemporalKeywords:
    """Whole-word, case-insensitive keyword filter.

    Entries starting with ``^`` only match at the start of a clause (start of
    text or after a comma).
    """

    def __init__(self, keywords: Iterable[str]):
        self.keywords = tuple(dict.fromkeys(k.lower() for k in keywords))
        patterns = []
        for kw in self.keywords:
            initial = kw.startswith("^")
            words = kw.lstrip("^").split()
            body = r"\s+".join(re.escape(w) for w in words)
            if initial:
                patterns.append(rf"(?:^|,)\s*{body}\b")
            else:
                patterns.append(rf"\b{body}\b")
        self._re = re.compile("|".join(patterns), re.IGNORECASE) if patterns else None

    @classmethod
    def from_file(cls, path) -> "TemporalKeywords":
        return cls(read_entries(path))

    def __call__(self, text: str) -> bool:
        return bool(self._re and self._re.search(text.strip()))


_default_filter: TemporalKeywords | None = None


def classify_temporal_sensitivity(text: str, keywords: TemporalKeywords | None = None) -> bool:
    global _default_filter
    if keywords is None:
        if _default_filter is None:
            _default_filter = TemporalKeywords(default_keywords())
        keywords = _default_filter
    return keywords(text)
