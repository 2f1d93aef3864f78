"""Word lists backing the shallow parser, loaded from UTF-8 resource files."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path


def read_entries(source) -> list[str]:
    """Non-empty lines of a resource file with ``#`` comments stripped.

    ``source`` is a filesystem path or the bare name of a bundled resource.
    """
    path = Path(source)
    if isinstance(source, Path) or len(path.parts) > 1:
        text = path.read_text(encoding="utf-8")
    else:
        text = resources.files("atm.qparse").joinpath("resources", source).read_text(encoding="utf-8")
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line.lower())
    return out


@dataclass(frozen=True)
class VerbLexicon:
    lemmas: frozenset[str]
    irregular: dict[str, str] = field(default_factory=dict)
    stopverbs: frozenset[str] = frozenset()

    def lemma(self, word: str) -> str | None:
        """Verb lemma of ``word`` (case-insensitive), or None if it is not a known verb form."""
        w = word.lower()
        if w in self.irregular:
            return self.irregular[w]
        if w in self.lemmas or w in self.stopverbs:
            return w
        for stem in _stems(w):
            if stem in self.lemmas:
                return stem
        return None

    def is_stopverb(self, word: str, lemma: str | None = None) -> bool:
        w = word.lower()
        return w in self.stopverbs or (lemma is not None and lemma in self.stopverbs)


def _stems(w: str) -> list[str]:
    """Candidate lemmas for an inflected form; every candidate is non-empty."""
    out: list[str] = []

    def keep(stem: str):
        if len(stem) >= 2:
            out.append(stem)

    if w.endswith("ing") and len(w) > 4:
        stem = w[:-3]
        keep(stem)
        keep(stem + "e")
        if len(stem) > 2 and stem[-1] == stem[-2]:
            keep(stem[:-1])
        if stem.endswith("y"):
            keep(stem[:-1] + "ie")
    elif w.endswith("ied") and len(w) > 4:
        keep(w[:-3] + "y")
    elif w.endswith("ed") and len(w) > 3:
        stem = w[:-2]
        keep(stem)
        keep(w[:-1])
        if len(stem) > 2 and stem[-1] == stem[-2]:
            keep(stem[:-1])
    elif w.endswith("ies") and len(w) > 4:
        keep(w[:-3] + "y")
    elif w.endswith("es") and len(w) > 3:
        keep(w[:-2])
        keep(w[:-1])
    elif w.endswith("s") and not w.endswith("ss") and len(w) > 2:
        keep(w[:-1])
    return out


@lru_cache(maxsize=None)
def default_lexicon() -> VerbLexicon:
    irregular = {}
    for entry in read_entries("irregular.txt"):
        form, lemma = entry.split()
        irregular[form] = lemma
    return VerbLexicon(
        lemmas=frozenset(read_entries("verbs.txt")),
        irregular=irregular,
        stopverbs=frozenset(read_entries("stopverbs.txt")),
    )


@lru_cache(maxsize=None)
def function_words() -> frozenset[str]:
    return frozenset(read_entries("func_words.txt"))


@lru_cache(maxsize=None)
def boundary_phrases() -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(e.split()) for e in read_entries("boundaries.txt"))


@lru_cache(maxsize=None)
def default_keywords() -> tuple[str, ...]:
    return tuple(read_entries("keywords.txt"))
