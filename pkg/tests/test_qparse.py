from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from atm.data import QuestionRecord
from atm.data.synth import EVENT_NAMES
from atm.qparse import (
    VERB,
    TemporalKeywords,
    annotate,
    classify_temporal_sensitivity,
    default_keywords,
    extract_action_phrase,
    read_entries,
    tokenize,
)

CORPUS = Path(__file__).parent / "data" / "qparse_corpus.tsv"


def load_corpus():
    rows = []
    for line in CORPUS.read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        q, phrase, sens = line.split("\t")
        rows.append((q, None if phrase == "-" else phrase, sens == "true"))
    return rows


def test_reference_fixtures():
    assert extract_action_phrase("what happens to the train after moving for a while near the end?") == "moving for a while"
    assert classify_temporal_sensitivity("what does A do after raising her hand?") is True
    assert classify_temporal_sensitivity("How many people are involved in the video?") is False


def test_corpus_phrase_exact_match_rate():
    rows = load_corpus()
    assert len(rows) >= 50
    hits = sum(extract_action_phrase(q) == p for q, p, _ in rows)
    assert hits / len(rows) >= 0.90


def test_corpus_sensitivity_agrees_with_keyword_list():
    rows = load_corpus()
    wrong = [q for q, _, s in rows if classify_temporal_sensitivity(q) != s]
    assert wrong == []


def test_phrase_is_substring_of_question():
    for q, _, _ in load_corpus():
        p = extract_action_phrase(q)
        assert p is None or p in q


def test_no_verb_gives_none():
    assert extract_action_phrase("where is the video taken?") is None
    assert extract_action_phrase("who is in the kitchen?") is None
    assert extract_action_phrase("") is None


def test_shortest_wins_and_ties_go_earliest():
    assert extract_action_phrase("why did the boy run away after the dog barked?") == "barked"
    assert extract_action_phrase("what did the girl hold while walking?") == "hold"


def test_a_while_is_not_a_boundary():
    assert extract_action_phrase("what happens after resting for a while?") == "resting for a while"


def test_direction_after_verb():
    assert extract_action_phrase("what happens as the car turns left?") == "turns left"
    assert extract_action_phrase("why did the man wave his arms when the bus left?") == "left"


def test_tokenize_tags():
    seq = tokenize("why did the dog jump over the fence")
    tags = {t.surface: t for t in seq.tokens}
    assert tags["jump"].tag == VERB and not tags["jump"].stop
    assert tags["did"].stop
    assert tags["fence"].tag != VERB
    assert seq.reconstruct() == "why did the dog jump over the fence"


@pytest.mark.parametrize("name", EVENT_NAMES)
@pytest.mark.parametrize("rel", ["after", "before"])
def test_synthetic_event_names_round_trip(name, rel):
    assert extract_action_phrase(f"what happens {rel} {name}?") == name


@pytest.mark.parametrize(
    "text, expected",
    [
        ("What did he do AFTER that?", True),
        ("what did she do afterwards?", False),  # whole words only
        ("as the man walks away, what does the dog do?", True),
        ("what happens as the car turns?", False),  # "as" counts only clause-initially
        ("what did the boy do, as the bell rang?", True),
        ("what happened at the end of the video?", True),
        ("who stood first?", True),
        ("where is the ball?", False),
    ],
)
def test_keyword_filter(text, expected):
    assert classify_temporal_sensitivity(text) is expected


def test_custom_keyword_file(tmp_path):
    path = tmp_path / "kw.txt"
    path.write_text("# custom\nbeforehand\n")
    kw = TemporalKeywords.from_file(path)
    assert kw("what did he do beforehand?")
    assert not kw("what did he do before?")
    assert "after" in read_entries("keywords.txt") and "after" in default_keywords()


words = st.sampled_from(["the", "man", "jumps", "after", "a", "while", "red", "ball", "opens", "door", ",", "why", "did"])


@given(st.lists(words, max_size=12))
def test_parser_total_and_substring(tokens):
    text = " ".join(tokens) + "?"
    p = extract_action_phrase(text)
    assert p is None or (p in text and p.strip() == p)
    assert isinstance(classify_temporal_sensitivity(text), bool)


@given(st.lists(words, max_size=12))
def test_adding_a_keyword_makes_sensitive(tokens):
    assert classify_temporal_sensitivity(" ".join(tokens) + " before it?")


def test_annotate_fills_missing_fields_only():
    recs = [
        QuestionRecord("q1", "v", "what happens after opening the door?", ("a", "b"), 0),
        QuestionRecord("q2", "v", "why did he jump?", ("a", "b"), 0, action_phrase="jump", temporal_sensitive=True),
    ]
    out = annotate(recs)
    assert out[0].action_phrase == "opening the door" and out[0].temporal_sensitive is True
    assert out[1].temporal_sensitive is True  # kept although no keyword is present
