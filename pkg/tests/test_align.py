import json
import pathlib
import tempfile

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import WORDS, make_record
from quranqa.align import (
    AlignCounter,
    align_answer,
    align_llm_answers,
    load_nbest,
    locate_answer,
    rank_scores,
    snap_to_word_boundaries,
)
from quranqa.errors import DataError
from quranqa.text import ANSWER_OPTS, normalize, tokenize

PASSAGE = "وَالَّذِينَ آمَنُوا وَعَمِلُوا الصَّالِحَاتِ أُولَٰئِكَ أَصْحَابُ الْجَنَّةِ هُمْ فِيهَا خَالِدُونَ"


def strip_marks(text):
    return "".join(c for c in text if not 0x064B <= ord(c) <= 0x0652 and ord(c) != 0x0670)


def test_exact_identity():
    tokens = tokenize(PASSAGE)
    span = align_answer("أَصْحَابُ الْجَنَّةِ", tokens, passage=PASSAGE)
    assert (span.start_token, span.end_token) == (5, 6)
    assert span.text == "أَصْحَابُ الْجَنَّةِ"


def test_diacritic_free_candidate_recovers_original():
    tokens = tokenize(PASSAGE)
    gold = "وَعَمِلُوا الصَّالِحَاتِ"
    counter = AlignCounter()
    span = align_answer(strip_marks(gold), tokens, passage=PASSAGE, counter=counter)
    assert span.text == gold
    assert counter.exact == 1


def test_no_shared_token():
    tokens = tokenize(PASSAGE)
    counter = AlignCounter()
    assert align_answer("الشعير والذرة", tokens, passage=PASSAGE, counter=counter) is None
    assert counter.failed == 1 and counter.drop_rate == 1.0


def test_first_occurrence_wins():
    passage = "نور على نور يهدي الله لنوره"
    span = align_answer("نور", tokenize(passage), passage=passage)
    assert span.start_token == 0


def test_quotes_and_punctuation_ignored():
    passage = "أمر بالصدق في القول، والأمانة في العمل."
    span = align_answer('"والأمانة في العمل"', tokenize(passage), passage=passage)
    assert span.text == "والأمانة في العمل."


def test_fuzzy_stage():
    passage = "قال الحكيم إن العلم نور يهدي صاحبه إلى الخير"
    tokens = tokenize(passage)
    # one extra word the passage lacks: F1 of the 4-word window = 0.889
    found = locate_answer("العلم نور يهدي صاحبه دائما", tokens, 0.8)
    assert found.stage == "fuzzy"
    assert (found.start_token, found.end_token) == (3, 6)
    assert found.f1 == pytest.approx(8 / 9)
    assert locate_answer("العلم نور يهدي صاحبه دائما", tokens, 0.9) is None


def test_fuzzy_tie_goes_to_earliest_start():
    passage = "أ ب ج أ ب ج"
    found = locate_answer("أ ب د", tokenize(passage), 0.5)
    assert found.start_token == 0


def brute_force_fuzzy(cand, keys, threshold):
    """Reference: every window of width len(cand)±2, multiset F1 via sorting."""
    def f1(a, b):
        common = 0
        rest = list(b)
        for x in a:
            if x in rest:
                rest.remove(x)
                common += 1
        if common == 0:
            return 0.0
        p, r = common / len(a), common / len(b)
        return 2 * p * r / (p + r)

    best = None
    for i in range(len(keys)):
        for j in range(i, len(keys)):
            width = j - i + 1
            if abs(width - len(cand)) > 2:
                continue
            score = f1(keys[i : j + 1], cand)
            cand_key = (-score, i, width)
            if best is None or cand_key < best:
                best = cand_key
    if best is None or -best[0] <= 0 or -best[0] < threshold:
        return None
    return best[1], best[1] + best[2] - 1, -best[0]


small_words = st.sampled_from(["ب", "ج", "د", "ه", "و"])


@given(st.lists(small_words, min_size=1, max_size=12), st.lists(small_words, min_size=1, max_size=5),
       st.floats(0.1, 1.0))
def test_fuzzy_matches_brute_force(passage_words, cand_words, threshold):
    passage = " ".join(passage_words)
    candidate = " ".join(cand_words)
    tokens = tokenize(passage)
    keys = [t.norm for t in tokens]
    found = locate_answer(candidate, tokens, threshold)
    m = len(cand_words)
    exact = next((i for i in range(len(keys) - m + 1) if keys[i : i + m] == cand_words), None)
    if exact is not None:
        assert (found.start_token, found.end_token, found.stage) == (exact, exact + m - 1, "exact")
        return
    expected = brute_force_fuzzy(cand_words, keys, threshold)
    if expected is None:
        assert found is None
    else:
        assert (found.start_token, found.end_token) == expected[:2]
        assert found.f1 == pytest.approx(expected[2])
        assert found.f1 >= threshold


@st.composite
def passage_and_gold(draw):
    words = draw(st.lists(st.sampled_from(WORDS), min_size=1, max_size=25))
    passage = " ".join(words)
    i = draw(st.integers(0, len(words) - 1))
    j = draw(st.integers(i, len(words) - 1))
    return passage, " ".join(words[i : j + 1])


@given(passage_and_gold())
def test_gold_realigns_to_exact_substring(case):
    passage, gold = case
    tokens = tokenize(passage)
    span = align_answer(gold, tokens, passage=passage)
    assert span is not None
    assert span.text in passage
    assert normalize(span.text, ANSWER_OPTS) == normalize(gold, ANSWER_OPTS)


def test_snap_identity_and_expansion():
    passage = "قل هو الله أحد الله الصمد"
    tokens = tokenize(passage)
    start, end = tokens[2].start_char, tokens[4].end_char
    assert snap_to_word_boundaries((start, end), tokens) == (2, 4)
    assert snap_to_word_boundaries((start + 1, end - 1), tokens) == (2, 4)
    with pytest.raises(DataError):
        snap_to_word_boundaries((2, 3), tokens)  # the space between tokens 0 and 1


@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=15), st.data())
def test_snap_idempotent_and_expanding(words, data):
    passage = " ".join(words)
    tokens = tokenize(passage)
    start = data.draw(st.integers(0, len(passage) - 1))
    end = data.draw(st.integers(start + 1, len(passage)))
    assume(any(t.start_char < end and t.end_char > start for t in tokens))
    s, e = snap_to_word_boundaries((start, end), tokens)
    overlapping = [t.index for t in tokens if t.start_char < end and t.end_char > start]
    # expansion only: exactly the touched words, none dropped, none added
    assert (s, e) == (overlapping[0], overlapping[-1])
    again = snap_to_word_boundaries((tokens[s].start_char, tokens[e].end_char), tokens)
    assert again == (s, e)


def test_rank_scores():
    assert rank_scores(4) == [1.0, 0.75, 0.5, 0.25]
    assert rank_scores(0) == []


def test_align_llm_answers_keeps_rank_scores():
    rec = make_record("q", "قال الله نور السماوات والأرض", [])
    spans = align_llm_answers(["نور", "غير موجود", "الله"], rec, tokenize(rec.passage))
    assert [(s.text, s.score) for s in spans] == [("نور", 1.0), ("الله", pytest.approx(1 / 3))]
    assert all(s.origin == "llm" for s in spans)


@pytest.fixture
def nbest_corpus():
    return [
        make_record("a", "وَالَّذِينَ آمَنُوا وَعَمِلُوا الصَّالِحَاتِ لَهُمْ جَنَّاتٌ", ["وَعَمِلُوا الصَّالِحَاتِ"]),
        make_record("b", "قال الله نور", []),
    ]


def write_json(path, obj):
    path.write_text(json.dumps(obj, ensure_ascii=False), encoding="utf-8")
    return path


def test_load_nbest_truncates_and_keeps_order(tmp_path, nbest_corpus):
    passage = nbest_corpus[0].passage
    entries = [
        {"text": "x", "score": 1.0 - i / 100, "start_token": i % 5, "end_token": i % 5}
        for i in range(20)
    ]
    path = write_json(tmp_path / "nbest.json", {"a": entries, "b": []})
    out = load_nbest(path, nbest_corpus, 10)
    assert len(out["a"]) == 10
    assert [s.score for s in out["a"]] == [e["score"] for e in entries[:10]]
    assert out["b"] == []
    tokens = tokenize(passage)
    assert out["a"][1].text == tokens[1].surface
    assert all(s.origin == "nbest" for s in out["a"])


def test_load_nbest_snaps_subword_offsets(tmp_path, nbest_corpus):
    passage = nbest_corpus[0].passage
    start = passage.find("عَمِلُوا")  # inside the token "وَعَمِلُوا"
    end = passage.find("الصَّالِحَاتِ") + 4  # half of the next word
    path = write_json(tmp_path / "nbest.json", {"a": [{"text": passage[start:end], "score": 3.2,
                                                       "start_char": start, "end_char": end}]})
    span = load_nbest(path, nbest_corpus)["a"][0]
    assert span.text == "وَعَمِلُوا الصَّالِحَاتِ"
    before = passage[: passage.find(span.text)]
    after = passage[passage.find(span.text) + len(span.text) :]
    assert before == "" or before.endswith(" ")
    assert after == "" or after.startswith(" ")


def test_load_nbest_errors(tmp_path, nbest_corpus):
    n = len(nbest_corpus[1].passage)
    bad = write_json(tmp_path / "a.json", {"b": [{"text": "x", "score": 1, "start_char": 0, "end_char": n + 5}]})
    with pytest.raises(DataError, match="b: character span"):
        load_nbest(bad, nbest_corpus)
    unknown = write_json(tmp_path / "u.json", {"zzz": []})
    with pytest.raises(DataError, match="unknown pq_id zzz"):
        load_nbest(unknown, nbest_corpus)
    malformed = tmp_path / "m.json"
    malformed.write_text("[1, 2", encoding="utf-8")
    with pytest.raises(DataError):
        load_nbest(malformed, nbest_corpus)
    no_offsets = write_json(tmp_path / "n.json", {"b": [{"text": "x", "score": 1}]})
    with pytest.raises(DataError, match="offsets"):
        load_nbest(no_offsets, nbest_corpus)
    token_oob = write_json(tmp_path / "t.json", {"b": [{"text": "x", "score": 1, "start_token": 0, "end_token": 3}]})
    with pytest.raises(DataError, match="outside passage"):
        load_nbest(token_oob, nbest_corpus)


@given(st.lists(st.sampled_from(WORDS), min_size=2, max_size=20), st.data())
def test_nbest_outputs_are_whitespace_bounded(words, data):
    passage = " ".join(words)
    rec = make_record("p", passage, [])
    start = data.draw(st.integers(0, len(passage) - 1))
    end = data.draw(st.integers(start + 1, len(passage)))
    assume(passage[start:end].strip())
    with tempfile.TemporaryDirectory() as d:
        path = write_json(pathlib.Path(d) / "n.json",
                          {"p": [{"text": "", "score": 0.5, "start_char": start, "end_char": end}]})
        span = load_nbest(path, [rec])["p"][0]
    assert span.text == passage[tokenize(passage)[span.start_token].start_char:
                                tokenize(passage)[span.end_token].end_char]
    assert span.text == span.text.strip()
    assert set(span.text.split()) <= set(words)
