from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusforge.errors import MappingError, UnexpandableNumberError
from corpusforge.manifest import AlignedWord
from corpusforge.numwords import EnglishLexicon, VietnameseLexicon, get_lexicon
from corpusforge.textnorm import (
    CharProfile,
    check_char_whitelist,
    en_profile,
    expand_numbers,
    extract_mapping_from_pair,
    normalize_for_wer,
    revert_numbers,
    tokenize_words,
    vi_profile,
)

from conftest import uniform_words


# -- normalize_for_wer -------------------------------------------------------

def test_normalize_basic():
    assert normalize_for_wer("Hello, World!") == "hello world"


def test_normalize_empty():
    assert normalize_for_wer("") == ""


def test_normalize_vietnamese_diacritics_preserved():
    text = "Xin chào, Việt Nam!"
    out = normalize_for_wer(text)
    assert out == "xin chào việt nam"
    # character-class oracle: exactly the punctuation set is removed
    expected = " ".join("".join(c for c in text.lower() if c not in ",.!?").split())
    assert out == expected


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="aàbc .,!?ABĐ\t\n", max_size=40))
def test_normalize_idempotent(text):
    once = normalize_for_wer(text)
    assert normalize_for_wer(once) == once


# -- tokenize_words ----------------------------------------------------------

def test_tokenize_collapses_whitespace():
    assert tokenize_words("a b  c") == ["a", "b", "c"]


def test_tokenize_keeps_punctuation_attached():
    assert tokenize_words("Hello, world.") == ["Hello,", "world."]


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abc,. \t", max_size=50))
def test_tokenize_join_identity(text):
    tokens = tokenize_words(text)
    assert tokenize_words(" ".join(tokens)) == tokens


# -- check_char_whitelist ----------------------------------------------------

def test_whitelist_vietnamese_passes():
    assert check_char_whitelist("Xin chào.", vi_profile()) is None


def test_whitelist_dollar_position():
    # Profile whose punctuation set includes '='; the first offender is '$'.
    profile = CharProfile("test", en_profile().allowed_letters, frozenset(",.!?="))
    violation = check_char_whitelist("cost = $5", profile)
    assert (violation.char, violation.position) == ("$", 7)


def test_whitelist_first_violation_wins():
    violation = check_char_whitelist("cost = $5", en_profile())
    assert (violation.char, violation.position) == ("=", 5)


def test_whitelist_digits_always_allowed():
    assert check_char_whitelist("123 456", en_profile()) is None


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abcđàạXY 0129,.!?", max_size=60))
def test_whitelist_fuzz_from_allowed_alphabet(text):
    assert check_char_whitelist(text, vi_profile()) is None


def test_profile_loadable_from_config_mapping():
    from corpusforge.textnorm import get_profile

    profile = get_profile({"name": "toy", "letters": "abc", "punct": ",.=!?"})
    assert profile.name == "toy"
    assert check_char_whitelist("Abc = cba!", profile) is None
    violation = check_char_whitelist("abd", profile)
    assert violation.char == "d"
    assert get_profile("vi").name == "vi"


# -- number lexicons ---------------------------------------------------------

def test_english_expansions():
    lex = EnglishLexicon()
    assert lex.expand("45") == ["forty", "five"]
    assert lex.expand("30") == ["thirty"]
    assert lex.expand("0") == ["zero"]
    assert lex.expand("17") == ["seventeen"]
    assert lex.expand("123") == ["one", "hundred", "twenty", "three"]
    assert lex.expand("1005") == ["one", "thousand", "five"]
    assert lex.expand("1000000000") == ["one", "billion"]


def test_vietnamese_expansions():
    lex = VietnameseLexicon()
    assert lex.expand("45") == ["bốn", "mươi", "lăm"]
    assert lex.expand("30") == ["ba", "mươi"]
    assert lex.expand("5") == ["năm"]
    assert lex.expand("15") == ["mười", "lăm"]
    assert lex.expand("21") == ["hai", "mươi", "mốt"]
    assert lex.expand("105") == ["một", "trăm", "lẻ", "năm"]
    assert lex.expand("0") == ["không"]


def test_lexicon_coverage():
    lex = EnglishLexicon()
    assert not lex.covers("045")  # leading zero
    assert not lex.covers("10000000001")  # beyond 10^9
    assert not lex.covers("4,5")
    assert lex.covers("0") and lex.covers("1000000000")
    with pytest.raises(UnexpandableNumberError, match="045"):
        lex.expand("045")


@pytest.mark.parametrize("name", ["en", "vi"])
def test_expand_parse_identity(name, rng):
    lex = get_lexicon(name)
    values = list(range(0, 130)) + [rng.randint(0, 10**9) for _ in range(500)]
    for value in values:
        assert lex.parse(lex.expand(str(value))) == value, value


# -- expand_numbers / revert_numbers -----------------------------------------

def test_expand_known_cardinals():
    expanded, mappings = expand_numbers("45", get_lexicon("en"))
    assert expanded == "forty five"
    assert len(mappings) == 1
    m = mappings[0]
    assert (m.digit_form, m.spoken_form, m.word_index_start, m.word_index_count) == (
        "45", "forty five", 0, 2,
    )
    expanded, mappings = expand_numbers("30", get_lexicon("en"))
    assert expanded == "thirty" and mappings[0].word_index_count == 1


def test_expand_no_digits_is_identity():
    expanded, mappings = expand_numbers("xin chào việt nam", get_lexicon("vi"))
    assert expanded == "xin chào việt nam"
    assert mappings == []


def test_expand_detaches_punctuation():
    expanded, mappings = expand_numbers("tốn 45, đồng!", get_lexicon("vi"))
    assert expanded == "tốn bốn mươi lăm, đồng!"
    assert mappings[0].spoken_form == "bốn mươi lăm"


def test_expand_unexpandable_raises():
    with pytest.raises(UnexpandableNumberError, match="10000000001"):
        expand_numbers("a 10000000001 b", get_lexicon("en"))


def test_expand_mixed_alnum_token_untouched():
    expanded, mappings = expand_numbers("chạy 5km nhanh", get_lexicon("vi"))
    assert expanded == "chạy 5km nhanh" and mappings == []


def _substitute_back(expanded: str, mappings) -> str:
    """Independent re-substitution: replace each mapped span with its digit form."""
    tokens = expanded.split()
    for m in sorted(mappings, key=lambda m: m.word_index_start, reverse=True):
        span = tokens[m.word_index_start : m.word_index_start + m.word_index_count]
        spoken = m.spoken_form.split()
        prefix = span[0][: len(span[0]) - len(spoken[0])] if len(span) > 1 else ""
        suffix = span[-1][len(spoken[-1]):] if len(span) > 1 else ""
        if len(span) == 1:
            idx = span[0].find(spoken[0])
            prefix, suffix = span[0][:idx], span[0][idx + len(spoken[0]):]
        tokens[m.word_index_start : m.word_index_start + m.word_index_count] = [
            prefix + m.digit_form + suffix
        ]
    return " ".join(tokens)


def test_expand_textual_round_trip(rng):
    lex = get_lexicon("vi")
    vocab = ["xin", "chào", "đồng", "tốn", "về"]
    for _ in range(200):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
        for _ in range(rng.randint(1, 3)):
            digit = str(rng.randint(0, 10**6))
            if rng.random() < 0.4:
                digit = digit + rng.choice([",", ".", "!", "?"])
            tokens.insert(rng.randrange(len(tokens) + 1), digit)
        text = " ".join(tokens)
        expanded, mappings = expand_numbers(text, lex)
        assert _substitute_back(expanded, mappings) == text


def test_revert_merges_span_to_digit_form():
    from corpusforge.manifest import NumericSpanMapping

    words = [
        AlignedWord("one", 1.00, 1.20),
        AlignedWord("hundred", 1.22, 1.50),
        AlignedWord("twenty-three", 1.52, 1.90),
    ]
    mappings = [NumericSpanMapping("123", "one hundred twenty-three", 0, 3)]
    (merged,) = revert_numbers(words, mappings)
    assert merged.text == "123"
    assert (merged.start_s, merged.end_s) == (1.00, 1.90)


def test_revert_empty_mappings_identity():
    words = [AlignedWord("a", 0.0, 1.0)]
    assert revert_numbers(words, []) == words


def test_revert_rejects_bad_mappings():
    from corpusforge.manifest import NumericSpanMapping

    words = uniform_words("one two three", 3.0)
    with pytest.raises(MappingError, match="out of range"):
        revert_numbers(words, [NumericSpanMapping("23", "two three", 2, 2)])
    with pytest.raises(MappingError, match="overlap"):
        revert_numbers(
            words,
            [
                NumericSpanMapping("12", "one two", 0, 2),
                NumericSpanMapping("23", "two three", 1, 2),
            ],
        )
    with pytest.raises(MappingError, match="does not"):
        revert_numbers(words, [NumericSpanMapping("9", "nine", 1, 1)])


def test_expand_align_revert_round_trip(rng):
    lex = get_lexicon("vi")
    vocab = ["xin", "chào", "đồng", "tốn", "về", "nhà"]
    for _ in range(300):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 5))]
        for _ in range(rng.randint(1, 2)):
            tokens.insert(rng.randrange(len(tokens) + 1), str(rng.randint(0, 99999)))
        text = " ".join(tokens)
        expanded, mappings = expand_numbers(text, lex)
        duration = rng.randint(1000, 8000) / 1000.0
        words = uniform_words(expanded, duration)
        reverted = revert_numbers(words, mappings)
        assert " ".join(w.text for w in reverted) == text
        # merged interval equals the hull of the member intervals
        for m in mappings:
            span = words[m.word_index_start : m.word_index_start + m.word_index_count]
            merged = next(w for w in reverted if w.text == m.digit_form and w.start_s == span[0].start_s)
            assert merged.end_s == span[-1].end_s


# -- extract_mapping_from_pair ------------------------------------------------

def test_extract_vietnamese_multiword_span():
    mappings = extract_mapping_from_pair("tốn 45 đồng", "tốn bốn mươi lăm đồng")
    assert len(mappings) == 1
    m = mappings[0]
    assert (m.digit_form, m.spoken_form, m.word_index_start, m.word_index_count) == (
        "45", "bốn mươi lăm", 1, 3,
    )


def test_extract_no_digits():
    assert extract_mapping_from_pair("no digits here", "no digits here") == []


def test_extract_two_single_word_mappings():
    mappings = extract_mapping_from_pair("a 1 b 2", "a one b two")
    assert [m.word_index_count for m in mappings] == [1, 1]
    assert [m.digit_form for m in mappings] == ["1", "2"]
    assert [m.word_index_start for m in mappings] == [1, 3]


def test_extract_altered_text_rejected():
    with pytest.raises(MappingError, match="altered"):
        extract_mapping_from_pair("a 1 b", "a one c")


def test_extract_ambiguous_rejected():
    with pytest.raises(MappingError, match="ambiguous"):
        extract_mapping_from_pair("1 2", "one two three")


def test_extract_unverbalized_digit_skipped():
    # normalizer left the digit alone: alignable, but nothing to map
    assert extract_mapping_from_pair("a 45 b", "a 45 b") == []


def _enumerate_alignments(raw_tokens, norm_tokens):
    """Exhaustive alignment oracle: every way digit tokens can consume runs."""
    digits = [t.isdigit() for t in raw_tokens]
    results = []

    def walk(i, j, acc):
        if i == len(raw_tokens):
            if j == len(norm_tokens):
                results.append(list(acc))
            return
        if digits[i]:
            for k in range(1, len(norm_tokens) - j + 1):
                acc.append((i, j, k))
                walk(i + 1, j + k, acc)
                acc.pop()
        else:
            if j < len(norm_tokens) and raw_tokens[i] == norm_tokens[j]:
                walk(i + 1, j + 1, acc)

    walk(0, 0, [])
    return results


def test_extract_matches_exhaustive_oracle(rng):
    lex = get_lexicon("en")
    anchors = ["cat", "dog", "bird", "fish"]
    for _ in range(300):
        tokens = [rng.choice(anchors) for _ in range(rng.randint(0, 4))]
        for _ in range(rng.randint(0, 2)):
            tokens.insert(rng.randrange(len(tokens) + 1), str(rng.randint(0, 999)))
        raw = " ".join(tokens)
        if not raw:
            continue
        expanded, _ = expand_numbers(raw, lex)
        alignments = _enumerate_alignments(raw.split(), expanded.split())
        if len(alignments) == 1:
            mappings = extract_mapping_from_pair(raw, expanded)
            expected = [
                (raw.split()[i], j, k) for i, j, k in alignments[0] if raw.split()[i].isdigit()
            ]
            got = [(m.digit_form, m.word_index_start, m.word_index_count) for m in mappings]
            assert got == expected
        else:
            with pytest.raises(MappingError):
                extract_mapping_from_pair(raw, expanded)


def test_extract_resubstitution_reproduces_raw(rng):
    lex = get_lexicon("vi")
    vocab = ["xin", "chào", "đồng", "nhà"]
    for _ in range(200):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 4))]
        tokens.insert(rng.randrange(len(tokens) + 1), str(rng.randint(0, 9999)))
        raw = " ".join(tokens)
        expanded, _ = expand_numbers(raw, lex)
        try:
            mappings = extract_mapping_from_pair(raw, expanded)
        except MappingError:
            continue  # ambiguous cases are legitimately rejected
        assert _substitute_back(expanded, mappings) == raw
