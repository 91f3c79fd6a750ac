"""Text primitives shared by gates and metrics.

Covers WER-style normalization (lowercase + punctuation strip), whitespace
tokenization, character whitelisting, digit <-> spoken-form expansion and
reversion, and recovery of digit-span mappings by aligning a normalizer's
input and output.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import MappingError
from .manifest import AlignedWord, NumericSpanMapping
from .numwords import NumberLexicon

# The standard punctuation whitelist; transcripts keep only these marks.
DEFAULT_PUNCT = frozenset(",.!?")

_DIGITS = frozenset("0123456789")

# Vietnamese alphabet incl. all tone-marked vowels (NFC), lowercase;
# uppercase forms are derived. ASCII letters are appended so loanword
# spellings (f, j, w, z) pass the whitelist.
_VI_LETTERS = (
    "aáàảãạăắằẳẵặâấầẩẫậbcdđeéèẻẽẹêếềểễệghiíìỉĩịklmnoóòỏõọôốồổỗộơớờởỡợ"
    "pqrstuúùủũụưứừửữựvxyýỳỷỹỵ"
)


@dataclass(frozen=True)
class CharProfile:
    """Language character whitelist: letters + punctuation; digits and whitespace always pass."""

    name: str
    allowed_letters: frozenset[str]
    allowed_punct: frozenset[str] = DEFAULT_PUNCT

    def allows(self, char: str) -> bool:
        return (
            char.isspace()
            or char in _DIGITS
            or char in self.allowed_letters
            or char in self.allowed_punct
        )


def _with_upper(letters: str) -> frozenset[str]:
    chars = set(letters)
    chars.update(c.upper() for c in letters)
    return frozenset(chars)


def vi_profile() -> CharProfile:
    return CharProfile(name="vi", allowed_letters=_with_upper(_VI_LETTERS + string.ascii_lowercase))


def en_profile() -> CharProfile:
    return CharProfile(name="en", allowed_letters=_with_upper(string.ascii_lowercase))


_PROFILES = {"vi": vi_profile, "en": en_profile}


def profile_from_dict(payload: dict) -> CharProfile:
    """Custom profile from config: {"name", "letters", "punct"?} strings."""
    letters = payload["letters"]
    punct = payload.get("punct")
    return CharProfile(
        name=payload.get("name", "custom"),
        allowed_letters=_with_upper(letters),
        allowed_punct=frozenset(punct) if punct is not None else DEFAULT_PUNCT,
    )


def get_profile(name_or_config) -> CharProfile:
    if isinstance(name_or_config, CharProfile):
        return name_or_config
    if isinstance(name_or_config, dict):
        return profile_from_dict(name_or_config)
    try:
        return _PROFILES[name_or_config]()
    except KeyError:
        raise ValueError(
            f"unknown character profile {name_or_config!r}; available: {sorted(_PROFILES)}"
        )


def normalize_for_wer(text: str, punct: frozenset[str] = DEFAULT_PUNCT) -> str:
    """Lowercase, strip the punctuation set, collapse whitespace. Idempotent."""
    lowered = text.lower()
    stripped = lowered.translate({ord(c): None for c in punct})
    return " ".join(stripped.split())


def tokenize_words(text: str) -> list[str]:
    """Split on Unicode whitespace; punctuation stays attached to its word."""
    return text.split()


@dataclass(frozen=True)
class WhitelistViolation:
    char: str
    position: int


def check_char_whitelist(text: str, profile: CharProfile) -> Optional[WhitelistViolation]:
    """First disallowed character with its 0-based position, or None if all pass."""
    for position, char in enumerate(text):
        if not profile.allows(char):
            return WhitelistViolation(char=char, position=position)
    return None


def _detach_punct(token: str, punct: frozenset[str]) -> tuple[str, str, str]:
    """Split a token into (leading punct, core, trailing punct)."""
    start = 0
    end = len(token)
    while start < end and token[start] in punct:
        start += 1
    while end > start and token[end - 1] in punct:
        end -= 1
    return token[:start], token[start:end], token[end:]


def _is_digit_token(core: str) -> bool:
    return bool(core) and all(c in _DIGITS for c in core)


def expand_numbers(
    text: str,
    lexicon: NumberLexicon,
    punct: frozenset[str] = DEFAULT_PUNCT,
) -> tuple[str, list[NumericSpanMapping]]:
    """Replace each maximal digit token with its spoken form.

    Punctuation adjacent to a digit token is detached and re-attached to the
    boundary spoken words, so the expanded text stays whitespace-tokenizable.
    The input must already be single-space separated (any pipeline transcript
    is); substituting each mapped span back with its digit form reproduces the
    input exactly. Raises UnexpandableNumberError for digit tokens outside
    lexicon coverage.
    """
    out_tokens: list[str] = []
    mappings: list[NumericSpanMapping] = []
    for token in text.split():
        prefix, core, suffix = _detach_punct(token, punct)
        if not _is_digit_token(core):
            out_tokens.append(token)
            continue
        words = lexicon.expand(core)
        mappings.append(
            NumericSpanMapping(
                digit_form=core,
                spoken_form=" ".join(words),
                word_index_start=len(out_tokens),
                word_index_count=len(words),
            )
        )
        decorated = list(words)
        decorated[0] = prefix + decorated[0]
        decorated[-1] = decorated[-1] + suffix
        out_tokens.extend(decorated)
    return " ".join(out_tokens), mappings


def _span_affixes(span_texts: Sequence[str], spoken_words: Sequence[str]) -> tuple[str, str]:
    """Validate that aligned span texts are the spoken words plus boundary affixes."""
    if len(span_texts) != len(spoken_words):
        raise MappingError(
            f"span covers {len(span_texts)} words but spoken form has {len(spoken_words)}"
        )
    for got, expected in zip(span_texts[1:-1], spoken_words[1:-1]):
        if got != expected:
            raise MappingError(f"span word {got!r} does not match spoken form word {expected!r}")
    first, last = span_texts[0], span_texts[-1]
    if len(span_texts) == 1:
        word = spoken_words[0]
        idx = first.find(word)
        if idx < 0:
            raise MappingError(f"span word {first!r} does not contain spoken form {word!r}")
        return first[:idx], first[idx + len(word):]
    if not first.endswith(spoken_words[0]):
        raise MappingError(f"span word {first!r} does not end with {spoken_words[0]!r}")
    if not last.startswith(spoken_words[-1]):
        raise MappingError(f"span word {last!r} does not start with {spoken_words[-1]!r}")
    return first[: len(first) - len(spoken_words[0])], last[len(spoken_words[-1]):]


def revert_numbers(
    words: list[AlignedWord], mappings: list[NumericSpanMapping]
) -> list[AlignedWord]:
    """Collapse each mapped spoken span back to its digit form.

    The merged word spans [first member's start, last member's end]; boundary
    punctuation that expansion attached to the span is re-attached to the
    digit form. Unmapped words pass through untouched.
    """
    if not mappings:
        return list(words)
    ordered = sorted(mappings, key=lambda m: m.word_index_start)
    out: list[AlignedWord] = []
    cursor = 0
    for mapping in ordered:
        start = mapping.word_index_start
        end = start + mapping.word_index_count
        if start < cursor:
            raise MappingError(f"overlapping mapping at word index {start}")
        if end > len(words):
            raise MappingError(
                f"mapping span [{start}, {end}) out of range for {len(words)} words"
            )
        out.extend(words[cursor:start])
        span = words[start:end]
        prefix, suffix = _span_affixes([w.text for w in span], mapping.spoken_form.split())
        out.append(
            AlignedWord(
                text=prefix + mapping.digit_form + suffix,
                start_s=span[0].start_s,
                end_s=span[-1].end_s,
            )
        )
        cursor = end
    out.extend(words[cursor:])
    return out


def extract_mapping_from_pair(
    raw: str,
    normalized: str,
    punct: frozenset[str] = DEFAULT_PUNCT,
) -> list[NumericSpanMapping]:
    """Recover digit-span mappings by aligning a normalizer's input and output.

    Non-digit tokens must match exactly; each digit token consumes a run of
    one or more normalized words (its verbalization), with any boundary
    punctuation preserved. Raises MappingError when the texts cannot be
    aligned (the normalizer altered non-digit words) or when more than one
    alignment is possible.
    """
    raw_tokens = raw.split()
    norm_tokens = normalized.split()
    n_raw, n_norm = len(raw_tokens), len(norm_tokens)

    detached = [_detach_punct(tok, punct) for tok in raw_tokens]
    is_digit = [_is_digit_token(core) for _, core, _ in detached]

    def valid_run(i: int, j: int, k: int) -> bool:
        """Can digit token i consume normalized words j..j+k-1?"""
        prefix, _, suffix = detached[i]
        first, last = norm_tokens[j], norm_tokens[j + k - 1]
        if k == 1:
            # Affix stripping must leave a non-empty spoken word.
            return (
                first.startswith(prefix)
                and first.endswith(suffix)
                and len(first) > len(prefix) + len(suffix)
            )
        return (
            first.startswith(prefix)
            and last.endswith(suffix)
            and len(first) > len(prefix)
            and len(last) > len(suffix)
        )

    # ways[i][j]: number of alignments of raw_tokens[i:] with norm_tokens[j:],
    # capped at 2 (we only need zero / one / many).
    ways = [[0] * (n_norm + 1) for _ in range(n_raw + 1)]
    ways[n_raw][n_norm] = 1
    for i in range(n_raw - 1, -1, -1):
        for j in range(n_norm, -1, -1):
            if j == n_norm:
                continue
            if is_digit[i]:
                total = 0
                for k in range(1, n_norm - j + 1):
                    if valid_run(i, j, k):
                        total += ways[i + 1][j + k]
                        if total >= 2:
                            break
                ways[i][j] = min(total, 2)
            else:
                if raw_tokens[i] == norm_tokens[j]:
                    ways[i][j] = ways[i + 1][j + 1]

    count = ways[0][0]
    if count == 0:
        raise MappingError("normalizer altered text: input and output words cannot be aligned")
    if count > 1:
        raise MappingError("ambiguous digit-span alignment between input and output")

    mappings: list[NumericSpanMapping] = []
    i, j = 0, 0
    while i < n_raw:
        if not is_digit[i]:
            i += 1
            j += 1
            continue
        prefix, core, suffix = detached[i]
        for k in range(1, n_norm - j + 1):
            if valid_run(i, j, k) and ways[i + 1][j + k] > 0:
                run = norm_tokens[j : j + k]
                run[0] = run[0][len(prefix):]
                if suffix:
                    run[-1] = run[-1][: -len(suffix)]
                spoken = " ".join(run)
                if spoken != core:  # skip unverbalized identity spans
                    mappings.append(
                        NumericSpanMapping(
                            digit_form=core,
                            spoken_form=spoken,
                            word_index_start=j,
                            word_index_count=k,
                        )
                    )
                j += k
                break
        i += 1
    return mappings
