"""Rule-based cardinal-number lexicons (digit string <-> spoken words).

These are the built-in fallback for the external text-normalization model:
deterministic, invertible, and limited to plain cardinals 0..10^9. Decimals,
ordinals, dates, and currency are out of scope and must come via an adapter.
"""

from __future__ import annotations

from .errors import UnexpandableNumberError

MAX_VALUE = 10**9


class NumberLexicon:
    """Verbalizes digit strings and parses its own output back to integers."""

    name = "base"

    def covers(self, digit_form: str) -> bool:
        if not digit_form or not all(c in "0123456789" for c in digit_form):
            return False
        if len(digit_form) > 1 and digit_form[0] == "0":
            return False  # leading zeros are not cardinals
        return int(digit_form) <= MAX_VALUE

    def expand(self, digit_form: str) -> list[str]:
        if not self.covers(digit_form):
            raise UnexpandableNumberError(digit_form)
        return self._words(int(digit_form))

    def _words(self, value: int) -> list[str]:
        raise NotImplementedError

    def parse(self, words: list[str]) -> int:
        raise NotImplementedError


_EN_UNITS = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen",
]
_EN_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]
_EN_SCALES = [("billion", 10**9), ("million", 10**6), ("thousand", 10**3)]


class EnglishLexicon(NumberLexicon):
    """English cardinals, unhyphenated ("forty five", not "forty-five")."""

    name = "en"

    def _words(self, value: int) -> list[str]:
        if value == 0:
            return ["zero"]
        words: list[str] = []
        remaining = value
        for scale_word, scale in _EN_SCALES:
            count, remaining = divmod(remaining, scale)
            if count:
                words.extend(self._under_thousand(count))
                words.append(scale_word)
        if remaining:
            words.extend(self._under_thousand(remaining))
        return words

    @staticmethod
    def _under_thousand(value: int) -> list[str]:
        words: list[str] = []
        hundreds, rest = divmod(value, 100)
        if hundreds:
            words.extend([_EN_UNITS[hundreds], "hundred"])
        if rest >= 20:
            tens, units = divmod(rest, 10)
            words.append(_EN_TENS[tens])
            if units:
                words.append(_EN_UNITS[units])
        elif rest:
            words.append(_EN_UNITS[rest])
        return words

    def parse(self, words: list[str]) -> int:
        units = {w: i for i, w in enumerate(_EN_UNITS)}
        tens = {w: i * 10 for i, w in enumerate(_EN_TENS) if w}
        scales = dict(_EN_SCALES)
        total = 0
        group = 0
        for word in words:
            if word in units:
                group += units[word]
            elif word in tens:
                group += tens[word]
            elif word == "hundred":
                group *= 100
            elif word in scales:
                total += group * scales[word]
                group = 0
            else:
                raise ValueError(f"unknown number word {word!r}")
        return total + group


_VI_DIGITS = ["không", "một", "hai", "ba", "bốn", "năm", "sáu", "bảy", "tám", "chín"]
_VI_SCALES = [("tỷ", 10**9), ("triệu", 10**6), ("nghìn", 10**3)]


class VietnameseLexicon(NumberLexicon):
    """Vietnamese cardinals with the mười/mươi/mốt/lăm/lẻ conventions."""

    name = "vi"

    def _words(self, value: int) -> list[str]:
        if value == 0:
            return ["không"]
        words: list[str] = []
        remaining = value
        for scale_word, scale in _VI_SCALES:
            count, remaining = divmod(remaining, scale)
            if count:
                words.extend(self._under_thousand(count, has_higher=bool(words)))
                words.append(scale_word)
        if remaining:
            words.extend(self._under_thousand(remaining, has_higher=bool(words)))
        return words

    @staticmethod
    def _under_thousand(value: int, has_higher: bool) -> list[str]:
        words: list[str] = []
        hundreds, rest = divmod(value, 100)
        tens, units = divmod(rest, 10)
        if hundreds:
            words.extend([_VI_DIGITS[hundreds], "trăm"])
        if tens == 0:
            if units:
                # "lẻ" links a bare unit to a preceding hundreds/scale group.
                if hundreds or has_higher:
                    words.append("lẻ")
                words.append(_VI_DIGITS[units])
        elif tens == 1:
            words.append("mười")
            if units == 5:
                words.append("lăm")
            elif units:
                words.append(_VI_DIGITS[units])
        else:
            words.extend([_VI_DIGITS[tens], "mươi"])
            if units == 1:
                words.append("mốt")
            elif units == 5:
                words.append("lăm")
            elif units:
                words.append(_VI_DIGITS[units])
        return words

    def parse(self, words: list[str]) -> int:
        digits = {w: i for i, w in enumerate(_VI_DIGITS)}
        digits.update({"mốt": 1, "tư": 4, "lăm": 5})
        scales = dict(_VI_SCALES)
        scales["ngàn"] = 10**3
        total = 0
        group = 0
        pending = 0
        for word in words:
            if word in digits:
                pending += digits[word]
            elif word == "mười":
                pending += 10
            elif word == "mươi":
                pending *= 10
            elif word == "trăm":
                group += pending * 100
                pending = 0
            elif word in ("lẻ", "linh"):
                continue
            elif word in scales:
                total += (group + pending) * scales[word]
                group = 0
                pending = 0
            else:
                raise ValueError(f"unknown number word {word!r}")
        return total + group + pending


_LEXICONS = {"en": EnglishLexicon, "vi": VietnameseLexicon}


def get_lexicon(name: str) -> NumberLexicon:
    try:
        return _LEXICONS[name]()
    except KeyError:
        raise ValueError(f"unknown number lexicon {name!r}; available: {sorted(_LEXICONS)}")
