"""Hindi number-word expansion for the text frontend.

Numbers 0-9999 are expanded compositionally (Hindi names 0-99 are
irregular and tabulated); anything longer, or with leading zeros, is
read digit by digit.
"""

from __future__ import annotations

ONES = [
    "शून्य", "एक", "दो", "तीन", "चार", "पाँच", "छह", "सात", "आठ", "नौ",
    "दस", "ग्यारह", "बारह", "तेरह", "चौदह", "पंद्रह", "सोलह", "सत्रह", "अठारह", "उन्नीस",
    "बीस", "इक्कीस", "बाईस", "तेईस", "चौबीस", "पच्चीस", "छब्बीस", "सत्ताईस", "अट्ठाईस", "उनतीस",
    "तीस", "इकतीस", "बत्तीस", "तैंतीस", "चौंतीस", "पैंतीस", "छत्तीस", "सैंतीस", "अड़तीस", "उनतालीस",
    "चालीस", "इकतालीस", "बयालीस", "तैंतालीस", "चवालीस", "पैंतालीस", "छियालीस", "सैंतालीस", "अड़तालीस", "उनचास",
    "पचास", "इक्यावन", "बावन", "तिरपन", "चौवन", "पचपन", "छप्पन", "सत्तावन", "अट्ठावन", "उनसठ",
    "साठ", "इकसठ", "बासठ", "तिरसठ", "चौंसठ", "पैंसठ", "छियासठ", "सड़सठ", "अड़सठ", "उनहत्तर",
    "सत्तर", "इकहत्तर", "बहत्तर", "तिहत्तर", "चौहत्तर", "पचहत्तर", "छिहत्तर", "सतहत्तर", "अठहत्तर", "उन्यासी",
    "अस्सी", "इक्यासी", "बयासी", "तिरासी", "चौरासी", "पचासी", "छियासी", "सत्तासी", "अट्ठासी", "नवासी",
    "नब्बे", "इक्यानवे", "बानवे", "तिरानवे", "चौरानवे", "पंचानवे", "छियानवे", "सत्तानवे", "अट्ठानवे", "निन्यानवे",
]

HUNDRED = "सौ"
THOUSAND = "हज़ार"


def number_to_words(n: int) -> str:
    """Hindi words for an integer in [0, 9999]."""
    if not 0 <= n <= 9999:
        raise ValueError(f"number out of range for word expansion: {n}")
    if n < 100:
        return ONES[n]
    parts: list[str] = []
    thousands, rest = divmod(n, 1000)
    if thousands:
        parts.extend([ONES[thousands], THOUSAND])
    hundreds, rest = divmod(rest, 100)
    if hundreds:
        parts.extend([ONES[hundreds], HUNDRED])
    if rest:
        parts.append(ONES[rest])
    return " ".join(parts)


def digits_to_words(digits: str) -> str:
    """Read a digit string aloud digit by digit."""
    return " ".join(ONES[int(d)] for d in digits)


def expand_digit_run(digits: str) -> str:
    """Expand one run of ASCII digits to Hindi words.

    Runs with leading zeros or more than 4 digits are read digit-wise;
    everything else as a number name.
    """
    if len(digits) > 4 or (len(digits) > 1 and digits[0] == "0"):
        return digits_to_words(digits)
    return number_to_words(int(digits))
