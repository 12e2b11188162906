"""Mixed-script text normalization: everything downstream sees Devanagari.

Raw text is tokenized on whitespace, each token's script is identified,
Latin tokens are transliterated to Devanagari via a provider chain
(lexicon, then an optional external service, then a deterministic rule
fallback), and digits are expanded to Hindi number words. The output
alphabet is Devanagari plus a small retained punctuation set.
"""

from __future__ import annotations

import re
import shlex
import subprocess
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .numwords import expand_digit_run

DEVANAGARI_RE = re.compile(r"[ऀ-ॿ]")
LATIN_RE = re.compile(r"[A-Za-z]")
RETAINED_PUNCT = "।.,?!"

_PUNCT_CLEAN_RE = re.compile(r"[^\w\sऀ-ॿ" + re.escape(RETAINED_PUNCT) + r"]", re.UNICODE)


class Script(Enum):
    DEVANAGARI = "devanagari"
    LATIN = "latin"
    NEUTRAL = "neutral"


class ProviderKind(Enum):
    LEXICON = "lexicon"
    EXTERNAL = "external"
    RULE_FALLBACK = "rule_fallback"


class TextNormError(ValueError):
    pass


class UnmappableGraphemeError(TextNormError):
    def __init__(self, grapheme: str, token: str):
        super().__init__(f"unmappable grapheme {grapheme!r} in token {token!r}")
        self.grapheme = grapheme
        self.token = token


@dataclass(frozen=True)
class Token:
    surface: str
    script: Script
    position: int


@dataclass(frozen=True)
class NormalizedText:
    original: str
    devanagari: str
    tokens: tuple[Token, ...]
    provenance: tuple[ProviderKind | None, ...]  # per token; None = passed through


def classify_script(surface: str) -> Script:
    """Classify a token surface; mixed Latin+Devanagari counts as LATIN."""
    if not surface:
        raise TextNormError("empty token")
    if LATIN_RE.search(surface):
        return Script.LATIN
    if DEVANAGARI_RE.search(surface):
        return Script.DEVANAGARI
    return Script.NEUTRAL


def tokenize(text: str) -> list[Token]:
    """Whitespace tokenization with per-token script tags."""
    return [
        Token(surface=s, script=classify_script(s), position=i)
        for i, s in enumerate(text.split())
    ]


# ---------------------------------------------------------------------------
# Rule fallback tables

# Latin letter names as spoken in Hindi, for short all-caps acronyms.
LETTER_NAMES = {
    "A": "ए", "B": "बी", "C": "सी", "D": "डी", "E": "ई", "F": "एफ",
    "G": "जी", "H": "एच", "I": "आई", "J": "जे", "K": "के", "L": "एल",
    "M": "एम", "N": "एन", "O": "ओ", "P": "पी", "Q": "क्यू", "R": "आर",
    "S": "एस", "T": "टी", "U": "यू", "V": "वी", "W": "डब्ल्यू", "X": "एक्स",
    "Y": "वाई", "Z": "जेड",
}

# (independent form, dependent matra); "a" is the inherent vowel.
VOWELS = {
    "a": ("अ", ""),
    "aa": ("आ", "ा"),
    "i": ("इ", "ि"),
    "ii": ("ई", "ी"),
    "ee": ("ई", "ी"),
    "u": ("उ", "ु"),
    "oo": ("ऊ", "ू"),
    "e": ("ए", "े"),
    "ai": ("ऐ", "ै"),
    "o": ("ओ", "ो"),
    "au": ("औ", "ौ"),
}

CONSONANTS = {
    "kh": "ख", "gh": "घ", "chh": "छ", "ch": "च", "jh": "झ",
    "th": "थ", "dh": "ध", "ph": "फ", "bh": "भ", "sh": "श",
    "k": "क", "g": "ग", "j": "ज", "t": "ट", "d": "ड", "n": "न",
    "p": "प", "b": "ब", "m": "म", "y": "य", "r": "र", "l": "ल",
    "v": "व", "w": "व", "s": "स", "h": "ह", "f": "फ़", "c": "क",
    "q": "क", "z": "ज़", "x": "क्स",
}

_RULE_KEYS = sorted(set(VOWELS) | set(CONSONANTS), key=len, reverse=True)


def rule_transliterate(surface: str) -> str:
    """Deterministic Roman-to-Devanagari fallback.

    Short all-caps tokens are spelled with letter names; everything else
    goes through a longest-match grapheme table (digraphs before single
    letters, inherent schwa on trailing consonants). Devanagari code
    points and retained punctuation pass through unchanged.
    """
    if surface.isupper() and len(surface) <= 5 and all(c in LETTER_NAMES for c in surface):
        return "".join(LETTER_NAMES[c] for c in surface)

    out: list[str] = []
    lower = surface.lower()
    pos = 0
    prev_consonant = False
    while pos < len(lower):
        ch = lower[pos]
        if DEVANAGARI_RE.match(ch) or ch in RETAINED_PUNCT or ch == "-" or ch == "'":
            if ch not in "-'":
                out.append(surface[pos])
            pos += 1
            prev_consonant = False
            continue
        match = next((k for k in _RULE_KEYS if lower.startswith(k, pos)), None)
        if match is None:
            raise UnmappableGraphemeError(lower[pos], surface)
        if match in VOWELS:
            independent, matra = VOWELS[match]
            out.append(matra if prev_consonant else independent)
            prev_consonant = False
        else:
            out.append(CONSONANTS[match])
            prev_consonant = True
        pos += len(match)
    return "".join(out)


# ---------------------------------------------------------------------------
# Providers

@dataclass
class TransliterationProvider:
    """Provider chain: lexicon, then external service, then rule fallback.

    The external endpoint is either a shell command (line protocol on
    stdin/stdout) or an http(s) URL taking newline-separated tokens and
    returning one Devanagari line per input line.
    """

    lexicon: dict[str, str] = field(default_factory=dict)
    endpoint: str | None = None
    timeout_s: float = 2.0

    def transliterate(self, surface: str) -> tuple[str, ProviderKind]:
        hit = self.lexicon.get(surface) or self.lexicon.get(surface.lower())
        if hit is not None:
            return hit, ProviderKind.LEXICON
        if self.endpoint:
            result = self._call_external(surface)
            if result is not None and not LATIN_RE.search(result):
                return result, ProviderKind.EXTERNAL
        return rule_transliterate(surface), ProviderKind.RULE_FALLBACK

    def _call_external(self, surface: str) -> str | None:
        try:
            if self.endpoint.startswith(("http://", "https://")):
                req = urllib.request.Request(
                    self.endpoint, data=(surface + "\n").encode("utf-8"), method="POST"
                )
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    return resp.read().decode("utf-8").splitlines()[0].strip()
            proc = subprocess.run(
                shlex.split(self.endpoint),
                input=surface + "\n",
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
            if proc.returncode != 0:
                return None
            lines = proc.stdout.splitlines()
            return lines[0].strip() if lines else None
        except (OSError, subprocess.SubprocessError, IndexError):
            return None


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Read a UTF-8 TSV lexicon (latin<TAB>devanagari, # comments)."""
    lexicon: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise TextNormError(f"{path}:{lineno}: expected latin<TAB>devanagari")
        latin, devanagari = parts
        if LATIN_RE.search(devanagari):
            raise TextNormError(f"{path}:{lineno}: lexicon target contains Latin letters")
        lexicon[latin] = devanagari
    return lexicon


def transliterate_token(token: Token, provider: TransliterationProvider) -> str:
    """Transliterate one LATIN token; result is free of Latin letters."""
    if token.script is not Script.LATIN:
        raise TextNormError(f"transliterate_token requires a LATIN token, got {token.script.name}")
    result, _ = provider.transliterate(token.surface)
    return result


# ---------------------------------------------------------------------------
# Normalization

_DIGIT_RUN_RE = re.compile(r"[0-9]+")


def _expand_digits(surface: str) -> str:
    return _DIGIT_RUN_RE.sub(lambda m: f" {expand_digit_run(m.group())} ", surface).strip()


def _normalize_token(token: Token, provider: TransliterationProvider) -> tuple[str, ProviderKind | None]:
    surface = _expand_digits(token.surface)
    pieces: list[str] = []
    kind: ProviderKind | None = None
    for word in surface.split():
        if LATIN_RE.search(word):
            translit, kind = provider.transliterate(word)
            pieces.append(translit)
        else:
            pieces.append(word)
    return " ".join(pieces), kind


def normalize(text: str, provider: TransliterationProvider | None = None) -> NormalizedText:
    """Normalize mixed-script text to a pure-Devanagari string.

    Punctuation outside the retained set becomes a space; digits become
    Hindi number words; Latin tokens go through the provider chain.
    """
    if provider is None:
        provider = TransliterationProvider()
    cleaned = _PUNCT_CLEAN_RE.sub(" ", text).replace("_", " ")
    tokens = tokenize(cleaned)
    surfaces: list[str] = []
    provenance: list[ProviderKind | None] = []
    for token in tokens:
        try:
            surface, kind = _normalize_token(token, provider)
        except TextNormError as e:
            raise TextNormError(f"token {token.position} ({token.surface!r}): {e}") from e
        if surface:
            surfaces.append(surface)
            provenance.append(kind)
    devanagari = " ".join(surfaces)
    return NormalizedText(
        original=text,
        devanagari=devanagari,
        tokens=tuple(tokenize(devanagari)),
        provenance=tuple(provenance),
    )
