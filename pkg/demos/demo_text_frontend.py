"""Walk through the text front end: tokenization, script tagging, and
transliteration of a code-mixed Hindi-English sentence into a single
Devanagari string ready for the synthesizer.

Run with:  python3 demos/demo_text_frontend.py
"""

from comix.textnorm import TransliterationProvider, normalize, tokenize

# A typical customer-support style sentence: Hindi written in Devanagari,
# English brand words left in Latin script, plus a number and punctuation.
sentence = "aapke product की EMI 3500 rupaye है।"

print("input:", sentence)
print()

# Step 1: tokenize and look at the per-token script classification.
print("tokens:")
for token in tokenize(sentence):
    print(f"  {token.position:2d}  {token.script.name:10s}  {token.surface}")
print()

# Step 2: normalize with the built-in rule fallback. Latin words are
# transliterated, the all-caps "EMI" is spelled letter by letter, and the
# number is expanded to Hindi words.
result = normalize(sentence)
print("normalized:", result.devanagari)
print()
print("provenance per input token:")
for token, provenance in zip(tokenize(sentence), result.provenance):
    how = provenance.name if provenance else "passed through"
    print(f"  {token.surface!r:20s} -> {how}")
print()

# Step 3: a lexicon provider takes priority over the rules, which is how
# curated pronunciations are shipped. Unknown words still fall back.
provider = TransliterationProvider(lexicon={"product": "प्रोडक्ट"})
curated = normalize(sentence, provider)
print("with lexicon:", curated.devanagari)

# The output is idempotent: normalizing again changes nothing.
assert normalize(curated.devanagari, provider).devanagari == curated.devanagari
print()
print("idempotence holds; no Latin letters remain in either output.")
