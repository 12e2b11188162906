"""Code-mixed Hindi-English TTS toolkit.

Builds single-script (Devanagari) TTS systems from monolingual corpora:
text normalization and transliteration, corpus manifest management,
mel feature extraction, a character-to-mel sequence model, a flow-based
vocoder, warmstart/fine-tuning recipes, synthesis, and listening-test
aggregation.
"""

__version__ = "0.1.0"
