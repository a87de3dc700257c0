"""Synthetic languages for desk-scale transfer experiments.

A language is a lexicon (concept -> word form) plus a small probabilistic
grammar with two word-order switches and a scrambling rate (the share of
sentences whose words come out in random order). Related languages are
derived by a character cipher over the word forms, a shift of the word-order
switches and a higher scrambling rate; the ``divergence`` knob of ``derive``
drives all three together.
"""

from __future__ import annotations

import string
from functools import lru_cache
from dataclasses import dataclass, replace

import numpy as np

from lexswap.data import Document, TaggedSentence
from lexswap.langdist import WordList

# Kept small on purpose: a 1 MB corpus must revisit each content word often
# enough for a toy MLM to learn context beyond unigram frequencies.
CLASS_SIZES = {
    "NOUN": 48,
    "VERB": 30,
    "ADJ": 15,
    "ADV": 6,
    "PROPN": 9,
    "DET": 6,
    "ADP": 10,
    "PRON": 8,
    "AUX": 5,
    "CCONJ": 3,
    "NUM": 3,
}
PUNCT_FORMS = (".", "!", "?")
ONSETS = list("bdfghklmnprstvwz") + ["st", "tr", "kl", "br", "sk"]
VOWELS = list("aeiou") + ["aa", "ie", "oe"]
CODAS = ["", "", "", "n", "r", "s", "k", "l", "t", "m"]
ALPHABET = string.ascii_lowercase


@dataclass
class SyntheticLanguage:
    name: str
    forms: dict[str, list[str]]
    adj_after_noun: float = 0.0
    object_first: float = 0.0
    ambiguous: tuple[int, int] = (2, 5)
    scramble: float = 0.0

    def word(self, tag: str, idx: int) -> str:
        # verbs in the ambiguous rank band reuse the noun form of the same rank
        if tag == "VERB" and self.ambiguous[0] <= idx < self.ambiguous[1]:
            return self.forms["NOUN"][idx]
        return self.forms[tag][idx]


@lru_cache(maxsize=None)
def _zipf_cdf(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1)
    return np.cumsum(w / w.sum())


def make_language(name: str = "src", seed: int = 0, sizes: dict[str, int] | None = None) -> SyntheticLanguage:
    """Random lexicon with unique CV(C) word forms per class."""
    rng = np.random.default_rng(seed)
    sizes = sizes or CLASS_SIZES
    used: set[str] = set()
    forms: dict[str, list[str]] = {}
    for tag, n in sizes.items():
        max_syll = 1 if tag in ("DET", "ADP", "PRON", "AUX", "CCONJ") else 3
        out = []
        while len(out) < n:
            k = int(rng.integers(1, max_syll + 1))
            w = "".join(
                ONSETS[rng.integers(len(ONSETS))] + VOWELS[rng.integers(len(VOWELS))] + CODAS[rng.integers(len(CODAS))]
                for _ in range(k)
            )
            if w not in used:
                used.add(w)
                out.append(w)
        forms[tag] = out
    return SyntheticLanguage(name, forms)


def cipher_map(rate: float, seed: int) -> dict[str, str]:
    """Permutation of a ``rate`` fraction of the letters (the rest fixed)."""
    rng = np.random.default_rng(seed)
    k = int(round(rate * len(ALPHABET)))
    chosen = list(rng.choice(list(ALPHABET), size=k, replace=False)) if k else []
    mapping = {c: c for c in ALPHABET}
    if k >= 2:
        # cyclic shift of the chosen letters: no chosen letter maps to itself
        for a, b in zip(chosen, chosen[1:] + chosen[:1]):
            mapping[a] = b
    return mapping


def derive(base: SyntheticLanguage, name: str, divergence: float, seed: int,
           order_scale: float = 0.2, scramble_scale: float = 0.0) -> SyntheticLanguage:
    """A related language: cipher rate ``divergence``, word-order switches
    moved towards their opposite by ``order_scale * divergence``, and
    ``scramble_scale * divergence`` added to the scrambling rate.

    Order shifts beyond 0.5 make the two orders trade places, which a model
    relearning the vocabulary from scratch cannot tell apart from relabelled
    word classes; scrambling only dilutes the syntax, so it is the knob to
    use when structural distance should grow monotonically.
    """
    table = cipher_map(divergence, seed)
    forms = {tag: ["".join(table.get(c, c) for c in w) for w in ws] for tag, ws in base.forms.items()}
    shift = min(1.0, order_scale * divergence)
    return replace(
        base,
        name=name,
        forms=forms,
        adj_after_noun=abs(base.adj_after_noun - shift),
        object_first=abs(base.object_first - shift),
        scramble=min(1.0, base.scramble + scramble_scale * divergence),
    )


def _pick(rng, tag, lang):
    n = len(lang.forms[tag])
    return tag, min(int(np.searchsorted(_zipf_cdf(n), rng.random(), side="right")), n - 1)


def _np(rng, lang, allow_pp=True):
    r = rng.random()
    if r < 0.15:
        return [_pick(rng, "PRON", lang)]
    if r < 0.25:
        return [_pick(rng, "PROPN", lang)]
    out = [_pick(rng, "NUM", lang)] if r < 0.32 else [_pick(rng, "DET", lang)]
    adjs = [_pick(rng, "ADJ", lang) for _ in range(int(rng.random() < 0.4) + int(rng.random() < 0.1))]
    noun = [_pick(rng, "NOUN", lang)]
    out += (noun + adjs) if rng.random() < lang.adj_after_noun else (adjs + noun)
    if allow_pp and rng.random() < 0.25:
        out += [_pick(rng, "ADP", lang)] + _np(rng, lang, allow_pp=False)
    return out


def _clause(rng, lang):
    subj = _np(rng, lang)
    verb = ([_pick(rng, "AUX", lang)] if rng.random() < 0.3 else []) + [_pick(rng, "VERB", lang)]
    obj = _np(rng, lang) if rng.random() < 0.7 else []
    vp = (obj + verb) if rng.random() < lang.object_first else (verb + obj)
    if rng.random() < 0.3:
        vp += [_pick(rng, "ADV", lang)]
    return subj + vp


def generate_sentence(lang: SyntheticLanguage, rng: np.random.Generator) -> TaggedSentence:
    items = _clause(rng, lang)
    if rng.random() < 0.25:
        items += [_pick(rng, "CCONJ", lang)] + _clause(rng, lang)
    if lang.scramble > 0.0 and rng.random() < lang.scramble:
        items = [items[i] for i in rng.permutation(len(items))]
    words = [lang.word(tag, idx) for tag, idx in items]
    tags = [tag for tag, _ in items]
    words.append(PUNCT_FORMS[int(rng.choice(3, p=[0.8, 0.1, 0.1]))])
    tags.append("PUNCT")
    return TaggedSentence(words, tags)


def generate_treebank(lang: SyntheticLanguage, n: int, seed: int) -> list[TaggedSentence]:
    rng = np.random.default_rng(seed)
    return [generate_sentence(lang, rng) for _ in range(n)]


def generate_corpus(lang: SyntheticLanguage, size_bytes: int, seed: int,
                    sentences_per_doc: tuple[int, int] = (4, 12)) -> list[Document]:
    """Documents of whitespace-joined sentences totalling about ``size_bytes``."""
    rng = np.random.default_rng(seed)
    docs = []
    total = 0
    while total < size_bytes:
        k = int(rng.integers(sentences_per_doc[0], sentences_per_doc[1] + 1))
        text = " ".join(" ".join(generate_sentence(lang, rng).words) for _ in range(k))
        docs.append(Document(f"{lang.name}-{len(docs):06d}", text))
        total += docs[-1].size_bytes
    return docs


CONCEPTS = [("NOUN", i) for i in range(10, 30)] + [("VERB", i) for i in range(5, 17)] + [("ADJ", i) for i in range(8)]


def word_list(lang: SyntheticLanguage) -> WordList:
    """40-concept list built from fixed lexicon entries."""
    return WordList(lang.name, {cid: [lang.word(tag, idx)] for cid, (tag, idx) in enumerate(CONCEPTS, 1)})
