"""WordPiece vocabularies: training by likelihood-score pair merging, greedy
longest-match-first encoding, and packing documents into MLM sequences.

Casing and diacritics are preserved. Pre-tokenization splits on Unicode
whitespace and isolates every punctuation character.
"""

from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from lexswap import kernels

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
N_SPECIALS = len(SPECIALS)
PREFIX = "##"
MAX_WORD_CHARS = 100


@dataclass(eq=False)
class Vocabulary:
    """Sub-word inventory. Ids 0-4 are always the special tokens."""

    tokens: list[str]
    min_freq: int = 0
    target_size: int = 0
    ids: dict[str, int] = field(init=False, repr=False)
    _cache: dict[str, list[int]] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if tuple(self.tokens[:N_SPECIALS]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            dup = [t for t, c in Counter(self.tokens).items() if c > 1][0]
            raise ValueError(f"duplicate token {dup!r} in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()[:16]

    def encode_word(self, word: str) -> list[int]:
        ids = self._cache.get(word)
        if ids is None:
            ids = kernels.wordpiece_word(word, self.ids, UNK_ID, PREFIX, MAX_WORD_CHARS)
            self._cache[word] = ids
        return ids

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def pre_tokenize(text: str) -> list[str]:
    """Whitespace split, then every punctuation character becomes its own word."""
    words = []
    for chunk in text.split():
        buf = []
        for ch in chunk:
            if is_punctuation(ch):
                if buf:
                    words.append("".join(buf))
                    buf = []
                words.append(ch)
            else:
                buf.append(ch)
        if buf:
            words.append("".join(buf))
    return words


def _merge_units(units: list[str], left: str, right: str, merged: str) -> list[str]:
    out = []
    i = 0
    n = len(units)
    while i < n:
        if i + 1 < n and units[i] == left and units[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return out


def train_wordpiece(corpus: Iterable[str], target_size: int = 10000, min_freq: int = 100) -> Vocabulary:
    """Learn a WordPiece vocabulary from an iterable of text chunks.

    Starts from the character alphabet (continuation characters carry ``##``),
    dropping characters seen fewer than ``min_freq`` times together with every
    word containing one. Then repeatedly merges the adjacent pair maximising
    ``freq(pair) / (freq(left) * freq(right))`` among pairs seen at least
    ``min_freq`` times, until ``target_size`` tokens exist or no pair
    qualifies. Ties go to the more frequent pair, then the lexically smaller.
    """
    if target_size <= N_SPECIALS:
        raise ValueError(f"target_size must exceed {N_SPECIALS}")
    word_counts: Counter[str] = Counter()
    for chunk in corpus:
        word_counts.update(pre_tokenize(chunk))

    unit_counts: Counter[str] = Counter()
    for word, c in word_counts.items():
        unit_counts[word[0]] += c
        for ch in word[1:]:
            unit_counts[PREFIX + ch] += c
    alphabet = [u for u, c in unit_counts.items() if c >= min_freq]
    alphabet.sort(key=lambda u: (-unit_counts[u], u))
    alphabet = alphabet[: target_size - N_SPECIALS]
    allowed = set(alphabet)
    tokens = list(SPECIALS) + alphabet
    known = set(tokens)

    words: list[list[str]] = []
    freqs: list[int] = []
    for word, c in sorted(word_counts.items()):
        if len(word) > MAX_WORD_CHARS:
            continue
        units = [word[0]] + [PREFIX + ch for ch in word[1:]]
        if all(u in allowed for u in units):
            words.append(units)
            freqs.append(c)

    units_freq: Counter[str] = Counter()
    pair_freq: Counter[tuple[str, str]] = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)

    def account(idx: int, sign: int) -> None:
        units, c = words[idx], freqs[idx] * sign
        for u in units:
            units_freq[u] += c
        for pair in zip(units, units[1:]):
            pair_freq[pair] += c
            if sign > 0:
                where[pair].add(idx)

    for idx in range(len(words)):
        account(idx, +1)

    while len(tokens) < target_size:
        best = None
        best_key = None
        for pair, c in pair_freq.items():
            if c < min_freq:
                continue
            key = (c / (units_freq[pair[0]] * units_freq[pair[1]]), c)
            if best_key is None or key > best_key or (key == best_key and pair < best):
                best, best_key = pair, key
        if best is None:
            break
        left, right = best
        merged = left + right[len(PREFIX):]
        for idx in sorted(where.pop(best, ())):
            if best not in zip(words[idx], words[idx][1:]):
                continue
            account(idx, -1)
            words[idx] = _merge_units(words[idx], left, right, merged)
            account(idx, +1)
        for pair in [p for p, c in pair_freq.items() if c <= 0]:
            del pair_freq[pair]
            where.pop(pair, None)
        if merged not in known:
            known.add(merged)
            tokens.append(merged)
    return Vocabulary(tokens, min_freq=min_freq, target_size=target_size)


def tokenize(text: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-match-first WordPiece segmentation of ``text``."""
    return [vocab.tokens[i] for i in encode(text, vocab)]


def encode(text: str, vocab: Vocabulary) -> list[int]:
    out: list[int] = []
    for word in pre_tokenize(text):
        out.extend(vocab.encode_word(word))
    return out


def detokenize_word(pieces: list[str]) -> str:
    return "".join(p[len(PREFIX):] if p.startswith(PREFIX) else p for p in pieces)


def build_mlm_sequences(documents: Iterable[str], vocab: Vocabulary, seq_len: int = 128) -> np.ndarray:
    """Pack each document into ``[CLS] content [SEP] [PAD]*`` blocks of ``seq_len`` ids.

    Blocks never cross a document boundary. Returns an ``(n, seq_len)`` int32
    array.
    """
    if seq_len < 8:
        raise ValueError("seq_len must be at least 8")
    width = seq_len - 2
    blocks = []
    for doc in documents:
        ids = encode(doc, vocab)
        for start in range(0, len(ids), width):
            chunk = ids[start : start + width]
            row = np.full(seq_len, PAD_ID, dtype=np.int32)
            row[0] = CLS_ID
            row[1 : 1 + len(chunk)] = chunk
            row[1 + len(chunk)] = SEP_ID
            blocks.append(row)
    if not blocks:
        return np.zeros((0, seq_len), dtype=np.int32)
    return np.stack(blocks)
