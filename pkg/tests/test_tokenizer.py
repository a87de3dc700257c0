import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexswap.tokenizer import (
    CLS_ID,
    PAD_ID,
    SEP_ID,
    SPECIALS,
    UNK,
    Vocabulary,
    build_mlm_sequences,
    detokenize_word,
    encode,
    pre_tokenize,
    tokenize,
    train_wordpiece,
)


def brute_force_segment(word, vocab_set):
    """Longest-match-first by enumerating every candidate piece at each position."""
    out, i = [], 0
    while i < len(word):
        candidates = [(j - i, j) for j in range(i + 1, len(word) + 1)
                      if (word[i:j] if i == 0 else "##" + word[i:j]) in vocab_set]
        if not candidates:
            return [UNK]
        _, j = max(candidates)
        out.append(word[i:j] if i == 0 else "##" + word[i:j])
        i = j
    return out


def random_vocab(rng):
    pieces = set()
    while len(pieces) < 50:
        s = "".join(rng.choice("abcd") for _ in range(rng.randint(1, 3)))
        pieces.add(s if rng.random() < 0.5 else "##" + s)
    return Vocabulary(list(SPECIALS) + sorted(pieces))


class TestTokenize:
    def test_small_vocab_examples(self):
        v = Vocabulary(list(SPECIALS) + ["a", "b", "ab", "##c", "##bc"])
        assert tokenize("abc", v) == ["ab", "##c"]
        assert tokenize("a", v) == ["a"]
        assert tokenize("x", v) == [UNK]

    def test_greedy_matches_brute_force_on_1000_strings(self):
        rng = random.Random(0)
        vocab = random_vocab(rng)
        vocab_set = set(vocab.tokens)
        for _ in range(1000):
            word = "".join(rng.choice("abcd") for _ in range(rng.randint(1, 9)))
            assert tokenize(word, vocab) == brute_force_segment(word, vocab_set), word

    def test_unk_never_mixed(self):
        rng = random.Random(1)
        vocab = random_vocab(rng)
        for _ in range(300):
            word = "".join(rng.choice("abcde") for _ in range(rng.randint(1, 8)))
            pieces = tokenize(word, vocab)
            assert pieces == [UNK] or UNK not in pieces

    @settings(max_examples=200)
    @given(st.text("abcd", min_size=1, max_size=10))
    def test_round_trip(self, word):
        vocab = random_vocab(random.Random(2))
        pieces = tokenize(word, vocab)
        if UNK not in pieces:
            assert detokenize_word(pieces) == word

    def test_pre_tokenize_punctuation(self):
        assert pre_tokenize("Hoi, wrâld!  ok") == ["Hoi", ",", "wrâld", "!", "ok"]

    def test_case_preserved(self):
        v = Vocabulary(list(SPECIALS) + ["A", "a"])
        assert encode("A a", v) == [5, 6]


class TestTrain:
    def test_empty_corpus(self):
        v = train_wordpiece([], 10, 100)
        assert v.tokens == list(SPECIALS)

    def test_ab_merge(self):
        v = train_wordpiece(["ab " * 150], target_size=10, min_freq=100)
        assert {"a", "##b", "ab"} <= set(v.tokens)
        assert tokenize("ab", v) == ["ab"]

    def test_rare_characters_dropped(self):
        v = train_wordpiece(["abc " * 50], target_size=10, min_freq=100)
        assert len(v) == len(SPECIALS)
        assert tokenize("abc", v) == [UNK]

    def test_target_size_respected(self):
        rng = random.Random(0)
        text = " ".join("".join(rng.choice("abcdef") for _ in range(rng.randint(2, 6))) for _ in range(3000))
        v = train_wordpiece([text], target_size=40, min_freq=5)
        assert len(v) <= 40
        for t in v.tokens[len(SPECIALS):]:
            assert t.startswith("##") or not t.startswith("#")

    def test_deterministic(self):
        text = ["the cat sat on the mat " * 40, "a bat and a cat " * 40]
        assert train_wordpiece(text, 30, 10).tokens == train_wordpiece(text, 30, 10).tokens

    def test_save_load(self, tmp_path):
        v = train_wordpiece(["ab " * 150], 10, 100)
        v.save(tmp_path / "vocab.txt")
        assert Vocabulary.load(tmp_path / "vocab.txt") == v

    def test_invalid_vocabulary(self):
        with pytest.raises(ValueError):
            Vocabulary(["a", "b"])
        with pytest.raises(ValueError, match="duplicate"):
            Vocabulary(list(SPECIALS) + ["a", "a"])


class TestPacking:
    VOCAB = Vocabulary(list(SPECIALS) + ["w"])

    def test_exact_fit(self):
        seqs = build_mlm_sequences([" ".join(["w"] * 126)], self.VOCAB, 128)
        assert seqs.shape == (1, 128)
        assert (seqs == PAD_ID).sum() == 0
        assert seqs[0, 0] == CLS_ID and seqs[0, -1] == SEP_ID

    def test_overflow(self):
        seqs = build_mlm_sequences([" ".join(["w"] * 130)], self.VOCAB, 128)
        assert seqs.shape == (2, 128)
        assert (seqs[1] == PAD_ID).sum() == 122

    def test_empty_document(self):
        assert build_mlm_sequences([""], self.VOCAB, 128).shape == (0, 128)

    def test_documents_not_straddled(self):
        seqs = build_mlm_sequences(["w w", "w"], self.VOCAB, 8)
        assert seqs.shape == (2, 8)
        assert list(seqs[1][:3]) == [CLS_ID, 5, SEP_ID]

    def test_short_seq_len(self):
        with pytest.raises(ValueError):
            build_mlm_sequences(["w"], self.VOCAB, 7)

    @settings(max_examples=50)
    @given(st.lists(st.integers(0, 40), max_size=5), st.integers(8, 20))
    def test_shape_invariants(self, lengths, seq_len):
        seqs = build_mlm_sequences([" ".join(["w"] * n) for n in lengths], self.VOCAB, seq_len)
        assert seqs.shape[1] == seq_len
        assert np.all(seqs[:, 0] == CLS_ID) if len(seqs) else True
        assert (seqs == 5).sum() == sum(lengths)
