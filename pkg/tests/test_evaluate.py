from types import SimpleNamespace

import numpy as np
import pytest

from lexswap.data import UPOS, TaggedSentence
from lexswap.evaluate import pos_accuracy, predict_sentences
from lexswap.model import LexicalLayer, TransformerBody, preset, swap_lexical
from lexswap.tokenizer import SPECIALS, Vocabulary

TAG = {t: i for i, t in enumerate(UPOS)}
VOCAB = Vocabulary(list(SPECIALS) + ["ho", "##nd", "de", "loopt", "."])


class TableModel:
    """Tags every token through a fixed id -> tag table."""

    def __init__(self, table, seq_len=16):
        self.vocab = VOCAB
        self.config = SimpleNamespace(seq_len=seq_len)
        self.table = np.zeros(len(VOCAB), dtype=np.int64)
        for tok, tag in table.items():
            self.table[VOCAB.ids[tok]] = TAG[tag]
        self.calls = 0

    def predict_tags(self, ids):
        self.calls += 1
        return self.table[ids]


GOLD = TaggedSentence(["de", "hond", "loopt", "."], ["DET", "NOUN", "VERB", "PUNCT"])


class TestFirstSubword:
    def test_only_first_piece_counts(self):
        # the continuation piece is tagged wrongly; it must be ignored
        model = TableModel({"de": "DET", "ho": "NOUN", "##nd": "ADJ", "loopt": "VERB", ".": "PUNCT"})
        assert pos_accuracy(model, [GOLD]) == 1.0

    def test_first_piece_wrong(self):
        model = TableModel({"de": "DET", "ho": "ADJ", "##nd": "NOUN", "loopt": "VERB", ".": "PUNCT"})
        assert pos_accuracy(model, [GOLD]) == pytest.approx(3 / 4)

    def test_word_level_denominator(self):
        model = TableModel({"de": "DET"})
        s2 = TaggedSentence(["de", "de"], ["DET", "NOUN"])
        # 1 of 4 in GOLD, 1 of 2 in s2: pooled over words, not averaged per sentence
        assert pos_accuracy(model, [GOLD, s2]) == pytest.approx(2 / 6)

    def test_windows_cover_long_sentences(self):
        words = ["de", "hond", "loopt", "."] * 5
        sent = TaggedSentence(words, [GOLD.upos[i % 4] for i in range(20)])
        model = TableModel({"de": "DET", "ho": "NOUN", "loopt": "VERB", ".": "PUNCT"}, seq_len=8)
        preds = predict_sentences(model, [sent])
        assert -1 not in preds[0]
        assert pos_accuracy(model, [sent]) == 1.0

    def test_batching_is_transparent(self):
        model = TableModel({"de": "DET", "ho": "NOUN", "loopt": "VERB", ".": "PUNCT"})
        sents = [GOLD] * 10
        assert predict_sentences(model, sents, batch_size=3) == predict_sentences(model, sents, batch_size=64)

    def test_empty(self):
        with pytest.raises(ValueError):
            pos_accuracy(TableModel({}), [])


def test_real_model_in_range():
    cfg = preset("toy", vocab_size=len(VOCAB), seq_len=16, max_positions=16)
    model = swap_lexical(TransformerBody.init(cfg, 0), LexicalLayer.init(VOCAB, cfg.hidden, 1))
    acc = pos_accuracy(model, [GOLD, GOLD])
    assert 0.0 <= acc <= 1.0
    assert acc * 8 == pytest.approx(round(acc * 8))
