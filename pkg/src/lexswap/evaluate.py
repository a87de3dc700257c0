"""Word-level POS accuracy."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lexswap.data import UPOS, TaggedSentence, align_subword_labels


def predict_sentences(model, sentences: Sequence[TaggedSentence], seq_len: int | None = None,
                      batch_size: int = 64, tagset=UPOS) -> list[list[int]]:
    """Predicted tag ids per word, read off each word's first sub-word."""
    seq_len = seq_len or model.config.seq_len
    windows = []
    for si, sent in enumerate(sentences):
        for w in align_subword_labels(sent, model.vocab, seq_len, tagset):
            windows.append((si, w))
    preds: list[list[int]] = [[-1] * len(s.words) for s in sentences]
    for start in range(0, len(windows), batch_size):
        chunk = windows[start : start + batch_size]
        ids = np.stack([w.ids for _, w in chunk])
        tags = model.predict_tags(ids)
        for row, (si, w) in zip(tags, chunk):
            for k, pos in enumerate(w.word_positions):
                preds[si][w.first_word + k] = int(row[pos])
    return preds


def pos_accuracy(model, sentences: Sequence[TaggedSentence], seq_len: int | None = None,
                 batch_size: int = 64, tagset=UPOS) -> float:
    """Fraction of words whose first-sub-word prediction matches the gold tag."""
    if not sentences:
        raise ValueError("cannot score an empty sentence list")
    tag_id = {t: i for i, t in enumerate(tagset)}
    preds = predict_sentences(model, sentences, seq_len, batch_size, tagset)
    correct = total = 0
    for sent, pred in zip(sentences, preds):
        for tag, p in zip(sent.upos, pred):
            correct += tag_id[tag] == p
            total += 1
    if total == 0:
        raise ValueError("sentences contain no words")
    return correct / total
