"""End-to-end adaptation runs used by the ablation harness and the CLI.

A *source bundle* is what a pretrained model provides in the full-scale
setting: the pretrained body, its original lexical layer, and POS-fine-tuned
body checkpoints. ``adapt_to_target`` then retrains a lexical layer on target
text against the pretrained body and picks the best checkpoint combination
on target dev data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from lexswap.data import Document, TaggedSentence
from lexswap.evaluate import pos_accuracy
from lexswap.model import LexicalLayer, ModelConfig, TransformerBody, preset, swap_lexical
from lexswap.tokenizer import Vocabulary, build_mlm_sequences, train_wordpiece
from lexswap.training import (
    BodyCheckpoint,
    ComboResult,
    FinetuneRun,
    MLMRun,
    TrainConfig,
    finetune_pos,
    pretrain_lexical,
    pretrain_mlm,
    select_checkpoint_combo,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VocabConfig:
    size: int = 10000
    min_freq: int = 100


@dataclass(frozen=True)
class ToyRecipe:
    """Settings under which the toy model learns usable context from about
    1 MB of synthetic text in a few CPU minutes.

    Learning rates sit well above the full-scale values: the toy model is
    tiny and trains for a few thousand steps, and retraining a lexical layer
    from scratch against a frozen body needs a large step size to get going.
    """

    seq_len: int = 32
    vocab: VocabConfig = VocabConfig(size=600, min_freq=50)
    pretrain: TrainConfig = field(default_factory=lambda: TrainConfig(lr0=2e-3, total_steps=3000, eval_every=750))
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(lr0=3e-4, total_steps=1000, eval_every=200))
    retrain: TrainConfig = field(default_factory=lambda: TrainConfig(lr0=1e-2, total_steps=1500, eval_every=375))
    restarts: int = 3

    def model_config(self) -> ModelConfig:
        return preset("toy", seq_len=self.seq_len, max_positions=self.seq_len)


@dataclass
class SourceBundle:
    lexical: LexicalLayer
    pretrained_body: TransformerBody
    finetuned: list[BodyCheckpoint]
    best_body: TransformerBody
    pretrain_run: MLMRun | None = None
    finetune_run: FinetuneRun | None = None


@dataclass
class AdaptResult:
    vocab: Vocabulary
    combo: ComboResult
    test_accuracy: float
    run: MLMRun
    lexical_checkpoints: list = field(default_factory=list)


def heldout_split(seqs: np.ndarray, frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(len(seqs))
    n_held = max(1, int(round(frac * len(seqs)))) if len(seqs) > 1 else 0
    return seqs[order[n_held:]], seqs[order[:n_held]]


def build_source(
    corpus: Sequence[Document],
    train: Sequence[TaggedSentence],
    dev: Sequence[TaggedSentence],
    model_cfg: ModelConfig,
    vocab_cfg: VocabConfig,
    pretrain_cfg: TrainConfig,
    finetune_cfg: TrainConfig,
    pos_seq_len: int | None = None,
    seed: int = 0,
) -> SourceBundle:
    """Stand-in for a pretrained source model: MLM-pretrain everything, then
    fine-tune the body for POS tagging with the lexical layer frozen."""
    texts = [d.text for d in corpus]
    vocab = train_wordpiece(texts, vocab_cfg.size, vocab_cfg.min_freq)
    seqs = build_mlm_sequences(texts, vocab, model_cfg.seq_len)
    seqs, held = heldout_split(seqs, 0.02, seed)
    body = TransformerBody.init(replace(model_cfg, vocab_size=len(vocab)), seed=seed)
    lexical = LexicalLayer.init(vocab, model_cfg.hidden, seed=seed + 1, std=model_cfg.init_std)
    pre_run = pretrain_mlm(swap_lexical(body, lexical), seqs, pretrain_cfg, "all", held)
    pretrained = body.copy()
    ft_run = finetune_pos(lexical, body, train, dev, finetune_cfg, pos_seq_len)
    best = ft_run.best.body if ft_run.best is not None else body
    return SourceBundle(lexical, pretrained, ft_run.checkpoints, best, pre_run, ft_run)


def retrain_target_lexical(
    pretrained_body: TransformerBody,
    documents: Sequence[Document],
    vocab_cfg: VocabConfig,
    retrain_cfg: TrainConfig,
    mlm_seq_len: int | None = None,
    seed: int = 0,
    restarts: int = 1,
) -> tuple[Vocabulary, MLMRun]:
    """Train a target vocabulary and a fresh lexical layer on target text
    against a copy of the pretrained body."""
    texts = [d.text for d in documents]
    vocab = train_wordpiece(texts, vocab_cfg.size, vocab_cfg.min_freq)
    body = pretrained_body.copy()
    seqs = build_mlm_sequences(texts, vocab, mlm_seq_len or body.config.seq_len)
    seqs, held = heldout_split(seqs, 0.02, seed)
    return vocab, retrain_with_restarts(body, vocab, seqs, held, retrain_cfg, seed, restarts)


def run_score(run: MLMRun) -> float:
    """Best held-out MLM loss of a run, or its last training loss without held-out data."""
    held = [m[3] for m in run.metrics if m[3] is not None]
    if held:
        return min(held)
    return run.metrics[-1][2] if run.metrics else float("inf")


def retrain_with_restarts(
    body: TransformerBody,
    vocab: Vocabulary,
    seqs: np.ndarray,
    heldout: np.ndarray | None,
    retrain_cfg: TrainConfig,
    seed: int = 0,
    restarts: int = 1,
) -> MLMRun:
    """Train a fresh lexical layer ``restarts`` times from different random
    initialisations and keep the run with the lowest held-out MLM loss.

    A new lexical layer can settle where each word takes over the role of a
    neighbouring word for the frozen body; such runs end with a clearly higher
    held-out loss, so restarting and selecting on that loss avoids them
    without looking at any labels.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best, best_score = None, float("inf")
    for r in range(restarts):
        lexical = LexicalLayer.init(vocab, body.hidden, seed=seed + 2 + 1009 * r, std=body.config.init_std)
        run = pretrain_lexical(body, lexical, seqs, retrain_cfg, vocab=vocab, heldout=heldout)
        score = run_score(run)
        log.info("lexical restart %d: held-out loss %.4f", r, score)
        if best is None or score < best_score:
            best, best_score = run, score
    return best


def select_and_score(
    run: MLMRun,
    finetuned: Sequence[BodyCheckpoint],
    target_dev: Sequence[TaggedSentence],
    target_test: Sequence[TaggedSentence],
    cap: int = 8,
    pos_seq_len: int | None = None,
) -> tuple[ComboResult, float]:
    """Best checkpoint pair on target dev and its target test accuracy."""
    combo = select_checkpoint_combo(run.checkpoints, finetuned, target_dev, cap=cap, seq_len=pos_seq_len)
    model = swap_lexical(combo.body.body, combo.lexical.lexical)
    return combo, pos_accuracy(model, target_test, pos_seq_len)


def adapt_to_target(
    source: SourceBundle,
    documents: Sequence[Document],
    target_dev: Sequence[TaggedSentence],
    target_test: Sequence[TaggedSentence],
    vocab_cfg: VocabConfig,
    retrain_cfg: TrainConfig,
    pos_seq_len: int | None = None,
    mlm_seq_len: int | None = None,
    cap: int = 8,
    seed: int = 0,
    restarts: int = 1,
) -> AdaptResult:
    """Retrain the lexical layer on target text, pick the best checkpoint
    pair on target dev, and score it on target test."""
    vocab, run = retrain_target_lexical(source.pretrained_body, documents, vocab_cfg, retrain_cfg, mlm_seq_len, seed,
                                       restarts)
    combo, acc = select_and_score(run, source.finetuned, target_dev, target_test, cap, pos_seq_len)
    return AdaptResult(vocab, combo, acc, run, run.checkpoints)


def original_lexical_accuracy(source: SourceBundle, sentences: Sequence[TaggedSentence],
                              pos_seq_len: int | None = None) -> float:
    """Zero-shot accuracy with the source model's own lexical layer."""
    return pos_accuracy(swap_lexical(source.best_body, source.lexical), sentences, pos_seq_len)
