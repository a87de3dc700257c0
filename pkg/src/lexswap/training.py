"""The two independent fine-tuning phases and checkpoint-combination selection.

* ``finetune_pos`` trains the body (encoder + tag head) on source-language
  treebanks with the lexical layer frozen, stopping when dev loss stalls.
* ``pretrain_lexical`` trains a fresh lexical layer on target-language text
  with masked language modelling while the body stays frozen.
* ``select_checkpoint_combo`` pairs lexical and body checkpoints and keeps the
  pair with the best target-language dev accuracy.

``pretrain_mlm`` is the shared MLM loop; with ``selector="all"`` it also
produces the source "pretrained" models used in the synthetic experiments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from lexswap.data import UPOS, TaggedSentence, align_treebank
from lexswap.evaluate import pos_accuracy
from lexswap.model import AssembledModel, LexicalLayer, TransformerBody, set_trainable, swap_lexical
from lexswap.numcore import IGNORE_LABEL, AdamState, adam_step, clip_grad_norm, linear_lr
from lexswap.tokenizer import MASK_ID, N_SPECIALS, Vocabulary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-4
    total_steps: int = 5000
    batch_size: int = 32
    eval_every: int = 250
    patience: int = 3
    seed: int = 0
    mask_rate: float = 0.15
    max_checkpoints: int = 8
    grad_clip: float | None = None

    def __post_init__(self):
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError("mask_rate must be in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.total_steps < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("total_steps, batch_size and eval_every must be positive")


# learning rates stated for the two phases at full scale
FINETUNE_LR = 1e-5
RETRAIN_LR = 1e-4


def mask_tokens(sequence, vocab_size: int, rate: float = 0.15, seed=0):
    """BERT-style corruption of content positions.

    Each non-special position is selected with probability ``rate``; selected
    positions become [MASK] 80% of the time, a random non-special id 10%, and
    stay unchanged 10%. Labels hold the original id at selected positions and
    the ignore label elsewhere. ``seed`` may be an int or a numpy Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ids = np.array(sequence, dtype=np.int64, copy=True)
    labels = np.full(ids.shape, IGNORE_LABEL, dtype=np.int64)
    if rate <= 0.0:
        return ids, labels
    if isinstance(vocab_size, Vocabulary):
        vocab_size = len(vocab_size)
    content = ids >= N_SPECIALS
    selected = content & (rng.random(ids.shape) < rate)
    labels[selected] = ids[selected]
    roll = rng.random(ids.shape)
    to_mask = selected & (roll < 0.8)
    to_random = selected & (roll >= 0.8) & (roll < 0.9)
    ids[to_mask] = MASK_ID
    if vocab_size > N_SPECIALS:
        ids[to_random] = rng.integers(N_SPECIALS, vocab_size, size=int(to_random.sum()))
    return ids, labels


class EarlyStopping:
    """Stop once ``patience`` consecutive evaluations fail to beat the best loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_index = -1
        self.bad = 0
        self.count = 0

    def update(self, loss: float) -> bool:
        index = self.count
        self.count += 1
        if loss < self.best:
            self.best, self.best_index, self.bad = loss, index, 0
            return False
        self.bad += 1
        return self.bad >= self.patience


@dataclass
class LexicalCheckpoint:
    step: int
    lexical: LexicalLayer
    heldout_loss: float


@dataclass
class BodyCheckpoint:
    step: int
    body: TransformerBody
    dev_loss: float


@dataclass
class MLMRun:
    checkpoints: list[LexicalCheckpoint] = field(default_factory=list)
    metrics: list[tuple] = field(default_factory=list)
    model: AssembledModel | None = None


@dataclass
class FinetuneRun:
    checkpoints: list[BodyCheckpoint] = field(default_factory=list)
    best: BodyCheckpoint | None = None
    metrics: list[tuple] = field(default_factory=list)
    stopped_early: bool = False


def write_metrics(rows: Sequence[tuple], path) -> None:
    """Tab-separated ``step lr loss dev_metric`` log."""
    lines = ["step\tlr\tloss\tdev_metric"]
    for step, lr, loss, dev in rows:
        dev_s = "" if dev is None else f"{dev:.6f}"
        lines.append(f"{step}\t{lr:.6g}\t{loss:.6f}\t{dev_s}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _Batches:
    """Deterministic epoch-shuffled minibatch indices."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if n == 0:
            raise ValueError("no training examples")
        self.n, self.bs, self.rng = n, min(batch_size, n), rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos + self.bs > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.order[self.pos : self.pos + self.bs]
        self.pos += self.bs
        return idx


def _mlm_eval(model: AssembledModel, heldout: np.ndarray, rate: float, seed: int, batch_size: int = 64) -> float:
    masked, labels = mask_tokens(heldout, len(model.vocab), rate, seed)
    total = count = 0.0
    for start in range(0, len(masked), batch_size):
        lab = labels[start : start + batch_size]
        n = int((lab != IGNORE_LABEL).sum())
        if n == 0:
            continue
        total += model.mlm_loss(masked[start : start + batch_size], lab) * n
        count += n
    return total / count if count else float("nan")


def _snapshot_flags(store):
    return {n: p.trainable for n, p in store.items()}


def _restore_flags(store, flags):
    for n, p in store.items():
        p.trainable = flags[n]


def pretrain_mlm(model: AssembledModel, sequences: np.ndarray, cfg: TrainConfig, selector: str = "all",
                 heldout: np.ndarray | None = None) -> MLMRun:
    """Masked-LM training of the selected parameter group of ``model``, in place.

    Every ``eval_every`` steps (and at the end) the lexical layer is
    snapshotted together with the held-out MLM loss, computed under a fixed
    masking seed so that values are comparable across checkpoints.
    """
    sequences = np.asarray(sequences)
    if sequences.ndim != 2 or len(sequences) == 0:
        raise ValueError("need a non-empty [n, seq_len] array of sequences")
    if sequences.max() >= len(model.vocab):
        raise ValueError("sequence ids exceed the lexical layer's vocabulary")
    flags = _snapshot_flags(model.store)
    set_trainable(model.store, selector)
    run = MLMRun(model=model)
    rng = np.random.default_rng(cfg.seed)
    batches = _Batches(len(sequences), cfg.batch_size, rng)
    state = AdamState()
    eval_seed = cfg.seed + 7919
    try:
        for step in range(cfg.total_steps):
            batch = sequences[batches.next()]
            masked, labels = mask_tokens(batch, len(model.vocab), cfg.mask_rate, rng)
            if not (labels != IGNORE_LABEL).any():
                continue
            model.store.zero_grad()
            loss = model.mlm_loss(masked, labels, backward=True)
            _fill_missing_grads(model)
            if cfg.grad_clip:
                clip_grad_norm(model.store, cfg.grad_clip)
            lr = linear_lr(step, cfg.total_steps, cfg.lr0)
            adam_step(model.store, state, lr)
            done = step + 1
            if done % cfg.eval_every == 0 or done == cfg.total_steps:
                dev = _mlm_eval(model, heldout, cfg.mask_rate, eval_seed) if heldout is not None and len(heldout) else None
                run.metrics.append((done, lr, loss, dev))
                run.checkpoints.append(LexicalCheckpoint(done, model.lexical.copy(), dev if dev is not None else float("nan")))
                log.info("mlm step %d lr %.3g loss %.4f heldout %s", done, lr, loss, dev)
    finally:
        _restore_flags(model.store, flags)
    return run


def _fill_missing_grads(model: AssembledModel) -> None:
    # parameters outside the computed path (e.g. the POS head under MLM) get zero grads
    for p in model.store._entries.values():
        if p.trainable and p.grad is None:
            p.grad = np.zeros_like(p.value)


def pretrain_lexical(body: TransformerBody, lexical: LexicalLayer, sequences: np.ndarray, cfg: TrainConfig,
                     vocab: Vocabulary | None = None, heldout: np.ndarray | None = None) -> MLMRun:
    """Retrain only ``lexical`` with MLM on top of a frozen ``body``.

    ``vocab`` is the vocabulary the sequences were encoded with; it must be the
    lexical layer's own vocabulary.
    """
    if vocab is not None and vocab != lexical.vocab:
        raise ValueError(
            f"sequences were encoded with vocabulary {vocab.fingerprint()} ({len(vocab)} tokens) but the "
            f"lexical layer uses {lexical.vocab.fingerprint()} ({len(lexical.vocab)} tokens)"
        )
    model = swap_lexical(body, lexical)
    return pretrain_mlm(model, sequences, cfg, "lexical-only", heldout)


def _pos_dev_loss(model: AssembledModel, ids: np.ndarray, labels: np.ndarray, batch_size: int = 64) -> float:
    total = count = 0.0
    for start in range(0, len(ids), batch_size):
        lab = labels[start : start + batch_size]
        n = int((lab != IGNORE_LABEL).sum())
        if n:
            total += model.pos_loss(ids[start : start + batch_size], lab) * n
            count += n
    return total / count


def finetune_pos(lexical: LexicalLayer, body: TransformerBody, train: Sequence[TaggedSentence],
                 dev: Sequence[TaggedSentence], cfg: TrainConfig, seq_len: int | None = None,
                 tagset=UPOS) -> FinetuneRun:
    """Train the body on a source treebank with the lexical layer frozen.

    Dev loss is measured every ``eval_every`` steps; a body snapshot is kept
    at each evaluation, and training halts after ``patience`` evaluations
    without improvement. ``run.best`` is the snapshot with minimum dev loss.
    """
    if not train:
        raise ValueError("empty training treebank")
    if not dev:
        raise ValueError("empty dev treebank")
    seq_len = seq_len or body.config.seq_len
    model = swap_lexical(body, lexical)
    tr_ids, tr_labels = align_treebank(train, lexical.vocab, seq_len, tagset)
    dv_ids, dv_labels = align_treebank(dev, lexical.vocab, seq_len, tagset)
    flags = _snapshot_flags(model.store)
    set_trainable(model.store, "body-only")
    rng = np.random.default_rng(cfg.seed)
    batches = _Batches(len(tr_ids), cfg.batch_size, rng)
    state = AdamState()
    stopper = EarlyStopping(cfg.patience)
    run = FinetuneRun()
    try:
        for step in range(cfg.total_steps):
            idx = batches.next()
            model.store.zero_grad()
            loss = model.pos_loss(tr_ids[idx], tr_labels[idx], backward=True)
            _fill_missing_grads(model)
            if cfg.grad_clip:
                clip_grad_norm(model.store, cfg.grad_clip)
            lr = linear_lr(step, cfg.total_steps, cfg.lr0)
            adam_step(model.store, state, lr)
            done = step + 1
            if done % cfg.eval_every == 0 or done == cfg.total_steps:
                dev_loss = _pos_dev_loss(model, dv_ids, dv_labels)
                run.metrics.append((done, lr, loss, dev_loss))
                ckpt = BodyCheckpoint(done, body.copy(), dev_loss)
                run.checkpoints.append(ckpt)
                log.info("pos step %d lr %.3g loss %.4f dev %.4f", done, lr, loss, dev_loss)
                stop = stopper.update(dev_loss)
                if stopper.best_index == len(run.checkpoints) - 1:
                    run.best = ckpt
                if stop:
                    run.stopped_early = done < cfg.total_steps
                    break
    finally:
        _restore_flags(model.store, flags)
    return run


@dataclass
class ComboResult:
    lexical: LexicalCheckpoint
    body: BodyCheckpoint
    accuracy: float
    grid: dict[tuple[int, int], float]


def select_checkpoint_combo(lexical_ckpts: Sequence[LexicalCheckpoint], body_ckpts: Sequence[BodyCheckpoint],
                            dev: Sequence[TaggedSentence], cap: int = 8,
                            scorer: Callable | None = None, seq_len: int | None = None) -> ComboResult:
    """Exhaustive search over (lexical, body) checkpoint pairs.

    Only the last ``cap`` checkpoints of each kind are considered. The pair
    with the highest target dev accuracy wins; ties go to the earlier lexical
    step, then the earlier body step. ``scorer(lexical_ckpt, body_ckpt)``
    overrides the default accuracy computation.
    """
    if not lexical_ckpts or not body_ckpts:
        raise ValueError("need at least one checkpoint of each kind")
    if not dev:
        raise ValueError("empty target dev set")
    lex = sorted(lexical_ckpts, key=lambda c: c.step)[-cap:]
    bod = sorted(body_ckpts, key=lambda c: c.step)[-cap:]
    if scorer is None:
        def scorer(lc, bc):
            return pos_accuracy(swap_lexical(bc.body, lc.lexical), dev, seq_len)
    grid = {}
    best = None
    for lc in lex:
        for bc in bod:
            acc = float(scorer(lc, bc))
            grid[(lc.step, bc.step)] = acc
            if best is None or acc > best[2]:
                best = (lc, bc, acc)
    return ComboResult(best[0], best[1], best[2], grid)


def finetune_defaults(**overrides) -> TrainConfig:
    return replace(TrainConfig(lr0=FINETUNE_LR), **overrides)


def retrain_defaults(**overrides) -> TrainConfig:
    return replace(TrainConfig(lr0=RETRAIN_LR), **overrides)
