"""Data-size ablation: retrain the lexical layer on nested corpus subsets.

Each (size, base model) point is one independent job. It samples the subset,
trains a target vocabulary and lexical layer against the model's pretrained
body, and then, for every treebank the model was fine-tuned on, picks the
best checkpoint pair on target dev and scores target test. Every job uses
the same master seed, so a size that covers the whole corpus reproduces the
non-ablated run exactly.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from lexswap.data import MB, Document, TaggedSentence, sample_subset
from lexswap.pipeline import SourceBundle, VocabConfig, retrain_target_lexical, select_and_score
from lexswap.report import FULL, ResultRow
from lexswap.training import TrainConfig

log = logging.getLogger(__name__)

DEFAULT_SIZES = (1, 5, 10, 20, 40, FULL)


@dataclass
class AblationSetup:
    """Everything needed to run the ablation for one target language.

    ``models`` maps a base-model name to its per-treebank source bundles;
    bundles of one model must share the same pretrained body.
    """

    source_lang: str
    target_lang: str
    corpus: list[Document]
    target_dev: list[TaggedSentence]
    target_test: list[TaggedSentence]
    models: dict[str, dict[str, SourceBundle]]
    vocab_cfg: VocabConfig = field(default_factory=VocabConfig)
    retrain_cfg: TrainConfig = field(default_factory=TrainConfig)
    pos_seq_len: int | None = None
    mlm_seq_len: int | None = None
    cap: int = 8
    seed: int = 0
    restarts: int = 1


def parse_sizes(text: str) -> list:
    """``"1,5,full"`` -> ``[1.0, 5.0, "full"]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part == FULL:
            out.append(FULL)
            continue
        value = float(part)
        if value <= 0:
            raise ValueError(f"subset size must be positive, got {part}")
        out.append(value)
    if not out:
        raise ValueError("empty size list")
    return out


def _job(setup: AblationSetup, size, model: str) -> list[ResultRow]:
    if size == FULL:
        docs, label = setup.corpus, FULL
    else:
        subset = sample_subset(setup.corpus, float(size), setup.seed, setup.target_lang)
        docs, label = subset.documents, (FULL if subset.full else float(size))
    bundles = setup.models[model]
    names = sorted(bundles)
    _, run = retrain_target_lexical(bundles[names[0]].pretrained_body, docs, setup.vocab_cfg,
                                    setup.retrain_cfg, setup.mlm_seq_len, setup.seed, setup.restarts)
    rows = []
    for treebank in names:
        _, acc = select_and_score(run, bundles[treebank].finetuned, setup.target_dev, setup.target_test,
                                  setup.cap, setup.pos_seq_len)
        log.info("ablation %s %s %s: %.4f", label, model, treebank, acc)
        rows.append(ResultRow(setup.source_lang, model, treebank, setup.target_lang, "retrained", label, acc))
    return rows


def run_ablation(setup: AblationSetup, sizes_mb: Sequence = DEFAULT_SIZES, jobs: int = 1) -> list[ResultRow]:
    """One row per (size, model, treebank), in the order of ``sizes_mb``, then model, then treebank.

    Sizes at or above the corpus size are labelled ``"full"``; if several
    sizes collapse to ``"full"`` only the first is run.
    """
    sizes = list(sizes_mb)
    if not sizes:
        raise ValueError("size list is empty")
    if not setup.models:
        raise ValueError("no base models to ablate")
    total = sum(d.size_bytes for d in setup.corpus)
    labels, plan = set(), []
    for s in sizes:
        label = FULL if s == FULL or int(round(float(s) * MB)) >= total else float(s)
        if label in labels:
            continue
        labels.add(label)
        plan += [(s, m) for m in sorted(setup.models)]
    if jobs <= 1:
        results = [_job(setup, s, m) for s, m in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, [setup] * len(plan), *zip(*plan)))
    return [row for chunk in results for row in chunk]
