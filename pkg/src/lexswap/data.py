"""Treebank and raw-corpus ingestion.

CoNLL-U reading keeps only FORM and UPOS. Raw corpora are lists of documents;
size budgets are counted in UTF-8 bytes with 1 MB = 10**6 bytes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lexswap.numcore import IGNORE_LABEL
from lexswap.tokenizer import CLS_ID, PAD_ID, SEP_ID, UNK_ID, Vocabulary, pre_tokenize

MB = 1_000_000
OVERSHOOT = 0.02


class ConlluError(ValueError):
    pass


def load_tagset(path=None) -> tuple[str, ...]:
    """Read a tag inventory file (one tag per line, '#' comments allowed)."""
    if path is None:
        text = resources.files("lexswap").joinpath("resources/upos16.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    tags = tuple(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))
    if len(set(tags)) != len(tags):
        raise ValueError("duplicate tag in tag inventory")
    return tags


UPOS = load_tagset()


@dataclass
class TaggedSentence:
    words: list[str]
    upos: list[str]

    def __post_init__(self):
        if len(self.words) != len(self.upos):
            raise ValueError(f"{len(self.words)} words but {len(self.upos)} tags")


def _open_text(source):
    if isinstance(source, (str, Path)) and Path(source).exists():
        return open(source, encoding="utf-8")
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return source
    raise FileNotFoundError(source)


def parse_conllu(source, tagset: Sequence[str] = UPOS) -> list[TaggedSentence]:
    """Read FORM/UPOS pairs from a CoNLL-U file (path or text stream).

    Comment lines, multiword-token ranges (``3-4``) and empty nodes (``5.1``)
    are skipped. A line with other than 10 tab-separated columns, or a tag
    outside ``tagset``, raises ConlluError naming the line.
    """
    known = set(tagset)
    sentences = []
    words: list[str] = []
    tags: list[str] = []
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if words:
                    sentences.append(TaggedSentence(words, tags))
                    words, tags = [], []
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise ConlluError(f"line {lineno}: expected 10 tab-separated columns, found {len(cols)}")
            tok_id = cols[0]
            if "-" in tok_id or "." in tok_id:
                continue
            if cols[3] not in known:
                raise ConlluError(f"line {lineno}: unknown UPOS tag {cols[3]!r}")
            words.append(cols[1])
            tags.append(cols[3])
    finally:
        if fh is not source:
            fh.close()
    if words:
        sentences.append(TaggedSentence(words, tags))
    return sentences


def write_conllu(sentences: Iterable[TaggedSentence]) -> str:
    """Minimal CoNLL-U rendering (FORM and UPOS filled, other columns '_')."""
    out = []
    for sent in sentences:
        for i, (w, t) in enumerate(zip(sent.words, sent.upos), 1):
            out.append(f"{i}\t{w}\t_\t{t}\t_\t_\t_\t_\t_\t_")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def split_dev_test(sentences: Sequence, dev_fraction: float = 0.25, seed: int = 0):
    """Seeded shuffle, then the first ceil(dev_fraction * N) items become dev."""
    if not sentences:
        raise ValueError("cannot split an empty treebank")
    order = np.random.default_rng(seed).permutation(len(sentences))
    n_dev = math.ceil(dev_fraction * len(sentences))
    dev = [sentences[i] for i in order[:n_dev]]
    test = [sentences[i] for i in order[n_dev:]]
    return dev, test


# -- raw corpora -------------------------------------------------------------


@dataclass
class Document:
    doc_id: str
    text: str

    @property
    def size_bytes(self) -> int:
        return len(self.text.encode("utf-8"))


@dataclass
class CorpusSubset:
    source: str
    size_bytes: int
    seed: int
    documents: list[Document] = field(default_factory=list)
    full: bool = False

    @property
    def realized_bytes(self) -> int:
        return sum(d.size_bytes for d in self.documents)

    def manifest(self) -> str:
        lines = [
            f"# source\t{self.source}",
            f"# budget_bytes\t{self.size_bytes}",
            f"# seed\t{self.seed}",
            f"# realized_bytes\t{self.realized_bytes}",
            f"# full\t{int(self.full)}",
        ]
        lines += [d.doc_id for d in self.documents]
        return "\n".join(lines) + "\n"


def read_corpus(path) -> list[Document]:
    """A directory holds one document per file; a single file holds
    blank-line-delimited documents."""
    path = Path(path)
    if path.is_dir():
        docs = []
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            text = f.read_text(encoding="utf-8")
            if text.strip():
                docs.append(Document(str(f.relative_to(path)), text))
        return docs
    text = path.read_text(encoding="utf-8")
    docs = []
    buf: list[str] = []
    for line in text.splitlines():
        if line.strip():
            buf.append(line)
        elif buf:
            docs.append(Document(f"{path.name}:{len(docs)}", "\n".join(buf)))
            buf = []
    if buf:
        docs.append(Document(f"{path.name}:{len(docs)}", "\n".join(buf)))
    return docs


def sample_subset(corpus: Sequence[Document], size_mb: float, seed: int, source: str = "corpus") -> CorpusSubset:
    """Take documents in seeded-shuffle order until ``size_mb`` is reached.

    The document that crosses the budget is kept only if it overshoots by
    less than 2%; selection then stops, so a larger budget under the same seed
    always yields a superset. A budget at or above the corpus size returns
    the whole corpus.
    """
    if size_mb <= 0:
        raise ValueError("size_mb must be positive")
    budget = int(round(size_mb * MB))
    total = sum(d.size_bytes for d in corpus)
    if budget >= total:
        return CorpusSubset(source, budget, seed, list(corpus), full=True)
    order = np.random.default_rng(seed).permutation(len(corpus))
    chosen = []
    used = 0
    for i in order:
        doc = corpus[i]
        if used + doc.size_bytes <= budget:
            chosen.append(doc)
            used += doc.size_bytes
            if used == budget:
                break
            continue
        if used + doc.size_bytes - budget < OVERSHOOT * budget:
            chosen.append(doc)
        break
    return CorpusSubset(source, budget, seed, chosen)


# -- sub-word alignment ------------------------------------------------------


@dataclass
class AlignedWindow:
    """One model input built from (part of) a sentence.

    ``word_positions[k]`` is the position of the first sub-word of word
    ``first_word + k``.
    """

    ids: np.ndarray
    labels: np.ndarray
    word_positions: list[int]
    first_word: int


def align_subword_labels(
    sentence: TaggedSentence,
    vocab: Vocabulary,
    seq_len: int = 128,
    tagset: Sequence[str] = UPOS,
) -> list[AlignedWindow]:
    """Tokenize a sentence and attach each word's tag to its first sub-word.

    Continuation pieces and CLS/SEP/PAD carry the ignore label. Sentences that
    do not fit in ``seq_len`` are split at word boundaries into several
    windows.
    """
    if not sentence.words:
        raise ValueError("cannot align an empty sentence")
    tag_id = {t: i for i, t in enumerate(tagset)}
    cap = seq_len - 2
    pieces = []
    for w in sentence.words:
        ids = []
        for sub in pre_tokenize(w) or [w]:
            ids.extend(vocab.encode_word(sub))
        pieces.append((ids or [UNK_ID])[:cap])
    windows = []
    start = 0
    while start < len(pieces):
        end = start
        used = 0
        while end < len(pieces) and used + len(pieces[end]) <= cap:
            used += len(pieces[end])
            end += 1
        ids = np.full(seq_len, PAD_ID, dtype=np.int32)
        labels = np.full(seq_len, IGNORE_LABEL, dtype=np.int64)
        ids[0] = CLS_ID
        pos = 1
        positions = []
        for k in range(start, end):
            positions.append(pos)
            labels[pos] = tag_id[sentence.upos[k]]
            ids[pos : pos + len(pieces[k])] = pieces[k]
            pos += len(pieces[k])
        ids[pos] = SEP_ID
        windows.append(AlignedWindow(ids, labels, positions, start))
        start = end
    return windows


def align_treebank(sentences: Sequence[TaggedSentence], vocab: Vocabulary, seq_len: int, tagset=UPOS):
    """Align every sentence; returns stacked ``(ids, labels)`` arrays."""
    wins = [w for s in sentences for w in align_subword_labels(s, vocab, seq_len, tagset)]
    if not wins:
        return np.zeros((0, seq_len), np.int32), np.zeros((0, seq_len), np.int64)
    return np.stack([w.ids for w in wins]), np.stack([w.labels for w in wins])
