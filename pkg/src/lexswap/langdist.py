"""Lexical-phonetic language distance from ASJP-style 40-concept word lists.

LDN is the mean normalised Levenshtein distance between same-concept words
(minimum over synonym pairs); LDND divides it by the mean distance between
different-concept words, which discounts chance similarity caused by shared
sound inventories. Also classical (Torgerson) MDS and Pearson correlation.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from lexswap import kernels
from lexswap.numcore import sym_eig

N_CONCEPTS = 40


@dataclass
class WordList:
    language: str
    entries: dict[int, list[str]]

    def __post_init__(self):
        for cid, forms in self.entries.items():
            if not 1 <= cid <= N_CONCEPTS:
                raise ValueError(f"{self.language}: concept id {cid} outside 1..{N_CONCEPTS}")
            if not forms or any(not f for f in forms):
                raise ValueError(f"{self.language}: empty transcription for concept {cid}")


@dataclass
class DistanceMatrix:
    languages: list[str]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.languages)
        if v.shape != (n, n):
            raise ValueError(f"matrix shape {v.shape} does not match {n} languages")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("distance matrix diagonal must be exactly 0")
        if np.abs(v - v.T).max(initial=0.0) > 1e-12:
            raise ValueError("distance matrix is not symmetric")
        if (v < 0).any():
            raise ValueError("distances must be non-negative")
        self.values = v

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.languages.index(a), self.languages.index(b)])

    def to_tsv(self) -> str:
        lines = ["language\t" + "\t".join(self.languages)]
        for name, row in zip(self.languages, self.values):
            lines.append(name + "\t" + "\t".join(f"{x:.6f}" for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "DistanceMatrix":
        rows = [line.split("\t") for line in text.splitlines() if line.strip()]
        langs = rows[0][1:]
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(langs, values)


# -- ASJP transcription handling ---------------------------------------------


@lru_cache(maxsize=None)
def _default_symbol_table() -> dict[str, str]:
    text = resources.files("lexswap").joinpath("resources/asjp_symbols.tsv").read_text(encoding="utf-8")
    return _parse_table(text)


def _parse_table(text: str) -> dict[str, str]:
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        seq, rep = line.split("\t")[:2]
        if len(rep) != 1:
            raise ValueError(f"replacement for {seq!r} must be a single character")
        table[seq] = rep
    return table


def load_symbol_table(path=None) -> dict[str, str]:
    if path is None:
        return _default_symbol_table()
    return _parse_table(Path(path).read_text(encoding="utf-8"))


def _compound_char(seq: str, table: dict[str, str]) -> str:
    rep = table.get(seq)
    if rep is None:
        # supplementary private-use plane, stable across runs
        rep = chr(0xF0000 + zlib.crc32(seq.encode("utf-8")) % 0xFFFE)
    return rep


def normalize_asjp(word: str, table: dict[str, str] | None = None) -> str:
    """Collapse ASJP modifier sequences so every sound is one character.

    ``~`` joins the two preceding symbols, ``$`` the three preceding ones;
    ``*`` and ``"`` modify the preceding symbol.
    """
    table = _default_symbol_table() if table is None else table
    symbols: list[str] = []
    for ch in word:
        if ch in "~$":
            k = 2 if ch == "~" else 3
            if len(symbols) < k:
                raise ValueError(f"modifier {ch!r} without {k} preceding symbols in {word!r}")
            joined = "".join(symbols[-k:]) + ch
            del symbols[-k:]
            symbols.append(joined)
        elif ch in '*"':
            if not symbols:
                raise ValueError(f"modifier {ch!r} at start of {word!r}")
            symbols[-1] += ch
        else:
            symbols.append(ch)
    return "".join(s if len(s) == 1 else _compound_char(s, table) for s in symbols)


def read_wordlists(path, normalize: bool = True, table: dict[str, str] | None = None) -> dict[str, WordList]:
    """Tab-separated rows ``language  concept-id  transcription``, one per synonym.

    A first row whose concept column is not an integer is treated as a
    header. Languages keep their order of first appearance.
    """
    entries: dict[str, dict[int, list[str]]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated columns")
        lang, cid, form = (c.strip() for c in cols)
        try:
            cid_i = int(cid)
        except ValueError:
            if lineno == 1:
                continue
            raise ValueError(f"{path}:{lineno}: concept id {cid!r} is not an integer") from None
        if normalize:
            form = normalize_asjp(form, table)
        entries.setdefault(lang, {}).setdefault(cid_i, []).append(form)
    return {lang: WordList(lang, e) for lang, e in entries.items()}


def write_wordlists(wordlists: Sequence[WordList]) -> str:
    lines = ["language\tconcept\ttranscription"]
    for wl in wordlists:
        for cid in sorted(wl.entries):
            lines += [f"{wl.language}\t{cid}\t{f}" for f in wl.entries[cid]]
    return "\n".join(lines) + "\n"


# -- distances ---------------------------------------------------------------


def levenshtein_norm(a: str, b: str) -> float:
    """Edit distance divided by the longer length; in [0, 1]."""
    longest = max(len(a), len(b))
    if longest == 0:
        raise ValueError("both strings are empty")
    return kernels.levenshtein(a, b) / longest


def _shared(a: WordList, b: WordList) -> list[int]:
    return sorted(set(a.entries) & set(b.entries))


def ldn(a: WordList, b: WordList) -> float:
    """Mean over shared concepts of the smallest same-concept distance."""
    shared = _shared(a, b)
    if not shared:
        raise ValueError(f"{a.language} and {b.language} share no concepts")
    per_concept = [min(levenshtein_norm(x, y) for x in a.entries[c] for y in b.entries[c]) for c in shared]
    return math.fsum(per_concept) / len(per_concept)


def _chance_distance(a: WordList, b: WordList, shared: list[int]) -> float:
    vals = [
        levenshtein_norm(x, y)
        for c1 in shared
        for c2 in shared
        if c1 != c2
        for x in a.entries[c1]
        for y in b.entries[c2]
    ]
    # fsum is exactly rounded, so the result does not depend on pair order
    return math.fsum(vals) / len(vals)


def ldnd(a: WordList, b: WordList) -> float:
    """LDN divided by the mean distance over different-concept word pairs."""
    shared = _shared(a, b)
    if len(shared) < 2:
        raise ValueError(f"{a.language} and {b.language} share fewer than 2 concepts")
    denom = _chance_distance(a, b, shared)
    if denom == 0.0:
        raise ValueError("different-concept words are identical; LDND undefined")
    return ldn(a, b) / denom


def distance_matrix(wordlists: Sequence[WordList], measure=ldnd) -> DistanceMatrix:
    n = len(wordlists)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = measure(wordlists[i], wordlists[j])
    return DistanceMatrix([w.language for w in wordlists], values)


# -- embedding and correlation -----------------------------------------------


def classical_mds(d, dims: int = 2) -> np.ndarray:
    """Torgerson scaling: coordinates from the top eigenpairs of -1/2 J D^2 J.

    Axes with non-positive eigenvalue are returned as zero columns. Each axis
    is oriented so that the first point's coordinate is non-negative.
    """
    values = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)
    n = values.shape[0]
    if dims < 1 or dims > n - 1:
        raise ValueError(f"dims must be in [1, {n - 1}] for {n} points")
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (values**2) @ j
    b = 0.5 * (b + b.T)
    evals, evecs = sym_eig(b)
    coords = np.zeros((n, dims))
    for k in range(dims):
        if evals[k] > 1e-12 * max(1.0, abs(evals[0])):
            coords[:, k] = evecs[:, k] * math.sqrt(evals[k])
            if coords[0, k] < 0:
                coords[:, k] = -coords[:, k]
    return coords


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))


def pearson_r(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample correlation and two-sided p-value.

    For n <= 8 the p-value is exact over all n! pairings; larger samples use
    the t distribution with n - 2 degrees of freedom.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-D sequences")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("zero variance")
    r = max(-1.0, min(1.0, _pearson(x, y)))
    if n <= 8:
        xc = x - x.mean()
        yc = y - y.mean()
        norm = math.sqrt((xc @ xc) * (yc @ yc))
        perms = np.array(list(itertools.permutations(range(n))))
        rs = (yc[perms] @ xc) / norm
        p = float(np.mean(np.abs(rs) >= abs(r) - 1e-12))
    elif abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return r, p
