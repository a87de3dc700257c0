"""Result rows, summary tables and small SVG plots.

Three table layouts are supported:

* ``table1``: one row per (source language, base model), treebanks averaged;
  one column per (target language, lexical variant).
* ``appendix``: like ``table1`` but with one row per treebank.
* ``table2``: data-size ablation, one row per (target, model, treebank) and
  one column per subset size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

VARIANTS = ("original", "retrained")
MISSING = "–"
FULL = "full"


@dataclass(frozen=True)
class ResultRow:
    source_lang: str
    base_model: str
    treebank: str
    target_lang: str
    lexical_variant: str
    subset_size_mb: float | str | None
    accuracy: float

    def __post_init__(self):
        if self.lexical_variant not in VARIANTS:
            raise ValueError(f"lexical_variant must be one of {VARIANTS}, got {self.lexical_variant!r}")
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        s = self.subset_size_mb
        if s is not None and s != FULL and not (isinstance(s, (int, float)) and s > 0):
            raise ValueError(f"subset_size_mb must be positive, {FULL!r} or empty, got {s!r}")

    @property
    def key(self) -> tuple:
        return astuple(self)[:-1]


HEADER = [f.name for f in fields(ResultRow)]


def _size_str(s) -> str:
    if s is None:
        return ""
    if s == FULL:
        return FULL
    return f"{float(s):g}"


def _parse_size(text: str):
    if text == "":
        return None
    if text == FULL:
        return FULL
    return float(text)


def check_unique(rows: Sequence[ResultRow]) -> None:
    seen = set()
    for r in rows:
        if r.key in seen:
            raise ValueError(f"duplicate result row for {r.key}")
        seen.add(r.key)


def rows_to_tsv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([r.source_lang, r.base_model, r.treebank, r.target_lang, r.lexical_variant,
                    _size_str(r.subset_size_mb), f"{r.accuracy:.6f}"])
    return buf.getvalue()


def rows_from_tsv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    header = next(reader, None)
    if header != HEADER:
        raise ValueError(f"unexpected result header {header}")
    out = []
    for rec in reader:
        if not rec:
            continue
        *keys, size, acc = rec
        out.append(ResultRow(*keys, _parse_size(size), float(acc)))
    return out


def write_results(rows: Sequence[ResultRow], path) -> None:
    Path(path).write_text(rows_to_tsv(rows), encoding="utf-8")


def read_results(path) -> list[ResultRow]:
    return rows_from_tsv(Path(path).read_text(encoding="utf-8"))


# -- tables --------------------------------------------------------------------


@dataclass
class Table:
    """Numeric grid plus renderings; ``None`` marks a missing cell."""

    row_header: list[str]
    columns: list[str]
    row_keys: list[tuple]
    cells: list[list[float | None]]

    def cell(self, row_key: tuple, column: str) -> float | None:
        return self.cells[self.row_keys.index(tuple(row_key))][self.columns.index(column)]

    def best_in_column(self) -> list[float | None]:
        out = []
        for j in range(len(self.columns)):
            vals = [row[j] for row in self.cells if row[j] is not None]
            out.append(max(vals) if vals else None)
        return out

    def to_tsv(self) -> str:
        lines = ["\t".join(self.row_header + self.columns)]
        for key, row in zip(self.row_keys, self.cells):
            lines.append("\t".join(list(key) + [_fmt(v) for v in row]))
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        head = self.row_header + self.columns
        best = self.best_in_column()
        body = []
        for key, row in zip(self.row_keys, self.cells):
            cells = []
            for j, v in enumerate(row):
                s = _fmt(v, percent=True)
                # exact comparison is fine: best was taken from these same floats
                if v is not None and v == best[j]:
                    s = f"**{s}**"
                cells.append(s)
            body.append(list(key) + cells)
        widths = [len(h) for h in head]
        for r in body:
            widths = [max(w, len(c)) for w, c in zip(widths, r)]
        def line(items):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(items, widths)) + " |"
        out = [line(head), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        out += [line(r) for r in body]
        return "\n".join(out) + "\n"


def _fmt(v: float | None, percent: bool = False) -> str:
    if v is None:
        return MISSING
    return f"{100 * v:.1f}" if percent else f"{v:.4f}"


def _size_sort_key(s):
    return (1, math.inf) if s == FULL else (0, float(s))


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def _grid(rows, row_of, col_of, row_header, columns=None, row_order=None) -> Table:
    groups: dict[tuple, dict[str, list[float]]] = {}
    seen_cols: list[str] = []
    for r in rows:
        rk, ck = row_of(r), col_of(r)
        groups.setdefault(rk, {}).setdefault(ck, []).append(r.accuracy)
        if ck not in seen_cols:
            seen_cols.append(ck)
    cols = columns if columns is not None else seen_cols
    keys = sorted(groups) if row_order is None else row_order(groups)
    cells = [[_mean(groups[k][c]) if c in groups[k] else None for c in cols] for k in keys]
    return Table(row_header, list(cols), list(keys), cells)


def _variant_columns(rows) -> list[str]:
    targets = sorted({r.target_lang for r in rows})
    return [f"{t} {v}" for t in targets for v in VARIANTS if any(
        r.target_lang == t and r.lexical_variant == v for r in rows)]


def build_table(rows: Iterable[ResultRow], layout: str) -> Table:
    rows = list(rows)
    check_unique(rows)
    if layout == "table1":
        return _grid(rows, lambda r: (r.source_lang, r.base_model),
                     lambda r: f"{r.target_lang} {r.lexical_variant}",
                     ["source", "model"], _variant_columns(rows))
    if layout == "appendix":
        return _grid(rows, lambda r: (r.source_lang, r.base_model, r.treebank),
                     lambda r: f"{r.target_lang} {r.lexical_variant}",
                     ["source", "model", "treebank"], _variant_columns(rows))
    if layout == "table2":
        sized = [r for r in rows if r.subset_size_mb is not None and r.lexical_variant == "retrained"]
        sizes = sorted({r.subset_size_mb for r in sized}, key=_size_sort_key)
        return _grid(sized, lambda r: (r.target_lang, r.base_model, r.treebank),
                     lambda r: _size_str(r.subset_size_mb),
                     ["target", "model", "treebank"], [_size_str(s) for s in sizes])
    raise ValueError(f"unknown layout {layout!r}; expected table1, table2 or appendix")


def render_report(rows: Iterable[ResultRow], layout: str) -> tuple[str, str]:
    """(TSV, markdown) renderings of ``rows`` in the requested layout."""
    table = build_table(rows, layout)
    return table.to_tsv(), table.to_markdown()


# -- SVG -------------------------------------------------------------------------

_W, _H, _PAD = 480, 320, 48


def _svg(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">')
    t = f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>'
    frame = (f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
             'fill="none" stroke="#444"/>')
    return "\n".join([head, t, frame] + body + ["</svg>"]) + "\n"


def _scale(v, lo, hi, a, b):
    return a + (b - a) * (v - lo) / (hi - lo) if hi > lo else (a + b) / 2


PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def ablation_svg(table: Table, title: str = "accuracy by retraining data size",
                 y_range: tuple[float, float] = (0.0, 1.0)) -> str:
    """Line per table row over the size columns, evenly spaced on x."""
    x0, x1, y0, y1 = _PAD, _W - _PAD, _H - _PAD, _PAD
    n = len(table.columns)
    xs = [_scale(j, 0, max(n - 1, 1), x0 + 12, x1 - 12) for j in range(n)]
    body = []
    for j, c in enumerate(table.columns):
        body.append(f'<text x="{xs[j]:.1f}" y="{y0 + 16}" text-anchor="middle">{escape(c)}</text>')
    for v in (y_range[0], (y_range[0] + y_range[1]) / 2, y_range[1]):
        y = _scale(v, *y_range, y0, y1)
        body.append(f'<text x="{x0 - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    for i, (key, row) in enumerate(zip(table.row_keys, table.cells)):
        color = PALETTE[i % len(PALETTE)]
        pts = [(xs[j], _scale(v, *y_range, y0, y1)) for j, v in enumerate(row) if v is not None]
        if pts:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            body.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            body += [f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.5" fill="{color}"/>' for x, y in pts]
        body.append(f'<text x="{x0 + 6}" y="{y1 + 14 + 13 * i}" fill="{color}">{escape(" / ".join(key))}</text>')
    return _svg(body, title)


def scatter_svg(coords, labels: Sequence[str], title: str = "MDS",
                bounds: tuple[float, float] | None = None) -> str:
    """Labelled 2-D scatter; both axes share ``bounds`` (symmetric by default)."""
    pts = [(float(p[0]), float(p[1]) if len(p) > 1 else 0.0) for p in coords]
    if bounds is None:
        m = max([abs(c) for p in pts for c in p] + [1e-9]) * 1.15
        bounds = (-m, m)
    x0, x1, y0, y1 = _PAD, _W - _PAD, _H - _PAD, _PAD
    body = []
    for (x, y), lab in zip(pts, labels):
        sx, sy = _scale(x, *bounds, x0, x1), _scale(y, *bounds, y0, y1)
        body.append(f'<circle cx="{sx:.1f}" cy="{sy:.1f}" r="3" fill="#1f77b4"/>')
        body.append(f'<text x="{sx + 5:.1f}" y="{sy - 5:.1f}">{escape(lab)}</text>')
    return _svg(body, title)
