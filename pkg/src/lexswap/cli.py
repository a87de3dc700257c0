"""Command-line front end.

Every subcommand reads its settings from flags, optionally pre-filled from an
INI config file (``--config``): keys in ``[common]`` and in the section named
after the subcommand become flag defaults, so flags always win. The output
directory can be overridden with the ``LEXSWAP_OUTPUT_DIR`` environment
variable. Each run writes its outputs plus ``<command>.config.ini`` (the
effective settings) and ``<command>.provenance.json`` into the output dir.

Exit codes: 0 success, 1 bad configuration or input, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from lexswap import __version__, kernels
from lexswap.checkpoint import load_checkpoint, read_header, save_checkpoint
from lexswap.data import parse_conllu, read_corpus, sample_subset, write_conllu
from lexswap.model import PRESETS, LexicalLayer, TransformerBody, preset, swap_lexical
from lexswap.tokenizer import Vocabulary, build_mlm_sequences, train_wordpiece

log = logging.getLogger("lexswap")

ENV_OUTPUT_DIR = "LEXSWAP_OUTPUT_DIR"


class ConfigError(Exception):
    """Raised for settings problems; reported with exit code 1."""


# -- argument definitions --------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file supplying defaults for this command")
    p.add_argument("--out-dir", help=f"output directory (default: ${ENV_OUTPUT_DIR} or .)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-level", default="WARNING")


def _train_opts(p, steps, lr, eval_every):
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--eval-every", type=int, default=eval_every)


def _vocab_opts(p):
    p.add_argument("--vocab", help="existing vocab.txt; trained from the corpus if omitted")
    p.add_argument("--vocab-size", type=int, default=10000)
    p.add_argument("--min-freq", type=int, default=100)


REQUIRED: dict[str, tuple[str, ...]] = {
    "train-vocab": ("corpus",),
    "pretrain-source": ("corpus",),
    "pretrain-lexical": ("corpus", "body"),
    "finetune-pos": ("train", "dev", "lexical", "body"),
    "swap": ("body", "lexical"),
    "evaluate": ("test",),
    "ablate": ("corpus", "dev", "test"),
    "langdist": ("wordlists",),
    "report": ("results",),
    "synth": (),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexswap", description="Lexical-layer retraining toolkit.")
    parser.add_argument("--version", action="version", version=f"lexswap {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train-vocab", help="train a WordPiece vocabulary")
    _common(p)
    p.add_argument("--corpus", help="corpus directory or blank-line-delimited file")
    p.add_argument("--size", type=int, default=10000)
    p.add_argument("--min-freq", type=int, default=100)
    p.add_argument("--out", help="vocab file (default: <out-dir>/vocab.txt)")

    p = sub.add_parser("pretrain-source", help="MLM-pretrain a source model from scratch")
    _common(p)
    p.add_argument("--corpus")
    _vocab_opts(p)
    p.add_argument("--preset", default="toy", choices=sorted(PRESETS))
    p.add_argument("--seq-len", type=int)
    _train_opts(p, 5000, 1e-3, 500)

    p = sub.add_parser("pretrain-lexical", help="retrain a lexical layer against a frozen body")
    _common(p)
    p.add_argument("--corpus")
    p.add_argument("--body", help="pretrained body checkpoint")
    _vocab_opts(p)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--size-mb", type=float, help="train on a seeded subset of this many MB")
    p.add_argument("--restarts", type=int, default=1, help="random initialisations; lowest held-out loss wins")
    _train_opts(p, 5000, 1e-4, 250)

    p = sub.add_parser("finetune-pos", help="fine-tune the body for POS tagging, lexical layer frozen")
    _common(p)
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--lexical")
    p.add_argument("--body")
    p.add_argument("--seq-len", type=int)
    p.add_argument("--patience", type=int, default=3)
    _train_opts(p, 5000, 1e-5, 250)

    p = sub.add_parser("swap", help="assemble a model from a body and a lexical layer")
    _common(p)
    p.add_argument("--body")
    p.add_argument("--lexical")
    p.add_argument("--out", help="model checkpoint (default: <out-dir>/model.ckpt)")

    p = sub.add_parser("evaluate", help="word-level POS accuracy")
    _common(p)
    p.add_argument("--test")
    p.add_argument("--model", help="assembled model checkpoint")
    p.add_argument("--body", help="body checkpoint, or a directory of them")
    p.add_argument("--lexical", help="lexical checkpoint, or a directory of them")
    p.add_argument("--dev", help="target dev treebank for checkpoint-combination selection")
    p.add_argument("--cap", type=int, default=8)
    p.add_argument("--seq-len", type=int)

    p = sub.add_parser("ablate", help="lexical retraining on corpus subsets of several sizes")
    _common(p)
    p.add_argument("--corpus", help="target-language corpus")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--sizes", default="1,5,10,20,40,full")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--source-lang", default="source")
    p.add_argument("--target-lang", default="target")
    p.add_argument("--vocab-size", type=int, default=10000)
    p.add_argument("--min-freq", type=int, default=100)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--pos-seq-len", type=int)
    p.add_argument("--cap", type=int, default=8)
    p.add_argument("--restarts", type=int, default=1, help="random initialisations per lexical retraining")
    _train_opts(p, 5000, 1e-4, 250)

    p = sub.add_parser("langdist", help="LDND distance matrix, MDS and correlation")
    _common(p)
    p.add_argument("--wordlists", help="TSV: language, concept id, transcription")
    p.add_argument("--no-normalize", action="store_true", help="skip ASJP symbol normalisation")
    p.add_argument("--measure", choices=("ldnd", "ldn"), default="ldnd")
    p.add_argument("--accuracies", help="TSV: language, accuracy; correlated with distance to --reference")
    p.add_argument("--reference", help="language the accuracies were measured on")

    p = sub.add_parser("report", help="render result rows as tables")
    _common(p)
    p.add_argument("--results", help="comma-separated result TSV files")
    p.add_argument("--layout", choices=("table1", "table2", "appendix"), default="table1")

    p = sub.add_parser("synth", help="write a synthetic source/target dataset")
    _common(p)
    p.add_argument("--divergence", default="0.2,0.5,0.8", help="cipher rates of the target variants")
    p.add_argument("--order-scale", type=float, default=0.2, help="word-order shift per unit of divergence")
    p.add_argument("--scramble-scale", type=float, default=0.0, help="sentence scrambling per unit of divergence")
    p.add_argument("--size-mb", type=float, default=1.0)
    p.add_argument("--sentences", type=int, default=2400)

    return parser


# -- config handling --------------------------------------------------------------


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _apply_config(sub: argparse.ArgumentParser, command: str, path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for section in ("common", command):
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            dest = key.replace("-", "_")
            if dest not in actions:
                if section == "common":
                    continue
                raise ConfigError(f"{path}: unknown setting {key!r} in [{section}]")
            action = actions[dest]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    value = cp.getboolean(section, key)
                else:
                    value = action.type(raw) if action.type else raw
            except ValueError:
                raise ConfigError(f"{path}: bad value {raw!r} for {key!r}") from None
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{path}: {key} must be one of {sorted(action.choices)}")
            defaults[dest] = value
    sub.set_defaults(**defaults)
    return cp


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(ENV_OUTPUT_DIR) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _check_paths(args) -> None:
    for name in REQUIRED[args.command]:
        if getattr(args, name, None) in (None, ""):
            raise ConfigError(f"missing required setting --{name.replace('_', '-')}")
    for name in ("corpus", "body", "lexical", "train", "dev", "test", "model", "wordlists", "vocab",
                 "accuracies"):
        value = getattr(args, name, None)
        if value and not Path(value).exists():
            raise ConfigError(f"--{name}: {value} does not exist")
    for name in ("results",):
        for part in (getattr(args, name, None) or "").split(","):
            if part and not Path(part).exists():
                raise ConfigError(f"--{name}: {part} does not exist")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_provenance(args, out: Path, argv: list[str]) -> None:
    settings = {k: v for k, v in sorted(vars(args).items()) if k not in ("command",)}
    cp = configparser.ConfigParser(interpolation=None)
    cp[args.command] = {k: "" if v is None else str(v) for k, v in settings.items()}
    with open(out / f"{args.command}.config.ini", "w", encoding="utf-8") as fh:
        cp.write(fh)
    inputs = {}
    for name in ("corpus", "body", "lexical", "train", "dev", "test", "model", "wordlists", "vocab"):
        value = getattr(args, name, None)
        if value and Path(value).is_file():
            inputs[value] = _sha256(Path(value))
    record = {
        "command": args.command,
        "argv": argv,
        "settings": {k: v for k, v in settings.items()},
        "inputs": inputs,
        "lexswap": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / f"{args.command}.provenance.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                                        encoding="utf-8")


# -- helpers -------------------------------------------------------------------


def _train_cfg(args, **extra):
    from lexswap.training import TrainConfig

    return TrainConfig(lr0=args.lr, total_steps=args.steps, batch_size=args.batch_size,
                       eval_every=args.eval_every, seed=args.seed, **extra)


def _get_vocab(args, texts: list[str]) -> Vocabulary:
    if args.vocab:
        return Vocabulary.load(args.vocab)
    return train_wordpiece(texts, args.vocab_size, args.min_freq)


def _ckpt_files(path: str, prefix: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob(f"{prefix}_step*.ckpt"))
        if not files:
            raise ConfigError(f"{path}: no {prefix}_step*.ckpt files")
        return files
    return [p]


def _load_lexical_ckpts(path: str):
    from lexswap.training import LexicalCheckpoint

    out = []
    for f in _ckpt_files(path, "lexical"):
        prov = read_header(f)["provenance"]
        out.append(LexicalCheckpoint(int(prov.get("step", 0)), load_checkpoint(f, "lexical"),
                                     float(prov.get("heldout_loss", "nan"))))
    return out


def _load_body_ckpts(path: str):
    from lexswap.training import BodyCheckpoint

    out = []
    for f in _ckpt_files(path, "body"):
        prov = read_header(f)["provenance"]
        out.append(BodyCheckpoint(int(prov.get("step", 0)), load_checkpoint(f, "body"),
                                  float(prov.get("dev_loss", "nan"))))
    return out


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)] + ["\t".join(str(c) for c in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- subcommands -------------------------------------------------------------------


def cmd_train_vocab(args, out: Path) -> None:
    texts = [d.text for d in read_corpus(args.corpus)]
    vocab = train_wordpiece(texts, args.size, args.min_freq)
    target = Path(args.out) if args.out else out / "vocab.txt"
    vocab.save(target)
    print(f"{len(vocab)} tokens -> {target}")


def cmd_pretrain_source(args, out: Path) -> None:
    from lexswap.pipeline import heldout_split
    from lexswap.training import pretrain_mlm, write_metrics

    texts = [d.text for d in read_corpus(args.corpus)]
    vocab = _get_vocab(args, texts)
    overrides = {"vocab_size": len(vocab)}
    if args.seq_len:
        overrides.update(seq_len=args.seq_len, max_positions=max(args.seq_len, PRESETS[args.preset].max_positions))
    cfg = preset(args.preset, **overrides)
    seqs, held = heldout_split(build_mlm_sequences(texts, vocab, cfg.seq_len), 0.02, args.seed)
    body = TransformerBody.init(cfg, seed=args.seed)
    lexical = LexicalLayer.init(vocab, cfg.hidden, seed=args.seed + 1, std=cfg.init_std)
    run = pretrain_mlm(swap_lexical(body, lexical), seqs, _train_cfg(args), "all", held)
    vocab.save(out / "vocab.txt")
    save_checkpoint(body, out / "body.ckpt", {"command": "pretrain-source", "steps": args.steps})
    save_checkpoint(lexical, out / "lexical.ckpt", {"command": "pretrain-source", "steps": args.steps})
    write_metrics(run.metrics, out / "metrics.tsv")
    print(f"pretrained {args.preset} body and lexical layer -> {out}")


def cmd_pretrain_lexical(args, out: Path) -> None:
    from lexswap.pipeline import heldout_split, retrain_with_restarts
    from lexswap.training import write_metrics

    body = load_checkpoint(args.body, "body")
    docs = read_corpus(args.corpus)
    if args.size_mb:
        subset = sample_subset(docs, args.size_mb, args.seed, str(args.corpus))
        docs = subset.documents
        (out / "subset.manifest").write_text(subset.manifest(), encoding="utf-8")
    texts = [d.text for d in docs]
    vocab = _get_vocab(args, texts)
    seq_len = args.seq_len or body.config.seq_len
    seqs, held = heldout_split(build_mlm_sequences(texts, vocab, seq_len), 0.02, args.seed)
    if args.restarts < 1:
        raise ConfigError("--restarts must be >= 1")
    run = retrain_with_restarts(body, vocab, seqs, held, _train_cfg(args), args.seed, args.restarts)
    lexical = run.model.lexical
    vocab.save(out / "vocab.txt")
    for ck in run.checkpoints:
        save_checkpoint(ck.lexical, out / f"lexical_step{ck.step:06d}.ckpt",
                        {"step": ck.step, "heldout_loss": ck.heldout_loss})
    save_checkpoint(lexical, out / "lexical.ckpt", {"step": args.steps})
    write_metrics(run.metrics, out / "metrics.tsv")
    print(f"{len(run.checkpoints)} lexical checkpoints -> {out}")


def cmd_finetune_pos(args, out: Path) -> None:
    from lexswap.training import finetune_pos, write_metrics

    lexical = load_checkpoint(args.lexical, "lexical")
    body = load_checkpoint(args.body, "body")
    train = parse_conllu(args.train)
    dev = parse_conllu(args.dev)
    run = finetune_pos(lexical, body, train, dev, _train_cfg(args, patience=args.patience), args.seq_len)
    for ck in run.checkpoints:
        save_checkpoint(ck.body, out / f"body_step{ck.step:06d}.ckpt", {"step": ck.step, "dev_loss": ck.dev_loss})
    best = run.best
    save_checkpoint(best.body, out / "body.ckpt", {"step": best.step, "dev_loss": best.dev_loss})
    write_metrics(run.metrics, out / "metrics.tsv")
    print(f"best body at step {best.step} (dev loss {best.dev_loss:.4f}) -> {out / 'body.ckpt'}")


def cmd_swap(args, out: Path) -> None:
    model = swap_lexical(load_checkpoint(args.body, "body"), load_checkpoint(args.lexical, "lexical"))
    target = Path(args.out) if args.out else out / "model.ckpt"
    save_checkpoint(model, target, {"body": str(args.body), "lexical": str(args.lexical)})
    print(f"model -> {target}")


def cmd_evaluate(args, out: Path) -> None:
    from lexswap.evaluate import pos_accuracy
    from lexswap.training import select_checkpoint_combo

    test = parse_conllu(args.test)
    rows = []
    if args.model:
        model = load_checkpoint(args.model, "model")
        rows.append(["model", "", "", f"{pos_accuracy(model, test, args.seq_len):.6f}"])
    else:
        if not (args.body and args.lexical):
            raise ConfigError("evaluate needs --model, or both --body and --lexical")
        lex = _load_lexical_ckpts(args.lexical)
        bod = _load_body_ckpts(args.body)
        if len(lex) == 1 and len(bod) == 1:
            model = swap_lexical(bod[0].body, lex[0].lexical)
            lstep, bstep = lex[0].step, bod[0].step
        else:
            if not args.dev:
                raise ConfigError("checkpoint directories need --dev for combination selection")
            combo = select_checkpoint_combo(lex, bod, parse_conllu(args.dev), cap=args.cap, seq_len=args.seq_len)
            _write_tsv(out / "combo_grid.tsv", ["lexical_step", "body_step", "dev_accuracy"],
                       [[l_, b_, f"{a:.6f}"] for (l_, b_), a in sorted(combo.grid.items())])
            model = swap_lexical(combo.body.body, combo.lexical.lexical)
            lstep, bstep = combo.lexical.step, combo.body.step
        rows.append(["combo", lstep, bstep, f"{pos_accuracy(model, test, args.seq_len):.6f}"])
    _write_tsv(out / "accuracy.tsv", ["source", "lexical_step", "body_step", "accuracy"], rows)
    print(f"accuracy {rows[0][-1]}")


def _ablation_models(cp: configparser.ConfigParser | None):
    from lexswap.pipeline import SourceBundle

    models = {}
    sections = [s for s in cp.sections() if s.startswith("model:")] if cp else []
    if not sections:
        raise ConfigError("ablate needs at least one [model:NAME] config section")
    for section in sections:
        name = section.split(":", 1)[1].strip()
        if "pretrained_body" not in cp[section]:
            raise ConfigError(f"[{section}] needs pretrained_body")
        body_path = cp[section]["pretrained_body"]
        if not Path(body_path).exists():
            raise ConfigError(f"[{section}] pretrained_body {body_path} does not exist")
        pretrained = load_checkpoint(body_path, "body")
        bundles = {}
        for key, value in cp[section].items():
            if not key.startswith("treebank."):
                continue
            if not Path(value).is_dir():
                raise ConfigError(f"[{section}] {key}: {value} is not a directory")
            ckpts = _load_body_ckpts(value)
            bundles[key.split(".", 1)[1]] = SourceBundle(None, pretrained, ckpts, ckpts[-1].body)
        if not bundles:
            raise ConfigError(f"[{section}] needs at least one treebank.NAME = checkpoint directory")
        models[name] = bundles
    return models


def cmd_ablate(args, out: Path, cp=None) -> None:
    from lexswap.ablation import AblationSetup, parse_sizes, run_ablation
    from lexswap.pipeline import VocabConfig
    from lexswap.report import ablation_svg, build_table, write_results

    try:
        sizes = parse_sizes(args.sizes)
    except ValueError as exc:
        raise ConfigError(f"--sizes: {exc}") from None
    if args.restarts < 1:
        raise ConfigError("--restarts must be >= 1")
    setup = AblationSetup(
        source_lang=args.source_lang,
        target_lang=args.target_lang,
        corpus=read_corpus(args.corpus),
        target_dev=parse_conllu(args.dev),
        target_test=parse_conllu(args.test),
        models=_ablation_models(cp),
        vocab_cfg=VocabConfig(args.vocab_size, args.min_freq),
        retrain_cfg=_train_cfg(args),
        pos_seq_len=args.pos_seq_len,
        mlm_seq_len=args.seq_len,
        cap=args.cap,
        seed=args.seed,
        restarts=args.restarts,
    )
    rows = run_ablation(setup, sizes, jobs=args.jobs)
    write_results(rows, out / "ablation.tsv")
    table = build_table(rows, "table2")
    (out / "table2.tsv").write_text(table.to_tsv(), encoding="utf-8")
    (out / "table2.md").write_text(table.to_markdown(), encoding="utf-8")
    (out / "ablation.svg").write_text(ablation_svg(table), encoding="utf-8")
    print(table.to_markdown(), end="")


def cmd_langdist(args, out: Path) -> None:
    from lexswap import langdist
    from lexswap.report import scatter_svg

    lists = list(langdist.read_wordlists(args.wordlists, normalize=not args.no_normalize).values())
    if len(lists) < 2:
        raise ConfigError("need word lists for at least two languages")
    measure = langdist.ldnd if args.measure == "ldnd" else langdist.ldn
    dm = langdist.distance_matrix(lists, measure)
    (out / f"{args.measure}.tsv").write_text(dm.to_tsv(), encoding="utf-8")
    dims = min(2, len(lists) - 1)
    coords = langdist.classical_mds(dm, dims)
    _write_tsv(out / "mds.tsv", ["language"] + [f"dim{k + 1}" for k in range(dims)],
               [[name] + [f"{c:.6f}" for c in row] for name, row in zip(dm.languages, coords)])
    (out / "mds.svg").write_text(scatter_svg(coords, dm.languages, title=f"MDS of {args.measure.upper()}"),
                                 encoding="utf-8")
    if args.accuracies:
        if not args.reference:
            raise ConfigError("--accuracies needs --reference")
        if args.reference not in dm.languages:
            raise ConfigError(f"reference language {args.reference!r} has no word list")
        acc = {}
        for line in Path(args.accuracies).read_text(encoding="utf-8").splitlines():
            parts = line.split("\t")
            if len(parts) == 2 and parts[0] in dm.languages:
                acc[parts[0]] = float(parts[1])
        names = sorted(acc)
        dist = [dm[args.reference, n] for n in names]
        r, p = langdist.pearson_r(dist, [acc[n] for n in names])
        _write_tsv(out / "correlation.tsv", ["reference", "n", "r", "p"],
                   [[args.reference, len(names), f"{r:.6f}", f"{p:.6g}"]])
        print(f"r = {r:.4f}, p = {p:.4g} over {len(names)} languages")
    print(dm.to_tsv(), end="")


def cmd_report(args, out: Path) -> None:
    from lexswap.report import ablation_svg, build_table, read_results

    rows = [r for part in args.results.split(",") if part for r in read_results(part)]
    table = build_table(rows, args.layout)
    (out / f"{args.layout}.tsv").write_text(table.to_tsv(), encoding="utf-8")
    (out / f"{args.layout}.md").write_text(table.to_markdown(), encoding="utf-8")
    if args.layout == "table2":
        (out / "ablation.svg").write_text(ablation_svg(table), encoding="utf-8")
    print(table.to_markdown(), end="")


def cmd_synth(args, out: Path) -> None:
    from lexswap import synthetic as syn
    from lexswap.data import split_dev_test
    from lexswap.langdist import write_wordlists

    try:
        rates = [float(x) for x in args.divergence.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--divergence: cannot parse {args.divergence!r}") from None
    src = syn.make_language("src", seed=args.seed)
    langs = [src] + [syn.derive(src, f"tgt{i}", r, seed=args.seed + 100 + i,
                                   order_scale=args.order_scale, scramble_scale=args.scramble_scale) for i, r in enumerate(rates)]
    size = int(args.size_mb * 1e6)
    for k, lang in enumerate(langs):
        d = out / lang.name
        d.mkdir(exist_ok=True)
        docs = syn.generate_corpus(lang, size, seed=args.seed + 10 * k + 1)
        (d / "corpus.txt").write_text("\n\n".join(doc.text for doc in docs) + "\n", encoding="utf-8")
        tb = syn.generate_treebank(lang, args.sentences, seed=args.seed + 10 * k + 2)
        if lang is src:
            n_dev = len(tb) // 6
            parts = {"train": tb[n_dev:], "dev": tb[:n_dev]}
        else:
            dev, test = split_dev_test(tb[: len(tb) // 3], 0.25, args.seed)
            parts = {"dev": dev, "test": test}
        for split, sents in parts.items():
            (d / f"{split}.conllu").write_text(write_conllu(sents), encoding="utf-8")
    (out / "wordlists.tsv").write_text(write_wordlists([syn.word_list(lang) for lang in langs]), encoding="utf-8")
    print(f"{len(langs)} synthetic languages -> {out}")


COMMANDS = {
    "train-vocab": cmd_train_vocab,
    "pretrain-source": cmd_pretrain_source,
    "pretrain-lexical": cmd_pretrain_lexical,
    "finetune-pos": cmd_finetune_pos,
    "swap": cmd_swap,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "langdist": cmd_langdist,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(asctime)s %(name)s %(message)s")
    cp = None
    try:
        if args.config:
            sub = _subparser(parser, args.command)
            cp = _apply_config(sub, args.command, args.config)
            args = parser.parse_args(argv)
        _check_paths(args)
        out = _out_dir(args)
        if args.command == "ablate":
            cmd_ablate(args, out, cp)
        else:
            COMMANDS[args.command](args, out)
        _write_provenance(args, out, argv)
    except ConfigError as exc:
        print(f"lexswap {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"lexswap {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
