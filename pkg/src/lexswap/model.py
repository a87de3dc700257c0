"""BERT-style tagger split into a swappable lexical layer and a transformer body.

The lexical layer is the token-embedding matrix plus the MLM output bias. The
MLM output projection is the transpose of that same matrix, so there is only
one copy of it. Everything else (position embeddings, embedding layernorm,
encoder layers, MLM transform, POS head) belongs to the body.

Forward and backward passes are written out by hand on float32 numpy arrays.
Gradients are only materialised for trainable entries, which keeps
lexical-only retraining cheap.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from lexswap.numcore import DTYPE, IGNORE_LABEL, Param, ParamStore, cross_entropy_with_grad
from lexswap.tokenizer import PAD_ID, Vocabulary

_GELU_C = math.sqrt(2.0 / math.pi)
_MASK_BIAS = -1e9


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ffn: int = 256
    vocab_size: int = 2000
    max_positions: int = 128
    n_tags: int = 16
    seq_len: int = 128
    ln_eps: float = 1e-5
    init_std: float = 0.02

    def __post_init__(self):
        if self.hidden % self.heads:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.seq_len > self.max_positions:
            raise ValueError("seq_len exceeds max_positions")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


PRESETS = {
    "bert-base": ModelConfig(layers=12, hidden=768, heads=12, ffn=3072, vocab_size=30000, max_positions=512),
    "mbert-base": ModelConfig(layers=12, hidden=768, heads=12, ffn=3072, vocab_size=120000, max_positions=512),
    "toy": ModelConfig(layers=2, hidden=64, heads=4, ffn=256, vocab_size=2000, max_positions=128),
}


def preset(name: str, **overrides) -> ModelConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


def body_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Names and shapes of every body tensor, in storage order."""
    h, f = config.hidden, config.ffn
    shapes = [
        ("body.position_embeddings", (config.max_positions, h)),
        ("body.embedding_ln.gain", (h,)),
        ("body.embedding_ln.bias", (h,)),
    ]
    for i in range(config.layers):
        p = f"body.layer{i}"
        for part in ("query", "key", "value", "output"):
            shapes += [(f"{p}.attn.{part}.weight", (h, h)), (f"{p}.attn.{part}.bias", (h,))]
        shapes += [
            (f"{p}.attn_ln.gain", (h,)),
            (f"{p}.attn_ln.bias", (h,)),
            (f"{p}.ffn.in.weight", (h, f)),
            (f"{p}.ffn.in.bias", (f,)),
            (f"{p}.ffn.out.weight", (f, h)),
            (f"{p}.ffn.out.bias", (h,)),
            (f"{p}.ffn_ln.gain", (h,)),
            (f"{p}.ffn_ln.bias", (h,)),
        ]
    shapes += [
        ("body.mlm.dense.weight", (h, h)),
        ("body.mlm.dense.bias", (h,)),
        ("body.mlm.ln.gain", (h,)),
        ("body.mlm.ln.bias", (h,)),
        ("body.pos_head.weight", (h, config.n_tags)),
        ("body.pos_head.bias", (config.n_tags,)),
    ]
    return shapes


def count_parameters(config: ModelConfig) -> tuple[int, int]:
    """Closed-form ``(total, lexical)`` parameter counts for a config."""
    v, h, f, t = config.vocab_size, config.hidden, config.ffn, config.n_tags
    lexical = v * h + v
    per_layer = 4 * (h * h + h) + 2 * h + (h * f + f) + (f * h + h) + 2 * h
    body = config.max_positions * h + 2 * h + config.layers * per_layer + (h * h + h + 2 * h) + (h * t + t)
    return lexical + body, lexical


class LexicalLayer:
    """Token embeddings and MLM output bias tied to one vocabulary."""

    def __init__(self, vocab: Vocabulary, store: ParamStore):
        emb = store["lexical.embedding"].value
        if emb.shape[0] != len(vocab):
            raise ValueError(f"embedding has {emb.shape[0]} rows but vocabulary has {len(vocab)} tokens")
        self.vocab = vocab
        self.store = store

    @classmethod
    def init(cls, vocab: Vocabulary, hidden: int, seed: int = 0, std: float = 0.02) -> "LexicalLayer":
        rng = np.random.default_rng(seed)
        store = ParamStore()
        store.add("lexical.embedding", rng.normal(0.0, std, (len(vocab), hidden)))
        store.add("lexical.output_bias", np.zeros(len(vocab)))
        return cls(vocab, store)

    @property
    def embedding(self) -> Param:
        return self.store["lexical.embedding"]

    @property
    def output_bias(self) -> Param:
        return self.store["lexical.output_bias"]

    @property
    def hidden(self) -> int:
        return self.embedding.value.shape[1]

    def copy(self) -> "LexicalLayer":
        return LexicalLayer(self.vocab, self.store.copy())


class TransformerBody:
    """All non-lexical parameters."""

    def __init__(self, config: ModelConfig, store: ParamStore):
        expected = body_shapes(config)
        names = store.names()
        if names != [n for n, _ in expected]:
            raise ValueError("body parameter names do not match the config")
        for name, shape in expected:
            if store[name].value.shape != shape:
                raise ValueError(f"{name}: shape {store[name].value.shape} != expected {shape}")
        self.config = config
        self.store = store

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "TransformerBody":
        rng = np.random.default_rng(seed)
        store = ParamStore()
        for name, shape in body_shapes(config):
            if name.endswith(".gain"):
                value = np.ones(shape)
            elif name.endswith(".bias"):
                value = np.zeros(shape)
            else:
                value = rng.normal(0.0, config.init_std, shape)
            store.add(name, value)
        return cls(config, store)

    @property
    def hidden(self) -> int:
        return self.config.hidden

    def copy(self) -> "TransformerBody":
        return TransformerBody(self.config, self.store.copy())


# -- layer primitives -------------------------------------------------------


def _layernorm(x, gain, bias, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def _layernorm_back(dy, cache):
    xhat, inv, gain = cache
    red = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=red)
    dbias = dy.sum(axis=red)
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgain, dbias


def _gelu(x):
    u = _GELU_C * (x + 0.044715 * (x * x * x))
    th = np.tanh(u)
    return 0.5 * x * (1.0 + th), th


def _gelu_back(dy, x, th):
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du)


def _flat(x):
    return x.reshape(-1, x.shape[-1])


class AssembledModel:
    """A lexical layer and a body used together.

    ``store`` shares the underlying Param objects with both parts, so training
    through it updates the parts in place.
    """

    def __init__(self, lexical: LexicalLayer, body: TransformerBody):
        self.lexical = lexical
        self.body = body
        self.store = ParamStore()
        for src in (lexical.store, body.store):
            for name, p in src.items():
                self.store._entries[name] = p

    @property
    def vocab(self) -> Vocabulary:
        return self.lexical.vocab

    @property
    def config(self) -> ModelConfig:
        return replace(self.body.config, vocab_size=len(self.lexical.vocab))

    def _w(self, name):
        return self.store[name].value

    def _grad(self, name, g):
        p = self.store[name]
        if p.trainable:
            if p.grad is None:
                p.grad = np.zeros_like(p.value)
            p.grad += g

    def _wants(self, name) -> bool:
        return self.store[name].trainable

    # -- encoder ------------------------------------------------------------

    def _check_ids(self, ids) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids = ids[None, :]
        if ids.ndim != 2:
            raise ValueError(f"expected a [batch, seq] id array, got shape {ids.shape}")
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.vocab)):
            bad = int(ids.max() if ids.max() >= len(self.vocab) else ids.min())
            raise ValueError(f"token id {bad} out of range for vocabulary of {len(self.vocab)}")
        if ids.shape[1] > self.body.config.max_positions:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds max_positions {self.body.config.max_positions}")
        return ids.astype(np.int64)

    def encode(self, ids, cache: list | None = None) -> np.ndarray:
        """Final hidden states ``[B, T, H]``; fills ``cache`` for backprop if given."""
        cfg = self.body.config
        ids = self._check_ids(ids)
        b, t = ids.shape
        h, nh = cfg.hidden, cfg.heads
        dh = h // nh
        eps = cfg.ln_eps
        x = self._w("lexical.embedding")[ids] + self._w("body.position_embeddings")[:t]
        x, ln = _layernorm(x, self._w("body.embedding_ln.gain"), self._w("body.embedding_ln.bias"), eps)
        mask = np.where(ids == PAD_ID, np.float32(_MASK_BIAS), np.float32(0.0)).astype(DTYPE)[:, None, None, :]
        if cache is not None:
            cache.append(("embed", ids, ln, mask))
        scale = np.float32(1.0 / math.sqrt(dh))
        for i in range(cfg.layers):
            p = f"body.layer{i}"
            heads = []
            for part in ("query", "key", "value"):
                y = x @ self._w(f"{p}.attn.{part}.weight") + self._w(f"{p}.attn.{part}.bias")
                heads.append(y.reshape(b, t, nh, dh).transpose(0, 2, 1, 3))
            q, k, v = heads
            scores = (q @ k.transpose(0, 1, 3, 2)) * scale + mask
            scores -= scores.max(axis=-1, keepdims=True)
            attn = np.exp(scores)
            attn /= attn.sum(axis=-1, keepdims=True)
            ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(b, t, h)
            a = ctx @ self._w(f"{p}.attn.output.weight") + self._w(f"{p}.attn.output.bias")
            h1, ln1 = _layernorm(x + a, self._w(f"{p}.attn_ln.gain"), self._w(f"{p}.attn_ln.bias"), eps)
            pre = h1 @ self._w(f"{p}.ffn.in.weight") + self._w(f"{p}.ffn.in.bias")
            act, th = _gelu(pre)
            f = act @ self._w(f"{p}.ffn.out.weight") + self._w(f"{p}.ffn.out.bias")
            out, ln2 = _layernorm(h1 + f, self._w(f"{p}.ffn_ln.gain"), self._w(f"{p}.ffn_ln.bias"), eps)
            if cache is not None:
                cache.append(("layer", p, x, q, k, v, attn, ctx, ln1, h1, pre, act, th, ln2))
            x = out
        return x

    def encode_backward(self, dx: np.ndarray, cache: list) -> None:
        cfg = self.body.config
        h, nh = cfg.hidden, cfg.heads
        dh = h // nh
        scale = np.float32(1.0 / math.sqrt(dh))
        for entry in reversed(cache):
            if entry[0] == "layer":
                _, p, x_in, q, k, v, attn, ctx, ln1, h1, pre, act, th, ln2 = entry
                b, t, _ = x_in.shape
                dsum2, dg, db = _layernorm_back(dx, ln2)
                self._grad(f"{p}.ffn_ln.gain", dg)
                self._grad(f"{p}.ffn_ln.bias", db)
                df = dsum2
                if self._wants(f"{p}.ffn.out.weight"):
                    self._grad(f"{p}.ffn.out.weight", _flat(act).T @ _flat(df))
                self._grad(f"{p}.ffn.out.bias", _flat(df).sum(axis=0))
                dact = df @ self._w(f"{p}.ffn.out.weight").T
                dpre = _gelu_back(dact, pre, th)
                if self._wants(f"{p}.ffn.in.weight"):
                    self._grad(f"{p}.ffn.in.weight", _flat(h1).T @ _flat(dpre))
                self._grad(f"{p}.ffn.in.bias", _flat(dpre).sum(axis=0))
                dh1 = dsum2 + dpre @ self._w(f"{p}.ffn.in.weight").T
                dsum1, dg, db = _layernorm_back(dh1, ln1)
                self._grad(f"{p}.attn_ln.gain", dg)
                self._grad(f"{p}.attn_ln.bias", db)
                da = dsum1
                if self._wants(f"{p}.attn.output.weight"):
                    self._grad(f"{p}.attn.output.weight", _flat(ctx).T @ _flat(da))
                self._grad(f"{p}.attn.output.bias", _flat(da).sum(axis=0))
                dctx = (da @ self._w(f"{p}.attn.output.weight").T).reshape(b, t, nh, dh).transpose(0, 2, 1, 3)
                dattn = dctx @ v.transpose(0, 1, 3, 2)
                dv = attn.transpose(0, 1, 3, 2) @ dctx
                dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * scale
                dq = dscores @ k
                dk = dscores.transpose(0, 1, 3, 2) @ q
                dx = dsum1
                for part, d in (("query", dq), ("key", dk), ("value", dv)):
                    d = d.transpose(0, 2, 1, 3).reshape(b, t, h)
                    if self._wants(f"{p}.attn.{part}.weight"):
                        self._grad(f"{p}.attn.{part}.weight", _flat(x_in).T @ _flat(d))
                    self._grad(f"{p}.attn.{part}.bias", _flat(d).sum(axis=0))
                    dx = dx + d @ self._w(f"{p}.attn.{part}.weight").T
            else:
                _, ids, ln, _mask = entry
                demb, dg, db = _layernorm_back(dx, ln)
                self._grad("body.embedding_ln.gain", dg)
                self._grad("body.embedding_ln.bias", db)
                t = ids.shape[1]
                if self._wants("body.position_embeddings"):
                    dpos = np.zeros_like(self._w("body.position_embeddings"))
                    dpos[:t] = demb.sum(axis=0)
                    self._grad("body.position_embeddings", dpos)
                if self._wants("lexical.embedding"):
                    demb_full = np.zeros_like(self._w("lexical.embedding"))
                    np.add.at(demb_full, ids.reshape(-1), _flat(demb))
                    self._grad("lexical.embedding", demb_full)

    # -- heads --------------------------------------------------------------

    def _mlm_transform(self, hs):
        eps = self.body.config.ln_eps
        pre = hs @ self._w("body.mlm.dense.weight") + self._w("body.mlm.dense.bias")
        act, th = _gelu(pre)
        out, ln = _layernorm(act, self._w("body.mlm.ln.gain"), self._w("body.mlm.ln.bias"), eps)
        return out, (hs, pre, th, ln)

    def forward_mlm(self, ids) -> np.ndarray:
        hs = self.encode(ids)
        tr, _ = self._mlm_transform(hs)
        return tr @ self._w("lexical.embedding").T + self._w("lexical.output_bias")

    def forward_pos(self, ids) -> np.ndarray:
        hs = self.encode(ids)
        return hs @ self._w("body.pos_head.weight") + self._w("body.pos_head.bias")

    def mlm_loss(self, ids, labels, backward: bool = False) -> float:
        """Mean cross-entropy over positions whose label is not ignored.

        The output projection is only evaluated at labelled positions.
        """
        labels = np.asarray(labels).reshape(-1)
        cache: list | None = [] if backward else None
        hs = self.encode(ids, cache)
        b, t, h = hs.shape
        sel = np.nonzero(labels != IGNORE_LABEL)[0]
        if sel.size == 0:
            raise ValueError("every position is ignored; loss undefined")
        hsel = hs.reshape(-1, h)[sel]
        tr, tcache = self._mlm_transform(hsel)
        emb = self._w("lexical.embedding")
        logits = tr @ emb.T + self._w("lexical.output_bias")
        loss, dlogits = cross_entropy_with_grad(logits, labels[sel])
        if not backward:
            return loss
        self._grad("lexical.output_bias", dlogits.sum(axis=0))
        if self._wants("lexical.embedding"):
            self._grad("lexical.embedding", dlogits.T @ tr)
        dtr = dlogits @ emb
        hs_in, pre, th, ln = tcache
        dact, dg, db = _layernorm_back(dtr, ln)
        self._grad("body.mlm.ln.gain", dg)
        self._grad("body.mlm.ln.bias", db)
        dpre = _gelu_back(dact, pre, th)
        if self._wants("body.mlm.dense.weight"):
            self._grad("body.mlm.dense.weight", hs_in.T @ dpre)
        self._grad("body.mlm.dense.bias", dpre.sum(axis=0))
        dhsel = dpre @ self._w("body.mlm.dense.weight").T
        dhs = np.zeros((b * t, h), dtype=DTYPE)
        dhs[sel] = dhsel
        self.encode_backward(dhs.reshape(b, t, h), cache)
        return loss

    def pos_loss(self, ids, labels, backward: bool = False) -> float:
        labels = np.asarray(labels).reshape(-1)
        cache: list | None = [] if backward else None
        hs = self.encode(ids, cache)
        b, t, h = hs.shape
        logits = _flat(hs) @ self._w("body.pos_head.weight") + self._w("body.pos_head.bias")
        loss, dlogits = cross_entropy_with_grad(logits, labels)
        if not backward:
            return loss
        if self._wants("body.pos_head.weight"):
            self._grad("body.pos_head.weight", _flat(hs).T @ dlogits)
        self._grad("body.pos_head.bias", dlogits.sum(axis=0))
        dhs = (dlogits @ self._w("body.pos_head.weight").T).reshape(b, t, h)
        self.encode_backward(dhs, cache)
        return loss

    def predict_tags(self, ids) -> np.ndarray:
        return self.forward_pos(ids).argmax(axis=-1)


def swap_lexical(body: TransformerBody, lexical: LexicalLayer) -> AssembledModel:
    """Pair a body with a (possibly retrained) lexical layer."""
    if lexical.hidden != body.hidden:
        raise ValueError(f"hidden size mismatch: lexical layer has {lexical.hidden}, body has {body.hidden}")
    return AssembledModel(lexical, body)


def forward_mlm(lexical: LexicalLayer, body: TransformerBody, ids) -> np.ndarray:
    return swap_lexical(body, lexical).forward_mlm(ids)


def forward_pos(lexical: LexicalLayer, body: TransformerBody, ids) -> np.ndarray:
    return swap_lexical(body, lexical).forward_pos(ids)


SELECTORS = ("lexical-only", "body-only", "all")


def set_trainable(store: ParamStore, selector: str) -> ParamStore:
    """Make exactly one parameter group trainable: lexical, body, or both."""
    if selector not in SELECTORS:
        raise ValueError(f"selector must be one of {SELECTORS}, got {selector!r}")
    for name, p in store.items():
        lexical = name.startswith("lexical.")
        p.trainable = selector == "all" or (lexical == (selector == "lexical-only"))
    return store
