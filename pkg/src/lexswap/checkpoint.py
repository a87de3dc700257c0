"""Binary checkpoints for lexical layers, bodies and assembled models.

Layout::

    b"LXSW" | uint32 format_version | uint64 header_len | header (UTF-8 JSON)
    | float32 little-endian tensor data, in the order listed in the header

The header records the kind ("lexical", "body" or "model"), the body config,
the vocabulary, free-form provenance and the name and shape of every tensor.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from lexswap.model import AssembledModel, LexicalLayer, ModelConfig, TransformerBody
from lexswap.numcore import ParamStore
from lexswap.tokenizer import Vocabulary

MAGIC = b"LXSW"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
_LE_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def _parts(obj):
    if isinstance(obj, AssembledModel):
        return "model", obj.lexical, obj.body
    if isinstance(obj, LexicalLayer):
        return "lexical", obj, None
    if isinstance(obj, TransformerBody):
        return "body", None, obj
    raise TypeError(f"cannot checkpoint a {type(obj).__name__}")


def save_checkpoint(obj, path, provenance: dict | None = None) -> None:
    """Write a lexical layer, a body or an assembled model to ``path``."""
    kind, lexical, body = _parts(obj)
    tensors = []
    header: dict = {"kind": kind, "provenance": provenance or {}}
    if body is not None:
        header["config"] = body.config.to_dict()
        tensors += list(body.store.items())
    if lexical is not None:
        header["vocab"] = lexical.vocab.tokens
        header["vocab_min_freq"] = lexical.vocab.min_freq
        header["vocab_target_size"] = lexical.vocab.target_size
        tensors = list(lexical.store.items()) + tensors
    header["tensors"] = [{"name": n, "shape": list(p.value.shape), "dtype": "float32"} for n, p in tensors]
    blob = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for _, p in tensors:
            fh.write(np.ascontiguousarray(p.value, dtype=_LE_F32).tobytes())
    os.replace(tmp, path)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        head = fh.read(_PREFIX.size)
        if len(head) < _PREFIX.size:
            raise CheckpointError(f"{path}: file too short to be a checkpoint")
        magic, version, hlen = _PREFIX.unpack(head)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version} (this build reads {FORMAT_VERSION})")
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    header["_data_offset"] = _PREFIX.size + hlen
    return header


def load_checkpoint(path, expect: str | None = None):
    """Read a checkpoint; ``expect`` ("lexical", "body", "model") enforces its kind.

    Nothing is returned unless the whole file validates.
    """
    header = read_header(path)
    kind = header.get("kind")
    if expect is not None and kind != expect:
        raise CheckpointError(f"{path}: contains a {kind} checkpoint, expected {expect}")
    specs = header["tensors"]
    sizes = [int(np.prod(s["shape"], dtype=np.int64)) for s in specs]
    need = header["_data_offset"] + 4 * sum(sizes)
    actual = os.path.getsize(path)
    if actual != need:
        raise CheckpointError(f"{path}: expected {need} bytes from header, file has {actual} (truncated or padded)")
    with open(path, "rb") as fh:
        fh.seek(header["_data_offset"])
        data = fh.read()
    arrays = {}
    offset = 0
    for entry, size in zip(specs, sizes):
        arr = np.frombuffer(data, dtype=_LE_F32, count=size, offset=offset).astype(np.float32)
        arrays[entry["name"]] = arr.reshape(entry["shape"])
        offset += 4 * size

    lexical = body = None
    if kind in ("lexical", "model"):
        vocab = Vocabulary(header["vocab"], header.get("vocab_min_freq", 0), header.get("vocab_target_size", 0))
        store = ParamStore()
        for name in ("lexical.embedding", "lexical.output_bias"):
            if name not in arrays:
                raise CheckpointError(f"{path}: missing tensor {name}")
            store.add(name, arrays[name])
        try:
            lexical = LexicalLayer(vocab, store)
        except ValueError as exc:
            raise CheckpointError(f"{path}: {exc}") from None
    if kind in ("body", "model"):
        config = ModelConfig.from_dict(header["config"])
        store = ParamStore()
        for entry in specs:
            if entry["name"].startswith("body."):
                store.add(entry["name"], arrays[entry["name"]])
        try:
            body = TransformerBody(config, store)
        except ValueError as exc:
            raise CheckpointError(f"{path}: {exc}") from None
    if kind == "lexical":
        return lexical
    if kind == "body":
        return body
    if kind == "model":
        if lexical.hidden != body.hidden:
            raise CheckpointError(f"{path}: lexical hidden {lexical.hidden} != body hidden {body.hidden}")
        return AssembledModel(lexical, body)
    raise CheckpointError(f"{path}: unknown checkpoint kind {kind!r}")
