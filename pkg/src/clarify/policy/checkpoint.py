"""Versioned checkpoint container for trained recommenders.

JSON document holding the architecture config, vocabulary maps, and every
parameter block as base64-encoded little-endian float32.  Serialization is
canonical (sorted keys), so identical models produce identical files, and a
load/save cycle is byte-exact.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .baselines import BaselineModel
from .model import ClassifierModel, ModelConfig, PolicyModel

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode_params(params: dict[str, np.ndarray]) -> dict:
    out = {}
    for name, arr in params.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        out[name] = {
            "shape": list(arr.shape),
            "data": base64.b64encode(data.tobytes()).decode("ascii"),
        }
    return out


def _decode_params(blob: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, rec in blob.items():
        raw = base64.b64decode(rec["data"])
        arr = np.frombuffer(raw, dtype="<f4").reshape(rec["shape"])
        out[name] = arr.astype(np.float64)
    return out


def save_checkpoint(obj: PolicyModel | ClassifierModel | BaselineModel, path) -> None:
    if isinstance(obj, BaselineModel):
        doc = {"kind": "baseline", "variant": obj.variant, "support_threshold": obj.support_threshold}
        inner = obj.model
    else:
        doc = {"kind": obj.kind}
        inner = obj
    doc.update(
        format_version=FORMAT_VERSION,
        arch=inner.arch(),
        token_vocab=inner.token_vocab,
        inventory_hash=inner.inventory_hash,
        seed=inner.cfg.seed,
        inner_kind=inner.kind,
        output_size=inner.n_labels if inner.kind == "policy" else inner.n_out,
        params=_encode_params(inner.params),
    )
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8")


def _build_inner(doc: dict) -> PolicyModel | ClassifierModel:
    cfg = ModelConfig(**doc["arch"])
    vocab = doc["token_vocab"]
    if doc["inner_kind"] == "policy":
        inner = PolicyModel(cfg, vocab, doc["output_size"], doc["inventory_hash"])
    else:
        inner = ClassifierModel(cfg, vocab, doc["output_size"], doc["inventory_hash"])
    params = _decode_params(doc["params"])
    if set(params) != set(inner.params):
        raise CheckpointError(
            f"parameter blocks {sorted(params)} do not match architecture {sorted(inner.params)}"
        )
    for name, arr in params.items():
        if arr.shape != inner.params[name].shape:
            raise CheckpointError(f"block {name}: shape {arr.shape} != {inner.params[name].shape}")
        inner.params[name] = arr
    return inner


def load_checkpoint(path) -> PolicyModel | ClassifierModel | BaselineModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a checkpoint file: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    inner = _build_inner(doc)
    if doc["kind"] == "baseline":
        return BaselineModel(doc["variant"], inner, support_threshold=doc.get("support_threshold", 0.0))
    return inner
