"""Binary model files and vocabulary sidecars.

Layout: 8-byte magic ``SKGE0001``, a little-endian uint32 header length, a
UTF-8 JSON header ``{algorithm, d, n, m, transe_norm, seed}``, then the entity
matrix and relation parameters as row-major little-endian float32.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .kg import Vocab
from .models import Algorithm, EmbeddingModel, ModelConfig

MAGIC = b"SKGE0001"
FLOAT = np.dtype("<f4")
ENTITY_SIDECAR = "entities.txt"
RELATION_SIDECAR = "relations.txt"


class ModelFormatError(ValueError):
    """Bad magic or malformed header."""


class ModelSizeError(ModelFormatError):
    """Payload length disagrees with the header."""


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_to_bytes(model: EmbeddingModel) -> bytes:
    cfg = model.config
    header = {
        "algorithm": cfg.algorithm.value,
        "d": cfg.dim,
        "n": model.n_entities,
        "m": model.n_relations,
        "transe_norm": cfg.transe_norm,
        "seed": cfg.seed,
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([
        MAGIC,
        struct.pack("<I", len(hb)),
        hb,
        np.ascontiguousarray(model.entity_vecs, dtype=FLOAT).tobytes(),
        np.ascontiguousarray(model.relation_params, dtype=FLOAT).tobytes(),
    ])


def model_from_bytes(data: bytes) -> EmbeddingModel:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise ModelSizeError("file truncated inside header length")
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + hlen:
        raise ModelSizeError("file truncated inside header")
    try:
        header = json.loads(data[off: off + hlen].decode("utf-8"))
        algo = Algorithm.parse(header["algorithm"])
        d, n, m = int(header["d"]), int(header["n"]), int(header["m"])
        cfg = ModelConfig(algo, d, header.get("transe_norm", "L2"), int(header.get("seed", 0)))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"unsupported header: {exc}") from None
    off += hlen
    rel_shape = (m, d, d) if algo is Algorithm.RESCAL else (m, d)
    n_ent, n_rel = n * d, int(np.prod(rel_shape))
    expected = off + (n_ent + n_rel) * FLOAT.itemsize
    if len(data) != expected:
        raise ModelSizeError(f"expected {expected} bytes from header, found {len(data)}")
    ent = np.frombuffer(data, dtype=FLOAT, count=n_ent, offset=off).reshape(n, d)
    rel = np.frombuffer(data, dtype=FLOAT, count=n_rel, offset=off + n_ent * FLOAT.itemsize).reshape(rel_shape)
    return EmbeddingModel(cfg, ent.astype(np.float64), rel.astype(np.float64))


def sidecar_paths(path) -> tuple[Path, Path]:
    parent = Path(path).parent
    return parent / ENTITY_SIDECAR, parent / RELATION_SIDECAR


def save_model(model: EmbeddingModel, path, sidecars: bool = True) -> None:
    path = Path(path)
    _atomic_write(path, model_to_bytes(model))
    if sidecars and model.entities is not None and model.relations is not None:
        ep, rp = sidecar_paths(path)
        _atomic_write(ep, "".join(lbl + "\n" for lbl in model.entities).encode("utf-8"))
        _atomic_write(rp, "".join(lbl + "\n" for lbl in model.relations).encode("utf-8"))


def _read_vocab(path: Path) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        return Vocab(line.rstrip("\n") for line in fh if line.rstrip("\n"))


def load_model(path, sidecars: bool = True) -> EmbeddingModel:
    with open(path, "rb") as fh:
        model = model_from_bytes(fh.read())
    if sidecars:
        ep, rp = sidecar_paths(path)
        if ep.exists() and rp.exists():
            ents, rels = _read_vocab(ep), _read_vocab(rp)
            if len(ents) != model.n_entities or len(rels) != model.n_relations:
                raise ModelSizeError("vocabulary sidecars do not match model dimensions")
            model.entities, model.relations = ents, rels
    return model
