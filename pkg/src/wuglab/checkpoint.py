"""Model checkpoints: plain-text header plus little-endian float32 payload.

The header lists format version, hyperparameters, master seed, epochs
completed, the vocabulary, and one line per parameter tensor with name,
shape, byte offset, and byte count.  Offsets must partition the payload
exactly; a CRC-32 of the payload catches corruption.  Writes go to a
temp file and are renamed into place.
"""

from __future__ import annotations

import os
import tempfile
import zlib
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import HyperParams, Model
from .vocab import Vocabulary

FORMAT_NAME = "wug-checkpoint"
FORMAT_VERSION = 1
_SEPARATOR = b"---\n"

_HP_FIELDS = [f.name for f in fields(HyperParams)]


def save_checkpoint(model: Model, path) -> None:
    path = Path(path)
    names = list(model.params)
    payload = bytearray()
    param_lines = []
    for name in names:
        arr = model.params[name].data.astype("<f4")
        raw = arr.tobytes()
        shape = ",".join(str(n) for n in arr.shape)
        param_lines.append(f"param: {name} {shape} {len(payload)} {len(raw)}")
        payload.extend(raw)
    hp = model.hp
    hp_line = " ".join(f"{k}={getattr(hp, k)}" for k in _HP_FIELDS)
    header = [
        f"format: {FORMAT_NAME} v{FORMAT_VERSION}",
        f"hyperparams: {hp_line}",
        f"master_seed: {model.seed}",
        f"epochs_completed: {model.epochs_completed}",
        "vocab: " + " ".join(model.vocab.phonemes),
        *param_lines,
        f"payload_bytes: {len(payload)}",
        f"crc32: {zlib.crc32(bytes(payload))}",
    ]
    blob = ("\n".join(header) + "\n").encode("utf-8") + _SEPARATOR + payload
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_header(text: str, path) -> dict:
    meta: dict = {"params": []}
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            key, value = line.split(": ", 1)
        except ValueError:
            raise CheckpointError(f"bad header line in {path}: {line!r}")
        if key == "param":
            name, shape, offset, nbytes = value.rsplit(" ", 3)
            meta["params"].append(
                (name, tuple(int(n) for n in shape.split(",")),
                 int(offset), int(nbytes)))
        else:
            meta[key] = value
    return meta


def load_checkpoint(path) -> Model:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    cut = blob.find(_SEPARATOR)
    if cut < 0:
        raise CheckpointError(f"{path}: missing header separator")
    meta = _parse_header(blob[:cut].decode("utf-8"), path)
    payload = blob[cut + len(_SEPARATOR):]

    fmt = meta.get("format", "<absent>")
    expected = f"{FORMAT_NAME} v{FORMAT_VERSION}"
    if fmt != expected:
        raise CheckpointError(
            f"{path}: format {fmt!r} not supported, this build reads"
            f" {expected!r}")
    declared = int(meta["payload_bytes"])
    if len(payload) != declared:
        raise CheckpointError(
            f"{path}: truncated payload ({len(payload)} of {declared} bytes)")
    if zlib.crc32(payload) != int(meta["crc32"]):
        raise CheckpointError(f"{path}: payload checksum failure")

    hp_kwargs = {}
    for pair in meta["hyperparams"].split(" "):
        k, v = pair.split("=", 1)
        field_type = HyperParams.__dataclass_fields__[k].type
        hp_kwargs[k] = float(v) if "float" in str(field_type) else int(v)
    hp = HyperParams(**hp_kwargs)
    vocab = Vocabulary(meta["vocab"].split(" "))

    model = Model(vocab, hp, seed=int(meta["master_seed"]))
    model.epochs_completed = int(meta["epochs_completed"])
    end = 0
    for name, shape, offset, nbytes in meta["params"]:
        if offset != end:
            raise CheckpointError(
                f"{path}: offsets do not partition the payload at {name!r}")
        end = offset + nbytes
        if name not in model.params:
            raise CheckpointError(f"{path}: unexpected parameter {name!r}")
        want = model.params[name].data.shape
        if tuple(shape) != want:
            raise CheckpointError(
                f"{path}: {name!r} has shape {shape}, expected {want}")
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4,
                            offset=offset)
        model.params[name].data = arr.reshape(shape).astype(np.float64)
    if end != declared:
        raise CheckpointError(f"{path}: payload has {declared - end}"
                              " unclaimed trailing bytes")
    missing = set(model.params) - {p[0] for p in meta["params"]}
    if missing:
        raise CheckpointError(f"{path}: parameters missing: {sorted(missing)}")
    return model
