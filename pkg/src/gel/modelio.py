"""Serialization: a flat binary array container with a JSON header,
checkpoints built on it, training-history CSV, and config hashing.

Container layout (all integers little-endian):

* bytes 0-7: magic ``GELBIN01``;
* bytes 8-15: uint64 length H of the header;
* H bytes: canonical UTF-8 JSON ``{"arrays": [{"name", "shape"}...],
  "meta": {...}}`` (sorted keys, no whitespace);
* the arrays' float64 C-order payloads, concatenated in listed order.

The header is canonical JSON and the payload order is fixed, so saving
the same state twice produces byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from .errors import ContractError, ParseError
from .training import EpochRecord, ModelState

PathLike = Union[str, Path]

_MAGIC = b"GELBIN01"

_MOMENT_M = "adam.m."
_MOMENT_V = "adam.v."


def canonical_json(obj) -> str:
    """Deterministic JSON encoding: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: Mapping) -> str:
    """SHA-256 of the canonical JSON encoding of a config mapping."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def save_container(
    path: PathLike, arrays: Mapping[str, np.ndarray], meta: Mapping
) -> None:
    """Write named float64 arrays plus a metadata mapping."""
    entries = []
    payloads = []
    for name, value in arrays.items():
        arr = np.ascontiguousarray(value, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape)})
        payloads.append(arr.tobytes())
    header = canonical_json({"arrays": entries, "meta": dict(meta)}).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load_container(path: PathLike) -> tuple[dict[str, np.ndarray], dict]:
    """Read back a container written by :func:`save_container`."""
    blob = Path(path).read_bytes()
    if blob[:8] != _MAGIC:
        raise ParseError(f"{path}: not a model container (bad magic)")
    header_len = int.from_bytes(blob[8:16], "little")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ParseError(f"{path}: corrupt container header") from None
    arrays: dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = 8 * int(np.prod(shape)) if shape else 8
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ParseError(f"{path}: truncated payload for {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    return arrays, header["meta"]


def save_checkpoint(
    path: PathLike, state: ModelState, config: Optional[Mapping] = None
) -> None:
    """Weights, optimizer moments, model metadata and the config hash."""
    arrays: dict[str, np.ndarray] = {}
    for key, value in state.params.items():
        arrays[key] = value
    for key, value in state.opt_m.items():
        arrays[_MOMENT_M + key] = value
    for key, value in state.opt_v.items():
        arrays[_MOMENT_V + key] = value
    meta = {
        "kind": "checkpoint",
        "step_count": state.step_count,
        "model": state.meta,
        "config": dict(config) if config is not None else None,
        "config_hash": config_hash(config) if config is not None else None,
    }
    save_container(path, arrays, meta)


def load_checkpoint(path: PathLike) -> tuple[ModelState, dict]:
    """Rebuild the ModelState; also returns the stored metadata."""
    arrays, meta = load_container(path)
    if meta.get("kind") != "checkpoint":
        raise ParseError(f"{path}: container is not a checkpoint")
    params, opt_m, opt_v = {}, {}, {}
    for name, value in arrays.items():
        if name.startswith(_MOMENT_M):
            opt_m[name[len(_MOMENT_M) :]] = value
        elif name.startswith(_MOMENT_V):
            opt_v[name[len(_MOMENT_V) :]] = value
        else:
            params[name] = value
    if set(params) != set(opt_m) or set(params) != set(opt_v):
        raise ParseError(f"{path}: checkpoint arrays are inconsistent")
    state = ModelState(
        params=params,
        opt_m=opt_m,
        opt_v=opt_v,
        step_count=int(meta["step_count"]),
        meta=dict(meta["model"]),
    )
    return state, meta


HISTORY_COLUMNS = ("epoch", "total", "nll_f", "nll_t", "reg_f", "reg_t", "seconds")


def write_history_csv(path: PathLike, history) -> None:
    """Per-epoch loss decomposition and wall time."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for record in history:
            writer.writerow(
                [
                    record.epoch,
                    repr(record.total),
                    repr(record.nll_f),
                    repr(record.nll_t),
                    repr(record.reg_f),
                    repr(record.reg_t),
                    repr(record.seconds),
                ]
            )


def read_history_csv(path: PathLike) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HISTORY_COLUMNS:
            raise ParseError(f"{path}: unexpected history header {header}")
        records = []
        for row in reader:
            if len(row) != len(HISTORY_COLUMNS):
                raise ParseError(f"{path}: malformed history row {row}")
            records.append(
                EpochRecord(
                    epoch=int(row[0]),
                    total=float(row[1]),
                    nll_f=float(row[2]),
                    nll_t=float(row[3]),
                    reg_f=float(row[4]),
                    reg_t=float(row[5]),
                    seconds=float(row[6]),
                )
            )
    return records
