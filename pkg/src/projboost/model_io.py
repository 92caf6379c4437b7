"""Versioned model serialization.

Models are written as canonical JSON: fixed key order, two-space indent,
repr-exact floats, LF line endings.  Serializing the same model twice
yields byte-identical files, which the determinism contract relies on.
Infinite stump thresholds round-trip through the JSON extension literals
(Infinity/-Infinity) that the stdlib json module emits and accepts.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DataError
from .proj_boost import ProjModel
from .rank_boost import RankModel
from .weak import LinearStump, Stump

MODEL_FORMAT = "projboost-model"
MODEL_VERSION = "1.0"


def canonical_json(obj) -> str:
    """Stable rendering used for model files and machine-readable reports."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def stump_record(stump) -> dict:
    if isinstance(stump, LinearStump):
        return {
            "kind": "linear_stump",
            "dims": [int(j) for j in stump.dims],
            "direction": [float(c) for c in stump.direction],
            "threshold": float(stump.threshold),
            "polarity": int(stump.polarity),
        }
    if isinstance(stump, Stump):
        return {
            "kind": "stump",
            "dim": int(stump.dim),
            "threshold": float(stump.threshold),
            "polarity": int(stump.polarity),
        }
    raise DataError(f"unknown weak-learner type {type(stump).__name__}")


def record_stump(rec: dict):
    kind = rec.get("kind")
    if kind == "stump":
        return Stump(int(rec["dim"]), float(rec["threshold"]), int(rec["polarity"]))
    if kind == "linear_stump":
        return LinearStump(
            tuple(int(j) for j in rec["dims"]),
            tuple(float(c) for c in rec["direction"]),
            float(rec["threshold"]),
            int(rec["polarity"]),
        )
    raise DataError(f"unknown weak-learner record kind {kind!r}")


def model_record(model) -> dict:
    record = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
    }
    if isinstance(model, RankModel):
        record["variant"] = "rank"
    elif isinstance(model, ProjModel):
        record["variant"] = "proj"
    else:
        raise DataError(f"cannot serialize {type(model).__name__}")
    record["bank"] = dict(model.bank_descriptor)
    record["k"] = int(model.k)
    record["d"] = int(model.d)
    record["n"] = int(model.n)
    record["label_map"] = [int(c) for c in model.label_map]
    if isinstance(model, RankModel):
        record["mode"] = model.mode
    else:
        record["T"] = int(model.T)
    record["stumps"] = [stump_record(s) for s in model.stumps]
    record["w"] = [float(x) for x in model.w]
    return record


def save_model(model, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(canonical_json(model_record(model)))


def _check_header(record: dict) -> None:
    if record.get("format") != MODEL_FORMAT:
        raise DataError(f"not a {MODEL_FORMAT} file")
    version = str(record.get("version", ""))
    try:
        major = int(version.split(".")[0])
    except (ValueError, IndexError):
        raise DataError(f"malformed model version {version!r}") from None
    if major > int(MODEL_VERSION.split(".")[0]):
        raise DataError(
            f"model version {version} is newer than supported {MODEL_VERSION}"
        )


def load_model(path):
    try:
        with open(path) as fh:
            record = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(record, dict):
        raise DataError("model file must hold a JSON object")
    _check_header(record)
    try:
        variant = record["variant"]
        stumps = [record_stump(r) for r in record["stumps"]]
        w = np.asarray([float(x) for x in record["w"]], dtype=np.float64)
        common = {
            "bank_descriptor": dict(record["bank"]),
            "stumps": stumps,
            "w": w,
            "k": int(record["k"]),
            "d": int(record["d"]),
            "n": int(record["n"]),
            "label_map": tuple(int(c) for c in record["label_map"]),
        }
        if variant == "rank":
            return RankModel(mode=str(record["mode"]), **common)
        if variant == "proj":
            return ProjModel(T=int(record["T"]), **common)
    except KeyError as exc:
        raise DataError(f"model file is missing field {exc}") from None
    raise DataError(f"unknown model variant {variant!r}")
