"""Flat binary container for layer parameters, plus a JSON sidecar.

Layout (all integers little-endian):

    magic   b"HBNN1"
    u32     tensor count
    per tensor:
        u16     name length, then that many UTF-8 bytes
        u8      ndim
        u32[]   one extent per axis
        f64[]   row-major data, little-endian

The sidecar (same path + ".json") records the layer kind, model, curvature,
and dimensions needed to rebuild the parameter object, serialized with
sorted keys so identical configs produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import UsageError
from .layers import (
    BfcParams,
    BmlrParams,
    EuclideanMlrParams,
    LorentzFcParams,
    LorentzHyperplaneMlrParams,
    LorentzTangentFcParams,
    MobiusFcParams,
    PoincareFcParams,
    PoincareHyperplaneMlrParams,
    PoincareReparamMlrParams,
    PseudoBusemannMlrParams,
)

MAGIC = b"HBNN1"


def _meta_of(params) -> dict:
    meta = {
        "kind": params.kind,
        "model": params.model,
        "k": params.k,
        "n": params.n,
    }
    if hasattr(params, "classes"):
        meta["classes"] = params.classes
    if hasattr(params, "m"):
        meta["m"] = params.m
    if hasattr(params, "activation"):
        meta["activation"] = params.activation
    if hasattr(params, "gyro_bias"):
        meta["gyro_bias"] = params.gyro_bias
    return meta


def construct_params(meta: dict):
    """Build a fresh parameter object of the kind named in the metadata."""
    kind = meta["kind"]
    k, n = meta["k"], meta["n"]
    if kind in ("bmlr_poincare", "bmlr_lorentz"):
        return BmlrParams(meta["model"], k, n, meta["classes"])
    if kind == "euclidean_mlr":
        return EuclideanMlrParams(n, meta["classes"])
    if kind == "poincare_hyperplane_mlr":
        return PoincareHyperplaneMlrParams(k, n, meta["classes"])
    if kind == "poincare_reparam_mlr":
        return PoincareReparamMlrParams(k, n, meta["classes"])
    if kind == "poincare_pseudo_busemann_mlr":
        return PseudoBusemannMlrParams(k, n, meta["classes"])
    if kind == "lorentz_hyperplane_mlr":
        return LorentzHyperplaneMlrParams(k, n, meta["classes"])
    if kind in ("bfc_poincare", "bfc_lorentz"):
        return BfcParams(
            meta["model"], k, n, meta["m"],
            activation=meta.get("activation", "identity"),
            gyro_bias=meta.get("gyro_bias", False),
        )
    if kind == "mobius_fc":
        return MobiusFcParams(k, n, meta["m"])
    if kind == "poincare_fc":
        return PoincareFcParams(k, n, meta["m"])
    if kind == "lorentz_fc":
        return LorentzFcParams(k, n, meta["m"], activation=meta.get("activation", "identity"))
    if kind == "lorentz_tangent_fc":
        return LorentzTangentFcParams(k, n, meta["m"])
    raise UsageError(f"unknown layer kind {kind!r}")


def save_params(path, params, extra: dict | None = None) -> None:
    """Write the binary tensor file at `path` and its JSON sidecar."""
    path = Path(path)
    leaves = params.leaves()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(leaves)))
        for name, leaf in leaves.items():
            arr = np.ascontiguousarray(leaf.data, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for extent in arr.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(arr.tobytes())
    meta = _meta_of(params)
    if extra:
        meta["extra"] = extra
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, sort_keys=True) + "\n")


def _read_exact(fh, count: int) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise UsageError("truncated parameter file")
    return buf


def load_params(path):
    """Rebuild a parameter object from a binary file and its sidecar."""
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    if not sidecar.exists():
        raise UsageError(f"missing sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    params = construct_params(meta)
    leaves = params.leaves()
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MAGIC)) != MAGIC:
            raise UsageError("bad magic bytes; not a parameter file")
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        if count != len(leaves):
            raise UsageError(
                f"file holds {count} tensors, {meta['kind']} expects {len(leaves)}"
            )
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            if name not in leaves:
                raise UsageError(f"unexpected tensor {name!r} for kind {meta['kind']}")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(ndim)
            )
            leaf = leaves[name]
            if shape != leaf.data.shape:
                raise UsageError(f"tensor {name!r}: shape {shape} != {leaf.data.shape}")
            raw = _read_exact(fh, 8 * int(np.prod(shape, dtype=np.int64)))
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape)
            leaf.data[...] = arr
        if fh.read(1):
            raise UsageError("trailing bytes after last tensor")
    return params, meta
