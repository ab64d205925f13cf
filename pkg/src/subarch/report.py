"""JSON reports and the binary weight sidecar.

Reports are written with sorted keys and a fixed layout so that two runs
with the same inputs produce the same bytes.  The only field allowed to
differ is ``timestamp``.

A weight sidecar is a pair of files next to the report: ``<stem>.weights.bin``
holds every array as little-endian float64 in row-major order, one after
another, and ``<stem>.weights.json`` lists each array's layer, name, shape
and element offset.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError

_WEIGHT_NAMES = {
    "dense": ("W", "b"),
    "matmul": ("M",),
    "attention": ("W_K", "b_K", "W_Q", "b_Q", "W_V", "b_V"),
}


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_report(path, payload: dict[str, Any], timestamp: bool = True) -> Path:
    path = Path(path)
    body = dict(payload)
    if timestamp:
        body["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")
    return path


def read_report(path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from None


def sidecar_paths(report_path) -> tuple[Path, Path]:
    p = Path(report_path)
    stem = p.with_suffix("") if p.suffix == ".json" else p
    return stem.with_name(stem.name + ".weights.bin"), stem.with_name(stem.name + ".weights.json")


def write_weights(report_path, layers, weights) -> tuple[Path, Path]:
    """Write ``weights`` (a list of per-layer array lists) as a sidecar."""
    bin_path, manifest_path = sidecar_paths(report_path)
    entries, chunks, offset = [], [], 0
    for index, (layer, ws) in enumerate(zip(layers, weights)):
        names = _WEIGHT_NAMES.get(layer.kind, ())
        if layer.kind == "dense" and not layer.has_bias:
            names = names[:1]
        if layer.kind == "attention" and not layer.has_bias:
            names = names[::2]
        for name, w in zip(names, ws):
            a = np.ascontiguousarray(w, dtype="<f8")
            entries.append({"layer": index, "kind": layer.kind, "name": name,
                            "shape": list(a.shape), "offset": offset})
            chunks.append(a.tobytes(order="C"))
            offset += a.size
    manifest = {"dtype": "float64", "byteorder": "little", "order": "row-major",
                "count": offset, "arrays": entries}
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return bin_path, manifest_path


def read_weights(report_path) -> list[list[np.ndarray]]:
    """Inverse of :func:`write_weights`; layers without weights get an empty list."""
    bin_path, manifest_path = sidecar_paths(report_path)
    try:
        manifest = json.loads(manifest_path.read_text())
        flat = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read weight sidecar: {exc}") from None
    if flat.size != manifest["count"]:
        raise FormatError(f"sidecar holds {flat.size} values, manifest says {manifest['count']}")
    out: list[list[np.ndarray]] = []
    for e in manifest["arrays"]:
        while len(out) <= e["layer"]:
            out.append([])
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        out[e["layer"]].append(flat[e["offset"]:e["offset"] + size].reshape(e["shape"]).astype(float))
    return out
