"""Checkpoint archives: named parameter arrays plus JSON metadata.

A checkpoint is a zip holding ``params.npz`` (canonical dotted parameter
names) and ``meta.json`` (vocabulary, model and audio configs, recipe
provenance). The audio section is compared bit-for-bit when a vocoder
and a spectrogram model are used together.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path

import numpy as np


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: dict[str, np.ndarray], meta: dict, path: str | Path) -> None:
    buf = io.BytesIO()
    np.savez(buf, **params)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("params.npz", buf.getvalue())
        zf.writestr("meta.json", json.dumps(meta, ensure_ascii=False, indent=1))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            with zf.open("params.npz") as fh:
                npz = np.load(io.BytesIO(fh.read()))
                params = {k: npz[k] for k in npz.files}
            meta = json.loads(zf.read("meta.json"))
    except (zipfile.BadZipFile, KeyError) as e:
        raise CheckpointError(f"{path}: not a valid checkpoint ({e})") from e
    return params, meta


def params_digest(params: dict[str, np.ndarray], prefixes: tuple[str, ...] = ("",)) -> str:
    """SHA-256 over the selected parameters' names and raw bytes."""
    h = hashlib.sha256()
    for name in sorted(params):
        if any(name.startswith(p) for p in prefixes):
            h.update(name.encode())
            h.update(np.ascontiguousarray(params[name]).tobytes())
    return h.hexdigest()


def check_audio_compat(meta_a: dict, meta_b: dict) -> None:
    """Both checkpoints must carry byte-identical audio configs."""
    a = meta_a.get("config", {}).get("audio")
    b = meta_b.get("config", {}).get("audio")
    if a != b:
        raise CheckpointError(
            "audio-config mismatch between checkpoints: "
            f"{json.dumps(a, sort_keys=True)} vs {json.dumps(b, sort_keys=True)}"
        )
