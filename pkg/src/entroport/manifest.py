"""Reproducibility plumbing: content hashes, atomic writes, run manifests.

Every command writes a manifest holding the fully resolved config and
content hashes of its inputs and outputs, so a finished run can be
verified or replayed byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict

from .errors import MalformedInput


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sanitize(obj: Any) -> Any:
    """Replace NaN/inf floats with None so output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, two-space indent, strict floats."""
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2, allow_nan=False)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: Dict[str, Any]  # fully resolved, defaults materialized
    inputs: Dict[str, Dict[str, str]]  # label -> {"path", "sha256"}
    outputs: Dict[str, str]  # filename -> sha256 of content
    tool_version: str
    created_utc: str


def build_manifest(
    command: str,
    config: Dict[str, Any],
    inputs: Dict[str, Dict[str, str]],
    outputs: Dict[str, str],
    tool_version: str,
) -> RunManifest:
    return RunManifest(
        command=command,
        config=config,
        inputs=inputs,
        outputs=outputs,
        tool_version=tool_version,
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def manifest_to_dict(manifest: RunManifest) -> Dict[str, Any]:
    return {
        "command": manifest.command,
        "config": manifest.config,
        "inputs": manifest.inputs,
        "outputs": manifest.outputs,
        "tool_version": manifest.tool_version,
        "created_utc": manifest.created_utc,
    }


def load_manifest(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MalformedInput(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"manifest {path} is not valid JSON: {exc}") from exc
    required = {"command", "config", "inputs", "outputs", "tool_version",
                "created_utc"}
    missing = required - set(data)
    if missing:
        raise MalformedInput(f"manifest {path} is missing keys {sorted(missing)}")
    return data
