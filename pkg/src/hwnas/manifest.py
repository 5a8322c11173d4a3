"""Run manifests: provenance embedded in every written artifact.

A manifest snapshots the command, its full configuration, input file hashes,
the seed, and the tool version.  Timestamps are recorded but excluded from
hashing, so two runs with identical flags and inputs produce artifacts with
equal manifest hashes.
"""

from __future__ import annotations

import copy
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

TOOL_VERSION = "0.1.0"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def artifact_hash(path) -> str:
    """Input hash with manifest timestamps excluded for JSON artifacts, so a
    re-run sees identical input hashes even though embedded manifests carry
    fresh timestamps.  Non-JSON inputs hash as raw bytes."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return sha256_file(path)
    if not isinstance(obj, dict):
        return sha256_file(path)
    payload = json.dumps(strip_timestamps(obj), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def build_manifest(command: str, config: dict, inputs: list,
                   seed: int | None = None) -> dict:
    return {
        "command": command,
        "config": config,
        "inputs": {str(p): artifact_hash(p) for p in inputs},
        "seed": seed,
        "tool_version": TOOL_VERSION,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json_artifact(path, payload: dict, manifest: dict) -> None:
    out = dict(payload)
    out["manifest"] = manifest
    Path(path).write_text(canonical_json(out), encoding="utf-8")


def write_sidecar_manifest(path, manifest: dict) -> None:
    """Companion manifest for artifacts whose format cannot embed one (CSV)."""
    Path(str(path) + ".manifest.json").write_text(
        canonical_json({"manifest": manifest}), encoding="utf-8")


def strip_timestamps(obj: dict) -> dict:
    out = copy.deepcopy(obj)
    if isinstance(out.get("manifest"), dict):
        out["manifest"].pop("created_utc", None)
    return out


def manifest_hash(path) -> str:
    """Content hash of a JSON artifact with manifest timestamps removed."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    payload = json.dumps(strip_timestamps(obj), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
