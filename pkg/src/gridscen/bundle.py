"""Single-file JSON model bundle shared by ``fit`` and ``simulate``."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .engine import FittedSystem
from .errors import ConfigError

FORMAT = "gridscen-bundle"
VERSION = 1


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def bundle_hash(system: FittedSystem) -> str:
    return hashlib.sha256(_canonical(system.to_dict()).encode()).hexdigest()


def save_bundle(system: FittedSystem, path, config=None) -> str:
    """Write the bundle and return its model hash."""
    model = system.to_dict()
    digest = hashlib.sha256(_canonical(model).encode()).hexdigest()
    doc = {"format": FORMAT, "version": VERSION, "model_hash": digest,
           "config": config or {}, "model": model}
    Path(path).write_text(_canonical(doc))
    return digest


def load_bundle(path):
    """Return ``(system, model_hash, config dict)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read bundle {path}: {exc}") from None
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ConfigError(f"{path} is not a version-{VERSION} model bundle")
    return FittedSystem.from_dict(doc["model"]), doc["model_hash"], doc["config"]
