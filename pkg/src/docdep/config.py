"""Pipeline configuration: typed defaults, key=value files, env overrides, manifests."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .errors import ConfigInvalid

ENV_PREFIX = "DOCDEP_"

# every stage default, overridable via config file, env var, or CLI flag
DEFAULTS: dict[str, object] = {
    "ingest.tau_det": 0.5,
    "ingest.tau_nms": 0.5,
    "ingest.k_max": 64,
    "pool.alpha": 1.0,
    "parse.top_k": 16,
    "parse.m_pages": 3,
    "parse.y_tol": 0.05,
    "parse.decode": "mst",
    "parse.no_header_prior": False,
    "train.seed": 0,
    "train.lr": 3e-5,
    "train.epochs": 5,
    "train.batch_size": 8,
    "train.weight_decay": 1e-4,
    "train.dropout": 0.1,
    "train.val_fraction": 0.1,
    "train.hidden": 64,
    "train.type_dim": 16,
    "chunk.max_len": 550,
    "chunk.no_metadata": False,
    "retrieve.retriever": "bm25",
    "retrieve.k": 4,
    "pipeline.jobs": 1,
}


def _coerce(key: str, raw: str) -> object:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigInvalid(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path: str | None = None, env: dict[str, str] | None = None) -> dict[str, object]:
    """Defaults, overridden by a key=value file, then DOCDEP_SECTION__KEY env vars."""
    cfg = dict(DEFAULTS)
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigInvalid(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _coerce(key, raw.strip())
    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if key not in DEFAULTS:
            raise ConfigInvalid(f"environment variable {name}: unknown key {key!r}")
        cfg[key] = _coerce(key, raw)
    return cfg


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path: str | Path, command: str, cfg: dict[str, object], inputs: list[str | Path]) -> None:
    from . import __version__

    payload = {
        "command": command,
        "version": __version__,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "inputs": {str(p): sha256_file(p) for p in sorted(map(str, inputs)) if Path(p).is_file()},
    }
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
