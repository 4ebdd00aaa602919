"""Atomic file writes and the on-disk layout of a pipeline run."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .config import canonical_json

FORMAT_VERSION = 1


def atomic_write(path, text: str):
    """Write to a temporary sibling and rename over ``path``; readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(json.loads(canonical_json(obj)), indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def with_header(text: str, provenance: dict) -> str:
    """Prefix CSV text with a ``#`` provenance comment line."""
    return f"# photomarkers v{FORMAT_VERSION} config_hash={provenance['config_hash']} seed={provenance['seed']}\n" + text


def strip_header(path) -> str:
    lines = Path(path).read_text().splitlines(keepends=True)
    return "".join(ln for ln in lines if not ln.startswith("#"))


class Layout:
    """Where each command reads and writes inside ``--out``."""

    def __init__(self, root):
        self.root = Path(root)

    cohort = property(lambda s: s.root / "cohort")
    features = property(lambda s: s.root / "features")
    aggregate = property(lambda s: s.root / "aggregate")
    report = property(lambda s: s.root / "report")
    filters = property(lambda s: s.root / "filters")

    def matrix(self, dataset: str) -> Path:
        return self.aggregate / f"{dataset}.csv"

    def fit(self, dataset: str) -> Path:
        return self.root / "fit" / dataset

    def classify(self, dataset: str) -> Path:
        return self.root / "classify" / dataset
