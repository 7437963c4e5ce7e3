"""Atomic artifact writing: CSV tables, JSON manifests, content digests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Deterministic text for a table cell."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def atomic_write_text(path: str | Path, text: str) -> Path:
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
    return path


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    """Write a CSV whose header names every column with its unit in brackets."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: str | Path, payload: dict, outputs: list[Path]) -> Path:
    base = Path(path).parent
    payload = dict(payload)
    payload["outputs"] = [
        {"path": str(p.relative_to(base)), "sha256": sha256_file(p), "bytes": p.stat().st_size}
        for p in sorted(outputs)
    ]
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def verify_manifest(path: str | Path) -> list[str]:
    """Names of listed outputs that are missing or whose digest differs."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    bad = []
    for item in data.get("outputs", []):
        target = path.parent / item["path"]
        if not target.exists() or sha256_file(target) != item["sha256"]:
            bad.append(item["path"])
    return bad
