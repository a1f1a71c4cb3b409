from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

from src.domain.entities import RunManifest
from src.domain.interfaces import IRunStorage

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def format_cell(value: Any) -> str:
    """Floats at 17 significant digits (round-trip exact); None and NaN as empty cells."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        x = float(value)
        return "" if math.isnan(x) else format(x, ".17g")
    return str(value)


def _json_safe(value: Any) -> Any:
    """NaN/Inf become null so the output stays strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "tolist"):
        return _json_safe(value.tolist())
    return value


class FileRunStorage(IRunStorage):
    """
    Concrete IRunStorage writing into one run directory.

    Receives the directory path (injected); every write goes through this single
    object, which records the SHA-256 of the exact bytes written for the manifest.
    """

    def __init__(self, root: Path) -> None:
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._written: dict[str, str] = {}

    @property
    def root(self) -> Path:
        return self._root

    def _write_bytes(self, name: str, data: bytes) -> str:
        path = self._root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self._written[name] = hashlib.sha256(data).hexdigest()
        log.debug("Wrote %s | %d bytes", name, len(data))
        return name

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([format_cell(v) for v in row] for row in rows)
        return self._write_bytes(name, buffer.getvalue().encode("utf-8"))

    def write_json(self, name: str, payload: Mapping[str, Any]) -> str:
        text = json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
        return self._write_bytes(name, text.encode("utf-8"))

    def write_text(self, name: str, text: str) -> str:
        return self._write_bytes(name, text.encode("utf-8"))

    def written(self) -> Mapping[str, str]:
        return dict(self._written)

    def write_manifest(self, manifest: RunManifest) -> str:
        """manifest.json lists every other file of the run; it does not list itself."""
        payload = asdict(manifest)
        text = json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
        path = self._root / MANIFEST_NAME
        path.write_text(text, encoding="utf-8")
        log.info("Manifest written | files=%d | partial=%s", len(manifest.files), manifest.partial)
        return MANIFEST_NAME
