"""Parsing for spikelab CSV artifacts: '#'-prefixed metadata plus one table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class SchemaError(ValueError):
    """The input file is not a recognized spikelab artifact."""


@dataclass
class CsvArtifact:
    meta: dict[str, str]
    columns: list[str]
    rows: list[dict[str, str]] = field(default_factory=list)

    @property
    def schema(self) -> str:
        return self.meta.get("schema", "")

    def config(self) -> dict:
        raw = self.meta.get("config")
        if raw is None:
            raise SchemaError("artifact has no embedded config")
        return json.loads(raw)

    def floats(self, column: str) -> list[float]:
        if column not in self.columns:
            raise SchemaError(f"artifact has no column {column!r}")
        return [float(r[column]) for r in self.rows]


def read_artifact(path: str) -> CsvArtifact:
    meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[dict[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line.lstrip("# ").partition(": ")
                if sep:
                    meta[key] = val
                continue
            if columns is None:
                columns = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise SchemaError(f"row width {len(parts)} != header width {len(columns)}")
            rows.append(dict(zip(columns, parts)))
    if columns is None:
        raise SchemaError(f"{path} contains no header row")
    if "schema" not in meta:
        raise SchemaError(f"{path} has no schema header comment")
    return CsvArtifact(meta, columns, rows)
