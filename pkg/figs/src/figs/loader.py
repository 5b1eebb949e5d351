"""Manifest-driven loading of simulator outputs."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field


class InputError(RuntimeError):
    """Missing, empty or inconsistent input artifacts."""


@dataclass
class RunArtifact:
    """One manifest plus the tables/reports it points to.

    ``tables`` maps output basename to a dict of column-name -> list of
    float (CSV files); ``reports`` holds parsed JSON outputs.
    """

    manifest: dict
    tables: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    reports: dict[str, dict] = field(default_factory=dict)

    @property
    def command(self) -> str:
        return self.manifest.get("command", "?")

    @property
    def params_hash(self) -> str:
        return self.manifest.get("params_hash", "")

    def table(self) -> dict[str, list[float]]:
        if len(self.tables) != 1:
            raise InputError(f"expected exactly one CSV output, "
                             f"got {sorted(self.tables)}")
        return next(iter(self.tables.values()))

    def report(self) -> dict:
        if len(self.reports) != 1:
            raise InputError(f"expected exactly one JSON output, "
                             f"got {sorted(self.reports)}")
        return next(iter(self.reports.values()))


def _read_csv(path: str) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty CSV") from None
        rows = [row for row in reader if row]
    if not rows:
        raise InputError(f"{path}: CSV has a header but no data rows")
    cols: dict[str, list[float]] = {name: [] for name in header}
    for row in rows:
        for name, value in zip(header, row):
            try:
                cols[name].append(float(value))
            except ValueError:
                cols[name].append(float("nan"))
    return cols


def load_artifact(manifest_path: str) -> RunArtifact:
    """Load a manifest and every output file it names."""
    if not os.path.exists(manifest_path):
        raise InputError(f"manifest not found: {manifest_path}")
    with open(manifest_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{manifest_path}: not valid JSON: {exc}") from exc
    if "outputs" not in manifest:
        raise InputError(f"{manifest_path}: no outputs list")
    art = RunArtifact(manifest=manifest)
    base = os.path.dirname(os.path.abspath(manifest_path))
    for output in manifest["outputs"]:
        path = output if os.path.isabs(output) else os.path.join(base, os.path.basename(output))
        if not os.path.exists(path):
            # fall back to the literal relative path
            path = output
        if not os.path.exists(path):
            raise InputError(f"output listed in manifest is missing: {output}")
        name = os.path.basename(path)
        if path.endswith(".csv"):
            art.tables[name] = _read_csv(path)
        elif path.endswith(".json"):
            with open(path) as fh:
                art.reports[name] = json.load(fh)
    return art


def check_same_run_family(artifacts: list[RunArtifact]) -> None:
    """Refuse to mix artifacts produced with different physical parameters."""
    hashes = {art.params_hash for art in artifacts}
    if len(hashes) > 1:
        raise InputError(f"inputs mix different parameter sets: {sorted(hashes)}")
    if hashes == {""}:
        raise InputError("inputs carry no params_hash")
