"""Result serialization: manifest-carrying CSV and JSON tables.

Every emitted file embeds the manifest (study name, parameters, seed,
package version) so a run can be reproduced from the file alone.  Writes
go through a temp file in the target directory followed by an atomic
rename; readers of a half-written path can only ever see the previous
complete version or nothing.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from typing import Sequence

from .experiments import StudyResult

_FORMATS = ("csv", "json")


def _render_csv(manifest: dict, columns: Sequence[str], rows) -> str:
    buf = _io.StringIO()
    buf.write("# manifest: ")
    buf.write(json.dumps(manifest, sort_keys=True))
    buf.write("\r\n")
    w = csv.writer(buf)
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _render_json(manifest: dict, columns: Sequence[str], rows) -> str:
    doc = {
        "manifest": manifest,
        "columns": list(columns),
        "rows": [list(r) for r in rows],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def emit_results(result: StudyResult, path: str, fmt: str = "csv",
                 extra_manifest: dict | None = None) -> None:
    """Write a study table atomically; identical runs emit identical bytes."""
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    manifest = result.manifest()
    if extra_manifest:
        manifest = {**manifest, **extra_manifest}
    text = (_render_csv if fmt == "csv" else _render_json)(
        manifest, result.columns, result.rows)
    dest_dir = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=dest_dir, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _coerce(cell: str):
    if cell == "":
        return ""
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            continue
    return cell


def read_result(path: str) -> tuple[dict, list[str], list[list]]:
    """Parse an emitted file back into (manifest, columns, rows).

    CSV cells come back as int/float where they parse, strings otherwise;
    JSON preserves types exactly.
    """
    with open(path, "r", newline="") as f:
        head = f.read(1)
        f.seek(0)
        if head == "{":
            doc = json.load(f)
            return doc["manifest"], list(doc["columns"]), [list(r) for r in doc["rows"]]
        first = f.readline()
        if not first.startswith("# manifest: "):
            raise ValueError(f"{path}: missing manifest line")
        manifest = json.loads(first[len("# manifest: "):])
        reader = csv.reader(f)
        columns = next(reader, [])
        rows = [[_coerce(c) for c in row] for row in reader]
        return manifest, list(columns), rows
