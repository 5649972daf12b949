"""Deterministic, atomically written CSV/JSON/SVG artifacts."""
from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

CSV_MAGIC = "# viscowave-csv v1"


def _plain(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(obj, length: int = 12) -> str:
    """Short SHA-256 of the canonical JSON form.

    >>> config_hash({"a": 1}) == config_hash({"a": 1.0 * 1})
    True
    """
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:length]


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to a temporary sibling, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(prefix="." + path.name + ".", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return str(int(x))
    return str(x)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], meta: Optional[dict] = None) -> str:
    """CSV document with the schema line first and ``# key: value`` meta lines."""
    lines = [CSV_MAGIC]
    for k in sorted(meta or {}):
        lines.append(f"# {k}: {canonical_json(meta[k])}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, meta=None) -> Path:
    return atomic_write(path, csv_text(columns, rows, meta))


def read_csv(path):
    """Parse a file written by :func:`write_csv`.

    Returns
    -------
    columns : list[str]
    data : dict
        Column name to list of parsed cells (floats when possible).
    meta : dict
    """
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CSV_MAGIC:
        raise ValueError(f"{path}: missing '{CSV_MAGIC}' header line")
    meta, i = {}, 1
    while i < len(text) and text[i].startswith("#"):
        key, _, val = text[i][1:].strip().partition(": ")
        meta[key] = json.loads(val) if val else None
        i += 1
    columns = text[i].split(",")
    data = {c: [] for c in columns}
    for line in text[i + 1:]:
        for c, cell in zip(columns, line.split(",")):
            try:
                data[c].append(float(cell))
            except ValueError:
                data[c].append(cell)
    return columns, data, meta


def json_text(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, json_text(obj))


def svg_bytes(fig) -> bytes:
    """SVG rendering without a date stamp and with fixed element ids."""
    import matplotlib
    with matplotlib.rc_context({"svg.hashsalt": "viscowave", "svg.fonttype": "none"}):
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_svg(path, fig) -> Path:
    return atomic_write(path, svg_bytes(fig))


def new_figure(width: float = 6.4, height: float = 4.2):
    """A standalone figure (no pyplot state, no GUI backend)."""
    from matplotlib.figure import Figure
    fig = Figure(figsize=(width, height))
    return fig, fig.add_subplot(1, 1, 1)
