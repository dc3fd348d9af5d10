"""Reading and writing datasets, run configurations and sample files.

Every file is written through ``atomic_write`` (temporary file in the target
directory, then ``os.replace``), so an interrupted run never leaves a
truncated output behind. Floats are written with ``repr`` so the text is
locale-free and round-trips exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .core import MethylationPattern
from .errors import ConfigError, DataError
from .likelihood import Dataset
from .posterior import PosteriorSamples

__all__ = [
    "REQUIRED",
    "atomic_write",
    "format_dataset",
    "load_config",
    "parse_config_text",
    "parse_dataset_text",
    "parse_dataset",
    "read_samples_csv",
    "samples_csv_text",
    "write_json",
]

REQUIRED = object()


def atomic_write(path, content: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if hasattr(obj, "value") and not isinstance(obj, (str, bytes)):
        return obj.value
    return obj


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# datasets

def _parse_strand(tok: str, lineno: int) -> str:
    if not tok or set(tok) - {"0", "1"}:
        raise DataError(f"strand {tok!r} is not a binary string", line=lineno)
    return tok


def parse_dataset_text(text: str, source: str = "") -> Dataset:
    """Parse dataset text: one pattern per line, ``[id] strand strand``."""
    patterns = []
    first_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) == 3:
            pid, a, b = fields
        elif len(fields) == 2:
            pid, (a, b) = f"p{len(patterns) + 1}", fields
        else:
            raise DataError(f"expected 2 or 3 fields, found {len(fields)}", line=lineno)
        a = _parse_strand(a, lineno)
        b = _parse_strand(b, lineno)
        if len(a) != len(b):
            raise DataError(f"strands have different lengths ({len(a)} and {len(b)})",
                            line=lineno)
        if first_line is None:
            first_line = (lineno, len(a))
        elif len(a) != first_line[1]:
            raise DataError(
                f"{len(a)} sites, but line {first_line[0]} has {first_line[1]}", line=lineno)
        patterns.append(MethylationPattern.from_strings(a, b, pid))
    if not patterns:
        raise DataError(f"no patterns found in {source or 'input'}")
    return Dataset(patterns, source=source)


def parse_dataset(path) -> Dataset:
    """Read a dataset file. Lines starting with '#' are ignored.

    Raises:
        DataError: for ragged strands, non-binary characters, site-count
            mismatches between lines, or a file without patterns. The
            message carries the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_dataset_text(text, source=str(path))


def format_dataset(data: Dataset, header: str | None = None) -> str:
    lines = [f"# {line}" for line in (header or "").splitlines()]
    for pat in data:
        a, b = pat.strings()
        lines.append(f"{pat.id} {a} {b}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# flat key=value configuration

def parse_config_text(text: str, source: str = "config") -> dict[str, str]:
    out: dict[str, str] = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source} line {lineno}: expected key=value")
            continue
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            problems.append(f"{source} line {lineno}: empty key")
        elif key in out:
            problems.append(f"{source} line {lineno}: duplicate key {key!r}")
        else:
            out[key] = val
    if problems:
        raise ConfigError(problems)
    return out


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONVERTERS: dict[type, Callable[[str], Any]] = {int: int, float: float, str: str, bool: _to_bool}


def load_config(schema: Mapping[str, tuple[type, Any]], path=None,
                overrides: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Merge a config file and command-line overrides against a schema.

    ``schema`` maps each key to ``(type, default)``; a default of
    ``REQUIRED`` marks a mandatory key. Unknown keys, unparsable values and
    missing required keys are reported together in one ``ConfigError``.
    """
    raw: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from exc
        raw.update(parse_config_text(text, source=str(path)))
    raw.update(overrides or {})
    problems = [f"unknown key {k!r}" for k in raw if k not in schema]
    out = {}
    for key, (typ, default) in schema.items():
        if key in raw:
            try:
                out[key] = CONVERTERS[typ](raw[key])
            except ValueError:
                problems.append(f"{key}: cannot read {raw[key]!r} as {typ.__name__}")
        elif default is REQUIRED:
            problems.append(f"missing required key {key!r}")
        else:
            out[key] = default
    if problems:
        raise ConfigError(problems)
    return out


# ---------------------------------------------------------------------------
# sample files

def _fmt(v: float) -> str:
    return repr(float(v))


def samples_csv_text(samples: PosteriorSamples, chain: int | None = None) -> str:
    """CSV text of the retained draws (one chain, or all with a ``chain`` column)."""
    rows = samples.draws
    lines = []
    if chain is None:
        lines.append(",".join(["chain"] + samples.names))
        for cid, row in zip(samples.chain_ids, rows):
            lines.append(",".join([str(int(cid))] + [_fmt(v) for v in row]))
    else:
        lines.append(",".join(samples.names))
        for row in rows[samples.chain_ids == chain]:
            lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_samples_csv(paths, chain_ids=None) -> PosteriorSamples:
    """Read one or more sample CSVs and pool them, one chain per file."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parts = []
    for k, path in enumerate(paths):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                names = next(reader)
            except StopIteration:
                raise DataError(f"{path} is empty") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(names):
                    raise DataError(f"{path}: expected {len(names)} columns", line=lineno)
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise DataError(f"{path}: non-numeric value", line=lineno) from None
        draws = np.array(rows, dtype=float).reshape(-1, len(names))
        if names and names[0] == "chain":
            parts.append(PosteriorSamples(draws[:, 1:], names[1:], draws[:, 0].astype(int)))
        else:
            cid = chain_ids[k] if chain_ids is not None else k
            parts.append(PosteriorSamples(draws, names, np.full(draws.shape[0], cid)))
    return PosteriorSamples.concat(parts)
