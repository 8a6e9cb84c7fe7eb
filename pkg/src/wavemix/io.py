"""CSV series files and JSON reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .series import MultiSeries, ValidationError

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("artifact")
except Exception:  # pragma: no cover - running from a source tree
    VERSION = "0.1.0"


def read_csv(path) -> MultiSeries:
    """Header row of channel names, then one sample per row; no missing values."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file")
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise ValidationError(f"{path}:1: empty channel name in header")
        if len(set(header)) != len(header):
            raise ValidationError(f"{path}:1: duplicate channel names")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric or missing value") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if len(rows) < 2:
        raise ValidationError(f"{path}: need at least 2 samples, found {len(rows)}")
    return MultiSeries(np.array(rows).T, header)


def write_csv(path, series: MultiSeries):
    """Full round-trip precision (``repr`` of each float)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(series.labels)
        for row in series.data.T:
            w.writerow([repr(float(v)) for v in row])


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report(config, results, timing=None) -> dict:
    return {"config": _plain(config), "results": _plain(results),
            "timing": _plain(timing or {}), "version": VERSION}


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
