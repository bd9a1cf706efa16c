"""Deterministic serialization: JSON, curve CSVs, PGM rasters, atomic writes."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .annuli import LiftedCurve, Raster


def fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError(f"non-finite value {v!r} cannot be serialized")
    s = "%.17g" % v
    if s == "-0":
        s = "0"
    return s


def _emit(obj: Any, indent: int, level: int, out: list[str]):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k), ensure_ascii=False) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
        elif all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            parts: list[str] = []
            for v in items:
                _emit(v, indent, level + 1, parts)
                parts.append(", ")
            out.append("[" + "".join(parts[:-1]) + "]")
        else:
            out.append("[\n")
            for i, v in enumerate(items):
                out.append(pad)
                _emit(v, indent, level + 1, out)
                out.append(",\n" if i < len(items) - 1 else "\n")
            out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with floats fixed at 17 significant digits."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj: Any) -> Path:
    return atomic_write(path, dumps(obj))


# -- curves ------------------------------------------------------------------

def curve_csv(c: LiftedCurve, depth: Optional[int] = None,
              schedule_hash: Optional[str] = None, name: str = "") -> str:
    lines = [f"# holonomy={fmt_float(c.holonomy)}"]
    if depth is not None:
        lines.append(f"# depth={depth}")
    if schedule_hash is not None:
        lines.append(f"# schedule={schedule_hash}")
    if name:
        lines.append(f"# curve={name}")
    lines.append("param,x,y")
    lines += [f"{fmt_float(p)},{fmt_float(x)},{fmt_float(y)}"
              for p, x, y in zip(c.param, c.x, c.y)]
    return "\n".join(lines) + "\n"


def read_curve_csv(path) -> tuple[LiftedCurve, dict[str, str]]:
    meta: dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif line.startswith("param"):
                continue
            else:
                rows.append([float(t) for t in line.split(",")])
    if "holonomy" not in meta:
        raise ValueError(f"{path}: missing holonomy header")
    a = np.array(rows, dtype=float).reshape(-1, 3)
    return LiftedCurve(a[:, 0], a[:, 1], a[:, 2], float(meta["holonomy"])), meta


# -- rasters -----------------------------------------------------------------

def raster_pgm(r: Raster) -> str:
    """Plain PGM, top row first; member cells are white (1)."""
    cols, rows = r.res
    lines = ["P2", f"{cols} {rows}", "1"]
    for row in r.bits[::-1]:
        lines.append(" ".join("1" if b else "0" for b in row))
    return "\n".join(lines) + "\n"


def read_pgm(path) -> np.ndarray:
    """Read a plain PGM back into bottom-row-first membership bits."""
    tokens = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            tokens += line.split("#", 1)[0].split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    vals = np.array(tokens[4:4 + cols * rows], dtype=int).reshape(rows, cols)
    return vals[::-1] > 0


def raster_sidecar(r: Raster) -> dict:
    cols, rows = r.res
    return {
        "box": list(r.box),
        "res": [cols, rows],
        "depth": r.depth,
        "schedule": r.schedule.text() if r.schedule else None,
        "M": r.schedule.params.M if r.schedule else None,
        "schedule_hash": r.schedule.digest() if r.schedule else None,
        "fraction": r.fraction,
        "set_cells": int(r.bits.sum()),
    }
