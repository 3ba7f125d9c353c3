"""JSON/CSV reading and writing with deterministic, exact-where-possible output."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .reduced_form import InterimCurve


def load_json(path, exact: bool = False):
    """Parse a JSON file; with ``exact`` every decimal literal becomes a Fraction."""
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"{p}: file not found")
    try:
        text = p.read_text()
        return json.loads(text, parse_float=Fraction if exact else float)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{p}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from None


def decimal_string(x: Fraction) -> str:
    """Terminating decimal expansion when one exists, else ``p/q``."""
    x = Fraction(x)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    scaled = x * 10 ** digits
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    if digits == 0:
        return sign + s
    return f"{sign}{s[:-digits]}.{s[-digits:]}".rstrip("0").rstrip(".")


def to_jsonable(obj):
    if isinstance(obj, Fraction):
        return decimal_string(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f) or math.isinf(f):
            return str(f)
        return f
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def report(command: str, config: dict, result) -> dict:
    return {"version": __version__, "command": command, "config": config, "result": result}


def write_text(path, text: str):
    Path(path).write_text(text)


def write_json(path, obj):
    write_text(path, dumps(obj))


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, Fraction):
        return decimal_string(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def curves_from_config(cfg) -> list:
    """``{"grid": [...], "values": [[...], ...]}`` (a flat ``values`` list means one buyer)."""
    if not isinstance(cfg, dict):
        raise InvalidInputError("curves: expected an object with 'grid' and 'values'")
    for key in ("grid", "values"):
        if key not in cfg:
            raise InvalidInputError(f"curves: missing field {key!r}")
    grid = [float(x) for x in cfg["grid"]]
    vals = cfg["values"]
    if vals and not isinstance(vals[0], list):
        vals = [vals]
    out = []
    for i, row in enumerate(vals):
        if len(row) != len(grid):
            raise InvalidInputError(f"curves: field 'values[{i}]' has {len(row)} entries, grid has {len(grid)}")
        try:
            out.append(InterimCurve(grid, [float(x) for x in row]))
        except InvalidInputError as e:
            raise InvalidInputError(f"curves: field 'values[{i}]': {e}") from None
    return out


def curves_to_config(curves) -> dict:
    """Shared grid when all curves agree on one, otherwise per-curve grids."""
    g0 = curves[0].grid
    if all(c.grid.shape == g0.shape and np.array_equal(c.grid, g0) for c in curves):
        return {"grid": g0.tolist(), "values": [c.values.tolist() for c in curves]}
    return {"curves": [{"grid": c.grid.tolist(), "values": c.values.tolist()} for c in curves]}
