"""File formats: prediction CSVs, reliability CSVs, model files and JSON reports.

Every file written here starts with provenance (the command, its arguments and
the resolved configuration). JSON files carry it in the ``provenance`` key;
CSV files carry it as one leading ``# ptcal {...}`` comment line. Readers skip
leading ``#`` lines.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import calibrate as cal
from .core import Dataset, PtcalError
from .metrics import BinStats

SCHEMA_VERSION = 1
TOOL = "ptcal"
CSV_PROVENANCE_PREFIX = "# ptcal "


class FormatError(PtcalError):
    def __init__(self, path, line: Optional[int], message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def fmt_float(x: float) -> str:
    """Shortest string that parses back to exactly ``x``."""
    return repr(float(x))


def _clean(obj: Any) -> Any:
    # JSON has no NaN/inf and no numpy scalars
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- CSV


def _read_lines(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(path, None, "no such file")
    try:
        text = path.read_bytes().decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise FormatError(path, None, f"not UTF-8 ({exc.reason})") from None
    return text.replace("\r\n", "\n").split("\n")


def read_csv_provenance(path) -> Optional[dict]:
    for line in _read_lines(path):
        if line.startswith(CSV_PROVENANCE_PREFIX):
            return json.loads(line[len(CSV_PROVENANCE_PREFIX):])
        if not line.startswith("#"):
            return None
    return None


def _table(path) -> tuple[int, list[str], list[tuple[int, list[str]]]]:
    lines = _read_lines(path)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        i += 1
    if i >= len(lines) or not lines[i].strip():
        raise FormatError(path, i + 1, "missing header")
    header = [h.strip() for h in lines[i].split(",")]
    rows = []
    for lineno, line in enumerate(lines[i + 1:], start=i + 2):
        if line == "":
            continue
        rows.append((lineno, line.split(",")))
    return i + 1, header, rows


PREDICTION_COLUMNS = ("score", "label", "logit", "calibrated")


def _parse_float(path, lineno, name, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(path, lineno, f"{name} {text.strip()!r} is not a number") from None
    if not math.isfinite(v):
        raise FormatError(path, lineno, f"{name} {text.strip()!r} is not finite")
    return v


def load_table(path) -> tuple[Dataset, Optional[np.ndarray]]:
    """Parse a prediction CSV into a :class:`Dataset` and its optional ``calibrated`` column.

    Header is ``score,label`` optionally followed by ``logit`` and/or
    ``calibrated``.
    """
    hdr_line, header, rows = _table(path)
    if header[:2] != ["score", "label"] or len(set(header)) != len(header) or any(
        h not in PREDICTION_COLUMNS[2:] for h in header[2:]
    ):
        raise FormatError(path, hdr_line, f"bad header {','.join(header)!r}; expected score,label[,logit][,calibrated]")
    col = {h: k for k, h in enumerate(header)}
    scores, labels = [], []
    logits = [] if "logit" in col else None
    calibrated = [] if "calibrated" in col else None
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise FormatError(path, lineno, f"expected {len(header)} fields, found {len(fields)}")
        s = _parse_float(path, lineno, "score", fields[col["score"]])
        if not 0.0 <= s <= 1.0:
            raise FormatError(path, lineno, f"score {s!r} outside [0, 1]")
        lab = fields[col["label"]].strip()
        if lab not in ("0", "1"):
            raise FormatError(path, lineno, f"label {lab!r} is not 0 or 1")
        scores.append(s)
        labels.append(int(lab))
        if logits is not None:
            logits.append(_parse_float(path, lineno, "logit", fields[col["logit"]]))
        if calibrated is not None:
            c = _parse_float(path, lineno, "calibrated", fields[col["calibrated"]])
            if not 0.0 <= c <= 1.0:
                raise FormatError(path, lineno, f"calibrated {c!r} outside [0, 1]")
            calibrated.append(c)
    try:
        d = Dataset(scores, labels, logits, name=Path(path).stem)
    except PtcalError as exc:
        raise FormatError(path, None, str(exc)) from None
    return d, (None if calibrated is None else np.asarray(calibrated))


def load_csv(path) -> Dataset:
    return load_table(path)[0]


def format_csv(d: Dataset, calibrated=None, provenance: Optional[dict] = None) -> str:
    header = ["score", "label"]
    if d.logits is not None:
        header.append("logit")
    if calibrated is not None:
        header.append("calibrated")
    out = []
    if provenance is not None:
        out.append(CSV_PROVENANCE_PREFIX + json.dumps(_clean(provenance), sort_keys=True, separators=(",", ":")))
    out.append(",".join(header))
    for i in range(len(d)):
        row = [fmt_float(d.scores[i]), str(int(d.labels[i]))]
        if d.logits is not None:
            row.append(fmt_float(d.logits[i]))
        if calibrated is not None:
            row.append(fmt_float(calibrated[i]))
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def write_csv(path, d: Dataset, calibrated=None, provenance: Optional[dict] = None) -> None:
    atomic_write(path, format_csv(d, calibrated, provenance))


# ---------------------------------------------------------------- reliability CSV

RELIABILITY_HEADER = "bin_lo,bin_hi,count,mean_conf,accuracy"


def format_reliability_csv(bins, provenance: Optional[dict] = None) -> str:
    out = []
    if provenance is not None:
        out.append(CSV_PROVENANCE_PREFIX + json.dumps(_clean(provenance), sort_keys=True, separators=(",", ":")))
    out.append(RELIABILITY_HEADER)
    for b in bins:
        conf = "" if b.mean_conf is None else fmt_float(b.mean_conf)
        acc = "" if b.accuracy is None else fmt_float(b.accuracy)
        out.append(f"{fmt_float(b.lo)},{fmt_float(b.hi)},{b.count},{conf},{acc}")
    return "\n".join(out) + "\n"


def load_reliability_csv(path) -> list[BinStats]:
    hdr_line, header, rows = _table(path)
    if ",".join(header) != RELIABILITY_HEADER:
        raise FormatError(path, hdr_line, f"bad header; expected {RELIABILITY_HEADER}")
    bins = []
    for lineno, f in rows:
        if len(f) != 5:
            raise FormatError(path, lineno, f"expected 5 fields, found {len(f)}")
        try:
            bins.append(
                BinStats(
                    float(f[0]),
                    float(f[1]),
                    int(f[2]),
                    float(f[3]) if f[3] else None,
                    float(f[4]) if f[4] else None,
                )
            )
        except (ValueError, PtcalError) as exc:
            raise FormatError(path, lineno, str(exc)) from None
    return bins


# ---------------------------------------------------------------- models


def model_to_dict(m: cal.CalibratorModel) -> dict:
    if isinstance(m, cal.IdentityModel):
        return {"kind": m.kind}
    if isinstance(m, cal.PlattModel):
        return {"kind": m.kind, "a": m.a, "b": m.b}
    if isinstance(m, cal.IsotonicModel):
        return {"kind": m.kind, "breakpoints": [[x, y] for x, y in m.breakpoints]}
    if isinstance(m, cal.BinningModel):
        return {"kind": m.kind, "edges": list(m.edges), "values": list(m.values), "strategy": m.strategy}
    if isinstance(m, cal.TemperatureModel):
        return {"kind": m.kind, "t": m.t}
    if isinstance(m, cal.BinningWithPlatt):
        return {"kind": m.kind, "platt": model_to_dict(m.platt), "binning": model_to_dict(m.binning)}
    raise PtcalError(f"cannot serialise {type(m).__name__}")


def model_from_dict(d: dict) -> cal.CalibratorModel:
    try:
        kind = d["kind"]
        if kind == "identity":
            return cal.IdentityModel()
        if kind == "platt":
            return cal.PlattModel(float(d["a"]), float(d["b"]))
        if kind == "isotonic":
            xs, ys = zip(*d["breakpoints"])
            return cal.IsotonicModel(tuple(map(float, xs)), tuple(map(float, ys)))
        if kind == "binning":
            return cal.BinningModel(tuple(d["edges"]), tuple(d["values"]), d["strategy"])
        if kind == "temperature":
            return cal.TemperatureModel(float(d["t"]))
        if kind == "binning_with_platt":
            return cal.BinningWithPlatt(model_from_dict(d["platt"]), model_from_dict(d["binning"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise PtcalError(f"malformed model description: {exc}") from None
    raise PtcalError(f"unknown model kind {d.get('kind')!r}")


# ---------------------------------------------------------------- JSON documents


def envelope(kind: str, provenance: dict, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tool": TOOL, "kind": kind, "provenance": provenance, **body}


def write_json(path, doc: dict) -> None:
    atomic_write(path, dumps(doc))


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FormatError(path, None, "no such file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if doc.get("tool") != TOOL or doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(path, None, f"not a {TOOL} schema-{SCHEMA_VERSION} document")
    return doc


def load_model(path) -> cal.CalibratorModel:
    doc = read_json(path)
    if doc.get("kind") != "model":
        raise FormatError(path, None, "not a model file")
    return model_from_dict(doc["model"])


def read_provenance(path) -> dict:
    """Provenance block of any file written by ptcal (JSON or CSV)."""
    path = Path(path)
    head = path.read_bytes()[:1]
    if head == b"{":
        return read_json(path)["provenance"]
    prov = read_csv_provenance(path)
    if prov is None:
        raise FormatError(path, 1, "no provenance line")
    return prov
