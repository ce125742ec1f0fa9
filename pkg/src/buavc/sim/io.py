"""Scenario documents (canonical JSON), trajectory CSV and metrics summaries."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import re
import typing
from typing import Any, Iterable, Optional

import numpy as np

from .metrics import Metrics, StepRecord
from .scenario import (
    DeadlockParams,
    EstimationParams,
    KFParams,
    MPCParams,
    ObstacleSpec,
    RobotSpec,
    Scenario,
    ScenarioError,
    validate,
)

FORMAT_VERSION = 1


class DocumentError(ScenarioError):
    """Malformed or invalid scenario document; ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


_NESTED = {
    (Scenario, "robots"): RobotSpec,
    (Scenario, "obstacles"): ObstacleSpec,
    (Scenario, "deadlock"): DeadlockParams,
    (Scenario, "estimation"): EstimationParams,
    (Scenario, "mpc"): MPCParams,
    (EstimationParams, "kf"): KFParams,
}
_LISTS = {(Scenario, "robots"), (Scenario, "obstacles")}


def _hints(cls):
    return typing.get_type_hints(cls)


def _fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".12g")
    return "0" if s == "-0" else s


def _emit_value(v, kind, indent: int) -> str:
    pad = "  " * indent
    if dataclasses.is_dataclass(v):
        return _emit_obj(v, indent)
    if isinstance(v, tuple) and v and dataclasses.is_dataclass(v[0]):
        inner = ",\n".join("  " * (indent + 1) + _emit_obj(x, indent + 1) for x in v)
        return "[\n" + inner + "\n" + pad + "]"
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_emit_value(x, float, indent) for x in v) + "]"
    if kind is int and isinstance(v, (int, np.integer)):
        return str(int(v))
    return _fmt_float(v)


def _base_kind(t):
    if t in (int, float, str, bool):
        return t
    args = [a for a in typing.get_args(t) if a is not type(None)]
    return args[0] if len(args) == 1 and args[0] in (int, float, str, bool) else None


def _emit_obj(obj, indent: int) -> str:
    hints = _hints(type(obj))
    pad = "  " * (indent + 1)
    parts = []
    for f in dataclasses.fields(obj):
        parts.append(f'{pad}"{f.name}": {_emit_value(getattr(obj, f.name), _base_kind(hints[f.name]), indent + 1)}')
    return "{\n" + ",\n".join(parts) + "\n" + "  " * indent + "}"


def dumps_scenario(sc: Scenario) -> str:
    """Canonical text: fixed field order, 12 significant digits, trailing newline."""
    return _emit_obj(sc, 0) + "\n"


def _key_line(text: str, key: str) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _tuplify(v, where):
    if isinstance(v, list):
        return tuple(_tuplify(x, where) for x in v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DocumentError(f"{where}: expected numbers, got {v!r}")
    return float(v)


def _build(cls, data, text: str, path: str):
    if not isinstance(data, dict):
        raise DocumentError(f"{path or 'document'}: expected an object")
    names = [f.name for f in dataclasses.fields(cls)]
    for k in data:
        if k not in names:
            raise DocumentError(f"unknown field {path + k!r}", _key_line(text, k))
    hints = _hints(cls)
    kw = {}
    for k, v in data.items():
        where = path + k
        sub = _NESTED.get((cls, k))
        try:
            if sub is not None and (cls, k) in _LISTS:
                if not isinstance(v, list):
                    raise DocumentError(f"{where}: expected a list")
                kw[k] = tuple(_build(sub, x, text, f"{where}[{i}].") for i, x in enumerate(v))
                continue
            if sub is not None:
                kw[k] = _build(sub, v, text, where + ".")
                continue
            kind = _base_kind(hints[k])
            if v is None:
                if typing.get_origin(hints[k]) is not typing.Union:
                    raise DocumentError(f"{where}: may not be null")
                kw[k] = None
            elif kind is bool:
                if not isinstance(v, bool):
                    raise DocumentError(f"{where}: expected true/false")
                kw[k] = v
            elif kind is int:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise DocumentError(f"{where}: expected an integer")
                kw[k] = v
            elif kind is float:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise DocumentError(f"{where}: expected a number")
                kw[k] = float(v)
            elif kind is str:
                if not isinstance(v, str):
                    raise DocumentError(f"{where}: expected a string")
                kw[k] = v
            else:
                kw[k] = _tuplify(v, where)
        except DocumentError as e:
            if e.line is None:
                raise DocumentError(str(e), _key_line(text, k)) from None
            raise
    return cls(**kw)


def scenario_from_dict(data: dict, text: str = "") -> Scenario:
    return _build(Scenario, data, text, "")


def loads_scenario(text: str, check: bool = True) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(e.msg, e.lineno) from None
    if not isinstance(data, dict):
        raise DocumentError("document must be an object", 1)
    if data.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise DocumentError(f"unsupported version {data.get('version')!r}", _key_line(text, "version"))
    sc = scenario_from_dict(data, text)
    if check:
        validate(sc)
    return sc


def load_scenario(path, check: bool = True) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read(), check)


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_scenario(sc))


def scenario_to_dict(sc: Scenario) -> dict:
    return json.loads(dumps_scenario(sc))


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(dumps_scenario(sc).encode("utf-8")).hexdigest()


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(sc: Scenario, overrides: Iterable[str]) -> Scenario:
    """Apply ``key=value`` edits on the document view.

    Keys are dotted paths (``estimation.kf.q``, ``robots.0.r_s``); ``*``
    selects every list element (``robots.*.dynamics=double``). Values are
    JSON, falling back to a bare string.
    """
    doc = scenario_to_dict(sc)
    for item in overrides:
        if "=" not in item:
            raise DocumentError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        value = _parse_value(raw.strip())
        targets = [doc]
        for p in parts[:-1]:
            nxt = []
            for t in targets:
                if isinstance(t, list):
                    if p == "*":
                        nxt.extend(t)
                    elif p.isdigit() and int(p) < len(t):
                        nxt.append(t[int(p)])
                    else:
                        raise DocumentError(f"override {key!r}: bad index {p!r}")
                elif isinstance(t, dict) and p in t:
                    nxt.append(t[p])
                else:
                    raise DocumentError(f"override {key!r}: unknown field {p!r}")
            targets = nxt
        last = parts[-1]
        for t in targets:
            if isinstance(t, list):
                if last == "*":
                    t[:] = [value] * len(t)
                elif last.isdigit() and int(last) < len(t):
                    t[int(last)] = value
                else:
                    raise DocumentError(f"override {key!r}: bad index {last!r}")
            elif isinstance(t, dict) and last in t:
                t[last] = value
            else:
                raise DocumentError(f"override {key!r}: unknown field {last!r}")
    out = scenario_from_dict(doc)
    validate(out)
    return out


# --- run outputs -----------------------------------------------------------

TRAJECTORY_COLUMNS = (
    "step", "id",
    "true_x", "true_y", "true_z",
    "est_x", "est_y", "est_z",
    "cov_x", "cov_y", "cov_z",
    "cmd_0", "cmd_1", "cmd_2",
    "face_count", "cell_empty", "mode", "status", "obstacle_clearance",
)


def _num(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _pad3(v) -> list:
    v = [_num(x) for x in v]
    return v + [""] * (3 - len(v))


def record_rows(rec: StepRecord) -> list:
    rows = []
    for i in range(rec.true_pos.shape[0]):
        rows.append([str(rec.step), str(i)]
                    + _pad3(rec.true_pos[i]) + _pad3(rec.est_mean[i]) + _pad3(rec.cov_diag[i])
                    + _pad3(rec.command[i][:3])
                    + [str(int(rec.face_count[i])), "1" if rec.cell_empty[i] else "0", str(rec.mode[i]),
                       str(rec.status[i]), _num(rec.obstacle_clearance[i])])
    return rows


class TrajectoryWriter:
    """Streams records to CSV; plain '\\n' line endings so files diff cleanly."""

    def __init__(self, fh):
        self.fh = fh
        self.w = csv.writer(fh, lineterminator="\n")
        self.w.writerow(TRAJECTORY_COLUMNS)
        self.rows = 0

    def write(self, rec: StepRecord):
        rows = record_rows(rec)
        self.w.writerows(rows)
        self.rows += len(rows)


def trajectory_csv(records: Iterable[StepRecord]) -> str:
    buf = io.StringIO()
    tw = TrajectoryWriter(buf)
    for r in records:
        tw.write(r)
    return buf.getvalue()


def read_trajectory(path_or_text, dimension: int = 2, is_text: bool = False) -> list:
    """Parse a trajectory CSV back into StepRecords (enough fields for metric recomputation)."""
    if is_text:
        text = path_or_text
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    by_step: dict = {}
    for r in rows:
        by_step.setdefault(int(r["step"]), []).append(r)
    f = lambda s: math.nan if s == "" else float(s)
    axes = "xyz"[:dimension]
    out = []
    for step in sorted(by_step):
        rs = sorted(by_step[step], key=lambda r: int(r["id"]))
        P = np.array([[f(r["true_" + a]) for a in axes] for r in rs])
        E = np.array([[f(r["est_" + a]) for a in axes] for r in rs])
        C = np.array([[f(r["cov_" + a]) for a in axes] for r in rs])
        U = np.array([[f(r[f"cmd_{k}"]) for k in range(3)] for r in rs])
        out.append(StepRecord(
            step, P, E, C, U,
            np.array([int(r["face_count"]) for r in rs]),
            np.array([r["cell_empty"] == "1" for r in rs]),
            tuple(r["mode"] for r in rs),
            tuple(r["status"] for r in rs),
            np.array([f(r["obstacle_clearance"]) for r in rs]),
        ))
    return out


def metrics_document(m: Metrics, sc: Scenario, wall_time: float) -> dict:
    doc: dict[str, Any] = dict(m.as_dict())
    doc["scenario_sha256"] = scenario_hash(sc)
    doc["seed"] = int(sc.seed)
    doc["wall_time_s"] = float(wall_time)
    return doc


def write_metrics(path, m: Metrics, sc: Scenario, wall_time: float) -> dict:
    doc = metrics_document(m, sc, wall_time)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc
