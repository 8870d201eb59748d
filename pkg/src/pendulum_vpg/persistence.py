"""Policy archives (JSON), run logs, sweep reports and trajectory CSVs."""
from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from typing import IO, Any

import numpy as np

from .policy import PARAM_NAMES, PolicyParameters

FORMAT_VERSION = 1
TRACE_HEADER = ("t_s", "x_mm", "x_dot_mm_s", "alpha_deg", "alpha_dot_deg_s", "voltage_V", "reward")
SWEEP_HEADER = ("gamma", "learning_rate", "seed", "succeeded", "trials", "wall_time_s")


class ArchiveError(ValueError):
    """Base class for policy archive problems."""


class MalformedArchiveError(ArchiveError):
    pass


class UnsupportedVersionError(ArchiveError):
    pass


class ShapeMismatchError(ArchiveError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NonFiniteError(ArchiveError):
    def __init__(self, field: str):
        super().__init__(f"{field}: contains NaN or infinite entries")
        self.field = field


def _json_array(a: np.ndarray) -> str:
    # 17 significant digits round-trip every float64 exactly.
    if a.ndim == 1:
        return "[" + ", ".join(format(float(v), ".17g") for v in a) + "]"
    return "[" + ", ".join(_json_array(row) for row in a) + "]"


def export_policy(params: PolicyParameters, meta: dict[str, Any] | None = None) -> str:
    """Serialise parameters to a self-describing JSON document."""
    if not params.is_finite():
        raise ValueError("cannot export non-finite parameters")
    header = {
        "format_version": FORMAT_VERSION,
        "hidden_width": params.hidden_width,
        "shapes": {name: list(getattr(params, name).shape) for name in PARAM_NAMES},
        "metadata": {"created": datetime.now(timezone.utc).isoformat(), **(meta or {})},
    }
    body = json.dumps(header, indent=2, allow_nan=False, default=_jsonable)[:-2]
    arrays = ",\n".join(f'  "{name}": {_json_array(getattr(params, name))}' for name in PARAM_NAMES)
    return body + ",\n" + arrays + "\n}\n"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def load_archive(document: str | bytes | dict) -> tuple[PolicyParameters, dict]:
    """Parse and validate an archive; returns ``(params, metadata)``."""
    if isinstance(document, dict):
        doc = document
    else:
        try:
            doc = json.loads(document, parse_constant=lambda c: float(c))
        except json.JSONDecodeError as exc:
            raise MalformedArchiveError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedArchiveError("archive must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format_version: unsupported value {version!r}")
    width = doc.get("hidden_width")
    if not isinstance(width, int) or isinstance(width, bool) or width < 1:
        raise MalformedArchiveError(f"hidden_width: expected a positive integer, got {width!r}")

    expected = {"w1": (width, 4), "b1": (width,), "w2": (2, width), "b2": (2,)}
    arrays = {}
    for name, shape in expected.items():
        if name not in doc:
            raise MalformedArchiveError(f"{name}: missing")
        try:
            arr = np.array(doc[name], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ShapeMismatchError(name, f"not a numeric array ({exc})") from exc
        if arr.shape != shape:
            raise ShapeMismatchError(name, f"shape {arr.shape}, expected {shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError(name)
        arrays[name] = arr
    return PolicyParameters(**arrays), dict(doc.get("metadata") or {})


def import_policy(document: str | bytes | dict) -> PolicyParameters:
    return load_archive(document)[0]


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    text = repr(v)
    return text[:-2] if text.endswith(".0") else text


def write_trace(trace, params, stream: IO[str]) -> None:
    """Write one CSV row per step, describing the state *after* that step.

    Units: millimetres, degrees, volts; time is ``(step + 1) * h``.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    deg = 180.0 / math.pi
    for t, (s, v, r) in enumerate(zip(trace.next_states, trace.voltages, trace.rewards)):
        w.writerow((_num(round((t + 1) * params.h, 9)), _num(s[0] * 1000.0), _num(s[2] * 1000.0),
                    _num(s[1] * deg), _num(s[3] * deg), _num(v), _num(r)))


def trace_to_csv(trace, params) -> str:
    buf = io.StringIO()
    write_trace(trace, params, buf)
    return buf.getvalue()


def write_run_log(result, env, stream: IO[str], extra: dict | None = None,
                  timestamp: bool = True) -> None:
    doc = {
        "config": result.config.to_dict(),
        "env": {"init_x_bound": env.init_x_bound, "init_alpha_bound": env.init_alpha_bound,
                "init_velocity_bound": env.init_velocity_bound, "max_steps": env.max_steps,
                "params": env.params.to_dict()},
        "succeeded": result.succeeded,
        "trials_used": result.trials_used,
        "episode_lengths": list(map(int, result.episode_lengths)),
        **(extra or {}),
        # Only this block varies between identical runs.
        "timing": {"wall_time_s": result.wall_time_s},
    }
    if timestamp:
        doc["timing"]["created"] = datetime.now(timezone.utc).isoformat()
    json.dump(doc, stream, indent=2, allow_nan=False)
    stream.write("\n")


def write_sweep_csv(report, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in report.rows:
        w.writerow((repr(row.gamma), repr(row.learning_rate), row.seed, int(row.succeeded),
                    row.trials, f"{row.wall_time_s:.6f}"))


def read_sweep_csv(stream: IO[str]):
    from .training import SweepReport, SweepRow

    rows = []
    for rec in csv.DictReader(stream):
        rows.append(SweepRow(float(rec["gamma"]), float(rec["learning_rate"]), int(rec["seed"]),
                             bool(int(rec["succeeded"])), int(rec["trials"]),
                             float(rec["wall_time_s"])))
    return SweepReport(rows)
