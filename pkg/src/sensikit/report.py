"""JSON reports: assembly, schema and deterministic serialization."""

import json
import math

import jsonschema
import numpy as np

from . import __version__

COMMANDS = ("solve", "analyze", "diff", "directional", "value", "path", "conic-diff", "oracle")
STATUSES = ("ok", "regularity_not_certified")

_NUM_ARRAY = {"type": "array"}
_SECTION = {"type": ["object", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "problem", "command", "status", "wall_time"],
    "properties": {
        "version": {"type": "string"},
        "problem": {"type": "string"},
        "command": {"enum": list(COMMANDS)},
        "status": {"enum": list(STATUSES)},
        "failed": {"type": "array", "items": {"type": "string"}},
        "message": {"type": "string"},
        "parameters": _NUM_ARRAY,
        "solution": {
            "type": "object",
            "required": ["x", "y", "z", "value"],
            "properties": {"x": _NUM_ARRAY, "y": _NUM_ARRAY, "z": _NUM_ARRAY,
                           "value": {"type": ["number", "null"]}},
        },
        "kkt_residual": _SECTION,
        "active": {"type": "object"},
        "cq": _SECTION,
        "sensitivity": _SECTION,
        "directional": _SECTION,
        "value": _SECTION,
        "path": _SECTION,
        "conic": _SECTION,
        "barrier": _SECTION,
        "oracle": _SECTION,
        "wall_time": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}


def clean(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def make_report(command, problem, status="ok", wall_time=0.0, **sections):
    rep = {"version": __version__, "problem": problem, "command": command, "status": status}
    rep.update({k: v for k, v in sections.items() if v is not None})
    rep["wall_time"] = float(wall_time)
    return clean(rep)


def validate_report(report):
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def dumps(report):
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False)


def loads(text):
    return validate_report(json.loads(text))


def numeric_fields(report):
    """The report without timing, for determinism checks."""
    return {k: v for k, v in report.items() if k != "wall_time"}
