"""Access to the bundled fixture problems."""

import json
from importlib.resources import files
from pathlib import Path

from .parse import parse_problem

FIXTURES = ("p1", "p2", "p3", "p3v", "p4", "c1", "c2")


def fixture_path(name):
    """Path of a bundled fixture given 'p1', 'p1.nlp' or 'fixtures/p1.nlp'."""
    stem = Path(name).name
    if "." not in stem:
        stem += ".json" if stem.startswith("c") else ".nlp"
    return files("sensikit") / "fixtures" / stem


def load_problem(name):
    return parse_problem(fixture_path(name).read_text())


def load_conic_json(name):
    return json.loads(fixture_path(name).read_text())
