"""Hybrid sparse/dense retrieval-augmented generation with an offline evaluation harness."""

from importlib.resources import files
from pathlib import Path

__version__ = "0.1.0"


def fixture_dir() -> Path:
    """Directory of the bundled 30-document / 10-question offline fixture."""
    return Path(str(files(__package__) / "data" / "fixture"))
