"""Bundled partition documents (see PROVENANCE.md)."""
from __future__ import annotations

from importlib import resources

from ..partition import PwaPartition, load_partition

FIXTURES = ("SAT1D", "GAIN2", "BOX2", "HET2")


def fixture_text(name: str) -> str:
    key = name.upper()
    if key not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return resources.files(__name__).joinpath(f"{key.lower()}.json").read_text()


def load_fixture(name: str) -> PwaPartition:
    return load_partition(fixture_text(name))
