"""Bundled example models and privacy specs (inventory management system)."""

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture file."""
    return Path(resources.files(__package__) / name)


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text()


EXAMPLE1_MDP = "example1_mdp.json"
EXAMPLE2_POMDP = "example2_pomdp.json"
EXAMPLE1_GAMMA085 = "example1_gamma085.json"
EXAMPLE1_GAMMA085_NORMALIZED = "example1_gamma085_normalized.json"
EXAMPLE1_GAMMA030 = "example1_gamma030.json"
EXAMPLE2_GAMMA042 = "example2_gamma042.json"
EXAMPLE2_GAMMA042_NORMALIZED = "example2_gamma042_normalized.json"
