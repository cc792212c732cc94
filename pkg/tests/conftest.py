from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from promptware.packs import (
    default_feedback_pack_path,
    default_pack_dir,
    load_feedback_pack,
)


@pytest.fixture(scope="session")
def feedback_pack():
    return load_feedback_pack(default_feedback_pack_path())


@pytest.fixture()
def tmp_pack_dir(tmp_path):
    """A writable copy of the bundled pack directory."""
    target = tmp_path / "packs"
    shutil.copytree(default_pack_dir(), target)
    return target


@pytest.fixture()
def write_pack(tmp_path):
    """Write an ad-hoc pack document to its own directory and return the dir."""

    counter = {"n": 0}

    def _write(doc: dict, filename: str = "pack.json") -> Path:
        counter["n"] += 1
        directory = tmp_path / f"packdir{counter['n']}"
        directory.mkdir()
        (directory / filename).write_text(json.dumps(doc), encoding="utf-8")
        return directory

    return _write
