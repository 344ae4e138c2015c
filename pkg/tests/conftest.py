"""Shared fixtures: fixture-corpus loading and asset materialization."""

from __future__ import annotations

from pathlib import Path

import pytest

from narralive.model import Story, iter_assets
from narralive.script import parse

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(relpath: str) -> str:
    return (FIXTURES / relpath).read_text(encoding="utf-8")


def fixture_story(relpath: str) -> Story:
    result = parse(fixture_text(relpath))
    assert result.ok, f"{relpath} failed to parse: {result.diagnostics}"
    return result.story


def all_fixture_paths(subdir: str) -> list[str]:
    return sorted(
        str(p.relative_to(FIXTURES)) for p in (FIXTURES / subdir).glob("*.story")
    )


def materialize_assets(story: Story, root: Path) -> None:
    """Write a placeholder file for every asset the story references."""
    for ref in iter_assets(story):
        target = root / ref.path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(f"placeholder bytes for {ref.path}\n".encode() * 3)


@pytest.fixture
def asset_root(tmp_path):
    """Per-test directory to materialize assets into."""
    root = tmp_path / "assets"
    root.mkdir()
    return root
