"""DSL parsing, diagnostics, and canonical serialization round-trips."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from narralive.model import InteractiveBook, Menu, RegionTrigger, Scene
from narralive.script import parse, serialize
from conftest import all_fixture_paths, fixture_text
from storygen import random_story

MINIMAL = """story "Tiny"
  chapter "Only"
    scene "Lone"
      page simple
        text "hello"
"""


def codes(result):
    return [d.code for d in result.diagnostics]


class TestParse:
    def test_minimal_source(self):
        result = parse(MINIMAL)
        assert result.ok
        story = result.story
        assert len(story.chapters) == 1
        assert len(story.chapters[0].elements) == 1
        scene = story.chapters[0].elements[0]
        assert isinstance(scene, Scene)
        assert len(scene.elements) == 1
        assert scene.elements[0].payload.text == "hello"

    def test_derived_ids_are_title_slugs(self):
        story = parse(MINIMAL).story
        assert story.id == "tiny"
        assert story.chapters[0].id == "only"
        assert story.chapters[0].elements[0].id == "lone"
        assert story.chapters[0].elements[0].elements[0].id == "simple"

    def test_derived_id_collision_gets_ordinal(self):
        src = MINIMAL + "      page simple\n        text \"again\"\n"
        story = parse(src).story
        scene = story.chapters[0].elements[0]
        assert [p.id for p in scene.elements] == ["simple", "simple-2"]

    def test_style_trigger_mismatch_is_e005(self):
        result = parse(fixture_text("invalid/trigger-mismatch.story"))
        assert result.story is None
        assert "E005" in codes(result)

    def test_book_fixture_payload(self):
        result = parse(fixture_text("canonical/book.story"))
        assert result.ok
        pages = [
            el
            for el in result.story.chapters[0].elements[0].elements
            if hasattr(el, "payload") and isinstance(el.payload, InteractiveBook)
        ]
        assert len(pages) == 1
        book = pages[0].payload
        assert book.cover.path == "media/atlas-cover.png"
        assert len(book.book_pages) == 4
        assert book.book_pages[0].title == "Plate I. The hand"
        assert len(book.book_pages[0].hotspots) == 1

    def test_duplicate_id_is_e003(self):
        result = parse(fixture_text("invalid/dup-id.story"))
        assert result.story is None
        assert "E003" in codes(result)

    def test_tab_and_odd_indent_are_e001(self):
        result = parse(fixture_text("invalid/bad-indent.story"))
        assert result.story is None
        assert codes(result).count("E001") >= 2

    def test_unknown_keyword_is_e002_and_recovers(self):
        result = parse(fixture_text("invalid/unknown-keyword.story"))
        assert result.story is None
        assert "E002" in codes(result)
        # the scene after the bad line was still parsed (single error)
        assert codes(result) == ["E002"]

    def test_missing_required_fields_are_e004(self):
        result = parse(fixture_text("invalid/missing-field.story"))
        assert result.story is None
        assert codes(result).count("E004") >= 2  # video line and nfc tag

    def test_malformed_values_are_e006(self):
        result = parse(fixture_text("invalid/bad-value.story"))
        assert result.story is None
        assert codes(result).count("E006") >= 2  # hotspot rect, quiz answer

    def test_multiple_errors_reported_in_one_pass(self):
        src = (
            'story "Multi" id=multi\n'
            '  chapter "One" id=ch1\n'
            '    scene "A" id=sc1\n'
            "      page video id=p1\n"
            "      page simple id=p1\n"
            '        text "dup id above"\n'
            '      widget "nope"\n'
        )
        result = parse(src)
        assert result.story is None
        assert {"E003", "E004", "E002"} <= set(codes(result))

    def test_positions_lie_within_source(self):
        for name in (
            "invalid/dup-id.story",
            "invalid/bad-indent.story",
            "invalid/trigger-mismatch.story",
            "invalid/missing-field.story",
            "invalid/bad-value.story",
        ):
            text = fixture_text(name)
            lines = text.split("\n")
            for diag in parse(text).diagnostics:
                assert 1 <= diag.line <= len(lines)
                assert 1 <= diag.column <= max(1, len(lines[diag.line - 1]) + 1)

    def test_menu_style_defaults_to_tiles(self):
        result = parse(
            'story "S"\n  chapter "C"\n    scene "Sc"\n'
            '      menu more\n        option "O"\n          page simple\n'
            '            text "x"\n'
        )
        assert result.ok
        menu = result.story.chapters[0].elements[0].elements[0]
        assert isinstance(menu, Menu)
        assert menu.style == "tiles"

    def test_region_values_parsed_as_floats(self):
        result = parse(fixture_text("canonical/map-regions.story"))
        assert result.ok
        menu = result.story.chapters[0].elements[0].elements[1]
        trigger = menu.options[0].trigger
        assert isinstance(trigger, RegionTrigger)
        assert trigger.lat == pytest.approx(37.9715)
        assert trigger.radius_m == 25.0

    def test_comments_and_blank_lines_ignored(self):
        src = "# leading comment\n\n" + MINIMAL.replace(
            '        text "hello"', '        text "hello"  # trailing comment\n'
        )
        result = parse(src)
        assert result.ok
        assert result.story.chapters[0].elements[0].elements[0].payload.text == "hello"

    def test_crlf_normalized(self):
        result = parse(MINIMAL.replace("\n", "\r\n"))
        assert result.ok

    def test_parse_is_deterministic(self):
        text = fixture_text("canonical/nested-menus.story")
        assert parse(text).story == parse(text).story


class TestSerialize:
    @pytest.mark.parametrize(
        "relpath",
        all_fixture_paths("canonical")
        + all_fixture_paths("classification")
        + all_fixture_paths("erl"),
    )
    def test_canonical_fixtures_roundtrip_bytewise(self, relpath):
        text = fixture_text(relpath)
        result = parse(text)
        assert result.ok, result.diagnostics
        assert serialize(result.story) == text

    def test_quote_in_title_escapes_and_roundtrips(self):
        src = 'story "Say \\"hi\\"" id=say-hi\n' + MINIMAL.split("\n", 1)[1]
        story = parse(src).story
        assert story.title == 'Say "hi"'
        out = serialize(story)
        assert '\\"hi\\"' in out
        assert parse(out).story == story

    def test_empty_title_scene_roundtrips(self):
        text = fixture_text("canonical/escapes.story")
        story = parse(text).story
        scene = story.chapters[0].elements[0]
        assert scene.title == ""
        assert serialize(story) == text


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_roundtrip_parse_serialize_identity(seed):
    story = random_story(random.Random(seed))
    result = parse(serialize(story))
    assert result.ok, result.diagnostics
    assert result.story == story


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_serialize_is_stable(seed):
    story = random_story(random.Random(seed))
    once = serialize(story)
    again = serialize(parse(once).story)
    assert once == again
