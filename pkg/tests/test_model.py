"""Story tree addressing and copy/move editing."""

from __future__ import annotations

import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from narralive.model import (
    AssetRef,
    Chapter,
    End,
    Hotspot,
    IllegalContainer,
    Menu,
    MenuOption,
    MoveIntoSelf,
    Page,
    PathOutOfRange,
    Simple,
    Scene,
    Story,
    TextInteraction,
    all_ids,
    children_of,
    copy_element,
    iter_elements,
    move_element,
    resolve,
)
from storygen import random_story


def _page(pid: str) -> Page:
    return Page(id=pid, payload=Simple(text=f"text for {pid}"))


def _two_chapter_story() -> Story:
    return Story(
        id="demo",
        title="Demo",
        chapters=(
            Chapter(
                id="ch1",
                title="One",
                elements=(
                    Scene(id="sc1", title="First", elements=(_page("p1"), _page("p2"))),
                    Menu(
                        id="m1",
                        kind="choice",
                        style="tiles",
                        options=(
                            MenuOption(id="o1", label="Left", body=(_page("p3"),)),
                            MenuOption(id="o2", label="Right", body=(_page("p4"),)),
                        ),
                    ),
                ),
            ),
            Chapter(
                id="ch2",
                title="Two",
                elements=(Scene(id="sc2", title="Second", elements=(_page("p5"),)),),
            ),
        ),
    )


class TestResolve:
    def test_empty_path_is_story(self):
        story = _two_chapter_story()
        assert resolve(story, ()) is story

    def test_first_chapter(self):
        story = _two_chapter_story()
        assert resolve(story, (0,)).id == "ch1"

    def test_index_past_siblings(self):
        story = _two_chapter_story()
        with pytest.raises(PathOutOfRange):
            resolve(story, (0, 5))

    def test_descending_into_leaf(self):
        story = _two_chapter_story()
        with pytest.raises(PathOutOfRange):
            resolve(story, (0, 0, 0, 0))

    def test_menu_option_body(self):
        story = _two_chapter_story()
        assert resolve(story, (0, 1, 0, 0)).id == "p3"


class TestCopy:
    def test_copy_scene_appends_with_suffix(self):
        story = _two_chapter_story()
        out = copy_element(story, (0, 0), (0,), 2)
        chapter = out.chapters[0]
        assert [e.id for e in chapter.elements] == ["sc1", "m1", "sc1-c1"]
        # id set grows by subtree size (scene + 2 pages)
        assert len(all_ids(out)) == len(all_ids(story)) + 3

    def test_copy_menu_regenerates_every_id(self):
        story = _two_chapter_story()
        out = copy_element(story, (0, 1), (1,), 1)
        copied = resolve(out, (1, 1))
        assert copied.id == "m1-c1"
        assert [o.id for o in copied.options] == ["o1-c1", "o2-c1"]
        assert len(set(all_ids(out))) == len(all_ids(out))

    def test_copy_page_into_story_root(self):
        story = _two_chapter_story()
        with pytest.raises(IllegalContainer):
            copy_element(story, (0, 0, 0), (), 0)

    def test_copy_twice_bumps_counter(self):
        story = _two_chapter_story()
        once = copy_element(story, (0, 0), (0,), 2)
        twice = copy_element(once, (0, 0), (0,), 3)
        assert resolve(twice, (0, 3)).id == "sc1-c2"

    def test_source_untouched(self):
        story = _two_chapter_story()
        before = all_ids(story)
        copy_element(story, (0, 0), (1,), 0)
        assert all_ids(story) == before

    def test_copy_preserves_structure_modulo_ids(self):
        story = _two_chapter_story()
        out = copy_element(story, (0, 1), (1,), 1)
        original = resolve(out, (0, 1))
        copied = resolve(out, (1, 1))
        assert _strip_ids(original) == _strip_ids(copied)

    def test_bad_insert_index(self):
        story = _two_chapter_story()
        with pytest.raises(PathOutOfRange):
            copy_element(story, (0, 0), (1,), 5)


class TestMove:
    def test_move_between_chapters(self):
        story = _two_chapter_story()
        out = move_element(story, (0, 0), (1,), 0)
        assert [e.id for e in out.chapters[0].elements] == ["m1"]
        assert [e.id for e in out.chapters[1].elements] == ["sc1", "sc2"]
        assert sorted(all_ids(out)) == sorted(all_ids(story))

    def test_move_into_own_option_body(self):
        story = _two_chapter_story()
        with pytest.raises(MoveIntoSelf):
            move_element(story, (0, 1), (0, 1, 0), 0)

    def test_move_then_move_back_restores(self):
        story = _two_chapter_story()
        there = move_element(story, (0, 0), (1,), 1)
        back = move_element(there, (1, 1), (0,), 0)
        assert back == story

    def test_same_list_reorder_roundtrip(self):
        story = _two_chapter_story()
        there = move_element(story, (0, 0), (0,), 1)
        assert [e.id for e in there.chapters[0].elements] == ["m1", "sc1"]
        back = move_element(there, (0, 1), (0,), 0)
        assert back == story

    def test_dest_after_source_in_same_parent(self):
        # Removing chapters[0]'s scene shifts nothing at the chapter level,
        # but path adjustment matters when destination follows the source.
        story = _two_chapter_story()
        out = move_element(story, (0,), (), 1)
        assert [c.id for c in out.chapters] == ["ch2", "ch1"]

    def test_illegal_target(self):
        story = _two_chapter_story()
        with pytest.raises(IllegalContainer):
            move_element(story, (0, 0, 0), (), 0)  # page into story root


def _strip_ids(element):
    """Structure with every id blanked, for equality modulo ids."""
    element = replace(element, id="x")
    children = children_of(element)
    if children is None:
        return element
    field = {"Story": "chapters", "Chapter": "elements", "Scene": "elements",
             "Menu": "options", "MenuOption": "body"}[type(element).__name__]
    return replace(element, **{field: tuple(_strip_ids(c) for c in children)})


def _containers(story):
    """(path, element) pairs for every container that accepts children."""
    out = [((), story)]
    for path, el in iter_elements(story):
        if children_of(el) is not None:
            out.append((path, el))
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 10**9))
def test_random_edits_keep_ids_unique(seed, op_seed):
    story = random_story(random.Random(seed))
    rng = random.Random(op_seed)
    for _ in range(4):
        elements = list(iter_elements(story))
        src_path, src_el = rng.choice(elements)
        legal_parents = [
            (p, c) for p, c in _containers(story)
            if _accepts(c, src_el) and p[: len(src_path)] != src_path
        ]
        if not legal_parents:
            continue
        dst_path, dst_el = rng.choice(legal_parents)
        if rng.random() < 0.5:
            index = rng.randint(0, len(children_of(dst_el)))
            story = copy_element(story, src_path, dst_path, index)
        else:
            # moves index the destination list as it stands after removal
            size = len(children_of(dst_el)) - (1 if src_path[:-1] == dst_path else 0)
            story = move_element(story, src_path, dst_path, rng.randint(0, size))
        ids = all_ids(story)
        assert len(ids) == len(set(ids))


def _accepts(container, element):
    from narralive.model import _LEGAL_CHILDREN

    legal = _LEGAL_CHILDREN.get(type(container))
    return legal is not None and isinstance(element, legal)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_editing_is_pure(seed):
    story = random_story(random.Random(seed))
    snapshot = random_story(random.Random(seed))
    assert story == snapshot
    copy_element(story, (0,), (), len(story.chapters))
    assert story == snapshot
    if len(story.chapters) > 1:
        move_element(story, (0,), (), len(story.chapters) - 1)
        assert story == snapshot


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_move_chapter_and_back_is_identity(seed):
    story = random_story(random.Random(seed))
    n = len(story.chapters)
    if n < 2:
        return
    there = move_element(story, (0,), (), n - 1)
    back = move_element(there, (n - 1,), (), 0)
    assert back == story


def test_copy_suffix_respects_id_length_cap():
    long_id = "x" * 64
    story = Story(
        id="s",
        title="S",
        chapters=(
            Chapter(id="ch1", title="C", elements=(
                Scene(id=long_id, title="L", elements=(_page("p1"),)),
            )),
        ),
    )
    out = copy_element(story, (0, 0), (0,), 1)
    new_id = out.chapters[0].elements[1].id
    assert len(new_id) <= 64
    assert new_id.endswith("-c1")


def test_asset_ref_rejects_escaping_paths():
    with pytest.raises(ValueError):
        AssetRef(path="../secret.png", kind="image")
    with pytest.raises(ValueError):
        AssetRef(path="/abs.png", kind="image")
    with pytest.raises(ValueError):
        AssetRef(path="a//b.png", kind="image")


def test_hotspot_rect_bounds():
    with pytest.raises(ValueError):
        Hotspot(rect=(0.8, 0.1, 0.3, 0.2), interaction=TextInteraction("hi"))
    Hotspot(rect=(0.8, 0.1, 0.2, 0.2), interaction=TextInteraction("ok"))


def test_end_accepts_optional_label():
    assert End(id="fin").label is None
    assert End(id="fin", label="The end").label == "The end"
