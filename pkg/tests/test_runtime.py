"""Traversal engine: transition rules, determinism, replay, merge-back."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from narralive.analyzer import enumerate_choice_paths
from narralive.model import Menu, MenuOption, Page, Simple, resolve
from narralive.runtime import (
    Advance,
    Continue,
    EndFrame,
    EventNotApplicable,
    InvalidStory,
    MenuFrame,
    NfcScan,
    NoMatch,
    PageFrame,
    Position,
    QrScan,
    QuizAnswer,
    SelectOption,
    SessionFinished,
    TextAnswer,
    apply,
    event_from_dict,
    event_to_dict,
    events_from_jsonl,
    frame_fingerprint,
    render_page,
    simulate,
    start,
    transcript,
)
from narralive.script import parse
from conftest import fixture_story, fixture_text
from drivers import drive, greedy_events
from oracles import count_elements
from storygen import random_story


class TestStart:
    def test_single_page_story_emits_page_frame(self):
        story = parse(
            'story "One"\n  chapter "C"\n    scene "S"\n'
            '      page simple\n        text "only"\n'
        ).story
        session, frame = start(story)
        assert isinstance(frame, PageFrame)
        assert frame.seq == 1
        assert frame.render["text"] == "only"

    def test_first_element_menu_emits_collapsed_menu_frame(self):
        story = parse(
            'story "M"\n  chapter "C"\n'
            "    menu choice id=m1\n"
            '      option "A" id=o1\n        page simple\n          text "a"\n'
            '      option "B" id=o2\n        page simple\n          text "b"\n'
        ).story
        session, frame = start(story)
        assert isinstance(frame, MenuFrame)
        assert frame.menu_id == "m1"
        assert [o["viewed"] for o in frame.options] == [False, False]
        assert frame.can_continue is False

    def test_invalid_story_raises(self):
        result = parse(fixture_text("invalid/dup-id.story"))
        assert result.story is None  # parse already rejects it; build by hand
        page = Page(id="p", payload=Simple(text="x"))
        from narralive.model import Chapter, Scene, Story

        story = Story(
            id="dup", title="Dup",
            chapters=(
                Chapter(id="c", title="C", elements=(
                    Scene(id="s", title="S", elements=(page, page)),
                )),
            ),
        )
        with pytest.raises(InvalidStory):
            start(story)


class TestChoiceSemantics:
    def test_select_traverse_merge_and_consume(self):
        story = fixture_story("canonical/choices-2x2.story")
        session, frame = start(story)         # p-intro
        session, frame = apply(session, Advance())
        assert isinstance(frame, MenuFrame) and frame.menu_id == "m-first"
        session, frame = apply(session, SelectOption(menu="m-first", option="o-a"))
        assert isinstance(frame, PageFrame) and frame.page_id == "p-a"
        session, frame = apply(session, Advance())   # completes o-a body
        assert isinstance(frame, PageFrame) and frame.page_id == "p-mid"

        with pytest.raises(EventNotApplicable, match="consumed"):
            apply(session, SelectOption(menu="m-first", option="o-b"))

    def test_unknown_option_rejected(self):
        story = fixture_story("canonical/choices-2x2.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        with pytest.raises(EventNotApplicable, match="no option"):
            apply(session, SelectOption(menu="m-first", option="nope"))

    def test_selecting_inactive_menu_rejected(self):
        story = fixture_story("canonical/choices-2x2.story")
        session, frame = start(story)
        with pytest.raises(EventNotApplicable):
            apply(session, SelectOption(menu="m-first", option="o-a"))

    def test_consumed_menu_skipped_on_revisit(self):
        # a Choice nested in a More option: after deciding it once,
        # re-viewing the option passes straight over the menu
        story = parse(
            'story "Revisit"\n  chapter "C"\n    scene "S"\n'
            "      menu more id=m-outer\n"
            '        option "Peek" id=o-peek\n'
            "          menu choice id=m-inner\n"
            '            option "L" id=o-l\n              page simple id=p-l\n                text "left"\n'
            '            option "R" id=o-r\n              page simple id=p-r\n                text "right"\n'
            "          page simple id=p-after\n"
            '            text "after inner"\n'
            '      page simple id=p-final\n        text "done"\n'
        ).story
        session, frame = start(story)
        assert frame.menu_id == "m-outer"
        session, frame = apply(session, SelectOption(menu="m-outer", option="o-peek"))
        assert frame.menu_id == "m-inner"
        session, frame = apply(session, SelectOption(menu="m-inner", option="o-l"))
        assert frame.page_id == "p-l"
        session, frame = apply(session, Advance())     # merge past inner
        assert frame.page_id == "p-after"
        session, frame = apply(session, Advance())     # back at outer, viewed
        assert isinstance(frame, MenuFrame) and frame.menu_id == "m-outer"
        assert frame.options[0]["viewed"] is True
        session, frame = apply(session, SelectOption(menu="m-outer", option="o-peek"))
        assert isinstance(frame, PageFrame) and frame.page_id == "p-after"


class TestMoreSemantics:
    def test_view_both_then_continue(self):
        story = fixture_story("canonical/more-extras.story")
        session, frame = start(story)          # p-statue
        session, frame = apply(session, Advance())
        assert isinstance(frame, MenuFrame) and frame.menu_id == "m-asides"
        assert frame.can_continue is True

        session, frame = apply(session, SelectOption(menu="m-asides", option="o-casting"))
        session, frame = apply(session, Advance())
        assert isinstance(frame, MenuFrame)
        assert [o["viewed"] for o in frame.options] == [True, False]

        session, frame = apply(session, SelectOption(menu="m-asides", option="o-eyes"))
        session, frame = apply(session, Advance())
        assert [o["viewed"] for o in frame.options] == [True, True]

        session, frame = apply(session, Continue(menu="m-asides"))
        assert isinstance(frame, PageFrame) and frame.page_id == "p-onward"

    def test_continue_without_viewing_is_allowed(self):
        story = fixture_story("canonical/more-extras.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        session, frame = apply(session, Continue(menu="m-asides"))
        assert frame.page_id == "p-onward"

    def test_continue_on_choice_menu_rejected(self):
        story = fixture_story("canonical/choices-2x2.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        with pytest.raises(EventNotApplicable):
            apply(session, Continue(menu="m-first"))


class TestTriggers:
    def test_position_at_region_center_selects(self):
        story = fixture_story("canonical/map-regions.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        assert frame.style == "map"
        session, frame = apply(session, Position(lat=37.9709, lon=23.7281))
        assert isinstance(frame, PageFrame) and frame.page_id == "p-mint"

    def test_position_outside_regions_reemits_unchanged(self):
        story = fixture_story("canonical/map-regions.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        before = frame_fingerprint(frame)
        session, frame2 = apply(session, Position(lat=40.0, lon=20.0))
        assert frame_fingerprint(frame2) == before
        assert frame2.seq == frame.seq + 1

    def test_position_on_page_frame_reemits(self):
        story = fixture_story("canonical/map-regions.story")
        session, frame = start(story)
        before = frame_fingerprint(frame)
        session, frame2 = apply(session, Position(lat=0.0, lon=0.0))
        assert frame_fingerprint(frame2) == before

    def test_nearest_region_wins_on_overlap(self):
        src = (
            'story "Overlap"\n  chapter "C"\n    scene "S"\n'
            "      menu choice id=m style=map\n"
            '        option "Near" id=o-near region=10,10,600\n'
            '          page simple id=p-near\n            text "near"\n'
            '        option "Far" id=o-far region=10.003,10,600\n'
            '          page simple id=p-far\n            text "far"\n'
        )
        story = parse(src).story
        session, frame = start(story)
        # point slightly toward o-near's center: both within 600 m
        session, frame = apply(session, Position(lat=10.001, lon=10.0))
        assert frame.page_id == "p-near"

    def test_qr_scan_selects_matching_option(self):
        story = fixture_story("canonical/qr-trail.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        assert frame.style == "qr"
        payload = frame.options[1]["trigger"]["payload"]
        assert payload == "NARRALIVE:label-trail:m-cases:o-lamps"
        session, frame = apply(session, QrScan(payload=payload))
        assert frame.page_id == "p-lamps"

    def test_qr_scan_unknown_payload_is_no_match(self):
        story = fixture_story("canonical/qr-trail.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        with pytest.raises(NoMatch):
            apply(session, QrScan(payload="NARRALIVE:other:m:o"))

    def test_nfc_page_blocks_advance_until_scanned(self):
        story = fixture_story("canonical/nfc-hunt.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        assert frame.render["kind"] == "nfc"
        assert "tag" not in frame.render  # tag stays on the physical object
        with pytest.raises(EventNotApplicable):
            apply(session, Advance())
        with pytest.raises(NoMatch):
            apply(session, NfcScan(tag="wrong-tag"))
        session, frame = apply(session, NfcScan(tag="amphora-tag-01"))
        assert frame.page_id == "p-reward"


class TestAnswers:
    def test_quiz_answer_correctness_and_feedback(self):
        story = fixture_story("canonical/quiz.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        assert frame.render["kind"] == "quiz"
        assert all("answer" not in st for st in frame.render["statements"])

        session, frame = apply(
            session, QuizAnswer(page="p-riders", statement=2, answer="right")
        )
        assert session.answers[-1].correct is True
        state = frame.state["answered"]["2"]
        assert state["correct"] is True
        assert "red ochre" in state["feedback"]

        session, frame = apply(
            session, QuizAnswer(page="p-riders", statement=0, answer="right")
        )
        assert session.answers[-1].correct is False

    def test_quiz_answer_wrong_page_rejected(self):
        story = fixture_story("canonical/quiz.story")
        session, frame = start(story)
        with pytest.raises(EventNotApplicable):
            apply(session, QuizAnswer(page="p-riders", statement=0, answer="right"))

    def test_text_answer_recorded(self):
        story = fixture_story("classification/dialogue-based-social.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        assert frame.render["kind"] == "question"
        session, frame = apply(
            session, TextAnswer(page="p-debate", text="The weavers, hidden.")
        )
        assert frame.state["responses"] == ["The weavers, hidden."]
        assert session.answers[-1].text == "The weavers, hidden."

    def test_answer_out_of_range_statement(self):
        story = fixture_story("canonical/quiz.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        with pytest.raises(EventNotApplicable):
            apply(session, QuizAnswer(page="p-riders", statement=9, answer="right"))


class TestEndings:
    def test_explicit_end_inside_option(self):
        story = fixture_story("canonical/endings.story")
        session, frame = start(story)
        session, frame = apply(session, Advance())
        session, frame = apply(session, SelectOption(menu="m-doors", option="o-oak"))
        session, frame = apply(session, Advance())
        assert isinstance(frame, EndFrame)
        assert frame.label == "Out through the garden"
        assert session.finished

    def test_events_after_end_raise(self):
        story = fixture_story("canonical/linear.story")
        session, frame = drive(story)[:2]
        assert isinstance(frame, EndFrame)
        with pytest.raises(SessionFinished):
            apply(session, Advance())

    def test_linear_story_k_advances_reach_implicit_end(self):
        story = fixture_story("canonical/linear.story")
        session, frame = start(story)
        kinds = [frame.kind]
        while not session.finished:
            session, frame = apply(session, Advance())
            kinds.append(frame.kind)
        assert kinds[-1] == "end"
        assert frame.label is None
        assert kinds.count("page") == 4


class TestRenderModels:
    def test_book_skim_sequence(self):
        story = fixture_story("canonical/book.story")
        pages = [
            el for _, el in __import__("narralive.model", fromlist=["iter_elements"])
            .iter_elements(story)
            if isinstance(el, Page)
        ]
        book = next(p for p in pages if p.payload.kind == "book")
        render = render_page(book)
        assert len(render["skim"]) == 5
        assert render["skim"][0]["role"] == "cover"
        assert [s["position"] for s in render["skim"]] == [0, 1, 2, 3, 4]
        assert render["skim"][1]["title"] == "Plate I. The hand"

    def test_dialogue_preserves_line_order(self):
        story = fixture_story("canonical/dialogue.story")
        session, frame = start(story)
        lines = frame.render["lines"]
        assert [ln["speaker"] for ln in lines] == ["Eleni", "Markos", "Eleni"]

    def test_quiz_render_hides_answers_and_feedback(self):
        story = fixture_story("canonical/quiz.story")
        page = resolve(story, (0, 0, 1))
        render = render_page(page)
        text = str(render)
        assert "wrong" not in text and "feedback" not in text

    def test_frames_carry_chapter_scene_context(self):
        story = fixture_story("canonical/linear.story")
        session, frame = start(story)
        assert frame.context == {"chapter": "ch-entrance", "scene": "sc-steps"}


class TestTranscripts:
    def test_fresh_session_has_start_entry_only(self):
        story = fixture_story("canonical/linear.story")
        session, frame = start(story)
        t = transcript(session)
        assert len(t.entries) == 1
        assert t.entries[0].event is None
        assert t.events == []

    def test_entry_per_applied_event(self):
        story = fixture_story("canonical/linear.story")
        session, frame = start(story)
        for _ in range(3):
            session, frame = apply(session, Advance())
        t = transcript(session)
        assert len(t.entries) == 4
        assert [e.frame_seq for e in t.entries] == [1, 2, 3, 4]

    def test_simulate_records_errors_as_entries(self):
        story = fixture_story("canonical/linear.story")
        events = [Advance()] * 10  # more advances than pages
        t = simulate(story, events)
        error_entries = [e for e in t.entries if e.error is not None]
        assert error_entries
        assert error_entries[-1].error[0] == "session_finished"

    def test_replay_reproduces_frame_sequence(self):
        story = fixture_story("canonical/choices-2x2.story")
        events = drive(
            story, signature=[("m-first", "o-b"), ("m-second", "o-c")]
        ).events
        first = simulate(story, events)
        replayed = simulate(story, first.events)
        assert first.frame_sequence() == replayed.frame_sequence()
        assert first.to_jsonl() == replayed.to_jsonl()

    def test_event_jsonl_round_trip(self):
        events = [
            Advance(),
            SelectOption(menu="m", option="o"),
            Position(lat=1.5, lon=-2.25),
            QuizAnswer(page="p", statement=1, answer="wrong"),
        ]
        text = "\n".join(
            __import__("json").dumps(event_to_dict(e)) for e in events
        )
        assert events_from_jsonl(text) == events

    def test_bad_event_line_raises_value_error(self):
        with pytest.raises(ValueError, match="line 1"):
            events_from_jsonl('{"type": "warp"}')
        with pytest.raises(ValueError):
            events_from_jsonl("not json")

    def test_event_dict_round_trip(self):
        event = QuizAnswer(page="p", statement=0, answer="right")
        assert event_from_dict(event_to_dict(event)) == event


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_simulate_is_deterministic(self, seed):
        rng = random.Random(seed)
        story = random_story(rng)
        events = drive(story).events
        once = simulate(story, events)
        twice = simulate(story, events)
        assert once == twice
        assert once.to_jsonl() == twice.to_jsonl()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_progress_bound_on_endfree_stories(self, seed):
        story = random_story(random.Random(seed), allow_ends=False)
        result = drive(story)
        frame, steps = result.frame, result.steps
        assert isinstance(frame, EndFrame)
        assert steps <= 2 * count_elements(story)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_merge_back_all_paths_same_final_frame(self, seed):
        story = random_story(random.Random(seed), allow_ends=False, max_choice_menus=4)
        enumeration = enumerate_choice_paths(story, max_paths=200)
        if enumeration.truncated:
            return
        finals = []
        for signature in enumeration.signatures:
            result = drive(story, signature=list(signature))
            assert result.selected == list(signature)
            finals.append(frame_fingerprint(result.frame))
        assert all(f == finals[0] for f in finals)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**9))
    def test_frame_seq_gapless(self, seed):
        story = random_story(random.Random(seed))
        events = drive(story).events
        t = simulate(story, events)
        seqs = [s for s, _ in t.frame_sequence()]
        assert seqs == list(range(1, len(seqs) + 1))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_consumed_choice_never_reselectable(self, seed):
        story = random_story(random.Random(seed), allow_ends=False)
        session, frame = start(story)
        taken = []
        while not session.finished:
            event = greedy_events(session, frame)
            if frame.kind == "menu" and frame.menu_kind == "choice":
                taken.append((frame.menu_id, frame.options[0]["id"]))
            session, frame = apply(session, event)
        for menu_id, option_id in taken:
            with pytest.raises((EventNotApplicable, SessionFinished)):
                apply(session, SelectOption(menu=menu_id, option=option_id))
