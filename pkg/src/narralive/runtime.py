"""Deterministic story traversal engine.

A Session walks one story as a state machine over visitor events and
emits a render Frame after every accepted event. The same engine backs
the author's headless preview (simulate) and the player.

Traversal semantics:
  * pages advance to their next sibling; containers that run out pop
    outward (scene -> chapter -> next chapter -> story end);
  * a Choice menu diverts the plot exactly once: completing the chosen
    option's body marks the menu consumed and merges back to the element
    after it, and a consumed menu is skipped if traversal ever passes it
    again;
  * a More menu offers optional content: each viewed option returns to
    the menu (marked viewed) and Continue moves past it;
  * explicit End elements finish the session with a distinct ending,
    running past the last chapter finishes it with an unlabeled one.

apply() is pure: it returns a new Session and never mutates its input,
so equal (session, event) pairs always produce equal results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Union

from narralive import analyzer
from narralive.diagnostics import InvalidStory
from narralive.model import (
    AssetRef,
    AudioInteraction,
    Chapter,
    Dialogue,
    End,
    InteractiveBook,
    InteractiveImage,
    Menu,
    MenuOption,
    NfcReader,
    NfcTrigger,
    Page,
    PoiTrigger,
    Question,
    Quiz,
    QrTrigger,
    RegionTrigger,
    Scene,
    Simple,
    Story,
    Video,
    ElementPath,
    children_of,
    effective_qr_payload,
    resolve,
)


class EngineError(Exception):
    code = "engine_error"


class EventNotApplicable(EngineError):
    code = "event_not_applicable"


class NoMatch(EngineError):
    code = "no_match"


class SessionFinished(EngineError):
    code = "session_finished"


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Advance:
    type = "advance"


@dataclass(frozen=True)
class SelectOption:
    type = "select_option"
    menu: str
    option: str


@dataclass(frozen=True)
class Continue:
    type = "continue"
    menu: str


@dataclass(frozen=True)
class Position:
    type = "position"
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValueError(f"position ({self.lat}, {self.lon}) out of range")


@dataclass(frozen=True)
class QrScan:
    type = "qr_scan"
    payload: str


@dataclass(frozen=True)
class NfcScan:
    type = "nfc_scan"
    tag: str


@dataclass(frozen=True)
class QuizAnswer:
    type = "quiz_answer"
    page: str
    statement: int
    answer: str

    def __post_init__(self) -> None:
        if self.answer not in ("right", "wrong"):
            raise ValueError("quiz answer must be right or wrong")


@dataclass(frozen=True)
class TextAnswer:
    type = "text_answer"
    page: str
    text: str


Event = Union[Advance, SelectOption, Continue, Position, QrScan, NfcScan, QuizAnswer, TextAnswer]

_EVENT_TYPES = {
    cls.type: cls
    for cls in (Advance, SelectOption, Continue, Position, QrScan, NfcScan, QuizAnswer, TextAnswer)
}


def event_to_dict(event: Event) -> dict:
    data = {"type": event.type}
    for name in event.__dataclass_fields__:
        data[name] = getattr(event, name)
    return data


def event_from_dict(data: dict) -> Event:
    kind = data.get("type")
    cls = _EVENT_TYPES.get(kind)
    if cls is None:
        raise ValueError(f"unknown event type {kind!r}")
    kwargs = {k: v for k, v in data.items() if k != "type"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad {kind} event: {exc}") from None


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


def _asset_dict(ref: AssetRef) -> dict:
    return {"path": ref.path, "kind": ref.kind, "draft": ref.draft}


def _hotspot_dict(hotspot) -> dict:
    if isinstance(hotspot.interaction, AudioInteraction):
        interaction = {"type": "audio", "audio": _asset_dict(hotspot.interaction.audio)}
    else:
        interaction = {"type": "text", "text": hotspot.interaction.text}
    return {"rect": list(hotspot.rect), "interaction": interaction}


def render_page(page: Page) -> dict:
    """Declarative render model for one page.

    Quiz answers and feedback are withheld (they surface per statement
    only after the visitor answers), and the NFC tag value stays on the
    physical tag.
    """
    payload = page.payload
    if isinstance(payload, Simple):
        media = [_asset_dict(r) for r in payload.images] + [_asset_dict(r) for r in payload.audio]
        return {"kind": "simple", "text": payload.text, "media": media}
    if isinstance(payload, Dialogue):
        return {
            "kind": "dialogue",
            "characters": list(payload.characters),
            "lines": [
                {"speaker": ln.speaker, "text": ln.text, "audio": _asset_dict(ln.audio)}
                for ln in payload.lines
            ],
        }
    if isinstance(payload, Quiz):
        return {
            "kind": "quiz",
            "statements": [
                {"index": i, "text": st.text} for i, st in enumerate(payload.statements)
            ],
        }
    if isinstance(payload, Video):
        return {"kind": "video", "video": _asset_dict(payload.video)}
    if isinstance(payload, InteractiveImage):
        return {
            "kind": "iimage",
            "image": _asset_dict(payload.image),
            "hotspots": [_hotspot_dict(h) for h in payload.hotspots],
        }
    if isinstance(payload, InteractiveBook):
        skim = [{"position": 0, "role": "cover", "image": _asset_dict(payload.cover)}]
        for i, bp in enumerate(payload.book_pages, start=1):
            skim.append(
                {
                    "position": i,
                    "role": "page",
                    "title": bp.title,
                    "image": _asset_dict(bp.image),
                    "hotspots": [_hotspot_dict(h) for h in bp.hotspots],
                }
            )
        return {"kind": "book", "skim": skim}
    if isinstance(payload, NfcReader):
        return {"kind": "nfc", "prompt": payload.prompt}
    if isinstance(payload, Question):
        return {"kind": "question", "prompt": payload.prompt, "input": "text"}
    raise TypeError(f"unknown payload {type(payload).__name__}")


@dataclass(frozen=True)
class PageFrame:
    kind = "page"
    seq: int
    page_id: str
    render: dict
    state: dict
    context: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "seq": self.seq, "page": self.page_id,
            "render": self.render, "state": self.state, "context": self.context,
        }


@dataclass(frozen=True)
class MenuFrame:
    kind = "menu"
    seq: int
    menu_id: str
    menu_kind: str
    style: str
    image: dict | None
    options: tuple[dict, ...]
    can_continue: bool
    context: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "seq": self.seq, "menu": self.menu_id,
            "menu_kind": self.menu_kind, "style": self.style, "image": self.image,
            "options": list(self.options), "can_continue": self.can_continue,
            "context": self.context,
        }


@dataclass(frozen=True)
class EndFrame:
    kind = "end"
    seq: int
    label: str | None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seq": self.seq, "label": self.label}


Frame = Union[PageFrame, MenuFrame, EndFrame]


def frame_fingerprint(frame: Frame) -> dict:
    """Frame content with the sequence number dropped, for comparisons."""
    data = frame.to_dict()
    data.pop("seq")
    return data


# ---------------------------------------------------------------------------
# session state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MenuState:
    viewed: frozenset[str] = frozenset()
    consumed: bool = False


@dataclass(frozen=True)
class AnswerRecord:
    page_id: str
    kind: str  # "quiz" | "question"
    frame_seq: int
    statement: int | None = None
    given: str | None = None
    correct: bool | None = None
    text: str | None = None

    def to_dict(self) -> dict:
        data = {"page": self.page_id, "kind": self.kind, "frame_seq": self.frame_seq}
        if self.kind == "quiz":
            data.update(statement=self.statement, given=self.given, correct=self.correct)
        else:
            data.update(text=self.text)
        return data


@dataclass(frozen=True)
class LogEntry:
    event: Event | None  # None for the start frame
    frame_seq: int
    frame_kind: str


# outcome of normalization: what the cursor rests on
_PAGE, _MENU, _END = "page", "menu", "end"


@dataclass(frozen=True)
class Session:
    story: Story
    stack: tuple[tuple[ElementPath, int], ...]
    current: tuple  # (_PAGE, path) | (_MENU, path) | (_END, label)
    menu_states: dict
    answers: tuple[AnswerRecord, ...]
    finished: bool
    frame_seq: int
    log: tuple[LogEntry, ...]


def _normalize(story: Story, stack: list, states: dict) -> tuple[list, dict, tuple]:
    """Advance the cursor to the next renderable element.

    Pops completed containers, descends into chapters/scenes, skips
    consumed choice menus, and handles menu-option completion (merge-back
    for Choice, return-to-menu for More). Returns the updated stack and
    menu states plus the outcome the cursor now rests on.
    """
    while True:
        if not stack:
            return stack, states, (_END, None)
        cpath, idx = stack[-1]
        container = resolve(story, cpath)
        children = children_of(container)

        if idx >= len(children):
            if isinstance(container, MenuOption):
                menu_path = cpath[:-1]
                menu = resolve(story, menu_path)
                state = states.get(menu_path, MenuState())
                stack.pop()
                if menu.kind == "choice":
                    states[menu_path] = replace(state, consumed=True)
                    ppath, pidx = stack[-1]
                    stack[-1] = (ppath, pidx + 1)  # merge back past the menu
                    continue
                states[menu_path] = replace(state, viewed=state.viewed | {container.id})
                return stack, states, (_MENU, menu_path)
            stack.pop()
            if isinstance(container, Story):
                continue  # empty stack -> implicit end
            ppath, pidx = stack[-1]
            stack[-1] = (ppath, pidx + 1)
            continue

        child = children[idx]
        child_path = cpath + (idx,)
        if isinstance(child, (Chapter, Scene)):
            stack.append((child_path, 0))
            continue
        if isinstance(child, Page):
            return stack, states, (_PAGE, child_path)
        if isinstance(child, Menu):
            if child.kind == "choice" and states.get(child_path, MenuState()).consumed:
                stack[-1] = (cpath, idx + 1)  # already decided; pass over
                continue
            return stack, states, (_MENU, child_path)
        if isinstance(child, End):
            return stack, states, (_END, child.label)
        raise TypeError(f"unexpected element {type(child).__name__}")


def _context(story: Story, stack: tuple) -> dict:
    chapter_id = scene_id = None
    node = story
    for cpath, idx in stack:
        node = resolve(story, cpath)
        children = children_of(node)
        if idx < len(children):
            element = children[idx]
            if isinstance(element, Chapter):
                chapter_id = element.id
            elif isinstance(element, Scene):
                scene_id = element.id
    return {"chapter": chapter_id, "scene": scene_id}


def _trigger_dict(story: Story, menu: Menu, option: MenuOption) -> dict | None:
    trigger = option.trigger
    if trigger is None:
        return None
    if isinstance(trigger, PoiTrigger):
        return {"type": "poi", "rect": list(trigger.rect)}
    if isinstance(trigger, RegionTrigger):
        return {
            "type": "region",
            "lat": trigger.lat, "lon": trigger.lon, "radius_m": trigger.radius_m,
        }
    if isinstance(trigger, QrTrigger):
        return {"type": "qr", "payload": effective_qr_payload(story, menu, option)}
    if isinstance(trigger, NfcTrigger):
        return {"type": "nfc", "tag": trigger.tag}
    raise TypeError(type(trigger).__name__)


def _page_state(page: Page, answers: tuple[AnswerRecord, ...]) -> dict:
    payload = page.payload
    if isinstance(payload, Quiz):
        answered: dict[int, dict] = {}
        for record in answers:
            if record.page_id == page.id and record.kind == "quiz":
                statement = payload.statements[record.statement]
                answered[record.statement] = {
                    "given": record.given,
                    "correct": record.correct,
                    "feedback": statement.feedback,
                }
        return {"answered": {str(k): answered[k] for k in sorted(answered)}}
    if isinstance(payload, Question):
        responses = [
            r.text for r in answers if r.page_id == page.id and r.kind == "question"
        ]
        return {"responses": responses}
    return {}


def _emit(session: Session) -> tuple[Session, Frame]:
    """Frame for the session's current outcome, with the next seq."""
    seq = session.frame_seq + 1
    what, detail = session.current
    if what == _PAGE:
        page = resolve(session.story, detail)
        frame: Frame = PageFrame(
            seq=seq,
            page_id=page.id,
            render=render_page(page),
            state=_page_state(page, session.answers),
            context=_context(session.story, session.stack),
        )
    elif what == _MENU:
        menu = resolve(session.story, detail)
        state = session.menu_states.get(detail, MenuState())
        frame = MenuFrame(
            seq=seq,
            menu_id=menu.id,
            menu_kind=menu.kind,
            style=menu.style,
            image=_asset_dict(menu.image) if menu.image else None,
            options=tuple(
                {
                    "id": option.id,
                    "label": option.label,
                    "trigger": _trigger_dict(session.story, menu, option),
                    "viewed": option.id in state.viewed,
                }
                for option in menu.options
            ),
            can_continue=menu.kind == "more",
            context=_context(session.story, session.stack),
        )
    else:
        frame = EndFrame(seq=seq, label=detail)
    session = replace(
        session,
        frame_seq=seq,
        finished=what == _END,
        log=session.log + (LogEntry(None, seq, frame.kind),),
    )
    return session, frame


def start(story: Story) -> tuple[Session, Frame]:
    """Open a session on a validated story and emit the first frame."""
    errors = [d for d in analyzer.validate(story) if d.severity == "error"]
    if errors:
        raise InvalidStory(errors)
    stack, states, outcome = _normalize(story, [((), 0)], {})
    session = Session(
        story=story,
        stack=tuple(stack),
        current=outcome,
        menu_states=states,
        answers=(),
        finished=False,
        frame_seq=0,
        log=(),
    )
    return _emit(session)


def apply(session: Session, event: Event) -> tuple[Session, Frame]:
    """Feed one visitor event into the session.

    Raises EventNotApplicable when the event does not fit the current
    frame, NoMatch for unrecognized scans, SessionFinished after an end
    frame. The input session is never modified.
    """
    if session.finished:
        raise SessionFinished("the session already reached an end frame")

    if isinstance(event, Advance):
        return _advance_from_page(session, event)
    if isinstance(event, SelectOption):
        return _select_option(session, event, event.menu, event.option)
    if isinstance(event, Continue):
        return _continue_menu(session, event)
    if isinstance(event, Position):
        return _position(session, event)
    if isinstance(event, QrScan):
        return _qr_scan(session, event)
    if isinstance(event, NfcScan):
        return _nfc_scan(session, event)
    if isinstance(event, QuizAnswer):
        return _quiz_answer(session, event)
    if isinstance(event, TextAnswer):
        return _text_answer(session, event)
    raise EventNotApplicable(f"unknown event {type(event).__name__}")


def _current_page(session: Session) -> Page | None:
    if session.current[0] == _PAGE:
        return resolve(session.story, session.current[1])
    return None


def _current_menu(session: Session) -> tuple[Menu, ElementPath] | None:
    if session.current[0] == _MENU:
        path = session.current[1]
        return resolve(session.story, path), path
    return None


def _step(session: Session, event: Event, stack: list, states: dict) -> tuple[Session, Frame]:
    stack, states, outcome = _normalize(session.story, stack, states)
    session = replace(
        session, stack=tuple(stack), menu_states=states, current=outcome
    )
    session, frame = _emit(session)
    return _record(session, event, frame)


def _record(session: Session, event: Event, frame: Frame) -> tuple[Session, Frame]:
    entries = list(session.log)
    entries[-1] = LogEntry(event, frame.seq, frame.kind)
    return replace(session, log=tuple(entries)), frame


def _advance_from_page(session: Session, event: Event) -> tuple[Session, Frame]:
    page = _current_page(session)
    if page is None:
        raise EventNotApplicable("advance applies to a page frame")
    if isinstance(page.payload, NfcReader):
        raise EventNotApplicable(f"page {page.id!r} waits for an nfc scan")
    stack = list(session.stack)
    cpath, idx = stack[-1]
    stack[-1] = (cpath, idx + 1)
    return _step(session, event, stack, dict(session.menu_states))


def _select_option(session: Session, event: Event, menu_id: str, option_id: str):
    at_menu = _current_menu(session)
    if at_menu is None or at_menu[0].id != menu_id:
        for path, state in session.menu_states.items():
            if state.consumed and resolve(session.story, path).id == menu_id:
                raise EventNotApplicable(f"choice menu {menu_id!r} is already consumed")
        raise EventNotApplicable(f"menu {menu_id!r} is not the current frame")
    menu, menu_path = at_menu
    state = session.menu_states.get(menu_path, MenuState())
    if menu.kind == "choice" and state.consumed:
        raise EventNotApplicable(f"choice menu {menu_id!r} is already consumed")
    for opt_index, option in enumerate(menu.options):
        if option.id == option_id:
            break
    else:
        raise EventNotApplicable(f"menu {menu_id!r} has no option {option_id!r}")
    stack = list(session.stack)
    stack.append((menu_path + (opt_index,), 0))
    return _step(session, event, stack, dict(session.menu_states))


def _continue_menu(session: Session, event: Continue) -> tuple[Session, Frame]:
    at_menu = _current_menu(session)
    if at_menu is None or at_menu[0].id != event.menu:
        raise EventNotApplicable(f"menu {event.menu!r} is not the current frame")
    menu, _ = at_menu
    if menu.kind != "more":
        raise EventNotApplicable("continue applies to More menus only")
    stack = list(session.stack)
    cpath, idx = stack[-1]
    stack[-1] = (cpath, idx + 1)
    return _step(session, event, stack, dict(session.menu_states))


def _position(session: Session, event: Position) -> tuple[Session, Frame]:
    at_menu = _current_menu(session)
    if at_menu is None or at_menu[0].style != "map":
        session, frame = _emit(session)  # position updates are never errors
        return _record(session, event, frame)
    menu, menu_path = at_menu
    best: tuple[float, int, MenuOption] | None = None
    for index, option in enumerate(menu.options):
        trigger = option.trigger
        if not isinstance(trigger, RegionTrigger):
            continue
        distance = analyzer.haversine_m(event.lat, event.lon, trigger.lat, trigger.lon)
        if distance <= trigger.radius_m:  # boundary inclusive
            if best is None or (distance, index) < (best[0], best[1]):
                best = (distance, index, option)
    if best is None:
        session, frame = _emit(session)
        return _record(session, event, frame)
    return _select_option(session, event, menu.id, best[2].id)


def _qr_scan(session: Session, event: QrScan) -> tuple[Session, Frame]:
    at_menu = _current_menu(session)
    if at_menu is not None and at_menu[0].style == "qr":
        menu, _ = at_menu
        for option in menu.options:
            if effective_qr_payload(session.story, menu, option) == event.payload:
                return _select_option(session, event, menu.id, option.id)
        raise NoMatch(f"payload {event.payload!r} matches no option of menu {menu.id!r}")
    raise NoMatch("no scannable qr menu is showing")


def _nfc_scan(session: Session, event: NfcScan) -> tuple[Session, Frame]:
    page = _current_page(session)
    if page is not None and isinstance(page.payload, NfcReader):
        if page.payload.tag == event.tag:
            stack = list(session.stack)
            cpath, idx = stack[-1]
            stack[-1] = (cpath, idx + 1)
            return _step(session, event, stack, dict(session.menu_states))
        raise NoMatch(f"tag {event.tag!r} does not match this page")
    raise NoMatch("no nfc page is showing")


def _quiz_answer(session: Session, event: QuizAnswer) -> tuple[Session, Frame]:
    page = _current_page(session)
    if page is None or page.id != event.page or not isinstance(page.payload, Quiz):
        raise EventNotApplicable(f"quiz page {event.page!r} is not the current frame")
    statements = page.payload.statements
    if not (0 <= event.statement < len(statements)):
        raise EventNotApplicable(f"page {page.id!r} has no statement {event.statement}")
    record = AnswerRecord(
        page_id=page.id,
        kind="quiz",
        frame_seq=session.frame_seq + 1,
        statement=event.statement,
        given=event.answer,
        correct=event.answer == statements[event.statement].answer,
    )
    session = replace(session, answers=session.answers + (record,))
    session, frame = _emit(session)
    return _record(session, event, frame)


def _text_answer(session: Session, event: TextAnswer) -> tuple[Session, Frame]:
    page = _current_page(session)
    if page is None or page.id != event.page or not isinstance(page.payload, Question):
        raise EventNotApplicable(f"question page {event.page!r} is not the current frame")
    record = AnswerRecord(
        page_id=page.id, kind="question", frame_seq=session.frame_seq + 1, text=event.text
    )
    session = replace(session, answers=session.answers + (record,))
    session, frame = _emit(session)
    return _record(session, event, frame)


# ---------------------------------------------------------------------------
# transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    event: Event | None
    frame_seq: int | None
    frame_kind: str | None
    error: tuple[str, str] | None = None  # (code, message)


@dataclass(frozen=True)
class Transcript:
    story_id: str
    entries: tuple[TranscriptEntry, ...]
    answers: tuple[AnswerRecord, ...]

    @property
    def events(self) -> list[Event]:
        return [e.event for e in self.entries if e.event is not None]

    def frame_sequence(self) -> list[tuple[int, str]]:
        return [
            (e.frame_seq, e.frame_kind) for e in self.entries if e.frame_seq is not None
        ]

    def to_jsonl(self) -> str:
        lines = []
        for entry in self.entries:
            if entry.event is None:
                lines.append(
                    {
                        "type": "start",
                        "story": self.story_id,
                        "frame": {"seq": entry.frame_seq, "kind": entry.frame_kind},
                    }
                )
            elif entry.error is not None:
                lines.append(
                    {
                        "type": "error",
                        "event": event_to_dict(entry.event),
                        "error": {"code": entry.error[0], "message": entry.error[1]},
                    }
                )
            else:
                lines.append(
                    {
                        "type": "event",
                        "event": event_to_dict(entry.event),
                        "frame": {"seq": entry.frame_seq, "kind": entry.frame_kind},
                    }
                )
        lines.append({"type": "answers", "answers": [a.to_dict() for a in self.answers]})
        return "\n".join(json.dumps(line, sort_keys=True) for line in lines) + "\n"


def transcript(session: Session) -> Transcript:
    """Event/frame log of everything this session accepted so far."""
    return Transcript(
        story_id=session.story.id,
        entries=tuple(
            TranscriptEntry(entry.event, entry.frame_seq, entry.frame_kind)
            for entry in session.log
        ),
        answers=session.answers,
    )


def simulate(story: Story, events: list[Event]) -> Transcript:
    """start() plus apply() over the whole script; engine errors become
    transcript entries rather than aborting the run."""
    session, _ = start(story)
    entries = [TranscriptEntry(None, 1, session.log[0].frame_kind)]
    for event in events:
        try:
            session, frame = apply(session, event)
            entries.append(TranscriptEntry(event, frame.seq, frame.kind))
        except EngineError as exc:
            entries.append(TranscriptEntry(event, None, None, (exc.code, str(exc))))
    return Transcript(story.id, tuple(entries), session.answers)


def events_from_jsonl(text: str) -> list[Event]:
    """One JSON event per line; blank lines ignored."""
    events = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {i}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValueError(f"line {i}: event must be a JSON object")
        try:
            events.append(event_from_dict(data))
        except ValueError as exc:
            raise ValueError(f"line {i}: {exc}") from None
    return events
