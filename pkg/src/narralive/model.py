"""Story tree value types, element addressing, and structural editing.

The story model is a tree: Story -> Chapters -> (Scenes | Menus) ->
(Pages | Menus | Ends), with menus branching into options whose bodies
nest further scenes, pages, menus, and ends. All types are immutable
values; editing operations (copy/move) return new trees and never touch
their inputs.

Elements are addressed by ElementPath: a tuple of child indices from the
story root. Path () is the story itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Union

ID_RE = re.compile(r"^[a-z0-9-]{1,64}$")
ID_MAX_LEN = 64

# Asset paths double as bare tokens in the story DSL, so the charset is
# deliberately narrow.
ASSET_PATH_RE = re.compile(r"^[A-Za-z0-9._/-]+$")

ASSET_KINDS = ("image", "audio", "video")
MENU_KINDS = ("choice", "more")
MENU_STYLES = ("tiles", "list", "iimage", "map", "qr")
QUIZ_ANSWERS = ("right", "wrong")
ONSITE_LEVELS = ("none", "invited", "public")

ElementPath = tuple[int, ...]


class ModelError(Exception):
    """Base class for story-tree addressing and editing errors."""


class PathOutOfRange(ModelError):
    """An ElementPath index exceeds the sibling list it indexes into."""


class IllegalContainer(ModelError):
    """The destination container cannot hold elements of this type."""


class MoveIntoSelf(ModelError):
    """The move destination lies inside the moved subtree."""


def _check_id(value: str, what: str) -> None:
    if not isinstance(value, str) or not ID_RE.match(value):
        raise ValueError(f"{what} id {value!r} must match [a-z0-9-]{{1,64}}")


@dataclass(frozen=True)
class AssetRef:
    """Reference to a media file, relative to the story's asset root.

    sha256 and bytes stay None while authoring; the bundle compiler fills
    them into the manifest (not into the story document itself).
    """

    path: str
    kind: str
    sha256: str | None = None
    bytes: int | None = None
    draft: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ASSET_KINDS:
            raise ValueError(f"asset kind {self.kind!r} not one of {ASSET_KINDS}")
        p = self.path
        if not p or not ASSET_PATH_RE.match(p):
            raise ValueError(f"asset path {p!r} has unsupported characters")
        parts = p.split("/")
        if p.startswith("/") or p.endswith("/") or "" in parts or "." in parts or ".." in parts:
            raise ValueError(f"asset path {p!r} must be a normalized relative path")
        if self.sha256 is not None and not re.match(r"^[0-9a-f]{64}$", self.sha256):
            raise ValueError("sha256 must be 64 lowercase hex chars")


@dataclass(frozen=True)
class ValidationEvidence:
    """Author-declared evidence backing the experience readiness estimate."""

    structure_validated: bool = False
    sample_scenes_validated: bool = False
    validated_onsite: str = "none"

    def __post_init__(self) -> None:
        if self.validated_onsite not in ONSITE_LEVELS:
            raise ValueError(f"validated_onsite must be one of {ONSITE_LEVELS}")


@dataclass(frozen=True)
class TextInteraction:
    text: str


@dataclass(frozen=True)
class AudioInteraction:
    audio: AssetRef

    def __post_init__(self) -> None:
        if self.audio.kind != "audio":
            raise ValueError("hotspot audio interaction needs an audio asset")


Interaction = Union[TextInteraction, AudioInteraction]


@dataclass(frozen=True)
class Hotspot:
    """Tappable rectangle on an image, in fractions of the image size."""

    rect: tuple[float, float, float, float]
    interaction: Interaction

    def __post_init__(self) -> None:
        x, y, w, h = self.rect
        if not (x >= 0 and y >= 0 and w > 0 and h > 0 and x + w <= 1 and y + h <= 1):
            raise ValueError(f"hotspot rect {self.rect} must lie within the unit square")


@dataclass(frozen=True)
class Simple:
    """Plain content screen: text plus optional images and audio clips."""

    kind = "simple"
    text: str = ""
    images: tuple[AssetRef, ...] = ()
    audio: tuple[AssetRef, ...] = ()

    def __post_init__(self) -> None:
        _check_asset_kinds(self.images, "image")
        _check_asset_kinds(self.audio, "audio")


@dataclass(frozen=True)
class DialogueLine:
    speaker: str
    text: str
    audio: AssetRef

    def __post_init__(self) -> None:
        if self.audio.kind != "audio":
            raise ValueError("dialogue line needs an audio asset")


@dataclass(frozen=True)
class Dialogue:
    """Voiced-over dialogue between declared characters."""

    kind = "dialogue"
    characters: tuple[str, ...] = ()
    lines: tuple[DialogueLine, ...] = ()

    def __post_init__(self) -> None:
        declared = set(self.characters)
        for line in self.lines:
            if line.speaker not in declared:
                raise ValueError(f"dialogue line speaker {line.speaker!r} is not a declared character")


@dataclass(frozen=True)
class QuizStatement:
    text: str
    answer: str
    feedback: str = ""

    def __post_init__(self) -> None:
        if self.answer not in QUIZ_ANSWERS:
            raise ValueError(f"quiz answer must be one of {QUIZ_ANSWERS}")


@dataclass(frozen=True)
class Quiz:
    """Right-or-wrong statements with per-statement feedback."""

    kind = "quiz"
    statements: tuple[QuizStatement, ...] = ()


@dataclass(frozen=True)
class Video:
    kind = "video"
    video: AssetRef

    def __post_init__(self) -> None:
        if self.video.kind != "video":
            raise ValueError("video page needs a video asset")


@dataclass(frozen=True)
class InteractiveImage:
    """Image with hotspots that reveal text or play a sound."""

    kind = "iimage"
    image: AssetRef
    hotspots: tuple[Hotspot, ...] = ()

    def __post_init__(self) -> None:
        if self.image.kind != "image":
            raise ValueError("interactive image page needs an image asset")


@dataclass(frozen=True)
class BookPage:
    """One leaf of an interactive book: a titled image with hotspots."""

    title: str
    image: AssetRef
    hotspots: tuple[Hotspot, ...] = ()

    def __post_init__(self) -> None:
        if self.image.kind != "image":
            raise ValueError("book page needs an image asset")


@dataclass(frozen=True)
class InteractiveBook:
    """Cover plus a skimmable sequence of book pages."""

    kind = "book"
    cover: AssetRef
    book_pages: tuple[BookPage, ...] = ()

    def __post_init__(self) -> None:
        if self.cover.kind != "image":
            raise ValueError("interactive book needs a cover image asset")


@dataclass(frozen=True)
class NfcReader:
    """Prompt the visitor to scan a physical NFC tag before moving on."""

    kind = "nfc"
    prompt: str
    tag: str

    def __post_init__(self) -> None:
        if not self.tag:
            raise ValueError("nfc page needs a non-empty tag")


@dataclass(frozen=True)
class Question:
    """Free-text feedback prompt."""

    kind = "question"
    prompt: str = ""


PagePayload = Union[
    Simple, Dialogue, Quiz, Video, InteractiveImage, InteractiveBook, NfcReader, Question
]
PAGE_KINDS = ("simple", "dialogue", "quiz", "video", "iimage", "book", "nfc", "question")


def _check_asset_kinds(refs: tuple[AssetRef, ...], kind: str) -> None:
    for ref in refs:
        if ref.kind != kind:
            raise ValueError(f"expected a {kind} asset, got {ref.kind} for {ref.path!r}")


@dataclass(frozen=True)
class Page:
    id: str
    payload: PagePayload

    def __post_init__(self) -> None:
        _check_id(self.id, "page")


@dataclass(frozen=True)
class End:
    """Explicit terminal element: finishes the story on a distinct ending."""

    id: str
    label: str | None = None

    def __post_init__(self) -> None:
        _check_id(self.id, "end")


@dataclass(frozen=True)
class PoiTrigger:
    """Point-of-interest rectangle on the menu's image, unit-square fractions."""

    rect: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        x, y, w, h = self.rect
        if not (x >= 0 and y >= 0 and w > 0 and h > 0 and x + w <= 1 and y + h <= 1):
            raise ValueError(f"poi rect {self.rect} must lie within the unit square")


@dataclass(frozen=True)
class RegionTrigger:
    """Geographic trigger area: entering the circle selects the option."""

    lat: float
    lon: float
    radius_m: float

    def __post_init__(self) -> None:
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValueError(f"region center ({self.lat}, {self.lon}) out of range")
        if not self.radius_m > 0:
            raise ValueError("region radius must be positive")


@dataclass(frozen=True)
class QrTrigger:
    """QR-code trigger; payload None means "generate at publish time"."""

    payload: str | None = None


@dataclass(frozen=True)
class NfcTrigger:
    tag: str

    def __post_init__(self) -> None:
        if not self.tag:
            raise ValueError("nfc trigger needs a non-empty tag")


Trigger = Union[PoiTrigger, RegionTrigger, QrTrigger, NfcTrigger, None]


@dataclass(frozen=True)
class MenuOption:
    id: str
    label: str
    trigger: Trigger = None
    body: tuple["BodyElement", ...] = ()

    def __post_init__(self) -> None:
        _check_id(self.id, "option")


@dataclass(frozen=True)
class Menu:
    """Branch point. Choice diverts the plot once; More offers extra content."""

    id: str
    kind: str
    style: str = "tiles"
    image: AssetRef | None = None
    options: tuple[MenuOption, ...] = ()

    def __post_init__(self) -> None:
        _check_id(self.id, "menu")
        if self.kind not in MENU_KINDS:
            raise ValueError(f"menu kind must be one of {MENU_KINDS}")
        if self.style not in MENU_STYLES:
            raise ValueError(f"menu style must be one of {MENU_STYLES}")
        if self.style == "iimage":
            if self.image is None or self.image.kind != "image":
                raise ValueError("iimage-style menu needs an image asset")
        elif self.image is not None:
            raise ValueError(f"{self.style}-style menu does not take an image")


@dataclass(frozen=True)
class Scene:
    id: str
    title: str
    elements: tuple[Union[Page, Menu, End], ...] = ()

    def __post_init__(self) -> None:
        _check_id(self.id, "scene")


BodyElement = Union[Scene, Page, Menu, End]


@dataclass(frozen=True)
class Chapter:
    id: str
    title: str
    preview_image: AssetRef | None = None
    elements: tuple[Union[Scene, Menu], ...] = ()

    def __post_init__(self) -> None:
        _check_id(self.id, "chapter")
        if self.preview_image is not None and self.preview_image.kind != "image":
            raise ValueError("chapter preview needs an image asset")


@dataclass(frozen=True)
class Story:
    id: str
    title: str
    description: str = ""
    language: str = "en"
    author_tags: frozenset[str] = frozenset()
    evidence: ValidationEvidence = field(default_factory=ValidationEvidence)
    chapters: tuple[Chapter, ...] = ()

    def __post_init__(self) -> None:
        _check_id(self.id, "story")
        if not self.language or not re.match(r"^[A-Za-z0-9-]+$", self.language):
            raise ValueError(f"language tag {self.language!r} is not well-formed")


Element = Union[Story, Chapter, Scene, Page, Menu, MenuOption, End]

# Which child types each container accepts, and the field holding them.
_CONTAINER_FIELDS = {
    Story: "chapters",
    Chapter: "elements",
    Scene: "elements",
    Menu: "options",
    MenuOption: "body",
}
_LEGAL_CHILDREN = {
    Story: (Chapter,),
    Chapter: (Scene, Menu),
    Scene: (Page, Menu, End),
    Menu: (MenuOption,),
    MenuOption: (Scene, Page, Menu, End),
}


def children_of(element: Element) -> tuple | None:
    """Child list of a container element, or None for leaves (Page, End)."""
    field_name = _CONTAINER_FIELDS.get(type(element))
    if field_name is None:
        return None
    return getattr(element, field_name)


def element_id(element: Element) -> str:
    return element.id


def qr_payload(story_id: str, menu_id: str, option_id: str) -> str:
    """Published QR payload for a qr-triggered option."""
    return f"NARRALIVE:{story_id}:{menu_id}:{option_id}"


def effective_qr_payload(story: Story, menu: Menu, option: MenuOption) -> str | None:
    """Payload a scan must carry to select this option, or None if untriggered."""
    trigger = option.trigger
    if not isinstance(trigger, QrTrigger):
        return None
    if trigger.payload is not None:
        return trigger.payload
    return qr_payload(story.id, menu.id, option.id)


def resolve(story: Story, path: ElementPath) -> Element:
    """Element at `path`, where () is the story itself.

    Raises PathOutOfRange if any index exceeds its sibling list or the
    path descends into a leaf.
    """
    current: Element = story
    for depth, index in enumerate(path):
        children = children_of(current)
        if children is None:
            raise PathOutOfRange(
                f"path {path} descends into a leaf at depth {depth}"
            )
        if not (0 <= index < len(children)):
            raise PathOutOfRange(
                f"path {path}: index {index} out of range at depth {depth}"
                f" ({len(children)} children)"
            )
        current = children[index]
    return current


def iter_elements(story: Story) -> Iterator[tuple[ElementPath, Element]]:
    """Depth-first walk over all addressable elements, story excluded."""

    def walk(prefix: ElementPath, element: Element) -> Iterator[tuple[ElementPath, Element]]:
        children = children_of(element)
        if children is None:
            return
        for i, child in enumerate(children):
            path = prefix + (i,)
            yield path, child
            yield from walk(path, child)

    yield from walk((), story)


def all_ids(story: Story) -> list[str]:
    """Every identifier in the story, document order, story id first."""
    ids = [story.id]
    for _, element in iter_elements(story):
        ids.append(element.id)
    return ids


def payload_assets(payload: PagePayload) -> Iterator[AssetRef]:
    """Every asset a page payload refers to, document order."""
    if isinstance(payload, Simple):
        yield from payload.images
        yield from payload.audio
    elif isinstance(payload, Dialogue):
        for line in payload.lines:
            yield line.audio
    elif isinstance(payload, Video):
        yield payload.video
    elif isinstance(payload, InteractiveImage):
        yield payload.image
        for hotspot in payload.hotspots:
            if isinstance(hotspot.interaction, AudioInteraction):
                yield hotspot.interaction.audio
    elif isinstance(payload, InteractiveBook):
        yield payload.cover
        for book_page in payload.book_pages:
            yield book_page.image
            for hotspot in book_page.hotspots:
                if isinstance(hotspot.interaction, AudioInteraction):
                    yield hotspot.interaction.audio


def iter_assets(story: Story) -> Iterator[AssetRef]:
    """Every asset the story refers to, document order, duplicates included."""
    for chapter in story.chapters:
        if chapter.preview_image is not None:
            yield chapter.preview_image
    for _, element in iter_elements(story):
        if isinstance(element, Menu) and element.image is not None:
            yield element.image
        elif isinstance(element, Page):
            yield from payload_assets(element.payload)


def _with_children(container: Element, children: tuple) -> Element:
    return replace(container, **{_CONTAINER_FIELDS[type(container)]: children})


def _rebuild(story: Story, parent_path: ElementPath, new_children: tuple) -> Story:
    """New story with the child list at parent_path swapped out."""
    if not parent_path:
        return _with_children(story, new_children)

    def rec(element: Element, path: ElementPath) -> Element:
        children = children_of(element)
        if not path:
            return _with_children(element, new_children)
        index = path[0]
        updated = rec(children[index], path[1:])
        return _with_children(
            element, children[:index] + (updated,) + children[index + 1 :]
        )

    return rec(story, parent_path)


def _check_container(element: Element, parent: Element) -> None:
    legal = _LEGAL_CHILDREN.get(type(parent))
    if legal is None or not isinstance(element, legal):
        raise IllegalContainer(
            f"a {type(element).__name__} cannot go into a {type(parent).__name__}"
        )


def _freshen_ids(element: Element, used: set[str]) -> Element:
    """Copy of the subtree with every id re-suffixed `-cN` for uniqueness.

    N is the smallest positive integer per id; `used` grows as ids are
    assigned so repeated copies stay unique.
    """

    def fresh(old: str) -> str:
        n = 1
        while True:
            suffix = f"-c{n}"
            base = old[: ID_MAX_LEN - len(suffix)]
            candidate = f"{base}{suffix}"
            if candidate not in used:
                used.add(candidate)
                return candidate
            n += 1

    def rec(el: Element) -> Element:
        el = replace(el, id=fresh(el.id))
        children = children_of(el)
        if children is None:
            return el
        return _with_children(el, tuple(rec(child) for child in children))

    return rec(element)


def copy_element(
    story: Story, src: ElementPath, dst_parent: ElementPath, dst_index: int
) -> Story:
    """Insert a fresh-id copy of the subtree at src into dst_parent.

    The source story is untouched; the copy's structure equals the source
    subtree modulo regenerated ids.
    """
    element = resolve(story, src)
    if isinstance(element, Story):
        raise IllegalContainer("the story root cannot be copied into a container")
    parent = resolve(story, dst_parent)
    _check_container(element, parent)
    siblings = children_of(parent)
    if not (0 <= dst_index <= len(siblings)):
        raise PathOutOfRange(f"insert index {dst_index} out of range (0..{len(siblings)})")
    clone = _freshen_ids(element, set(all_ids(story)))
    return _rebuild(
        story, dst_parent, siblings[:dst_index] + (clone,) + siblings[dst_index:]
    )


def move_element(
    story: Story, src: ElementPath, dst_parent: ElementPath, dst_index: int
) -> Story:
    """Detach the subtree at src and insert it under dst_parent.

    dst_index addresses the destination child list as it stands after the
    removal, so a move is undone by moving back. Ids are unchanged.
    """
    element = resolve(story, src)
    if isinstance(element, Story):
        raise IllegalContainer("the story root cannot be moved")
    if dst_parent[: len(src)] == src:
        raise MoveIntoSelf(f"destination {dst_parent} lies inside the moved subtree {src}")
    _check_container(element, resolve(story, dst_parent))

    src_parent, src_index = src[:-1], src[-1]
    old_siblings = children_of(resolve(story, src_parent))
    removed = _rebuild(
        story, src_parent, old_siblings[:src_index] + old_siblings[src_index + 1 :]
    )

    # Removal shifts later siblings at the source level down by one.
    dst = list(dst_parent)
    level = len(src) - 1
    if dst_parent[:level] == src_parent and len(dst_parent) > level and dst[level] > src_index:
        dst[level] -= 1
    adjusted = tuple(dst)

    new_parent = resolve(removed, adjusted)
    siblings = children_of(new_parent)
    if not (0 <= dst_index <= len(siblings)):
        raise PathOutOfRange(f"insert index {dst_index} out of range (0..{len(siblings)})")
    return _rebuild(
        removed, adjusted, siblings[:dst_index] + (element,) + siblings[dst_index:]
    )
