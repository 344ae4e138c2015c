"""Story validation, structural metrics, and experience classification.

Everything here is a pure function over an immutable Story. validate()
reports rule violations as diagnostics; the classifiers and the
readiness estimator presume a story that validates with no errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from narralive.diagnostics import ERROR, WARNING, Diagnostic, has_errors
from narralive.model import (
    Chapter,
    Dialogue,
    End,
    InteractiveBook,
    Menu,
    MenuOption,
    NfcTrigger,
    Page,
    PoiTrigger,
    Quiz,
    QrTrigger,
    RegionTrigger,
    Scene,
    Story,
    children_of,
    effective_qr_payload,
    iter_assets,
    iter_elements,
    payload_assets,
    PAGE_KINDS,
    MENU_KINDS,
    MENU_STYLES,
)

EARTH_RADIUS_M = 6_371_000.0

# Structure classes
LINEAR = "linear"
NEAR_LINEAR = "near-linear"
BRANCHING = "branching"

# Experience types; the social ones are only ever declared via author tags.
MULTIMEDIA_GUIDE = "multimedia-guide"
DIGITAL_STORYTELLING = "digital-storytelling"
INTERACTIVE_DIGITAL_STORYTELLING = "interactive-digital-storytelling"
DIALOGUE_BASED_SOCIAL = "dialogue-based-social"
EXPERIENTIAL_SOCIAL = "experiential-social"
GAMIFIED_EDUCATIONAL = "gamified-educational"
UNTYPED = "untyped"

EXPERIENCE_TYPES = (
    MULTIMEDIA_GUIDE,
    DIGITAL_STORYTELLING,
    INTERACTIVE_DIGITAL_STORYTELLING,
    DIALOGUE_BASED_SOCIAL,
    EXPERIENTIAL_SOCIAL,
    GAMIFIED_EDUCATIONAL,
)

# Trigger type each menu style demands on its options (None = tap only).
STYLE_TRIGGERS = {
    "tiles": type(None),
    "list": type(None),
    "iimage": PoiTrigger,
    "map": RegionTrigger,
    "qr": QrTrigger,
}

MAX_MENU_DEPTH = 8

# Page kinds that can carry media; production completeness is judged on these.
ASSET_CAPABLE_KINDS = ("simple", "dialogue", "video", "iimage", "book")


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a spherical Earth."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlambda = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlambda / 2) ** 2
    return EARTH_RADIUS_M * 2 * math.atan2(math.sqrt(a), math.sqrt(1 - a))


def _describe_path(story: Story, path: tuple[int, ...]) -> str:
    """Readable id chain for a path, e.g. story/ch1/sc2/p3."""
    parts = [story.id]
    node = story
    for index in path:
        node = children_of(node)[index]
        parts.append(node.id)
    return "/".join(parts)


def validate(story: Story, asset_root: str | Path | None = None) -> list[Diagnostic]:
    """All rule violations in the story.

    V001 duplicate id, V002 empty container, V003 unresolvable asset path
    (only checked when asset_root is given), V004 QR payload collision,
    V005 trigger/style mismatch, V006 single-option choice menu (warning),
    V007 overlapping map regions within one menu (warning), V008 menu
    nesting deeper than 8 (warning).
    """
    diags: list[Diagnostic] = []

    def err(code: str, message: str) -> None:
        diags.append(Diagnostic(ERROR, code, message))

    def warn(code: str, message: str) -> None:
        diags.append(Diagnostic(WARNING, code, message))

    # V001: duplicate ids, naming every occurrence
    seen: dict[str, list[str]] = {story.id: ["story root"]}
    for path, element in iter_elements(story):
        seen.setdefault(element.id, []).append(_describe_path(story, path))
    for element_id, places in seen.items():
        if len(places) > 1:
            err("V001", f"duplicate id {element_id!r} at {' and '.join(places)}")

    # V002: containers that must not be empty in a publishable story
    if not story.chapters:
        err("V002", f"story {story.id!r} has no chapters")
    for path, element in iter_elements(story):
        where = _describe_path(story, path)
        if isinstance(element, (Chapter, Scene, Menu, MenuOption)):
            if not children_of(element):
                err("V002", f"{type(element).__name__.lower()} at {where} is empty")
        elif isinstance(element, Page):
            if isinstance(element.payload, Quiz) and not element.payload.statements:
                err("V002", f"quiz at {where} has no statements")
            if isinstance(element.payload, InteractiveBook) and not element.payload.book_pages:
                err("V002", f"book at {where} has no book pages")

    # V003: asset paths that do not resolve under the asset root
    if asset_root is not None:
        root = Path(asset_root)
        missing: list[str] = []
        for ref in iter_assets(story):
            if ref.path not in missing and not (root / ref.path).is_file():
                missing.append(ref.path)
        for path_str in missing:
            err("V003", f"asset {path_str!r} does not resolve under {root}")

    # V004: effective QR payload collisions
    payloads: dict[str, list[str]] = {}
    for path, element in iter_elements(story):
        if isinstance(element, Menu):
            for option in element.options:
                payload = effective_qr_payload(story, element, option)
                if payload is not None:
                    payloads.setdefault(payload, []).append(option.id)
    for payload, option_ids in payloads.items():
        if len(option_ids) > 1:
            err("V004", f"qr payload {payload!r} used by options {', '.join(option_ids)}")

    # V005 / V006 / V007: per-menu rules
    for path, element in iter_elements(story):
        if not isinstance(element, Menu):
            continue
        where = _describe_path(story, path)
        expected = STYLE_TRIGGERS[element.style]
        for option in element.options:
            if not isinstance(option.trigger, expected):
                got = type(option.trigger).__name__ if option.trigger else "no trigger"
                err(
                    "V005",
                    f"option {option.id!r} of {element.style}-style menu at {where} "
                    f"carries {got}; expected {expected.__name__}",
                )
        if element.kind == "choice" and len(element.options) == 1:
            warn("V006", f"choice menu at {where} offers a single option")
        if element.style == "map":
            regions = [
                (option.id, option.trigger)
                for option in element.options
                if isinstance(option.trigger, RegionTrigger)
            ]
            for i in range(len(regions)):
                for j in range(i + 1, len(regions)):
                    (id_a, a), (id_b, b) = regions[i], regions[j]
                    distance = haversine_m(a.lat, a.lon, b.lat, b.lon)
                    if distance < a.radius_m + b.radius_m:
                        warn(
                            "V007",
                            f"map regions of options {id_a!r} and {id_b!r} at {where} "
                            f"overlap ({distance:.1f} m apart, radii sum "
                            f"{a.radius_m + b.radius_m:.1f} m)",
                        )

    # V008: menu nesting depth
    deepest = max_menu_depth(story)
    if deepest > MAX_MENU_DEPTH:
        warn("V008", f"menus nest {deepest} levels deep (soft limit {MAX_MENU_DEPTH})")

    return diags


def max_menu_depth(story: Story) -> int:
    """Deepest count of enclosing menus; 0 when the story has none."""

    def walk(element, depth: int) -> int:
        best = depth
        children = children_of(element)
        if children is None:
            return best
        for child in children:
            child_depth = depth + 1 if isinstance(child, Menu) else depth
            best = max(best, walk(child, child_depth))
        return best

    return walk(story, 0)


@dataclass(frozen=True)
class PathEnumeration:
    signatures: list[tuple[tuple[str, str], ...]]
    truncated: bool


def enumerate_choice_paths(story: Story, max_paths: int = 10_000) -> PathEnumeration:
    """Signatures of every complete traversal under merge-back semantics.

    A signature is the ordered (choice menu id, option id) pairs taken in
    one run. More menus never branch the plot and are skipped. Stops after
    max_paths signatures and flags the result truncated.
    """
    if max_paths < 1:
        raise ValueError("max_paths must be at least 1")

    def walk(seq, k, signature):
        if k == len(seq):
            yield signature, False
            return
        element = seq[k]
        if isinstance(element, (Chapter, Scene)):
            for sig, ended in walk(children_of(element), 0, signature):
                if ended:
                    yield sig, True
                else:
                    yield from walk(seq, k + 1, sig)
        elif isinstance(element, End):
            yield signature, True
        elif isinstance(element, Menu) and element.kind == "choice":
            for option in element.options:
                for sig, ended in walk(
                    option.body, 0, signature + ((element.id, option.id),)
                ):
                    if ended:
                        yield sig, True
                    else:
                        yield from walk(seq, k + 1, sig)
        else:  # pages and More menus do not branch the plot
            yield from walk(seq, k + 1, signature)

    signatures: list[tuple[tuple[str, str], ...]] = []
    truncated = False
    for signature, _ in walk(story.chapters, 0, ()):
        if len(signatures) == max_paths:
            truncated = True
            break
        signatures.append(signature)
    return PathEnumeration(signatures, truncated)


def classify_structure(story: Story) -> str:
    """linear: no choices; near-linear: choices all merge back; branching:
    some option body contains an explicit ending."""
    has_choice = False
    end_in_option = False

    def walk(element, inside_option: bool) -> None:
        nonlocal has_choice, end_in_option
        children = children_of(element)
        if children is None:
            return
        for child in children:
            if isinstance(child, Menu) and child.kind == "choice":
                has_choice = True
            if isinstance(child, End) and inside_option:
                end_in_option = True
            walk(child, inside_option or isinstance(child, MenuOption))

    walk(story, False)
    if not has_choice:
        return LINEAR
    return BRANCHING if end_in_option else NEAR_LINEAR


def _pages(story: Story) -> list[Page]:
    return [el for _, el in iter_elements(story) if isinstance(el, Page)]


def _menus(story: Story) -> list[Menu]:
    return [el for _, el in iter_elements(story) if isinstance(el, Menu)]


def classify_experience_type(story: Story) -> str:
    """Declared type tag when present, structural heuristic otherwise."""
    for declared in EXPERIENCE_TYPES:
        if declared in story.author_tags:
            return declared
    pages = _pages(story)
    menus = _menus(story)
    if any(isinstance(p.payload, Quiz) for p in pages):
        return GAMIFIED_EDUCATIONAL
    if any(m.kind == "choice" for m in menus):
        return INTERACTIVE_DIGITAL_STORYTELLING
    if not menus and not any(isinstance(p.payload, Dialogue) for p in pages):
        return MULTIMEDIA_GUIDE
    return DIGITAL_STORYTELLING


def estimate_erl(story: Story) -> int:
    """Experience readiness level 1..7, the highest level whose
    prerequisites all hold.

    Production completeness is judged on asset-capable pages: such a page
    counts as produced once it references at least one media asset.
    """
    evidence = story.evidence
    capable = [
        page for page in _pages(story) if page.payload.kind in ASSET_CAPABLE_KINDS
    ]
    produced = [len(list(payload_assets(page.payload))) > 0 for page in capable]
    any_produced = any(produced) if capable else True
    all_produced = all(produced) if capable else True
    no_drafts = all(not ref.draft for ref in iter_assets(story))

    level = 1
    if evidence.structure_validated:
        level = 2
        if evidence.sample_scenes_validated and any_produced:
            level = 3
            if all_produced:
                level = 4
                if evidence.validated_onsite in ("invited", "public"):
                    level = 5
                    if no_drafts:
                        level = 6
                        if evidence.validated_onsite == "public":
                            level = 7
    return level


@dataclass(frozen=True)
class Stats:
    chapters: int
    scenes: int
    pages: dict[str, int]
    menus: dict[str, int]
    menu_styles: dict[str, int]
    endings: int
    max_menu_depth: int
    choice_paths: int
    choice_paths_truncated: bool

    def to_dict(self) -> dict:
        return {
            "chapters": self.chapters,
            "scenes": self.scenes,
            "pages": dict(self.pages),
            "menus": dict(self.menus),
            "menu_styles": dict(self.menu_styles),
            "endings": self.endings,
            "max_menu_depth": self.max_menu_depth,
            "choice_paths": self.choice_paths,
            "choice_paths_truncated": self.choice_paths_truncated,
        }


def stats(story: Story, max_paths: int = 10_000) -> Stats:
    """Exact structural counts plus the enumerated choice-path count."""
    pages = {kind: 0 for kind in PAGE_KINDS}
    menus = {kind: 0 for kind in MENU_KINDS}
    menu_styles = {style: 0 for style in MENU_STYLES}
    scenes = endings = 0
    for _, element in iter_elements(story):
        if isinstance(element, Scene):
            scenes += 1
        elif isinstance(element, Page):
            pages[element.payload.kind] += 1
        elif isinstance(element, Menu):
            menus[element.kind] += 1
            menu_styles[element.style] += 1
        elif isinstance(element, End):
            endings += 1
    enumeration = enumerate_choice_paths(story, max_paths)
    return Stats(
        chapters=len(story.chapters),
        scenes=scenes,
        pages=pages,
        menus=menus,
        menu_styles=menu_styles,
        endings=endings,
        max_menu_depth=max_menu_depth(story),
        choice_paths=len(enumeration.signatures),
        choice_paths_truncated=enumeration.truncated,
    )


@dataclass(frozen=True)
class Report:
    diagnostics: list[Diagnostic]
    stats: Stats | None = None
    structure: str | None = None
    experience_type: str | None = None
    erl: int | None = None

    @property
    def ok(self) -> bool:
        return not has_errors(self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "stats": self.stats.to_dict() if self.stats else None,
            "structure": self.structure,
            "experience_type": self.experience_type,
            "erl": self.erl,
        }


def analyze(story: Story, asset_root: str | Path | None = None) -> Report:
    """Validate and, when error-free, classify and measure the story."""
    diagnostics = validate(story, asset_root)
    if has_errors(diagnostics):
        return Report(diagnostics)
    return Report(
        diagnostics=diagnostics,
        stats=stats(story),
        structure=classify_structure(story),
        experience_type=classify_experience_type(story),
        erl=estimate_erl(story),
    )
