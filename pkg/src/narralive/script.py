"""The `.story` authoring language: parser and canonical serializer.

The format is line-oriented and indentation-sensitive (2 spaces per
level, tabs rejected). Each line is a keyword, optional positional
values, and `name=value` attributes; `#` starts a comment. The full
grammar is documented in docs/story-format.md.

parse() recovers after errors where it can so one run reports as many
problems as possible; any error-severity diagnostic means no Story is
returned. serialize() emits the canonical form: 2-space indents, fixed
attribute order with id first, escaped strings, defaults omitted.
parse(serialize(story)) reproduces the story exactly, and canonical
sources survive serialize(parse(text)) byte-for-byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from narralive.diagnostics import ERROR, Diagnostic, has_errors
from narralive.model import (
    AssetRef,
    AudioInteraction,
    BookPage,
    Chapter,
    Dialogue,
    DialogueLine,
    End,
    Hotspot,
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
    QuizStatement,
    QrTrigger,
    RegionTrigger,
    Scene,
    Simple,
    Story,
    TextInteraction,
    ValidationEvidence,
    Video,
    ID_RE,
    ID_MAX_LEN,
    PAGE_KINDS,
)

E_INDENT = "E001"
E_KEYWORD = "E002"
E_DUP_ID = "E003"
E_MISSING = "E004"
E_TRIGGER = "E005"
E_VALUE = "E006"

_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")
_ATTR_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_TAG_RE = re.compile(r"^[a-z0-9_-]+$")

_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_REVERSE_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}

# Option trigger attribute required by each menu style (None = no trigger).
_STYLE_TRIGGER = {"tiles": None, "list": None, "iimage": "poi", "map": "region", "qr": "qr"}


@dataclass(frozen=True)
class _Value:
    kind: str  # "str" | "bare" | "num" | "tuple"
    value: object
    column: int


@dataclass
class _Line:
    number: int
    level: int
    keyword: str
    column: int
    positionals: list[_Value]
    attrs: dict[str, _Value]


@dataclass
class _Block:
    line: _Line
    children: list["_Block"] = field(default_factory=list)


@dataclass
class ParseResult:
    story: Story | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.story is not None


def parse(text: str) -> ParseResult:
    """Parse DSL source into a Story, or collect diagnostics trying."""
    return _Parser(text).run()


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text.replace("\r\n", "\n").replace("\r", "\n")
        self.diags: list[Diagnostic] = []
        self.used_ids: set[str] = set()

    def run(self) -> ParseResult:
        blocks = self._build_blocks()
        story = self._parse_root(blocks)
        if has_errors(self.diags):
            story = None
        return ParseResult(story, self.diags)

    # ----- diagnostics -------------------------------------------------

    def error(self, code: str, line: int, column: int, message: str) -> None:
        self.diags.append(Diagnostic(ERROR, code, message, line, column))

    # ----- lexing and block structure ----------------------------------

    def _build_blocks(self) -> list[_Block]:
        roots: list[_Block] = []
        stack: list[_Block] = []
        for number, raw in enumerate(self.text.split("\n"), start=1):
            line = self._lex_line(number, raw)
            if line is None:
                continue
            block = _Block(line)
            if line.level > len(stack):
                self.error(
                    E_INDENT, number, 1,
                    f"indented {line.level} levels but enclosing block is at {len(stack)}",
                )
                line.level = len(stack)
            if line.level == 0:
                roots.append(block)
                stack = [block]
            else:
                stack[line.level - 1].children.append(block)
                stack[line.level:] = [block]
        return roots

    def _lex_line(self, number: int, raw: str) -> _Line | None:
        indent = 0
        for ch in raw:
            if ch == " ":
                indent += 1
            elif ch == "\t":
                self.error(E_INDENT, number, indent + 1, "tabs are not allowed in indentation")
                return None
            else:
                break
        body = raw[indent:]
        if not body or body.startswith("#"):
            return None
        if indent % 2 != 0:
            self.error(E_INDENT, number, 1, f"indentation of {indent} spaces is not a multiple of 2")
        level = indent // 2

        tokens = self._lex_tokens(number, body, indent)
        if not tokens:
            return None
        keyword_tok = tokens[0]
        if keyword_tok.kind != "bare":
            self.error(E_KEYWORD, number, keyword_tok.column, "line must start with a keyword")
            return None

        positionals: list[_Value] = []
        attrs: dict[str, _Value] = {}
        i = 1
        while i < len(tokens):
            tok = tokens[i]
            if tok.kind == "attr":
                name, inline = tok.value
                if inline is not None:
                    value = inline
                elif i + 1 < len(tokens) and tokens[i + 1].kind == "str":
                    value = tokens[i + 1]
                    i += 1
                else:
                    self.error(E_VALUE, number, tok.column, f"attribute {name}= has no value")
                    i += 1
                    continue
                if name in attrs:
                    self.error(E_VALUE, number, tok.column, f"duplicate attribute {name}=")
                else:
                    attrs[name] = _Value(value.kind, value.value, value.column)
            else:
                positionals.append(_Value(tok.kind, tok.value, tok.column))
            i += 1
        return _Line(number, level, keyword_tok.value, indent + 1, positionals, attrs)

    def _lex_tokens(self, number: int, body: str, offset: int):
        tokens: list[_Value] = []
        i = 0
        n = len(body)
        while i < n:
            ch = body[i]
            col = offset + i + 1
            if ch in " \t":
                i += 1
                continue
            if ch == "#":
                break
            if ch == '"':
                text, i = self._lex_string(number, body, i, offset)
                if text is None:
                    break
                tokens.append(_Value("str", text, col))
                continue
            start = i
            while i < n and body[i] not in ' \t"#':
                i += 1
            word = body[start:i]
            if "=" in word:
                name, _, rest = word.partition("=")
                if not _ATTR_NAME_RE.match(name):
                    self.error(E_VALUE, number, col, f"malformed attribute {word!r}")
                    continue
                inline = self._classify(number, rest, col + len(name) + 1) if rest else None
                tokens.append(_Value("attr", (name, inline), col))
            else:
                tokens.append(self._classify(number, word, col))
        return tokens

    def _lex_string(self, number: int, body: str, i: int, offset: int):
        start_col = offset + i + 1
        i += 1
        out = []
        while i < len(body):
            ch = body[i]
            if ch == '"':
                return "".join(out), i + 1
            if ch == "\\":
                if i + 1 >= len(body) or body[i + 1] not in _ESCAPES:
                    self.error(E_VALUE, number, offset + i + 1, "unknown escape in string")
                    return None, len(body)
                out.append(_ESCAPES[body[i + 1]])
                i += 2
            else:
                out.append(ch)
                i += 1
        self.error(E_VALUE, number, start_col, "unterminated string")
        return None, len(body)

    def _classify(self, number: int, word: str, col: int) -> _Value:
        if _NUMBER_RE.match(word):
            return _Value("num", float(word), col)
        if "," in word:
            parts = word.split(",")
            if all(_NUMBER_RE.match(p) for p in parts):
                return _Value("tuple", tuple(float(p) for p in parts), col)
            self.error(E_VALUE, number, col, f"malformed number list {word!r}")
            return _Value("bare", word, col)
        return _Value("bare", word, col)

    # ----- attribute helpers -------------------------------------------

    def _attr(self, line: _Line, name: str, kinds: tuple[str, ...]):
        value = line.attrs.pop(name, None)
        if value is None:
            return None
        if value.kind not in kinds:
            self.error(
                E_VALUE, line.number, value.column,
                f"attribute {name}= expects {'/'.join(kinds)}, got {value.kind}",
            )
            return None
        return value

    def _attr_str(self, line, name):
        v = self._attr(line, name, ("str",))
        return None if v is None else v.value

    def _attr_bare(self, line, name):
        v = self._attr(line, name, ("bare",))
        return None if v is None else v.value

    def _attr_bool(self, line, name):
        v = self._attr(line, name, ("bare",))
        if v is None:
            return None
        if v.value not in ("true", "false"):
            self.error(E_VALUE, line.number, v.column, f"attribute {name}= expects true or false")
            return None
        return v.value == "true"

    def _attr_path(self, line, name, kind):
        v = self._attr(line, name, ("bare",))
        if v is None:
            return None
        # a draft= on the same line marks this (sole) asset as draft
        draft = self._attr_bool(line, "draft") or False
        return self._asset(line, v, kind, draft)

    def _attr_tuple(self, line, name, size):
        v = self._attr(line, name, ("tuple", "num"))
        if v is None:
            return None
        values = v.value if isinstance(v.value, tuple) else (v.value,)
        if len(values) != size:
            self.error(E_VALUE, line.number, v.column, f"attribute {name}= expects {size} numbers")
            return None
        return values

    def _asset(self, line: _Line, value: _Value, kind: str, draft: bool = False) -> AssetRef | None:
        try:
            return AssetRef(path=str(value.value), kind=kind, draft=draft)
        except ValueError as exc:
            self.error(E_VALUE, line.number, value.column, str(exc))
            return None

    def _leftover_attrs(self, line: _Line) -> None:
        for name, value in line.attrs.items():
            self.error(E_KEYWORD, line.number, value.column, f"unknown attribute {name}=")
        line.attrs.clear()

    def _positional_str(self, line: _Line, what: str, required: bool = True) -> str | None:
        if not line.positionals:
            if required:
                self.error(E_MISSING, line.number, line.column, f"{line.keyword} needs a quoted {what}")
            return None
        value = line.positionals.pop(0)
        if value.kind != "str":
            self.error(E_VALUE, line.number, value.column, f"{what} must be a quoted string")
            return None
        return value.value

    def _no_extra_positionals(self, line: _Line) -> None:
        for value in line.positionals:
            self.error(E_VALUE, line.number, value.column, f"unexpected value {value.value!r}")
        line.positionals.clear()

    def _no_children(self, block: _Block) -> None:
        for child in block.children:
            self.error(
                E_KEYWORD, child.line.number, child.line.column,
                f"{block.line.keyword} does not take an indented block",
            )

    # ----- identifiers --------------------------------------------------

    def _claim_id(self, line: _Line, slug_source: str | None) -> str:
        explicit = line.attrs.pop("id", None)
        if explicit is not None:
            value = str(explicit.value)
            if explicit.kind != "bare" or not ID_RE.match(value):
                self.error(
                    E_VALUE, line.number, explicit.column,
                    f"id {value!r} must match [a-z0-9-]{{1,64}}",
                )
                value = self._derive_id(slug_source or "", line.keyword)
            elif value in self.used_ids:
                self.error(E_DUP_ID, line.number, explicit.column, f"duplicate id {value!r}")
            self.used_ids.add(value)
            return value
        return self._derive_id(slug_source or "", line.keyword)

    def _derive_id(self, source: str, fallback: str) -> str:
        slug = re.sub(r"-+", "-", re.sub(r"[^a-z0-9]+", "-", source.lower())).strip("-")
        slug = slug[:ID_MAX_LEN] or fallback
        candidate, n = slug, 2
        while candidate in self.used_ids:
            suffix = f"-{n}"
            candidate = slug[: ID_MAX_LEN - len(suffix)] + suffix
            n += 1
        self.used_ids.add(candidate)
        return candidate

    # ----- grammar ------------------------------------------------------

    def _parse_root(self, blocks: list[_Block]) -> Story | None:
        story_block = None
        for block in blocks:
            if block.line.keyword != "story":
                self.error(
                    E_KEYWORD, block.line.number, block.line.column,
                    f"expected a story at the top level, got {block.line.keyword!r}",
                )
            elif story_block is None:
                story_block = block
            else:
                self.error(E_KEYWORD, block.line.number, block.line.column, "only one story per file")
        if story_block is None:
            self.error(E_MISSING, 1, 1, "source declares no story")
            return None
        return self._parse_story(story_block)

    def _parse_story(self, block: _Block) -> Story | None:
        line = block.line
        title = self._positional_str(line, "title") or ""
        story_id = self._claim_id(line, title)
        lang_v = self._attr(line, "lang", ("bare", "str"))
        language = str(lang_v.value) if lang_v is not None else "en"
        description = self._attr_str(line, "description") or ""
        tags = self._parse_tags(line)
        evidence = self._parse_evidence(line)
        self._leftover_attrs(line)
        self._no_extra_positionals(line)

        chapters = []
        for child in block.children:
            if child.line.keyword == "chapter":
                chapter = self._parse_chapter(child)
                if chapter is not None:
                    chapters.append(chapter)
            else:
                self.error(
                    E_KEYWORD, child.line.number, child.line.column,
                    f"expected chapter, got {child.line.keyword!r}",
                )
        if not chapters:
            self.error(E_MISSING, line.number, line.column, "story needs at least one chapter")
            return None
        try:
            return Story(
                id=story_id, title=title, description=description, language=language,
                author_tags=tags, evidence=evidence, chapters=tuple(chapters),
            )
        except ValueError as exc:
            self.error(E_VALUE, line.number, line.column, str(exc))
            return None

    def _parse_tags(self, line: _Line) -> frozenset[str]:
        raw = self._attr(line, "tags", ("str", "bare"))
        if raw is None:
            return frozenset()
        tags = set()
        for part in str(raw.value).split(","):
            part = part.strip()
            if not part:
                continue
            if not _TAG_RE.match(part):
                self.error(E_VALUE, line.number, raw.column, f"tag {part!r} must match [a-z0-9_-]+")
                continue
            tags.add(part)
        return frozenset(tags)

    def _parse_evidence(self, line: _Line) -> ValidationEvidence:
        structure = self._attr_bool(line, "structure_validated") or False
        scenes = self._attr_bool(line, "scenes_validated") or False
        onsite_v = self._attr(line, "onsite", ("bare",))
        onsite = "none"
        if onsite_v is not None:
            if onsite_v.value in ("none", "invited", "public"):
                onsite = onsite_v.value
            else:
                self.error(
                    E_VALUE, line.number, onsite_v.column,
                    "onsite= expects none, invited or public",
                )
        return ValidationEvidence(structure, scenes, onsite)

    def _parse_chapter(self, block: _Block) -> Chapter | None:
        line = block.line
        title = self._positional_str(line, "title") or ""
        chapter_id = self._claim_id(line, title)
        preview = self._attr_path(line, "preview", "image")
        self._leftover_attrs(line)
        self._no_extra_positionals(line)

        elements = []
        for child in block.children:
            element = self._dispatch(child, ("scene", "menu"))
            if element is not None:
                elements.append(element)
        if not elements:
            self.error(E_MISSING, line.number, line.column, "chapter needs at least one scene or menu")
            return None
        return Chapter(id=chapter_id, title=title, preview_image=preview, elements=tuple(elements))

    def _parse_scene(self, block: _Block) -> Scene | None:
        line = block.line
        title = self._positional_str(line, "title")
        scene_id = self._claim_id(line, title)
        self._leftover_attrs(line)
        self._no_extra_positionals(line)

        elements = []
        for child in block.children:
            element = self._dispatch(child, ("page", "menu", "end"))
            if element is not None:
                elements.append(element)
        if not elements:
            self.error(E_MISSING, line.number, line.column, "scene needs at least one page, menu or end")
            return None
        return Scene(id=scene_id, title=title or "", elements=tuple(elements))

    def _dispatch(self, block: _Block, allowed: tuple[str, ...]):
        keyword = block.line.keyword
        if keyword not in allowed:
            self.error(
                E_KEYWORD, block.line.number, block.line.column,
                f"expected one of {', '.join(allowed)}; got {keyword!r}",
            )
            return None
        if keyword == "scene":
            return self._parse_scene(block)
        if keyword == "page":
            return self._parse_page(block)
        if keyword == "menu":
            return self._parse_menu(block)
        if keyword == "end":
            return self._parse_end(block)
        raise AssertionError(keyword)

    def _parse_end(self, block: _Block) -> End | None:
        line = block.line
        label = None
        if line.positionals and line.positionals[0].kind == "str":
            label = line.positionals.pop(0).value
        end_id = self._claim_id(line, label or "end")
        self._leftover_attrs(line)
        self._no_extra_positionals(line)
        self._no_children(block)
        return End(id=end_id, label=label)

    # ----- menus ---------------------------------------------------------

    def _parse_menu(self, block: _Block) -> Menu | None:
        line = block.line
        kind = None
        if line.positionals and line.positionals[0].kind == "bare":
            kind = line.positionals.pop(0).value
        if kind not in ("choice", "more"):
            self.error(E_VALUE, line.number, line.column, "menu needs a kind: choice or more")
            kind = "choice"
        menu_id = self._claim_id(line, kind)
        style_v = self._attr(line, "style", ("bare",))
        style = "tiles"
        if style_v is not None:
            if style_v.value in _STYLE_TRIGGER:
                style = style_v.value
            else:
                self.error(
                    E_VALUE, line.number, style_v.column,
                    f"style= expects one of {', '.join(_STYLE_TRIGGER)}",
                )
        image = self._attr_path(line, "image", "image")
        if style == "iimage" and image is None:
            self.error(E_MISSING, line.number, line.column, "iimage-style menu needs image=")
            return None
        if style != "iimage" and image is not None:
            self.error(E_VALUE, line.number, line.column, f"{style}-style menu does not take image=")
            image = None
        self._leftover_attrs(line)
        self._no_extra_positionals(line)

        options = []
        for child in block.children:
            if child.line.keyword != "option":
                self.error(
                    E_KEYWORD, child.line.number, child.line.column,
                    f"expected option, got {child.line.keyword!r}",
                )
                continue
            option = self._parse_option(child, style)
            if option is not None:
                options.append(option)
        if not options:
            self.error(E_MISSING, line.number, line.column, "menu needs at least one option")
            return None
        return Menu(id=menu_id, kind=kind, style=style, image=image, options=tuple(options))

    def _parse_option(self, block: _Block, style: str) -> MenuOption | None:
        line = block.line
        label = self._positional_str(line, "label") or ""
        option_id = self._claim_id(line, label)
        trigger, trigger_attr = self._parse_trigger(line)
        expected = _STYLE_TRIGGER[style]
        if trigger_attr != expected:
            want = f"{expected}=" if expected else "no trigger"
            got = f"{trigger_attr}=" if trigger_attr else "none"
            self.error(
                E_TRIGGER, line.number, line.column,
                f"option of a {style}-style menu needs {want}, got {got}",
            )
        self._leftover_attrs(line)
        self._no_extra_positionals(line)

        body = []
        for child in block.children:
            element = self._dispatch(child, ("scene", "page", "menu", "end"))
            if element is not None:
                body.append(element)
        if not body:
            self.error(E_MISSING, line.number, line.column, "option needs a non-empty body")
            return None
        return MenuOption(id=option_id, label=label, trigger=trigger, body=tuple(body))

    def _parse_trigger(self, line: _Line):
        present = [name for name in ("poi", "region", "qr", "nfc") if name in line.attrs]
        if len(present) > 1:
            self.error(
                E_VALUE, line.number, line.column,
                f"option declares multiple triggers: {', '.join(present)}",
            )
        trigger = None
        name = present[0] if present else None
        if name == "poi":
            rect = self._attr_tuple(line, "poi", 4)
            if rect is not None:
                try:
                    trigger = PoiTrigger(rect=rect)
                except ValueError as exc:
                    self.error(E_VALUE, line.number, line.column, str(exc))
        elif name == "region":
            coords = self._attr_tuple(line, "region", 3)
            if coords is not None:
                try:
                    trigger = RegionTrigger(lat=coords[0], lon=coords[1], radius_m=coords[2])
                except ValueError as exc:
                    self.error(E_VALUE, line.number, line.column, str(exc))
        elif name == "qr":
            v = self._attr(line, "qr", ("bare", "str"))
            if v is not None:
                if v.kind == "bare" and v.value != "auto":
                    self.error(E_VALUE, line.number, v.column, "qr= expects auto or a quoted payload")
                else:
                    trigger = QrTrigger(payload=None if v.kind == "bare" else v.value)
        elif name == "nfc":
            tag = self._attr_str(line, "nfc")
            if tag:
                trigger = NfcTrigger(tag=tag)
            elif tag == "":
                self.error(E_VALUE, line.number, line.column, "nfc= tag must not be empty")
        # drop remaining trigger attrs so they do not show up as unknown
        for extra in present[1:]:
            line.attrs.pop(extra, None)
        return trigger, name

    # ----- pages ----------------------------------------------------------

    def _parse_page(self, block: _Block) -> Page | None:
        line = block.line
        kind = None
        if line.positionals and line.positionals[0].kind == "bare":
            kind = line.positionals.pop(0).value
        if kind not in PAGE_KINDS:
            self.error(
                E_KEYWORD, line.number, line.column,
                f"unknown page kind {kind!r}; expected one of {', '.join(PAGE_KINDS)}",
            )
            return None
        page_id = self._claim_id(line, kind)
        self._leftover_attrs(line)
        self._no_extra_positionals(line)
        payload = getattr(self, f"_payload_{kind}")(block)
        if payload is None:
            return None
        return Page(id=page_id, payload=payload)

    def _field_lines(self, block: _Block, allowed: tuple[str, ...], nested: tuple[str, ...] = ()):
        for child in block.children:
            keyword = child.line.keyword
            if keyword not in allowed:
                self.error(
                    E_KEYWORD, child.line.number, child.line.column,
                    f"unknown field {keyword!r}; expected one of {', '.join(allowed)}",
                )
                continue
            if keyword not in nested:
                self._no_children(child)
            yield child

    def _field_asset(self, line: _Line, kind: str) -> AssetRef | None:
        if not line.positionals:
            self.error(E_MISSING, line.number, line.column, f"{line.keyword} needs a path")
            return None
        value = line.positionals.pop(0)
        if value.kind != "bare":
            self.error(E_VALUE, line.number, value.column, f"{line.keyword} path must be a bare token")
            return None
        draft = self._attr_bool(line, "draft") or False
        self._leftover_attrs(line)
        self._no_extra_positionals(line)
        return self._asset(line, value, kind, draft)

    def _payload_simple(self, block: _Block) -> Simple | None:
        texts, images, audio = [], [], []
        for child in self._field_lines(block, ("text", "image", "audio")):
            line = child.line
            if line.keyword == "text":
                value = self._positional_str(line, "text")
                if value is not None:
                    texts.append(value)
                self._leftover_attrs(line)
                self._no_extra_positionals(line)
            elif line.keyword == "image":
                ref = self._field_asset(line, "image")
                if ref is not None:
                    images.append(ref)
            else:
                ref = self._field_asset(line, "audio")
                if ref is not None:
                    audio.append(ref)
        return Simple(text="\n".join(texts), images=tuple(images), audio=tuple(audio))

    def _payload_dialogue(self, block: _Block) -> Dialogue | None:
        characters: list[str] = []
        lines: list[DialogueLine] = []
        for child in self._field_lines(block, ("character", "line")):
            line = child.line
            if line.keyword == "character":
                name = self._positional_str(line, "name")
                if name is not None:
                    characters.append(name)
                self._leftover_attrs(line)
                self._no_extra_positionals(line)
                continue
            speaker = self._positional_str(line, "speaker")
            text = self._attr_str(line, "text")
            audio_v = self._attr(line, "audio", ("bare",))
            draft = self._attr_bool(line, "draft") or False
            self._leftover_attrs(line)
            self._no_extra_positionals(line)
            if text is None:
                self.error(E_MISSING, line.number, line.column, "line needs text=")
                continue
            if audio_v is None:
                self.error(E_MISSING, line.number, line.column, "line needs audio=")
                continue
            audio = self._asset(line, audio_v, "audio", draft)
            if speaker is None or audio is None:
                continue
            if speaker not in characters:
                self.error(
                    E_VALUE, line.number, line.column,
                    f"speaker {speaker!r} is not a declared character",
                )
                continue
            lines.append(DialogueLine(speaker=speaker, text=text, audio=audio))
        return Dialogue(characters=tuple(characters), lines=tuple(lines))

    def _payload_quiz(self, block: _Block) -> Quiz | None:
        statements = []
        for child in self._field_lines(block, ("statement",)):
            line = child.line
            text = self._positional_str(line, "statement") or ""
            answer_v = self._attr(line, "answer", ("bare",))
            feedback = self._attr_str(line, "feedback") or ""
            self._leftover_attrs(line)
            self._no_extra_positionals(line)
            if answer_v is None:
                self.error(E_MISSING, line.number, line.column, "statement needs answer=right or answer=wrong")
                continue
            if answer_v.value not in ("right", "wrong"):
                self.error(E_VALUE, line.number, answer_v.column, "answer= expects right or wrong")
                continue
            statements.append(QuizStatement(text=text, answer=answer_v.value, feedback=feedback))
        if not statements:
            self.error(E_MISSING, block.line.number, block.line.column, "quiz needs at least one statement")
            return None
        return Quiz(statements=tuple(statements))

    def _payload_video(self, block: _Block) -> Video | None:
        video = None
        for child in self._field_lines(block, ("video",)):
            if video is not None:
                self.error(E_VALUE, child.line.number, child.line.column, "video already set")
                continue
            video = self._field_asset(child.line, "video")
        if video is None:
            self.error(E_MISSING, block.line.number, block.line.column, "video page needs a video line")
            return None
        return Video(video=video)

    def _parse_hotspot(self, block: _Block) -> Hotspot | None:
        line = block.line
        self._no_children(block)
        if not line.positionals or line.positionals[0].kind not in ("tuple", "num"):
            self.error(E_MISSING, line.number, line.column, "hotspot needs x,y,w,h")
            return None
        rect_v = line.positionals.pop(0)
        rect = rect_v.value if isinstance(rect_v.value, tuple) else (rect_v.value,)
        if len(rect) != 4:
            self.error(E_VALUE, line.number, rect_v.column, "hotspot rect needs 4 numbers")
            return None
        text = self._attr_str(line, "text")
        audio_v = self._attr(line, "audio", ("bare",))
        draft = self._attr_bool(line, "draft") or False
        self._leftover_attrs(line)
        self._no_extra_positionals(line)
        if (text is None) == (audio_v is None):
            self.error(E_VALUE, line.number, line.column, "hotspot needs exactly one of text= or audio=")
            return None
        if text is not None:
            interaction = TextInteraction(text=text)
        else:
            audio = self._asset(line, audio_v, "audio", draft)
            if audio is None:
                return None
            interaction = AudioInteraction(audio=audio)
        try:
            return Hotspot(rect=rect, interaction=interaction)
        except ValueError as exc:
            self.error(E_VALUE, line.number, rect_v.column, str(exc))
            return None

    def _payload_iimage(self, block: _Block) -> InteractiveImage | None:
        image = None
        hotspots = []
        for child in self._field_lines(block, ("image", "hotspot")):
            if child.line.keyword == "image":
                if image is not None:
                    self.error(E_VALUE, child.line.number, child.line.column, "image already set")
                    continue
                image = self._field_asset(child.line, "image")
            else:
                hotspot = self._parse_hotspot(child)
                if hotspot is not None:
                    hotspots.append(hotspot)
        if image is None:
            self.error(E_MISSING, block.line.number, block.line.column, "iimage page needs an image line")
            return None
        return InteractiveImage(image=image, hotspots=tuple(hotspots))

    def _payload_book(self, block: _Block) -> InteractiveBook | None:
        cover = None
        pages = []
        for child in self._field_lines(block, ("cover", "bookpage"), nested=("bookpage",)):
            line = child.line
            if line.keyword == "cover":
                if cover is not None:
                    self.error(E_VALUE, line.number, line.column, "cover already set")
                    continue
                cover = self._field_asset(line, "image")
                continue
            title = self._positional_str(line, "title") or ""
            image_v = self._attr(line, "image", ("bare",))
            draft = self._attr_bool(line, "draft") or False
            self._leftover_attrs(line)
            self._no_extra_positionals(line)
            if image_v is None:
                self.error(E_MISSING, line.number, line.column, "bookpage needs image=")
                continue
            image = self._asset(line, image_v, "image", draft)
            if image is None:
                continue
            hotspots = []
            for grandchild in child.children:
                if grandchild.line.keyword != "hotspot":
                    self.error(
                        E_KEYWORD, grandchild.line.number, grandchild.line.column,
                        f"expected hotspot, got {grandchild.line.keyword!r}",
                    )
                    continue
                hotspot = self._parse_hotspot(grandchild)
                if hotspot is not None:
                    hotspots.append(hotspot)
            pages.append(BookPage(title=title, image=image, hotspots=tuple(hotspots)))
        if cover is None:
            self.error(E_MISSING, block.line.number, block.line.column, "book page needs a cover line")
            return None
        if not pages:
            self.error(E_MISSING, block.line.number, block.line.column, "book needs at least one bookpage")
            return None
        return InteractiveBook(cover=cover, book_pages=tuple(pages))

    def _payload_nfc(self, block: _Block) -> NfcReader | None:
        prompt, tag = None, None
        for child in self._field_lines(block, ("prompt", "tag")):
            line = child.line
            value = self._positional_str(line, line.keyword)
            self._leftover_attrs(line)
            self._no_extra_positionals(line)
            if line.keyword == "prompt":
                prompt = value
            else:
                tag = value
        if prompt is None:
            self.error(E_MISSING, block.line.number, block.line.column, "nfc page needs a prompt line")
        if not tag:
            self.error(E_MISSING, block.line.number, block.line.column, "nfc page needs a non-empty tag line")
        if prompt is None or not tag:
            return None
        return NfcReader(prompt=prompt, tag=tag)

    def _payload_question(self, block: _Block) -> Question | None:
        prompt = None
        for child in self._field_lines(block, ("prompt",)):
            line = child.line
            value = self._positional_str(line, "prompt")
            self._leftover_attrs(line)
            self._no_extra_positionals(line)
            if value is not None:
                prompt = value
        if prompt is None:
            self.error(E_MISSING, block.line.number, block.line.column, "question page needs a prompt line")
            return None
        return Question(prompt=prompt)


# ---------------------------------------------------------------------------
# canonical serializer
# ---------------------------------------------------------------------------


def serialize(story: Story) -> str:
    """Canonical DSL text for a valid story; see module docstring."""
    writer = _Writer()
    writer.story(story)
    return "\n".join(writer.lines) + "\n"


def _quote(text: str) -> str:
    return '"' + "".join(_REVERSE_ESCAPES.get(ch, ch) for ch in text) + '"'


def _num(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _nums(values) -> str:
    return ",".join(_num(v) for v in values)


class _Writer:
    def __init__(self) -> None:
        self.lines: list[str] = []

    def emit(self, level: int, *parts: str) -> None:
        self.lines.append("  " * level + " ".join(p for p in parts if p))

    def story(self, story: Story) -> None:
        parts = [f"id={story.id}"]
        if story.language != "en":
            parts.append(f"lang={story.language}")
        if story.description:
            parts.append(f"description={_quote(story.description)}")
        if story.author_tags:
            parts.append(f'tags="{",".join(sorted(story.author_tags))}"')
        ev = story.evidence
        if ev.structure_validated:
            parts.append("structure_validated=true")
        if ev.sample_scenes_validated:
            parts.append("scenes_validated=true")
        if ev.validated_onsite != "none":
            parts.append(f"onsite={ev.validated_onsite}")
        self.emit(0, "story", _quote(story.title), *parts)
        for chapter in story.chapters:
            self.chapter(chapter, 1)

    def chapter(self, chapter: Chapter, level: int) -> None:
        parts = [f"id={chapter.id}"]
        if chapter.preview_image is not None:
            parts.append(f"preview={chapter.preview_image.path}")
            if chapter.preview_image.draft:
                parts.append("draft=true")
        self.emit(level, "chapter", _quote(chapter.title), *parts)
        for element in chapter.elements:
            self.element(element, level + 1)

    def element(self, element, level: int) -> None:
        if isinstance(element, Scene):
            self.scene(element, level)
        elif isinstance(element, Page):
            self.page(element, level)
        elif isinstance(element, Menu):
            self.menu(element, level)
        elif isinstance(element, End):
            self.end(element, level)
        else:
            raise TypeError(f"unexpected element {type(element).__name__}")

    def scene(self, scene: Scene, level: int) -> None:
        self.emit(level, "scene", _quote(scene.title), f"id={scene.id}")
        for element in scene.elements:
            self.element(element, level + 1)

    def end(self, end: End, level: int) -> None:
        if end.label is not None:
            self.emit(level, "end", _quote(end.label), f"id={end.id}")
        else:
            self.emit(level, "end", f"id={end.id}")

    def menu(self, menu: Menu, level: int) -> None:
        parts = [f"id={menu.id}"]
        if menu.style != "tiles":
            parts.append(f"style={menu.style}")
        if menu.image is not None:
            parts.append(f"image={menu.image.path}")
            if menu.image.draft:
                parts.append("draft=true")
        self.emit(level, "menu", menu.kind, *parts)
        for option in menu.options:
            self.option(option, level + 1)

    def option(self, option: MenuOption, level: int) -> None:
        parts = [f"id={option.id}"]
        trigger = option.trigger
        if isinstance(trigger, PoiTrigger):
            parts.append(f"poi={_nums(trigger.rect)}")
        elif isinstance(trigger, RegionTrigger):
            parts.append(f"region={_nums((trigger.lat, trigger.lon, trigger.radius_m))}")
        elif isinstance(trigger, QrTrigger):
            parts.append("qr=auto" if trigger.payload is None else f"qr={_quote(trigger.payload)}")
        elif isinstance(trigger, NfcTrigger):
            parts.append(f"nfc={_quote(trigger.tag)}")
        self.emit(level, "option", _quote(option.label), *parts)
        for element in option.body:
            self.element(element, level + 1)

    def page(self, page: Page, level: int) -> None:
        payload = page.payload
        self.emit(level, "page", payload.kind, f"id={page.id}")
        getattr(self, f"_page_{payload.kind}")(payload, level + 1)

    def _draft(self, ref: AssetRef) -> str:
        return "draft=true" if ref.draft else ""

    def _page_simple(self, payload: Simple, level: int) -> None:
        if payload.text:
            self.emit(level, "text", _quote(payload.text))
        for ref in payload.images:
            self.emit(level, "image", ref.path, self._draft(ref))
        for ref in payload.audio:
            self.emit(level, "audio", ref.path, self._draft(ref))

    def _page_dialogue(self, payload: Dialogue, level: int) -> None:
        for name in payload.characters:
            self.emit(level, "character", _quote(name))
        for line in payload.lines:
            self.emit(
                level, "line", _quote(line.speaker),
                f"text={_quote(line.text)}", f"audio={line.audio.path}", self._draft(line.audio),
            )

    def _page_quiz(self, payload: Quiz, level: int) -> None:
        for st in payload.statements:
            parts = [f"answer={st.answer}"]
            if st.feedback:
                parts.append(f"feedback={_quote(st.feedback)}")
            self.emit(level, "statement", _quote(st.text), *parts)

    def _page_video(self, payload: Video, level: int) -> None:
        self.emit(level, "video", payload.video.path, self._draft(payload.video))

    def _hotspot(self, hotspot: Hotspot, level: int) -> None:
        rect = f"{_nums(hotspot.rect)}"
        if isinstance(hotspot.interaction, TextInteraction):
            self.emit(level, "hotspot", rect, f"text={_quote(hotspot.interaction.text)}")
        else:
            ref = hotspot.interaction.audio
            self.emit(level, "hotspot", rect, f"audio={ref.path}", self._draft(ref))

    def _page_iimage(self, payload: InteractiveImage, level: int) -> None:
        self.emit(level, "image", payload.image.path, self._draft(payload.image))
        for hotspot in payload.hotspots:
            self._hotspot(hotspot, level)

    def _page_book(self, payload: InteractiveBook, level: int) -> None:
        self.emit(level, "cover", payload.cover.path, self._draft(payload.cover))
        for bp in payload.book_pages:
            self.emit(level, "bookpage", _quote(bp.title), f"image={bp.image.path}", self._draft(bp.image))
            for hotspot in bp.hotspots:
                self._hotspot(hotspot, level + 1)

    def _page_nfc(self, payload: NfcReader, level: int) -> None:
        self.emit(level, "prompt", _quote(payload.prompt))
        self.emit(level, "tag", _quote(payload.tag))

    def _page_question(self, payload: Question, level: int) -> None:
        self.emit(level, "prompt", _quote(payload.prompt))
