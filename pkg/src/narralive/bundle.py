"""Published bundles: compile, load, verify, and update detection.

A bundle is one ZIP archive with a fixed layout:

    manifest.json   version, hashes, asset inventory
    story.json      canonical story document
    assets/...      media payloads, paths as referenced by the story

Compilation is deterministic: entries are stored (never deflated) in a
fixed order with zeroed timestamps, the story document is JSON with
sorted keys and no insignificant whitespace, and published_at defaults
to a fixed epoch. Identical inputs give byte-identical archives.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

from narralive import analyzer
from narralive.diagnostics import InvalidStory
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
    effective_qr_payload,
    iter_assets,
    iter_elements,
)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
STORY_NAME = "story.json"
ASSET_PREFIX = "assets/"

# zip's own epoch; the deterministic default for published_at
EPOCH_ISO = "1980-01-01T00:00:00Z"
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


class BundleError(Exception):
    pass


class MissingAsset(BundleError):
    def __init__(self, path: str):
        super().__init__(f"asset {path!r} not found under the asset root")
        self.path = path


class CorruptArchive(BundleError):
    pass


class SchemaMismatch(BundleError):
    pass


class StoryIdMismatch(BundleError):
    pass


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# canonical story document
# ---------------------------------------------------------------------------


def _asset_doc(ref: AssetRef | None) -> dict | None:
    if ref is None:
        return None
    return {
        "path": ref.path,
        "kind": ref.kind,
        "sha256": ref.sha256,
        "bytes": ref.bytes,
        "draft": ref.draft,
    }


def _asset_from(doc: dict | None) -> AssetRef | None:
    if doc is None:
        return None
    return AssetRef(
        path=doc["path"], kind=doc["kind"], sha256=doc.get("sha256"),
        bytes=doc.get("bytes"), draft=doc.get("draft", False),
    )


def _hotspot_doc(hotspot: Hotspot) -> dict:
    if isinstance(hotspot.interaction, AudioInteraction):
        interaction = {"type": "audio", "audio": _asset_doc(hotspot.interaction.audio)}
    else:
        interaction = {"type": "text", "text": hotspot.interaction.text}
    return {"rect": list(hotspot.rect), "interaction": interaction}


def _hotspot_from(doc: dict) -> Hotspot:
    idoc = doc["interaction"]
    if idoc["type"] == "audio":
        interaction = AudioInteraction(audio=_asset_from(idoc["audio"]))
    else:
        interaction = TextInteraction(text=idoc["text"])
    return Hotspot(rect=tuple(doc["rect"]), interaction=interaction)


def _payload_doc(payload) -> dict:
    if isinstance(payload, Simple):
        return {
            "kind": "simple",
            "text": payload.text,
            "images": [_asset_doc(r) for r in payload.images],
            "audio": [_asset_doc(r) for r in payload.audio],
        }
    if isinstance(payload, Dialogue):
        return {
            "kind": "dialogue",
            "characters": list(payload.characters),
            "lines": [
                {"speaker": ln.speaker, "text": ln.text, "audio": _asset_doc(ln.audio)}
                for ln in payload.lines
            ],
        }
    if isinstance(payload, Quiz):
        return {
            "kind": "quiz",
            "statements": [
                {"text": s.text, "answer": s.answer, "feedback": s.feedback}
                for s in payload.statements
            ],
        }
    if isinstance(payload, Video):
        return {"kind": "video", "video": _asset_doc(payload.video)}
    if isinstance(payload, InteractiveImage):
        return {
            "kind": "iimage",
            "image": _asset_doc(payload.image),
            "hotspots": [_hotspot_doc(h) for h in payload.hotspots],
        }
    if isinstance(payload, InteractiveBook):
        return {
            "kind": "book",
            "cover": _asset_doc(payload.cover),
            "book_pages": [
                {
                    "title": bp.title,
                    "image": _asset_doc(bp.image),
                    "hotspots": [_hotspot_doc(h) for h in bp.hotspots],
                }
                for bp in payload.book_pages
            ],
        }
    if isinstance(payload, NfcReader):
        return {"kind": "nfc", "prompt": payload.prompt, "tag": payload.tag}
    if isinstance(payload, Question):
        return {"kind": "question", "prompt": payload.prompt}
    raise TypeError(type(payload).__name__)


def _payload_from(doc: dict):
    kind = doc["kind"]
    if kind == "simple":
        return Simple(
            text=doc["text"],
            images=tuple(_asset_from(a) for a in doc["images"]),
            audio=tuple(_asset_from(a) for a in doc["audio"]),
        )
    if kind == "dialogue":
        return Dialogue(
            characters=tuple(doc["characters"]),
            lines=tuple(
                DialogueLine(
                    speaker=ln["speaker"], text=ln["text"], audio=_asset_from(ln["audio"])
                )
                for ln in doc["lines"]
            ),
        )
    if kind == "quiz":
        return Quiz(
            statements=tuple(
                QuizStatement(text=s["text"], answer=s["answer"], feedback=s["feedback"])
                for s in doc["statements"]
            )
        )
    if kind == "video":
        return Video(video=_asset_from(doc["video"]))
    if kind == "iimage":
        return InteractiveImage(
            image=_asset_from(doc["image"]),
            hotspots=tuple(_hotspot_from(h) for h in doc["hotspots"]),
        )
    if kind == "book":
        return InteractiveBook(
            cover=_asset_from(doc["cover"]),
            book_pages=tuple(
                BookPage(
                    title=bp["title"],
                    image=_asset_from(bp["image"]),
                    hotspots=tuple(_hotspot_from(h) for h in bp["hotspots"]),
                )
                for bp in doc["book_pages"]
            ),
        )
    if kind == "nfc":
        return NfcReader(prompt=doc["prompt"], tag=doc["tag"])
    if kind == "question":
        return Question(prompt=doc["prompt"])
    raise ValueError(f"unknown payload kind {kind!r}")


def _trigger_doc(trigger) -> dict | None:
    if trigger is None:
        return None
    if isinstance(trigger, PoiTrigger):
        return {"type": "poi", "rect": list(trigger.rect)}
    if isinstance(trigger, RegionTrigger):
        return {"type": "region", "lat": trigger.lat, "lon": trigger.lon,
                "radius_m": trigger.radius_m}
    if isinstance(trigger, QrTrigger):
        return {"type": "qr", "payload": trigger.payload}
    if isinstance(trigger, NfcTrigger):
        return {"type": "nfc", "tag": trigger.tag}
    raise TypeError(type(trigger).__name__)


def _trigger_from(doc: dict | None):
    if doc is None:
        return None
    kind = doc["type"]
    if kind == "poi":
        return PoiTrigger(rect=tuple(doc["rect"]))
    if kind == "region":
        return RegionTrigger(lat=doc["lat"], lon=doc["lon"], radius_m=doc["radius_m"])
    if kind == "qr":
        return QrTrigger(payload=doc["payload"])
    if kind == "nfc":
        return NfcTrigger(tag=doc["tag"])
    raise ValueError(f"unknown trigger type {kind!r}")


def _element_doc(element) -> dict:
    if isinstance(element, Scene):
        return {
            "type": "scene", "id": element.id, "title": element.title,
            "elements": [_element_doc(e) for e in element.elements],
        }
    if isinstance(element, Page):
        return {"type": "page", "id": element.id, "payload": _payload_doc(element.payload)}
    if isinstance(element, Menu):
        return {
            "type": "menu", "id": element.id, "kind": element.kind,
            "style": element.style, "image": _asset_doc(element.image),
            "options": [
                {
                    "id": o.id, "label": o.label, "trigger": _trigger_doc(o.trigger),
                    "body": [_element_doc(e) for e in o.body],
                }
                for o in element.options
            ],
        }
    if isinstance(element, End):
        return {"type": "end", "id": element.id, "label": element.label}
    raise TypeError(type(element).__name__)


def _element_from(doc: dict):
    kind = doc["type"]
    if kind == "scene":
        return Scene(
            id=doc["id"], title=doc["title"],
            elements=tuple(_element_from(e) for e in doc["elements"]),
        )
    if kind == "page":
        return Page(id=doc["id"], payload=_payload_from(doc["payload"]))
    if kind == "menu":
        return Menu(
            id=doc["id"], kind=doc["kind"], style=doc["style"],
            image=_asset_from(doc["image"]),
            options=tuple(
                MenuOption(
                    id=o["id"], label=o["label"], trigger=_trigger_from(o["trigger"]),
                    body=tuple(_element_from(e) for e in o["body"]),
                )
                for o in doc["options"]
            ),
        )
    if kind == "end":
        return End(id=doc["id"], label=doc["label"])
    raise ValueError(f"unknown element type {kind!r}")


def story_to_doc(story: Story) -> dict:
    return {
        "id": story.id,
        "title": story.title,
        "description": story.description,
        "language": story.language,
        "author_tags": sorted(story.author_tags),
        "evidence": {
            "structure_validated": story.evidence.structure_validated,
            "sample_scenes_validated": story.evidence.sample_scenes_validated,
            "validated_onsite": story.evidence.validated_onsite,
        },
        "chapters": [
            {
                "id": c.id, "title": c.title,
                "preview_image": _asset_doc(c.preview_image),
                "elements": [_element_doc(e) for e in c.elements],
            }
            for c in story.chapters
        ],
    }


def story_from_doc(doc: dict) -> Story:
    evidence = doc["evidence"]
    return Story(
        id=doc["id"],
        title=doc["title"],
        description=doc["description"],
        language=doc["language"],
        author_tags=frozenset(doc["author_tags"]),
        evidence=ValidationEvidence(
            structure_validated=evidence["structure_validated"],
            sample_scenes_validated=evidence["sample_scenes_validated"],
            validated_onsite=evidence["validated_onsite"],
        ),
        chapters=tuple(
            Chapter(
                id=c["id"], title=c["title"],
                preview_image=_asset_from(c["preview_image"]),
                elements=tuple(_element_from(e) for e in c["elements"]),
            )
            for c in doc["chapters"]
        ),
    )


def canonical_story_bytes(story: Story) -> bytes:
    """Canonical story document: sorted keys, compact, UTF-8. The
    content_hash is the sha256 of exactly these bytes."""
    return _canonical_json(story_to_doc(story))


def _canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BundleManifest:
    story_id: str
    title: str
    description: str
    version: int
    content_hash: str
    assets: tuple[dict, ...]
    published_at: str
    erl_estimate: int
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "story_id": self.story_id,
            "title": self.title,
            "description": self.description,
            "version": self.version,
            "content_hash": self.content_hash,
            "assets": list(self.assets),
            "published_at": self.published_at,
            "erl_estimate": self.erl_estimate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BundleManifest":
        try:
            return cls(
                schema_version=data["schema_version"],
                story_id=data["story_id"],
                title=data["title"],
                description=data["description"],
                version=data["version"],
                content_hash=data["content_hash"],
                assets=tuple(data["assets"]),
                published_at=data["published_at"],
                erl_estimate=data["erl_estimate"],
            )
        except (KeyError, TypeError) as exc:
            raise CorruptArchive(f"manifest is malformed: {exc}") from None


def generated_qr_payloads(story: Story) -> list[tuple[str, str, str]]:
    """(menu id, option id, payload) for every qr-triggered option."""
    out = []
    for _, element in iter_elements(story):
        if isinstance(element, Menu):
            for option in element.options:
                payload = effective_qr_payload(story, element, option)
                if payload is not None:
                    out.append((element.id, option.id, payload))
    return out


# ---------------------------------------------------------------------------
# compile / load / verify / update
# ---------------------------------------------------------------------------


def compile(
    story: Story,
    asset_root: str | Path,
    version: int,
    erl: int,
    published_at: str = EPOCH_ISO,
) -> bytes:
    """Pack a validated story and its assets into a bundle archive."""
    if version < 1:
        raise ValueError("bundle version must be a positive integer")
    if not 1 <= erl <= 7:
        raise ValueError("erl must be within 1..7")
    errors = [d for d in analyzer.validate(story) if d.severity == "error"]
    if errors:
        raise InvalidStory(errors)

    root = Path(asset_root)
    seen: dict[str, dict] = {}
    payloads: dict[str, bytes] = {}
    for ref in iter_assets(story):
        if ref.path in seen:
            continue
        file_path = root / ref.path
        if not file_path.is_file():
            raise MissingAsset(ref.path)
        data = file_path.read_bytes()
        seen[ref.path] = {
            "path": ref.path,
            "sha256": sha256_hex(data),
            "bytes": len(data),
            "kind": ref.kind,
            "draft": ref.draft,
        }
        payloads[ref.path] = data

    story_bytes = canonical_story_bytes(story)
    manifest = BundleManifest(
        story_id=story.id,
        title=story.title,
        description=story.description,
        version=version,
        content_hash=sha256_hex(story_bytes),
        assets=tuple(seen[path] for path in sorted(seen)),
        published_at=published_at,
        erl_estimate=erl,
    )

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        _write_entry(archive, MANIFEST_NAME, _canonical_json(manifest.to_dict()))
        _write_entry(archive, STORY_NAME, story_bytes)
        for path in sorted(payloads):
            _write_entry(archive, ASSET_PREFIX + path, payloads[path])
    return buffer.getvalue()


def _write_entry(archive: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.create_system = 3
    info.external_attr = 0o644 << 16
    archive.writestr(info, data)


def load(data: bytes) -> tuple[BundleManifest, Story]:
    """Unpack a bundle; the story comes back structurally equal to the
    one compiled in."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise CorruptArchive(f"not a readable archive: {exc}") from None
    with archive:
        try:
            manifest_bytes = archive.read(MANIFEST_NAME)
            story_bytes = archive.read(STORY_NAME)
        except (KeyError, zipfile.BadZipFile) as exc:
            raise CorruptArchive(str(exc)) from None
        try:
            manifest_doc = json.loads(manifest_bytes)
        except json.JSONDecodeError as exc:
            raise CorruptArchive(f"manifest.json: {exc}") from None
        manifest = BundleManifest.from_dict(manifest_doc)
        if manifest.schema_version != SCHEMA_VERSION:
            raise SchemaMismatch(
                f"bundle schema {manifest.schema_version} != supported {SCHEMA_VERSION}"
            )
        try:
            story = story_from_doc(json.loads(story_bytes))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise CorruptArchive(f"story.json: {exc}") from None
        return manifest, story


@dataclass(frozen=True)
class Violation:
    path: str | None
    message: str

    def __str__(self) -> str:
        return f"{self.path or '<archive>'}: {self.message}"


def verify(data: bytes) -> list[Violation]:
    """Recompute every hash in the bundle; an empty list means intact.

    Every entry is re-read (zip CRCs catch raw byte damage), asset
    sha256s are recomputed against the manifest, and the story document
    is re-hashed against content_hash.
    """
    violations: list[Violation] = []
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        return [Violation(None, f"not a readable archive: {exc}")]

    with archive:
        contents: dict[str, bytes] = {}
        damaged: set[str] = set()
        for name in archive.namelist():
            try:
                contents[name] = archive.read(name)
            except zipfile.BadZipFile as exc:
                damaged.add(name)
                violations.append(Violation(name, f"damaged entry: {exc}"))
        if MANIFEST_NAME not in contents:
            if MANIFEST_NAME not in damaged:
                violations.append(Violation(MANIFEST_NAME, "missing"))
            return violations
        try:
            manifest = BundleManifest.from_dict(json.loads(contents[MANIFEST_NAME]))
        except (json.JSONDecodeError, CorruptArchive) as exc:
            violations.append(Violation(MANIFEST_NAME, str(exc)))
            return violations
        if manifest.schema_version != SCHEMA_VERSION:
            violations.append(
                Violation(MANIFEST_NAME, f"unsupported schema {manifest.schema_version}")
            )

        if STORY_NAME not in contents:
            if STORY_NAME not in damaged:
                violations.append(Violation(STORY_NAME, "missing"))
        else:
            actual = sha256_hex(contents[STORY_NAME])
            if actual != manifest.content_hash:
                violations.append(
                    Violation(
                        STORY_NAME,
                        f"content hash {actual} != manifest {manifest.content_hash}",
                    )
                )

        expected_names = {MANIFEST_NAME, STORY_NAME}
        for entry in manifest.assets:
            name = ASSET_PREFIX + entry["path"]
            expected_names.add(name)
            if name not in contents:
                if name not in damaged:
                    violations.append(Violation(entry["path"], "asset missing from archive"))
                continue
            actual = sha256_hex(contents[name])
            if actual != entry["sha256"]:
                violations.append(
                    Violation(entry["path"], f"sha256 {actual} != manifest {entry['sha256']}")
                )
            if len(contents[name]) != entry["bytes"]:
                violations.append(
                    Violation(entry["path"], f"size {len(contents[name])} != manifest {entry['bytes']}")
                )
        for name in contents:
            if name not in expected_names:
                violations.append(Violation(name, "entry not listed in manifest"))

        # manifest inventory must mirror the story's references exactly
        if STORY_NAME in contents:
            try:
                story = story_from_doc(json.loads(contents[STORY_NAME]))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                story = None
            if story is not None:
                referenced = {ref.path for ref in iter_assets(story)}
                listed = {entry["path"] for entry in manifest.assets}
                for path in sorted(referenced - listed):
                    violations.append(Violation(path, "referenced by story, not in manifest"))
                for path in sorted(listed - referenced):
                    violations.append(Violation(path, "in manifest, not referenced by story"))
    return violations


@dataclass(frozen=True)
class UpdateCheck:
    update_available: bool
    warnings: tuple[str, ...] = ()


def needs_update(local: BundleManifest, remote: BundleManifest) -> UpdateCheck:
    """Whether the remote bundle should replace the local one.

    Newer remote version: yes. Same version with a different content
    hash: yes, with a warning (someone republished without bumping).
    """
    if local.story_id != remote.story_id:
        raise StoryIdMismatch(f"{local.story_id!r} vs {remote.story_id!r}")
    if remote.version > local.version:
        return UpdateCheck(True)
    if remote.version == local.version and remote.content_hash != local.content_hash:
        return UpdateCheck(
            True,
            (
                f"version {remote.version} was republished with different content "
                f"({local.content_hash[:12]}... -> {remote.content_hash[:12]}...)",
            ),
        )
    return UpdateCheck(False)
