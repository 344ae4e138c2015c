"""Catalog service: the publish/explore/download/update protocol.

Bundles live in a plain directory tree, one directory per published
version, with a `latest` marker file naming the current version:

    <root>/experiences/<story_id>/<version>/bundle.zip
    <root>/experiences/<story_id>/latest

Publishes are atomic: the bundle is written to a temp file and renamed
into place, and only then is the marker replaced (os.replace on the same
filesystem). A crash in between leaves the previous version fully
readable. Mutations serialize per story id; reads take no locks.
"""

from __future__ import annotations

import io
import json
import mimetypes
import os
import threading
import zipfile
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from narralive.bundle import BundleManifest, BundleError, load, verify

DEFAULT_BIND = "127.0.0.1:8787"
STORE_DIR_ENV = "NARRALIVE_STORE_DIR"
BIND_ADDR_ENV = "NARRALIVE_BIND_ADDR"


class CatalogError(Exception):
    pass


class NotFound(CatalogError):
    pass


class VersionConflict(CatalogError):
    pass


class InvalidBundle(CatalogError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    story_id: str
    title: str
    description: str
    version: int
    bundle_bytes: int
    published_at: str

    def to_dict(self) -> dict:
        return {
            "story_id": self.story_id,
            "title": self.title,
            "description": self.description,
            "version": self.version,
            "bundle_bytes": self.bundle_bytes,
            "published_at": self.published_at,
        }


class CatalogStore:
    """File-backed store for published bundles, one writer per story."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.experiences = self.root / "experiences"
        self.experiences.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, story_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(story_id, threading.Lock())

    def _story_dir(self, story_id: str) -> Path:
        return self.experiences / story_id

    def _latest_version(self, story_id: str) -> int | None:
        marker = self._story_dir(story_id) / "latest"
        try:
            return int(marker.read_text().strip())
        except (FileNotFoundError, ValueError):
            return None

    def _bundle_path(self, story_id: str, version: int) -> Path:
        return self._story_dir(story_id) / str(version) / "bundle.zip"

    # ----- writes --------------------------------------------------------

    def publish(self, data: bytes) -> CatalogEntry:
        """Verify and store a bundle; the version must beat the stored one."""
        violations = verify(data)
        if violations:
            raise InvalidBundle(
                "bundle failed verification: " + "; ".join(str(v) for v in violations[:3])
            )
        try:
            manifest, _ = load(data)
        except BundleError as exc:
            raise InvalidBundle(str(exc)) from None

        with self._lock_for(manifest.story_id):
            current = self._latest_version(manifest.story_id)
            if current is not None and manifest.version <= current:
                raise VersionConflict(
                    f"{manifest.story_id} already has version {current}; "
                    f"got {manifest.version}"
                )
            story_dir = self._story_dir(manifest.story_id)
            version_dir = story_dir / str(manifest.version)
            version_dir.mkdir(parents=True, exist_ok=True)

            bundle_path = version_dir / "bundle.zip"
            tmp_bundle = version_dir / "bundle.zip.tmp"
            tmp_bundle.write_bytes(data)
            os.replace(tmp_bundle, bundle_path)

            tmp_marker = story_dir / "latest.tmp"
            tmp_marker.write_text(str(manifest.version))
            os.replace(tmp_marker, story_dir / "latest")

        return self._entry(manifest, len(data))

    # ----- reads ---------------------------------------------------------

    def _entry(self, manifest: BundleManifest, size: int) -> CatalogEntry:
        return CatalogEntry(
            story_id=manifest.story_id,
            title=manifest.title,
            description=manifest.description,
            version=manifest.version,
            bundle_bytes=size,
            published_at=manifest.published_at,
        )

    def _read_manifest(self, data: bytes) -> BundleManifest:
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            return BundleManifest.from_dict(json.loads(archive.read("manifest.json")))

    def get_bundle(self, story_id: str, version: int | None = None) -> bytes:
        if version is None:
            version = self._latest_version(story_id)
            if version is None:
                raise NotFound(f"no experience {story_id!r}")
        path = self._bundle_path(story_id, version)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no version {version} of {story_id!r}") from None

    def get_manifest(self, story_id: str, version: int | None = None) -> BundleManifest:
        return self._read_manifest(self.get_bundle(story_id, version))

    def get_version(self, story_id: str) -> dict:
        manifest = self.get_manifest(story_id)
        return {"version": manifest.version, "content_hash": manifest.content_hash}

    def get_asset(self, story_id: str, asset_path: str) -> bytes:
        data = self.get_bundle(story_id)
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            try:
                return archive.read(f"assets/{asset_path}")
            except KeyError:
                raise NotFound(f"no asset {asset_path!r} in {story_id!r}") from None

    def list_entries(self) -> list[CatalogEntry]:
        entries = []
        if not self.experiences.is_dir():
            return entries
        for story_dir in sorted(self.experiences.iterdir()):
            if not story_dir.is_dir():
                continue
            version = self._latest_version(story_dir.name)
            if version is None:
                continue
            try:
                data = self.get_bundle(story_dir.name, version)
            except NotFound:
                continue
            entries.append(self._entry(self._read_manifest(data), len(data)))
        entries.sort(key=lambda e: (e.title, e.story_id))
        return entries


def create_app(store: CatalogStore) -> FastAPI:
    """HTTP surface over a store; all bodies are JSON except bundles."""
    app = FastAPI(title="narralive catalog", docs_url=None, redoc_url=None)

    @app.get("/api/experiences")
    def list_experiences():
        return [entry.to_dict() for entry in store.list_entries()]

    @app.post("/api/experiences", status_code=201)
    async def publish(request: Request):
        data = await request.body()
        try:
            entry = store.publish(data)
        except VersionConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except InvalidBundle as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return entry.to_dict()

    @app.get("/api/experiences/{story_id}/version")
    def version(story_id: str):
        try:
            return store.get_version(story_id)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/api/experiences/{story_id}/bundle")
    def bundle(story_id: str, version: int | None = None):
        try:
            data = store.get_bundle(story_id, version)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return Response(content=data, media_type="application/zip")

    @app.get("/api/experiences/{story_id}/assets/{asset_path:path}")
    def asset(story_id: str, asset_path: str):
        try:
            data = store.get_asset(story_id, asset_path)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        media_type = mimetypes.guess_type(asset_path)[0] or "application/octet-stream"
        return Response(content=data, media_type=media_type)

    @app.get("/api/experiences/{story_id}")
    def manifest(story_id: str):
        try:
            return store.get_manifest(story_id).to_dict()
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    return app


def serve(store_dir: str | Path, bind_addr: str = DEFAULT_BIND) -> None:
    """Run the catalog service until interrupted."""
    import uvicorn

    host, _, port = bind_addr.rpartition(":")
    app = create_app(CatalogStore(store_dir))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
