// Bundle opening and integrity verification on the player side.

import { readZip, ZipError } from "./zip.js";
import type { Manifest, StoryDoc } from "./types.js";

export interface Violation {
  path: string | null;
  message: string;
}

export interface OpenedBundle {
  manifest: Manifest;
  story: StoryDoc;
  storyBytes: Uint8Array;
  assets: Map<string, Uint8Array>; // keyed by story-relative path
}

export async function sha256Hex(data: Uint8Array): Promise<string> {
  const buffer = data.buffer.slice(
    data.byteOffset,
    data.byteOffset + data.byteLength,
  ) as ArrayBuffer;
  const digest = await crypto.subtle.digest("SHA-256", buffer);
  return [...new Uint8Array(digest)]
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

const decoder = new TextDecoder();

/** Recompute every hash the manifest promises; empty list means intact. */
export async function verifyBundle(data: Uint8Array): Promise<Violation[]> {
  const violations: Violation[] = [];
  let entries: Map<string, Uint8Array>;
  try {
    entries = readZip(data);
  } catch (err) {
    return [{ path: null, message: `not a readable archive: ${String(err)}` }];
  }
  const manifestBytes = entries.get("manifest.json");
  if (!manifestBytes) return [{ path: "manifest.json", message: "missing" }];
  let manifest: Manifest;
  try {
    manifest = JSON.parse(decoder.decode(manifestBytes)) as Manifest;
  } catch (err) {
    return [{ path: "manifest.json", message: `malformed: ${String(err)}` }];
  }
  if (manifest.schema_version !== 1) {
    violations.push({
      path: "manifest.json",
      message: `unsupported schema ${manifest.schema_version}`,
    });
  }
  const storyBytes = entries.get("story.json");
  if (!storyBytes) {
    violations.push({ path: "story.json", message: "missing" });
  } else {
    const actual = await sha256Hex(storyBytes);
    if (actual !== manifest.content_hash) {
      violations.push({
        path: "story.json",
        message: `content hash ${actual} != manifest ${manifest.content_hash}`,
      });
    }
  }
  for (const entry of manifest.assets) {
    const payload = entries.get(`assets/${entry.path}`);
    if (!payload) {
      violations.push({ path: entry.path, message: "asset missing from archive" });
      continue;
    }
    const actual = await sha256Hex(payload);
    if (actual !== entry.sha256) {
      violations.push({
        path: entry.path,
        message: `sha256 ${actual} != manifest ${entry.sha256}`,
      });
    }
  }
  return violations;
}

/** Parse a verified bundle into its manifest, story, and asset map. */
export function openBundle(data: Uint8Array): OpenedBundle {
  const entries = readZip(data);
  const manifestBytes = entries.get("manifest.json");
  const storyBytes = entries.get("story.json");
  if (!manifestBytes || !storyBytes) {
    throw new ZipError("bundle is missing manifest.json or story.json");
  }
  const assets = new Map<string, Uint8Array>();
  for (const [name, payload] of entries) {
    if (name.startsWith("assets/")) assets.set(name.slice("assets/".length), payload);
  }
  return {
    manifest: JSON.parse(decoder.decode(manifestBytes)) as Manifest,
    story: JSON.parse(decoder.decode(storyBytes)) as StoryDoc,
    storyBytes,
    assets,
  };
}

/** The update rule: newer version, or same version with different hash. */
export function needsUpdate(
  local: { version: number; content_hash: string },
  remote: { version: number; content_hash: string },
): { updateAvailable: boolean; warning: string | null } {
  if (remote.version > local.version) {
    return { updateAvailable: true, warning: null };
  }
  if (remote.version === local.version && remote.content_hash !== local.content_hash) {
    return {
      updateAvailable: true,
      warning: `version ${remote.version} was republished with different content`,
    };
  }
  return { updateAvailable: false, warning: null };
}
