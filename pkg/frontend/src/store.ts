// Downloaded-experience cache on top of web Storage. Bundles at desk
// scale are small enough to keep base64-encoded in localStorage, which
// is what keeps cached experiences playable with the server gone.

import type { Manifest } from "./types.js";

const PREFIX = "narralive.exp.";

export function toBase64(data: Uint8Array): string {
  let binary = "";
  for (let i = 0; i < data.length; i += 0x8000) {
    binary += String.fromCharCode(...data.subarray(i, i + 0x8000));
  }
  return btoa(binary);
}

export function fromBase64(encoded: string): Uint8Array {
  const binary = atob(encoded);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

interface StoredExperience {
  manifest: Manifest;
  bundle: string; // base64
}

export class ExperienceCache {
  constructor(private readonly storage: Storage) {}

  save(manifest: Manifest, bundle: Uint8Array): void {
    const record: StoredExperience = { manifest, bundle: toBase64(bundle) };
    this.storage.setItem(PREFIX + manifest.story_id, JSON.stringify(record));
  }

  load(storyId: string): { manifest: Manifest; bundle: Uint8Array } | null {
    const raw = this.storage.getItem(PREFIX + storyId);
    if (!raw) return null;
    try {
      const record = JSON.parse(raw) as StoredExperience;
      return { manifest: record.manifest, bundle: fromBase64(record.bundle) };
    } catch {
      return null;
    }
  }

  manifests(): Manifest[] {
    const out: Manifest[] = [];
    for (let i = 0; i < this.storage.length; i++) {
      const key = this.storage.key(i);
      if (!key || !key.startsWith(PREFIX)) continue;
      const cached = this.load(key.slice(PREFIX.length));
      if (cached) out.push(cached.manifest);
    }
    out.sort((a, b) => a.title.localeCompare(b.title));
    return out;
  }
}
