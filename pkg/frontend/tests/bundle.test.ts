// Bundle reading, verification, and the update rule on the player side.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { needsUpdate, openBundle, verifyBundle } from "../src/bundle.js";
import { readZip } from "../src/zip.js";

const GOLDEN = join(__dirname, "golden");

function golden(name: string): Uint8Array {
  return new Uint8Array(readFileSync(join(GOLDEN, name)));
}

describe("zip reader", () => {
  it("lists the fixed bundle layout", () => {
    const entries = readZip(golden("choices-2x2.v1.zip"));
    const names = [...entries.keys()];
    expect(names[0]).toBe("manifest.json");
    expect(names[1]).toBe("story.json");
  });

  it("rejects non-archives", () => {
    expect(() => readZip(new Uint8Array([1, 2, 3, 4]))).toThrow();
  });
});

describe("bundle verification", () => {
  it("accepts a pristine bundle", async () => {
    expect(await verifyBundle(golden("kitchen-sink.v1.zip"))).toEqual([]);
  });

  it("reports a corrupted asset with its path", async () => {
    const data = golden("kitchen-sink.v1.zip").slice();
    const entries = readZip(data);
    const payload = entries.get("assets/media/wall.png")!;
    payload[Math.floor(payload.length / 2)] ^= 0xff; // subarray aliases data
    const violations = await verifyBundle(data);
    expect(violations.length).toBeGreaterThan(0);
    expect(violations.some((v) => v.path === "media/wall.png")).toBe(true);
  });

  it("reports a tampered story document", async () => {
    const data = golden("choices-2x2.v1.zip").slice();
    const entries = readZip(data);
    const payload = entries.get("story.json")!;
    payload[0] ^= 0x01;
    const violations = await verifyBundle(data);
    expect(violations.some((v) => v.path === "story.json")).toBe(true);
  });

  it("opens manifest, story, and assets", () => {
    const opened = openBundle(golden("choices-2x2.v1.zip"));
    expect(opened.manifest.story_id).toBe("two-crossroads");
    expect(opened.story.chapters.length).toBe(1);
  });
});

describe("update rule", () => {
  const v = (version: number, hash: string) => ({ version, content_hash: hash });

  it("newer version updates without warning", () => {
    const check = needsUpdate(v(1, "a"), v(2, "b"));
    expect(check.updateAvailable).toBe(true);
    expect(check.warning).toBeNull();
  });

  it("identical manifests do not update", () => {
    expect(needsUpdate(v(1, "a"), v(1, "a")).updateAvailable).toBe(false);
  });

  it("same version different hash updates with warning", () => {
    const check = needsUpdate(v(1, "a"), v(1, "b"));
    expect(check.updateAvailable).toBe(true);
    expect(check.warning).toMatch(/republished/);
  });

  it("older remote does not update", () => {
    expect(needsUpdate(v(3, "a"), v(2, "b")).updateAvailable).toBe(false);
  });

  it("the golden v1/v2 bundles trigger the update path", () => {
    const m1 = openBundle(golden("choices-2x2.v1.zip")).manifest;
    const m2 = openBundle(golden("choices-2x2.v2.zip")).manifest;
    expect(needsUpdate(m1, m2).updateAvailable).toBe(true);
  });
});
