// End-to-end player behavior in a DOM: browse, download, update badge,
// offline fallback, and a clicked-through playthrough whose transcript
// must match `narralive simulate` run on the same events.

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeEach, describe, expect, it, vi } from "vitest";

import { App, type Theme } from "../src/app.js";
import { openBundle } from "../src/bundle.js";
import { CatalogClient } from "../src/catalog.js";
import { ExperienceCache } from "../src/store.js";

const GOLDEN = join(__dirname, "golden");
const REPO = join(__dirname, "..", "..");

const theme: Theme = { name: "Test Player", accentColor: "#333333", icon: "T" };

function golden(name: string): Uint8Array {
  return new Uint8Array(readFileSync(join(GOLDEN, name)));
}

/** In-memory stand-in for the catalog service, seeded from golden bundles. */
class FakeServer {
  bundles = new Map<string, Uint8Array>();
  latest = new Map<string, number>();
  offline = false;

  publish(data: Uint8Array) {
    const manifest = openBundle(data).manifest;
    this.bundles.set(`${manifest.story_id}@${manifest.version}`, data);
    this.latest.set(manifest.story_id, manifest.version);
  }

  private manifestOf(storyId: string) {
    const version = this.latest.get(storyId);
    const data = this.bundles.get(`${storyId}@${version}`);
    return data ? openBundle(data).manifest : null;
  }

  fetch = async (url: string): Promise<Response> => {
    if (this.offline) throw new TypeError("network unreachable");
    const respond = (status: number, body: unknown, bytes?: Uint8Array): Response =>
      ({
        ok: status < 400,
        status,
        json: async () => body,
        arrayBuffer: async () => {
          const source = bytes ?? new Uint8Array();
          return source.buffer.slice(
            source.byteOffset, source.byteOffset + source.byteLength,
          );
        },
      }) as unknown as Response;

    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (path === "/api/experiences") {
      const entries = [...this.latest.keys()].map((id) => {
        const m = this.manifestOf(id)!;
        return {
          story_id: m.story_id, title: m.title, description: m.description,
          version: m.version, bundle_bytes: 0, published_at: m.published_at,
        };
      });
      return respond(200, entries);
    }
    let match = path.match(/^\/api\/experiences\/([^/]+)\/version$/);
    if (match) {
      const m = this.manifestOf(match[1]);
      return m
        ? respond(200, { version: m.version, content_hash: m.content_hash })
        : respond(404, { detail: "not found" });
    }
    match = path.match(/^\/api\/experiences\/([^/]+)\/bundle$/);
    if (match) {
      const version = this.latest.get(match[1]);
      const data = this.bundles.get(`${match[1]}@${version}`);
      return data ? respond(200, null, data) : respond(404, { detail: "not found" });
    }
    match = path.match(/^\/api\/experiences\/([^/]+)$/);
    if (match) {
      const m = this.manifestOf(match[1]);
      return m ? respond(200, m) : respond(404, { detail: "not found" });
    }
    return respond(404, { detail: `no route ${path}` });
  };
}

function makeApp(server: FakeServer) {
  document.body.innerHTML = '<div id="app"></div>';
  window.localStorage.clear();
  const app = new App({
    root: document.getElementById("app") as HTMLElement,
    client: new CatalogClient("http://fake", server.fetch),
    cache: new ExperienceCache(window.localStorage),
    theme,
    makeAssetUrl: (path) => `blob:${path}`,
  });
  return app;
}

function click(testId: string) {
  const node = document.querySelector(`[data-testid="${testId}"]`) as HTMLElement | null;
  expect(node, `expected a [data-testid=${testId}] control`).not.toBeNull();
  node!.click();
}

async function waitFor(testId: string) {
  await vi.waitFor(() => {
    if (!document.querySelector(`[data-testid="${testId}"]`)) {
      throw new Error(`waiting for ${testId}`);
    }
  });
}

describe("browse, download, update", () => {
  let server: FakeServer;

  beforeEach(() => {
    server = new FakeServer();
    server.publish(golden("choices-2x2.v1.zip"));
  });

  it("lists the catalog and enables Start after download", async () => {
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await waitFor("start");
    expect(document.querySelector('[data-testid="update-badge"]')).toBeNull();
  });

  it("shows the update badge once the server has v2", async () => {
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await waitFor("start");

    server.publish(golden("choices-2x2.v2.zip"));
    await app.showDetail("two-crossroads");
    await waitFor("update-badge");
    expect(document.querySelector('[data-testid="update"]')).not.toBeNull();

    click("update");
    await vi.waitFor(() => {
      if (!document.body.textContent?.includes("version 2")) {
        throw new Error("waiting for the refreshed detail view");
      }
    });
    expect(document.querySelector('[data-testid="start"]')).not.toBeNull();
    expect(document.querySelector('[data-testid="update-badge"]')).toBeNull();
  });

  it("keeps cached experiences playable when the server is gone", async () => {
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await waitFor("start");

    server.offline = true;
    await app.showCatalog();
    await waitFor("offline-banner");
    expect(
      document.querySelector('[data-testid="experience-two-crossroads"]'),
    ).not.toBeNull();
    click("experience-two-crossroads");
    await waitFor("start");
    click("start");
    await waitFor("stage");
  });

  it("rejects a corrupted download with a message", async () => {
    const corrupt = golden("choices-2x2.v1.zip").slice();
    // flip one letter inside a story.json string: still listable and
    // parseable, but the content hash no longer matches the manifest
    const needle = new TextEncoder().encode("Both routes meet");
    const index = corrupt.findIndex((_, i) =>
      needle.every((b, j) => corrupt[i + j] === b),
    );
    expect(index).toBeGreaterThan(0);
    corrupt[index] ^= 0x01; // 'B' -> 'C'
    server.bundles.set("two-crossroads@1", corrupt);
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await vi.waitFor(() => {
      if (!document.body.textContent?.includes("corrupted")) throw new Error("waiting");
    });
  });
});

describe("playthrough conformance", () => {
  it("a clicked 2x2 run produces the same transcript as the CLI", async () => {
    const server = new FakeServer();
    server.publish(golden("choices-2x2.v1.zip"));
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await waitFor("start");
    click("start");
    await waitFor("stage");

    // p-intro -> m-first(o-b) -> p-b -> p-mid -> m-second(o-c) -> p-c -> p-out -> end
    click("advance");
    click("option-o-b");
    click("advance");
    click("advance");
    click("option-o-c");
    click("advance");
    click("advance");
    await waitFor("end-frame");
    expect(document.querySelector('[data-testid="download-transcript"]')).not.toBeNull();

    const playerTranscript = app.transcript();

    // feed the exact same events through the toolchain CLI
    const events = playerTranscript
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line))
      .filter((line) => line.type === "event" || line.type === "error")
      .map((line) => JSON.stringify(line.event))
      .join("\n");
    const dir = mkdtempSync(join(tmpdir(), "player-conformance-"));
    const eventsPath = join(dir, "events.jsonl");
    writeFileSync(eventsPath, events + "\n");
    const cliTranscript = execFileSync(
      "python3",
      [
        "-m", "narralive.cli", "simulate",
        join(GOLDEN, "choices-2x2.v1.zip"), "--events", eventsPath,
      ],
      { cwd: REPO, encoding: "utf-8" },
    );
    expect(playerTranscript).toBe(cliTranscript);
  });

  it("an inapplicable event surfaces as a hint and leaves the frame", async () => {
    const server = new FakeServer();
    server.publish(golden("choices-2x2.v1.zip"));
    const app = makeApp(server);
    await app.showCatalog();
    click("experience-two-crossroads");
    await waitFor("download");
    click("download");
    await waitFor("start");
    click("start");
    await waitFor("stage");

    const before = app.currentFrame!;
    app.send({ type: "select_option", menu: "m-first", option: "o-a" }); // not showing yet
    const hint = document.querySelector('[data-testid="hint"]') as HTMLElement;
    expect(hint.hidden).toBe(false);
    expect(hint.textContent).toContain("not the current frame");
    expect(app.currentFrame).toBe(before);
  });
});
