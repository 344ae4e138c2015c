// The player application: catalog view, experience detail with
// download/update, and the playing view driven by the embedded engine.

import { needsUpdate, openBundle, verifyBundle, type OpenedBundle } from "./bundle.js";
import { CatalogClient } from "./catalog.js";
import { Engine, EngineError, transcriptJsonl, type Frame } from "./engine.js";
import { renderFrame, type AssetResolver } from "./render.js";
import { ExperienceCache } from "./store.js";
import type { CatalogEntry, Manifest, PlayerEvent } from "./types.js";

export interface Theme {
  name: string;
  accentColor: string;
  icon: string;
}

export interface AppOptions {
  root: HTMLElement;
  client: CatalogClient;
  cache: ExperienceCache;
  theme: Theme;
  /** Turns raw asset bytes into a URL the DOM can load; object URLs in
   * the browser, data strings under test. */
  makeAssetUrl?: (path: string, bytes: Uint8Array) => string;
}

export class App {
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly client: CatalogClient;
  private readonly cache: ExperienceCache;
  private readonly theme: Theme;
  private readonly makeAssetUrl: (path: string, bytes: Uint8Array) => string;

  engine: Engine | null = null;
  currentFrame: Frame | null = null;
  private playing: OpenedBundle | null = null;
  private assetUrls = new Map<string, string>();

  constructor(options: AppOptions) {
    this.root = options.root;
    this.doc = options.root.ownerDocument;
    this.client = options.client;
    this.cache = options.cache;
    this.theme = options.theme;
    this.makeAssetUrl = options.makeAssetUrl ?? ((path) => this.guessRemoteUrl(path));
  }

  private guessRemoteUrl(path: string): string {
    const storyId = this.playing?.manifest.story_id ?? "";
    return this.client.assetUrl(storyId, path);
  }

  private el<K extends keyof HTMLElementTagNameMap>(tag: K, className?: string, text?: string) {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private clear(): HTMLElement {
    this.root.textContent = "";
    const header = this.el("header", "app-header");
    const title = this.el("h1", "app-title", `${this.theme.icon} ${this.theme.name}`);
    header.appendChild(title);
    this.root.appendChild(header);
    const main = this.el("main", "app-main");
    this.root.appendChild(main);
    return main;
  }

  // ----- catalog view --------------------------------------------------

  async showCatalog(): Promise<void> {
    const main = this.clear();
    let entries: CatalogEntry[] | null = null;
    try {
      entries = await this.client.listExperiences();
    } catch {
      const banner = this.el(
        "div", "banner error",
        "The experience server is unreachable. Downloaded experiences are still playable.",
      );
      banner.setAttribute("data-testid", "offline-banner");
      const retry = this.el("button", "action", "Retry");
      retry.addEventListener("click", () => void this.showCatalog());
      banner.appendChild(retry);
      main.appendChild(banner);
    }

    const list = this.el("ul", "experience-list");
    list.setAttribute("data-testid", "experience-list");
    const seen = new Set<string>();
    for (const entry of entries ?? []) {
      seen.add(entry.story_id);
      list.appendChild(this.catalogRow(entry.story_id, entry.title, entry.description));
    }
    for (const manifest of this.cache.manifests()) {
      if (!seen.has(manifest.story_id)) {
        list.appendChild(
          this.catalogRow(manifest.story_id, manifest.title, `${manifest.description} (downloaded)`),
        );
      }
    }
    main.appendChild(list);
  }

  private catalogRow(storyId: string, title: string, description: string) {
    const item = this.el("li", "experience-row");
    const link = this.el("button", "experience-link", title);
    link.setAttribute("data-testid", `experience-${storyId}`);
    link.addEventListener("click", () => void this.showDetail(storyId));
    item.appendChild(link);
    item.appendChild(this.el("p", "experience-desc", description));
    return item;
  }

  // ----- detail view -----------------------------------------------------

  async showDetail(storyId: string): Promise<void> {
    const main = this.clear();
    const cached = this.cache.load(storyId);

    let title = cached?.manifest.title ?? storyId;
    let description = cached?.manifest.description ?? "";
    let remote: { version: number; content_hash: string } | null = null;
    try {
      remote = await this.client.getVersion(storyId);
      const manifest = await this.client.getManifest(storyId);
      title = manifest.title;
      description = manifest.description;
    } catch {
      if (!cached) {
        main.appendChild(
          this.el("div", "banner error", "This experience is not available right now."),
        );
        return;
      }
    }

    main.appendChild(this.el("h2", "detail-title", title));
    main.appendChild(this.el("p", "detail-desc", description));
    if (cached) {
      main.appendChild(
        this.el("p", "detail-version", `Downloaded: version ${cached.manifest.version}`),
      );
    }

    if (cached && remote && needsUpdate(cached.manifest, remote).updateAvailable) {
      const badge = this.el("span", "update-badge", "Update available");
      badge.setAttribute("data-testid", "update-badge");
      main.appendChild(badge);
      main.appendChild(this.actionButton("Update", "update", () => this.download(storyId, main)));
    }

    if (!cached) {
      main.appendChild(this.actionButton("Download", "download", () => this.download(storyId, main)));
    } else {
      main.appendChild(this.actionButton("Start", "start", async () => this.startPlaying(storyId)));
    }
    main.appendChild(this.actionButton("Back to catalog", "back", () => this.showCatalog()));
  }

  private actionButton(label: string, testId: string, onClick: () => void | Promise<void>) {
    const node = this.el("button", "action", label);
    node.setAttribute("data-testid", testId);
    node.addEventListener("click", () => void onClick());
    return node;
  }

  private async download(storyId: string, main: HTMLElement): Promise<void> {
    try {
      const data = await this.client.getBundle(storyId);
      const violations = await verifyBundle(data);
      if (violations.length > 0) {
        main.appendChild(
          this.el("div", "banner error", "The download arrived corrupted; please try again."),
        );
        return;
      }
      const opened = openBundle(data);
      this.cache.save(opened.manifest, data);
      await this.showDetail(storyId);
    } catch {
      main.appendChild(
        this.el("div", "banner error", "Download failed; check the connection and retry."),
      );
    }
  }

  // ----- playing view ------------------------------------------------------

  startPlaying(storyId: string): void {
    const cached = this.cache.load(storyId);
    if (!cached) throw new Error(`experience ${storyId} is not downloaded`);
    this.playing = openBundle(cached.bundle);
    this.assetUrls = new Map();
    this.engine = new Engine(this.playing.story);
    const frame = this.engine.start();
    this.showFrame(frame);
  }

  private resolveAsset: AssetResolver = (path) => {
    const known = this.assetUrls.get(path);
    if (known) return known;
    const bytes = this.playing?.assets.get(path);
    const url = bytes ? this.makeAssetUrl(path, bytes) : this.guessRemoteUrl(path);
    this.assetUrls.set(path, url);
    return url;
  };

  send(event: PlayerEvent): void {
    if (!this.engine) return;
    try {
      const frame = this.engine.apply(event);
      this.showFrame(frame);
    } catch (err) {
      if (err instanceof EngineError) {
        this.showHint(err.message); // frame stays as it was
        return;
      }
      throw err;
    }
  }

  private showFrame(frame: Frame): void {
    this.currentFrame = frame;
    const main = this.clear();
    const stage = this.el("div", "stage");
    stage.setAttribute("data-testid", "stage");
    stage.appendChild(
      renderFrame(this.doc, frame, this.resolveAsset, {
        send: (event) => this.send(event),
        downloadTranscript: () => this.exportTranscript(),
      }),
    );
    const hint = this.el("p", "hint");
    hint.setAttribute("data-testid", "hint");
    hint.hidden = true;
    main.appendChild(stage);
    main.appendChild(hint);
  }

  private showHint(message: string): void {
    const hint = this.root.querySelector('[data-testid="hint"]') as HTMLElement | null;
    if (hint) {
      hint.textContent = message;
      hint.hidden = false;
    }
  }

  transcript(): string {
    if (!this.engine) throw new Error("no session is running");
    return transcriptJsonl(this.engine);
  }

  private exportTranscript(): void {
    const text = this.transcript();
    const anchor = this.doc.createElement("a");
    anchor.setAttribute("download", `${this.playing?.manifest.story_id ?? "story"}-transcript.jsonl`);
    anchor.setAttribute(
      "href",
      "data:application/jsonl;charset=utf-8," + encodeURIComponent(text),
    );
    anchor.setAttribute("data-testid", "transcript-link");
    this.root.appendChild(anchor);
    anchor.click();
  }
}

export function applyTheme(doc: Document, theme: Theme): void {
  doc.title = theme.name;
  doc.documentElement.style.setProperty("--accent", theme.accentColor);
}
