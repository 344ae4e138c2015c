// The traversal engine, transition-for-transition the same machine the
// toolchain runs: pages advance, Choice menus divert the plot exactly
// once and merge back (consumed menus are skipped on re-encounter),
// More menus offer re-viewable extras behind Continue, explicit ends
// finish with a label, running past the last chapter finishes without
// one. Error messages match the toolchain so transcripts are
// byte-comparable.

import { pyJson } from "./jsonl.js";
import type {
  AssetDoc,
  ChapterDoc,
  ElementDoc,
  MenuDoc,
  OptionDoc,
  PageDoc,
  PagePayload,
  PlayerEvent,
  StoryDoc,
} from "./types.js";

export class EngineError extends Error {
  code = "engine_error";
}

export class EventNotApplicable extends EngineError {
  code = "event_not_applicable";
}

export class NoMatch extends EngineError {
  code = "no_match";
}

export class SessionFinished extends EngineError {
  code = "session_finished";
}

const EARTH_RADIUS_M = 6_371_000;

export function haversineM(lat1: number, lon1: number, lat2: number, lon2: number): number {
  const rad = Math.PI / 180;
  const dphi = (lat2 - lat1) * rad;
  const dlambda = (lon2 - lon1) * rad;
  const a =
    Math.sin(dphi / 2) ** 2 +
    Math.cos(lat1 * rad) * Math.cos(lat2 * rad) * Math.sin(dlambda / 2) ** 2;
  return EARTH_RADIUS_M * 2 * Math.atan2(Math.sqrt(a), Math.sqrt(1 - a));
}

export function effectiveQrPayload(story: StoryDoc, menu: MenuDoc, option: OptionDoc): string | null {
  if (!option.trigger || option.trigger.type !== "qr") return null;
  return option.trigger.payload ?? `NARRALIVE:${story.id}:${menu.id}:${option.id}`;
}

// ---------------------------------------------------------------------------
// tree addressing
// ---------------------------------------------------------------------------

type NodeKind = "story" | "chapter" | "scene" | "menu" | "option" | "page" | "end";

interface Node {
  kind: NodeKind;
  value: StoryDoc | ChapterDoc | ElementDoc | OptionDoc;
}

type Path = number[];

function childNodes(node: Node): Node[] | null {
  switch (node.kind) {
    case "story":
      return (node.value as StoryDoc).chapters.map((c) => ({ kind: "chapter", value: c }));
    case "chapter":
      return (node.value as ChapterDoc).elements.map(wrapElement);
    case "scene":
      return ((node.value as ElementDoc & { type: "scene" }).elements).map(wrapElement);
    case "menu":
      return (node.value as MenuDoc).options.map((o) => ({ kind: "option", value: o }));
    case "option":
      return (node.value as OptionDoc).body.map(wrapElement);
    default:
      return null;
  }
}

function wrapElement(element: ElementDoc): Node {
  return { kind: element.type, value: element };
}

function resolveNode(story: StoryDoc, path: Path): Node {
  let node: Node = { kind: "story", value: story };
  for (const index of path) {
    const children = childNodes(node);
    if (!children || index < 0 || index >= children.length) {
      throw new EngineError(`path ${path.join(",")} does not resolve`);
    }
    node = children[index];
  }
  return node;
}

const pathKey = (path: Path) => path.join("/");

// ---------------------------------------------------------------------------
// frames and render models
// ---------------------------------------------------------------------------

export interface TriggerView {
  type: "poi" | "region" | "qr" | "nfc";
  rect?: [number, number, number, number];
  lat?: number;
  lon?: number;
  radius_m?: number;
  payload?: string | null;
  tag?: string;
}

export interface OptionView {
  id: string;
  label: string;
  trigger: TriggerView | null;
  viewed: boolean;
}

export interface PageFrame {
  kind: "page";
  seq: number;
  pageId: string;
  render: Record<string, unknown>;
  state: Record<string, unknown>;
  context: { chapter: string | null; scene: string | null };
}

export interface MenuFrame {
  kind: "menu";
  seq: number;
  menuId: string;
  menuKind: "choice" | "more";
  style: MenuDoc["style"];
  image: AssetDoc | null;
  options: OptionView[];
  canContinue: boolean;
  context: { chapter: string | null; scene: string | null };
}

export interface EndFrame {
  kind: "end";
  seq: number;
  label: string | null;
}

export type Frame = PageFrame | MenuFrame | EndFrame;

/** Render model for one page; quiz answers and NFC tags are withheld. */
export function renderPage(page: PageDoc): Record<string, unknown> {
  const payload: PagePayload = page.payload;
  switch (payload.kind) {
    case "simple":
      return {
        kind: "simple",
        text: payload.text,
        media: [...payload.images, ...payload.audio],
      };
    case "dialogue":
      return {
        kind: "dialogue",
        characters: payload.characters,
        lines: payload.lines,
      };
    case "quiz":
      return {
        kind: "quiz",
        statements: payload.statements.map((s, index) => ({ index, text: s.text })),
      };
    case "video":
      return { kind: "video", video: payload.video };
    case "iimage":
      return { kind: "iimage", image: payload.image, hotspots: payload.hotspots };
    case "book": {
      const skim: Record<string, unknown>[] = [
        { position: 0, role: "cover", image: payload.cover },
      ];
      payload.book_pages.forEach((bp, i) =>
        skim.push({
          position: i + 1,
          role: "page",
          title: bp.title,
          image: bp.image,
          hotspots: bp.hotspots,
        }),
      );
      return { kind: "book", skim };
    }
    case "nfc":
      return { kind: "nfc", prompt: payload.prompt };
    case "question":
      return { kind: "question", prompt: payload.prompt, input: "text" };
  }
}

// ---------------------------------------------------------------------------
// session
// ---------------------------------------------------------------------------

interface MenuState {
  viewed: Set<string>;
  consumed: boolean;
}

export interface AnswerRecord {
  page: string;
  kind: "quiz" | "question";
  frame_seq: number;
  statement?: number;
  given?: string;
  correct?: boolean;
  text?: string;
}

export interface TranscriptEntry {
  event: PlayerEvent | null;
  frameSeq: number | null;
  frameKind: string | null;
  error: { code: string; message: string } | null;
}

type Outcome =
  | { at: "page"; path: Path }
  | { at: "menu"; path: Path }
  | { at: "end"; label: string | null };

export class Engine {
  readonly story: StoryDoc;
  private stack: Array<[Path, number]> = [];
  private current!: Outcome;
  private menuStates = new Map<string, MenuState>();
  answers: AnswerRecord[] = [];
  finished = false;
  private frameSeq = 0;
  entries: TranscriptEntry[] = [];

  constructor(story: StoryDoc) {
    this.story = story;
  }

  /** Open the session and emit the first frame. */
  start(): Frame {
    this.stack = [[[], 0]];
    this.normalize();
    const frame = this.emit();
    this.entries.push({ event: null, frameSeq: frame.seq, frameKind: frame.kind, error: null });
    return frame;
  }

  /** Feed one visitor event; throws EngineError subclasses on rejection. */
  apply(event: PlayerEvent): Frame {
    if (this.finished) {
      throw new SessionFinished("the session already reached an end frame");
    }
    const frame = this.dispatch(event);
    this.entries.push({ event, frameSeq: frame.seq, frameKind: frame.kind, error: null });
    return frame;
  }

  /** apply(), but rejections become transcript entries (headless runs). */
  applyRecordingErrors(event: PlayerEvent): Frame | null {
    try {
      return this.apply(event);
    } catch (err) {
      if (err instanceof EngineError) {
        this.entries.push({
          event,
          frameSeq: null,
          frameKind: null,
          error: { code: err.code, message: err.message },
        });
        return null;
      }
      throw err;
    }
  }

  // ----- traversal core ---------------------------------------------------

  private normalize(): void {
    for (;;) {
      if (this.stack.length === 0) {
        this.current = { at: "end", label: null };
        return;
      }
      const [cpath, idx] = this.stack[this.stack.length - 1];
      const container = resolveNode(this.story, cpath);
      const children = childNodes(container)!;

      if (idx >= children.length) {
        if (container.kind === "option") {
          const menuPath = cpath.slice(0, -1);
          const menu = resolveNode(this.story, menuPath).value as MenuDoc;
          const state = this.menuState(menuPath);
          this.stack.pop();
          if (menu.kind === "choice") {
            state.consumed = true;
            const top = this.stack[this.stack.length - 1];
            top[1] += 1; // merge back past the menu
            continue;
          }
          state.viewed.add((container.value as OptionDoc).id);
          this.current = { at: "menu", path: menuPath };
          return;
        }
        this.stack.pop();
        if (container.kind === "story") continue; // ran past the last chapter
        const top = this.stack[this.stack.length - 1];
        top[1] += 1;
        continue;
      }

      const child = children[idx];
      const childPath = [...cpath, idx];
      if (child.kind === "chapter" || child.kind === "scene") {
        this.stack.push([childPath, 0]);
        continue;
      }
      if (child.kind === "page") {
        this.current = { at: "page", path: childPath };
        return;
      }
      if (child.kind === "menu") {
        const menu = child.value as MenuDoc;
        if (menu.kind === "choice" && this.menuState(childPath).consumed) {
          const top = this.stack[this.stack.length - 1];
          top[1] += 1; // already decided; pass over
          continue;
        }
        this.current = { at: "menu", path: childPath };
        return;
      }
      // end element
      this.current = { at: "end", label: (child.value as { label: string | null }).label };
      return;
    }
  }

  private menuState(path: Path): MenuState {
    const key = pathKey(path);
    let state = this.menuStates.get(key);
    if (!state) {
      state = { viewed: new Set(), consumed: false };
      this.menuStates.set(key, state);
    }
    return state;
  }

  private context(): { chapter: string | null; scene: string | null } {
    let chapter: string | null = null;
    let scene: string | null = null;
    for (const [cpath, idx] of this.stack) {
      const container = resolveNode(this.story, cpath);
      const children = childNodes(container)!;
      if (idx < children.length) {
        const element = children[idx];
        if (element.kind === "chapter") chapter = (element.value as ChapterDoc).id;
        if (element.kind === "scene") scene = (element.value as { id: string }).id;
      }
    }
    return { chapter, scene };
  }

  private emit(): Frame {
    const seq = ++this.frameSeq;
    let frame: Frame;
    if (this.current.at === "page") {
      const page = resolveNode(this.story, this.current.path).value as PageDoc;
      frame = {
        kind: "page",
        seq,
        pageId: page.id,
        render: renderPage(page),
        state: this.pageState(page),
        context: this.context(),
      };
    } else if (this.current.at === "menu") {
      const path = this.current.path;
      const menu = resolveNode(this.story, path).value as MenuDoc;
      const state = this.menuState(path);
      frame = {
        kind: "menu",
        seq,
        menuId: menu.id,
        menuKind: menu.kind,
        style: menu.style,
        image: menu.image,
        options: menu.options.map((option) => ({
          id: option.id,
          label: option.label,
          trigger: this.triggerView(menu, option),
          viewed: state.viewed.has(option.id),
        })),
        canContinue: menu.kind === "more",
        context: this.context(),
      };
    } else {
      frame = { kind: "end", seq, label: this.current.label };
      this.finished = true;
    }
    return frame;
  }

  private triggerView(menu: MenuDoc, option: OptionDoc): TriggerView | null {
    const trigger = option.trigger;
    if (!trigger) return null;
    if (trigger.type === "qr") {
      return { type: "qr", payload: effectiveQrPayload(this.story, menu, option) };
    }
    return { ...trigger };
  }

  private pageState(page: PageDoc): Record<string, unknown> {
    if (page.payload.kind === "quiz") {
      const statements = page.payload.statements;
      const answered: Record<string, unknown> = {};
      for (const record of this.answers) {
        if (record.page === page.id && record.kind === "quiz") {
          answered[String(record.statement)] = {
            given: record.given,
            correct: record.correct,
            feedback: statements[record.statement!].feedback,
          };
        }
      }
      return { answered };
    }
    if (page.payload.kind === "question") {
      return {
        responses: this.answers
          .filter((r) => r.page === page.id && r.kind === "question")
          .map((r) => r.text),
      };
    }
    return {};
  }

  // ----- event dispatch -----------------------------------------------------

  private currentPage(): PageDoc | null {
    if (this.current.at !== "page") return null;
    return resolveNode(this.story, this.current.path).value as PageDoc;
  }

  private currentMenu(): { menu: MenuDoc; path: Path } | null {
    if (this.current.at !== "menu") return null;
    const path = this.current.path;
    return { menu: resolveNode(this.story, path).value as MenuDoc, path };
  }

  private dispatch(event: PlayerEvent): Frame {
    switch (event.type) {
      case "advance":
        return this.advance();
      case "select_option":
        return this.selectOption(event.menu, event.option);
      case "continue":
        return this.continueMenu(event.menu);
      case "position":
        return this.position(event.lat, event.lon);
      case "qr_scan":
        return this.qrScan(event.payload);
      case "nfc_scan":
        return this.nfcScan(event.tag);
      case "quiz_answer":
        return this.quizAnswer(event.page, event.statement, event.answer);
      case "text_answer":
        return this.textAnswer(event.page, event.text);
    }
  }

  private stepForward(): Frame {
    const top = this.stack[this.stack.length - 1];
    top[1] += 1;
    this.normalize();
    return this.emit();
  }

  private advance(): Frame {
    const page = this.currentPage();
    if (!page) throw new EventNotApplicable("advance applies to a page frame");
    if (page.payload.kind === "nfc") {
      throw new EventNotApplicable(`page '${page.id}' waits for an nfc scan`);
    }
    return this.stepForward();
  }

  private selectOption(menuId: string, optionId: string): Frame {
    const at = this.currentMenu();
    if (!at || at.menu.id !== menuId) {
      for (const [key, state] of this.menuStates) {
        if (!state.consumed) continue;
        const path = key === "" ? [] : key.split("/").map(Number);
        const menu = resolveNode(this.story, path).value as MenuDoc;
        if (menu.id === menuId) {
          throw new EventNotApplicable(`choice menu '${menuId}' is already consumed`);
        }
      }
      throw new EventNotApplicable(`menu '${menuId}' is not the current frame`);
    }
    const state = this.menuState(at.path);
    if (at.menu.kind === "choice" && state.consumed) {
      throw new EventNotApplicable(`choice menu '${menuId}' is already consumed`);
    }
    const index = at.menu.options.findIndex((o) => o.id === optionId);
    if (index < 0) {
      throw new EventNotApplicable(`menu '${menuId}' has no option '${optionId}'`);
    }
    this.stack.push([[...at.path, index], 0]);
    this.normalize();
    return this.emit();
  }

  private continueMenu(menuId: string): Frame {
    const at = this.currentMenu();
    if (!at || at.menu.id !== menuId) {
      throw new EventNotApplicable(`menu '${menuId}' is not the current frame`);
    }
    if (at.menu.kind !== "more") {
      throw new EventNotApplicable("continue applies to More menus only");
    }
    return this.stepForward();
  }

  private position(lat: number, lon: number): Frame {
    const at = this.currentMenu();
    if (!at || at.menu.style !== "map") {
      return this.emit(); // position updates are never errors
    }
    let best: { distance: number; index: number; option: OptionDoc } | null = null;
    at.menu.options.forEach((option, index) => {
      const trigger = option.trigger;
      if (!trigger || trigger.type !== "region") return;
      const distance = haversineM(lat, lon, trigger.lat, trigger.lon);
      if (distance <= trigger.radius_m) {
        if (!best || distance < best.distance || (distance === best.distance && index < best.index)) {
          best = { distance, index, option };
        }
      }
    });
    if (!best) return this.emit();
    return this.selectOption(at.menu.id, (best as { option: OptionDoc }).option.id);
  }

  private qrScan(payload: string): Frame {
    const at = this.currentMenu();
    if (at && at.menu.style === "qr") {
      for (const option of at.menu.options) {
        if (effectiveQrPayload(this.story, at.menu, option) === payload) {
          return this.selectOption(at.menu.id, option.id);
        }
      }
      throw new NoMatch(`payload '${payload}' matches no option of menu '${at.menu.id}'`);
    }
    throw new NoMatch("no scannable qr menu is showing");
  }

  private nfcScan(tag: string): Frame {
    const page = this.currentPage();
    if (page && page.payload.kind === "nfc") {
      if (page.payload.tag === tag) return this.stepForward();
      throw new NoMatch(`tag '${tag}' does not match this page`);
    }
    throw new NoMatch("no nfc page is showing");
  }

  private quizAnswer(pageId: string, statement: number, answer: "right" | "wrong"): Frame {
    const page = this.currentPage();
    if (!page || page.id !== pageId || page.payload.kind !== "quiz") {
      throw new EventNotApplicable(`quiz page '${pageId}' is not the current frame`);
    }
    const statements = page.payload.statements;
    if (statement < 0 || statement >= statements.length) {
      throw new EventNotApplicable(`page '${page.id}' has no statement ${statement}`);
    }
    this.answers.push({
      page: page.id,
      kind: "quiz",
      frame_seq: this.frameSeq + 1,
      statement,
      given: answer,
      correct: answer === statements[statement].answer,
    });
    return this.emit();
  }

  private textAnswer(pageId: string, text: string): Frame {
    const page = this.currentPage();
    if (!page || page.id !== pageId || page.payload.kind !== "question") {
      throw new EventNotApplicable(`question page '${pageId}' is not the current frame`);
    }
    this.answers.push({ page: page.id, kind: "question", frame_seq: this.frameSeq + 1, text });
    return this.emit();
  }
}

// ---------------------------------------------------------------------------
// transcripts
// ---------------------------------------------------------------------------

function answerDict(record: AnswerRecord): Record<string, unknown> {
  if (record.kind === "quiz") {
    return {
      page: record.page,
      kind: record.kind,
      frame_seq: record.frame_seq,
      statement: record.statement,
      given: record.given,
      correct: record.correct,
    };
  }
  return { page: record.page, kind: record.kind, frame_seq: record.frame_seq, text: record.text };
}

/** JSON Lines transcript, byte-compatible with `narralive simulate`. */
export function transcriptJsonl(engine: Engine): string {
  const lines: string[] = [];
  for (const entry of engine.entries) {
    if (entry.event === null) {
      lines.push(
        pyJson({
          type: "start",
          story: engine.story.id,
          frame: { seq: entry.frameSeq, kind: entry.frameKind },
        }),
      );
    } else if (entry.error) {
      lines.push(pyJson({ type: "error", event: entry.event, error: entry.error }));
    } else {
      lines.push(
        pyJson({
          type: "event",
          event: entry.event,
          frame: { seq: entry.frameSeq, kind: entry.frameKind },
        }),
      );
    }
  }
  lines.push(pyJson({ type: "answers", answers: engine.answers.map(answerDict) }));
  return lines.join("\n") + "\n";
}

/** Headless run of a whole event script, errors recorded as entries. */
export function simulate(story: StoryDoc, events: PlayerEvent[]): Engine {
  const engine = new Engine(story);
  engine.start();
  for (const event of events) engine.applyRecordingErrors(event);
  return engine;
}
