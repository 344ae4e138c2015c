// Wire formats shared with the toolchain: the canonical story document
// (story.json), the bundle manifest, catalog entries, and events.

export type AssetKind = "image" | "audio" | "video";

export interface AssetDoc {
  path: string;
  kind: AssetKind;
  sha256: string | null;
  bytes: number | null;
  draft: boolean;
}

export interface HotspotDoc {
  rect: [number, number, number, number];
  interaction:
    | { type: "text"; text: string }
    | { type: "audio"; audio: AssetDoc };
}

export interface SimplePayload {
  kind: "simple";
  text: string;
  images: AssetDoc[];
  audio: AssetDoc[];
}

export interface DialoguePayload {
  kind: "dialogue";
  characters: string[];
  lines: { speaker: string; text: string; audio: AssetDoc }[];
}

export interface QuizPayload {
  kind: "quiz";
  statements: { text: string; answer: "right" | "wrong"; feedback: string }[];
}

export interface VideoPayload {
  kind: "video";
  video: AssetDoc;
}

export interface IImagePayload {
  kind: "iimage";
  image: AssetDoc;
  hotspots: HotspotDoc[];
}

export interface BookPayload {
  kind: "book";
  cover: AssetDoc;
  book_pages: { title: string; image: AssetDoc; hotspots: HotspotDoc[] }[];
}

export interface NfcPayload {
  kind: "nfc";
  prompt: string;
  tag: string;
}

export interface QuestionPayload {
  kind: "question";
  prompt: string;
}

export type PagePayload =
  | SimplePayload
  | DialoguePayload
  | QuizPayload
  | VideoPayload
  | IImagePayload
  | BookPayload
  | NfcPayload
  | QuestionPayload;

export type TriggerDoc =
  | { type: "poi"; rect: [number, number, number, number] }
  | { type: "region"; lat: number; lon: number; radius_m: number }
  | { type: "qr"; payload: string | null }
  | { type: "nfc"; tag: string }
  | null;

export interface OptionDoc {
  id: string;
  label: string;
  trigger: TriggerDoc;
  body: ElementDoc[];
}

export interface SceneDoc {
  type: "scene";
  id: string;
  title: string;
  elements: ElementDoc[];
}

export interface PageDoc {
  type: "page";
  id: string;
  payload: PagePayload;
}

export interface MenuDoc {
  type: "menu";
  id: string;
  kind: "choice" | "more";
  style: "tiles" | "list" | "iimage" | "map" | "qr";
  image: AssetDoc | null;
  options: OptionDoc[];
}

export interface EndDoc {
  type: "end";
  id: string;
  label: string | null;
}

export type ElementDoc = SceneDoc | PageDoc | MenuDoc | EndDoc;

export interface ChapterDoc {
  id: string;
  title: string;
  preview_image: AssetDoc | null;
  elements: (SceneDoc | MenuDoc)[];
}

export interface StoryDoc {
  id: string;
  title: string;
  description: string;
  language: string;
  author_tags: string[];
  evidence: {
    structure_validated: boolean;
    sample_scenes_validated: boolean;
    validated_onsite: "none" | "invited" | "public";
  };
  chapters: ChapterDoc[];
}

export interface ManifestAsset {
  path: string;
  sha256: string;
  bytes: number;
  kind: AssetKind;
  draft: boolean;
}

export interface Manifest {
  schema_version: number;
  story_id: string;
  title: string;
  description: string;
  version: number;
  content_hash: string;
  assets: ManifestAsset[];
  published_at: string;
  erl_estimate: number;
}

export interface CatalogEntry {
  story_id: string;
  title: string;
  description: string;
  version: number;
  bundle_bytes: number;
  published_at: string;
}

// Events exactly as they appear in events/transcript JSON Lines.
export type PlayerEvent =
  | { type: "advance" }
  | { type: "select_option"; menu: string; option: string }
  | { type: "continue"; menu: string }
  | { type: "position"; lat: number; lon: number }
  | { type: "qr_scan"; payload: string }
  | { type: "nfc_scan"; tag: string }
  | { type: "quiz_answer"; page: string; statement: number; answer: "right" | "wrong" }
  | { type: "text_answer"; page: string; text: string };
