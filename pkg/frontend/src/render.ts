// DOM renderers for frames. Everything on screen comes from the frame's
// render model plus resolved asset URLs; the renderer knows nothing the
// engine did not put in the frame.

import type { Frame, MenuFrame, OptionView, PageFrame } from "./engine.js";
import type { PlayerEvent } from "./types.js";

export type AssetResolver = (path: string) => string;

export interface UiActions {
  send(event: PlayerEvent): void;
  downloadTranscript(): void;
}

type Doc = Document;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Doc,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(doc: Doc, label: string, onClick: () => void, testId?: string) {
  const node = el(doc, "button", "action", label);
  if (testId) node.setAttribute("data-testid", testId);
  node.addEventListener("click", onClick);
  return node;
}

function continueButton(doc: Doc, actions: UiActions) {
  return button(doc, "Continue", () => actions.send({ type: "advance" }), "advance");
}

function media(doc: Doc, kind: string, url: string): HTMLElement {
  if (kind === "image") {
    const img = el(doc, "img", "media-image");
    img.src = url;
    return img;
  }
  const node = el(doc, kind === "video" ? "video" : "audio", `media-${kind}`);
  node.setAttribute("controls", "");
  node.setAttribute("src", url);
  return node;
}

function hotspotLayer(doc: Doc, hotspots: any[], assets: AssetResolver): HTMLElement {
  const layer = el(doc, "div", "hotspots");
  for (const hotspot of hotspots) {
    const [x, y, w, h] = hotspot.rect;
    const spot = el(doc, "button", "hotspot");
    spot.style.left = `${x * 100}%`;
    spot.style.top = `${y * 100}%`;
    spot.style.width = `${w * 100}%`;
    spot.style.height = `${h * 100}%`;
    spot.setAttribute("data-testid", "hotspot");
    const reveal = el(doc, "div", "hotspot-reveal");
    reveal.hidden = true;
    if (hotspot.interaction.type === "text") {
      reveal.textContent = hotspot.interaction.text;
    } else {
      reveal.appendChild(media(doc, "audio", assets(hotspot.interaction.audio.path)));
    }
    spot.addEventListener("click", () => {
      reveal.hidden = !reveal.hidden;
    });
    layer.appendChild(spot);
    layer.appendChild(reveal);
  }
  return layer;
}

// ----- page frames ---------------------------------------------------------

function renderSimple(doc: Doc, frame: PageFrame, assets: AssetResolver, actions: UiActions) {
  const root = el(doc, "div", "page page-simple");
  for (const paragraph of String(frame.render.text ?? "").split("\n")) {
    if (paragraph) root.appendChild(el(doc, "p", "text", paragraph));
  }
  for (const ref of frame.render.media as any[]) {
    root.appendChild(media(doc, ref.kind, assets(ref.path)));
  }
  root.appendChild(continueButton(doc, actions));
  return root;
}

function renderDialogue(doc: Doc, frame: PageFrame, assets: AssetResolver, actions: UiActions) {
  const root = el(doc, "div", "page page-dialogue");
  for (const line of frame.render.lines as any[]) {
    const row = el(doc, "div", "dialogue-line");
    row.appendChild(el(doc, "span", "speaker", line.speaker));
    row.appendChild(el(doc, "span", "line-text", line.text));
    row.appendChild(media(doc, "audio", assets(line.audio.path)));
    root.appendChild(row);
  }
  root.appendChild(continueButton(doc, actions));
  return root;
}

function renderQuiz(doc: Doc, frame: PageFrame, actions: UiActions) {
  const root = el(doc, "div", "page page-quiz");
  const answered = (frame.state.answered ?? {}) as Record<string, any>;
  for (const statement of frame.render.statements as any[]) {
    const row = el(doc, "div", "quiz-statement");
    row.appendChild(el(doc, "p", "text", statement.text));
    const verdict = answered[String(statement.index)];
    if (verdict) {
      row.appendChild(
        el(doc, "p", verdict.correct ? "feedback correct" : "feedback incorrect",
          `${verdict.correct ? "Right call" : "Not quite"}. ${verdict.feedback}`),
      );
    } else {
      for (const answer of ["right", "wrong"] as const) {
        row.appendChild(
          button(doc, answer === "right" ? "True" : "False", () =>
            actions.send({
              type: "quiz_answer",
              page: frame.pageId,
              statement: statement.index,
              answer,
            }),
          `answer-${statement.index}-${answer}`),
        );
      }
    }
    root.appendChild(row);
  }
  root.appendChild(continueButton(doc, actions));
  return root;
}

function renderBook(doc: Doc, frame: PageFrame, assets: AssetResolver, actions: UiActions) {
  const root = el(doc, "div", "page page-book");
  const skim = frame.render.skim as any[];
  let position = 0;
  const stage = el(doc, "div", "book-stage");
  const show = () => {
    stage.textContent = "";
    const leaf = skim[position];
    stage.appendChild(el(doc, "h3", "book-title", leaf.role === "cover" ? "Cover" : leaf.title));
    stage.appendChild(media(doc, "image", assets(leaf.image.path)));
    if (leaf.hotspots?.length) stage.appendChild(hotspotLayer(doc, leaf.hotspots, assets));
    stage.appendChild(el(doc, "p", "book-position", `${position + 1} / ${skim.length}`));
  };
  show();
  const controls = el(doc, "div", "book-controls");
  controls.appendChild(
    button(doc, "Previous page", () => {
      if (position > 0) { position -= 1; show(); }
    }, "book-prev"),
  );
  controls.appendChild(
    button(doc, "Next page", () => {
      if (position < skim.length - 1) { position += 1; show(); }
    }, "book-next"),
  );
  root.appendChild(stage);
  root.appendChild(controls);
  root.appendChild(continueButton(doc, actions));
  return root;
}

function renderNfc(doc: Doc, frame: PageFrame, actions: UiActions) {
  const root = el(doc, "div", "page page-nfc");
  root.appendChild(el(doc, "p", "prompt", String(frame.render.prompt)));
  const input = el(doc, "input", "sim-input");
  input.placeholder = "tag id";
  input.setAttribute("data-testid", "nfc-input");
  root.appendChild(input);
  root.appendChild(
    button(doc, "Tap NFC", () => actions.send({ type: "nfc_scan", tag: input.value }), "nfc-scan"),
  );
  return root; // no Continue: the page waits for its tag
}

function renderQuestion(doc: Doc, frame: PageFrame, actions: UiActions) {
  const root = el(doc, "div", "page page-question");
  root.appendChild(el(doc, "p", "prompt", String(frame.render.prompt)));
  const responses = (frame.state.responses ?? []) as string[];
  for (const response of responses) {
    root.appendChild(el(doc, "p", "submitted", `You wrote: ${response}`));
  }
  const input = el(doc, "textarea", "answer-input");
  input.setAttribute("data-testid", "question-input");
  root.appendChild(input);
  root.appendChild(
    button(doc, "Send answer", () =>
      actions.send({ type: "text_answer", page: frame.pageId, text: input.value }),
    "question-send"),
  );
  root.appendChild(continueButton(doc, actions));
  return root;
}

function renderPageFrame(doc: Doc, frame: PageFrame, assets: AssetResolver, actions: UiActions) {
  switch (frame.render.kind) {
    case "simple":
      return renderSimple(doc, frame, assets, actions);
    case "dialogue":
      return renderDialogue(doc, frame, assets, actions);
    case "quiz":
      return renderQuiz(doc, frame, actions);
    case "video": {
      const root = el(doc, "div", "page page-video");
      root.appendChild(media(doc, "video", assets((frame.render.video as any).path)));
      root.appendChild(continueButton(doc, actions));
      return root;
    }
    case "iimage": {
      const root = el(doc, "div", "page page-iimage");
      const wrap = el(doc, "div", "iimage-wrap");
      wrap.appendChild(media(doc, "image", assets((frame.render.image as any).path)));
      wrap.appendChild(hotspotLayer(doc, frame.render.hotspots as any[], assets));
      root.appendChild(wrap);
      root.appendChild(continueButton(doc, actions));
      return root;
    }
    case "book":
      return renderBook(doc, frame, assets, actions);
    case "nfc":
      return renderNfc(doc, frame, actions);
    case "question":
      return renderQuestion(doc, frame, actions);
    default:
      throw new Error(`unknown page kind ${String(frame.render.kind)}`);
  }
}

// ----- menu frames -----------------------------------------------------------

function optionButton(doc: Doc, frame: MenuFrame, option: OptionView, actions: UiActions) {
  const label = option.viewed ? `${option.label} ✓` : option.label;
  const node = button(
    doc, label,
    () => actions.send({ type: "select_option", menu: frame.menuId, option: option.id }),
    `option-${option.id}`,
  );
  if (option.viewed) node.classList.add("viewed");
  return node;
}

function renderMenuFrame(doc: Doc, frame: MenuFrame, assets: AssetResolver, actions: UiActions) {
  const root = el(doc, "div", `menu menu-${frame.style} menu-${frame.menuKind}`);
  root.setAttribute("data-testid", `menu-${frame.menuId}`);
  root.appendChild(
    el(doc, "h3", "menu-heading", frame.menuKind === "choice" ? "Choose your path" : "More to see"),
  );

  if (frame.style === "iimage" && frame.image) {
    const wrap = el(doc, "div", "iimage-wrap");
    wrap.appendChild(media(doc, "image", assets(frame.image.path)));
    const layer = el(doc, "div", "hotspots");
    for (const option of frame.options) {
      const rect = option.trigger?.rect ?? [0, 0, 0.1, 0.1];
      const spot = optionButton(doc, frame, option, actions);
      spot.className = "hotspot poi";
      spot.style.left = `${rect[0] * 100}%`;
      spot.style.top = `${rect[1] * 100}%`;
      spot.style.width = `${rect[2] * 100}%`;
      spot.style.height = `${rect[3] * 100}%`;
      spot.title = option.label;
      layer.appendChild(spot);
    }
    wrap.appendChild(layer);
    root.appendChild(wrap);
  } else if (frame.style === "map") {
    const list = el(doc, "div", "map-options");
    for (const option of frame.options) {
      const row = el(doc, "div", "map-option");
      const t = option.trigger;
      row.appendChild(
        el(doc, "span", "map-label",
          `${option.label} (${t?.lat}, ${t?.lon}, ${t?.radius_m} m)${option.viewed ? " ✓" : ""}`),
      );
      list.appendChild(row);
    }
    root.appendChild(list);
    const lat = el(doc, "input", "sim-input");
    lat.placeholder = "latitude";
    lat.setAttribute("data-testid", "lat-input");
    const lon = el(doc, "input", "sim-input");
    lon.placeholder = "longitude";
    lon.setAttribute("data-testid", "lon-input");
    root.appendChild(lat);
    root.appendChild(lon);
    root.appendChild(
      button(doc, "I am here", () =>
        actions.send({
          type: "position",
          lat: Number(lat.value),
          lon: Number(lon.value),
        }),
      "position-send"),
    );
  } else if (frame.style === "qr") {
    for (const option of frame.options) {
      root.appendChild(el(doc, "p", "qr-label", `${option.label}${option.viewed ? " ✓" : ""}`));
    }
    const input = el(doc, "input", "sim-input");
    input.placeholder = "qr payload";
    input.setAttribute("data-testid", "qr-input");
    root.appendChild(input);
    root.appendChild(
      button(doc, "Scan QR", () => actions.send({ type: "qr_scan", payload: input.value }), "qr-scan"),
    );
  } else {
    const grid = el(doc, "div", frame.style === "tiles" ? "option-tiles" : "option-list");
    for (const option of frame.options) {
      grid.appendChild(optionButton(doc, frame, option, actions));
    }
    root.appendChild(grid);
  }

  if (frame.canContinue) {
    root.appendChild(
      button(doc, "Continue", () => actions.send({ type: "continue", menu: frame.menuId }), "continue"),
    );
  }
  return root;
}

export function renderFrame(
  doc: Doc,
  frame: Frame,
  assets: AssetResolver,
  actions: UiActions,
): HTMLElement {
  if (frame.kind === "page") return renderPageFrame(doc, frame, assets, actions);
  if (frame.kind === "menu") return renderMenuFrame(doc, frame, assets, actions);
  const root = el(doc, "div", "end-frame");
  root.setAttribute("data-testid", "end-frame");
  root.appendChild(el(doc, "h2", "end-label", frame.label ?? "The end"));
  root.appendChild(
    button(doc, "Download transcript", () => actions.downloadTranscript(), "download-transcript"),
  );
  return root;
}
