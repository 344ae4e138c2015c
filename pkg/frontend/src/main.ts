// Browser bootstrap: real fetch, localStorage, and the build-time theme.

import { App, applyTheme } from "./app.js";
import { CatalogClient } from "./catalog.js";
import { ExperienceCache } from "./store.js";
import { theme } from "./theme.js";

applyTheme(document, theme);

const base = (window as { NARRALIVE_SERVER?: string }).NARRALIVE_SERVER ?? "";
const app = new App({
  root: document.getElementById("app") as HTMLElement,
  client: new CatalogClient(base),
  cache: new ExperienceCache(window.localStorage),
  theme,
  makeAssetUrl: (_path, bytes) =>
    URL.createObjectURL(
      new Blob([
        bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength) as ArrayBuffer,
      ]),
    ),
});

void app.showCatalog();
