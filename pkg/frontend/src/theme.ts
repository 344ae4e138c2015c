// Per-site "flavour", fixed at build time: swap this file to rebrand.

import type { Theme } from "./app.js";

export const theme: Theme = {
  name: "Narralive Player",
  accentColor: "#7a4a2e",
  icon: "🏛",
};
