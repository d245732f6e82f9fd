// Editor losslessness: draw, save, reload -> identical canonical JSON.

import { describe, expect, it } from "vitest";
import { canonicalJson } from "../src/canonical.js";
import {
  addBlock,
  connect,
  loadRecipe,
  normalizeRecipe,
  setParam,
  setRoi,
  setTolerance,
  toCanonicalJson,
} from "../src/editor.js";
import type { RecipeJson } from "../src/types.js";
import { demoRecipe } from "./fixtures.js";

function saveAndReload(text: string): RecipeJson {
  // the server stores what we sent and hands it back parsed
  return JSON.parse(text) as RecipeJson;
}

describe("editor losslessness", () => {
  it("load -> serialize -> parse -> serialize is byte-identical", () => {
    const state = loadRecipe("demo", 1, demoRecipe());
    const first = toCanonicalJson(state);
    const reloaded = loadRecipe("demo", 2, saveAndReload(first));
    expect(toCanonicalJson(reloaded)).toBe(first);
  });

  it("drawing new content keeps the round trip identical", () => {
    const state = loadRecipe("demo", 1, demoRecipe());
    const id = addBlock(state, "measure_intensity", { x: 300, y: 300 });
    setRoi(state, id, { origin: [100.5, 60.25], width: 42, height: 33, theta_deg: -12.5 });
    setParam(state, id, "name", "patch");
    expect(connect(state, ["reg", "image"], [id, "image"])).toBeNull();
    setTolerance(state, "patch", 0.2, 0.9);

    const saved = toCanonicalJson(state);
    const reloaded = loadRecipe("demo", 2, saveAndReload(saved));
    expect(toCanonicalJson(reloaded)).toBe(saved);
  });

  it("normalization is a fixpoint (canonical of canonical is itself)", () => {
    const once = normalizeRecipe(demoRecipe());
    const twice = normalizeRecipe(once);
    expect(canonicalJson(twice)).toBe(canonicalJson(once));
  });

  it("canonical form sorts object keys and block/connection lists", () => {
    const recipe = demoRecipe();
    const shuffled = {
      ...recipe,
      graph: {
        blocks: [...recipe.graph.blocks].reverse(),
        connections: [...recipe.graph.connections].reverse(),
      },
    };
    expect(canonicalJson(normalizeRecipe(shuffled))).toBe(canonicalJson(normalizeRecipe(recipe)));
    const keys = Object.keys(JSON.parse(canonicalJson(normalizeRecipe(recipe))));
    expect(keys).toEqual([...keys].sort());
  });
});
