/** Run-and-tweak view: upload a target, inspect it, read per-measurement
 * badges, and nudge tolerance bands via dryruns (never mutating the
 * stored recipe — tweaks only persist through an explicit editor save).
 */

import { getRunAnnotations, overlayUrl, postDryrun, postRun } from "./api.js";
import { canonicalJson } from "./canonical.js";
import { normalizeRecipe } from "./editor.js";
import type { AnnotationJson, RecipeJson, ReportJson, ToleranceJson } from "./types.js";

const STYLE_COLORS: Record<string, string> = {
  pass: "#2b8a3e",
  fail: "#c92a2a",
  info: "#e6a700",
};

export interface RunViewState {
  recipeId: string;
  recipe: RecipeJson;
  bands: ToleranceJson[]; // working copy driven by the sliders
  image: Blob | null;
  imageName: string;
  report: ReportJson | null;
  lastRunId: string | null;
  dryrun: boolean;
}

export function newRunViewState(recipeId: string, recipe: RecipeJson): RunViewState {
  return {
    recipeId,
    recipe,
    bands: recipe.tolerances.map((t) => ({ ...t })),
    image: null,
    imageName: "target.png",
    report: null,
    lastRunId: null,
    dryrun: false,
  };
}

/** Transient recipe JSON with the working bands substituted. */
export function transientRecipeJson(state: RunViewState): string {
  const recipe = normalizeRecipe(state.recipe);
  recipe.tolerances = state.bands.map((t) => ({ ...t }));
  return canonicalJson(recipe);
}

export async function runOnce(state: RunViewState): Promise<void> {
  if (!state.image) return;
  const record = await postRun(state.recipeId, state.image, state.imageName);
  state.report = record.report;
  state.lastRunId = record.run_id;
  state.dryrun = false;
}

export async function dryrunOnce(state: RunViewState): Promise<void> {
  if (!state.image) return;
  const result = await postDryrun(
    state.recipeId,
    state.image,
    state.imageName,
    transientRecipeJson(state),
  );
  state.report = result.report;
  state.dryrun = true;
}

export function drawAnnotations(
  ctx: CanvasRenderingContext2D,
  annotations: AnnotationJson[],
): void {
  for (const a of annotations) {
    const color = STYLE_COLORS[a.style] ?? STYLE_COLORS.info;
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = 1;
    if (a.shape === "marker") {
      const [x, y] = a.points[0];
      ctx.beginPath();
      ctx.moveTo(x - 4, y);
      ctx.lineTo(x + 4, y);
      ctx.moveTo(x, y - 4);
      ctx.lineTo(x, y + 4);
      ctx.stroke();
    } else if (a.shape === "segment" || a.shape === "polyline") {
      ctx.beginPath();
      ctx.moveTo(a.points[0][0], a.points[0][1]);
      for (const [x, y] of a.points.slice(1)) ctx.lineTo(x, y);
      ctx.stroke();
    } else if (a.shape === "label" && a.text) {
      ctx.font = "11px sans-serif";
      ctx.fillText(a.text, a.points[0][0], a.points[0][1]);
    }
  }
}

export function renderRunView(container: HTMLElement, state: RunViewState, rerender: () => void): void {
  container.innerHTML = "";

  const controls = document.createElement("div");
  controls.className = "run-controls";
  const file = document.createElement("input");
  file.type = "file";
  file.accept = ".png,.pgm";
  file.addEventListener("change", () => {
    const chosen = file.files?.[0];
    if (chosen) {
      state.image = chosen;
      state.imageName = chosen.name;
    }
  });
  const runBtn = document.createElement("button");
  runBtn.textContent = "Run";
  runBtn.addEventListener("click", async () => {
    await runOnce(state);
    rerender();
  });
  const dryBtn = document.createElement("button");
  dryBtn.textContent = "Dryrun";
  dryBtn.className = "dryrun";
  dryBtn.addEventListener("click", async () => {
    await dryrunOnce(state);
    rerender();
  });
  controls.append(file, runBtn, dryBtn);
  container.appendChild(controls);

  container.appendChild(renderBands(state, rerender));
  container.appendChild(renderBadges(state));
  container.appendChild(renderResultImage(state));
}

function renderBands(state: RunViewState, rerender: () => void): HTMLElement {
  const pane = document.createElement("div");
  pane.className = "bands";
  for (const band of state.bands) {
    const row = document.createElement("div");
    row.className = "band-row";
    row.dataset.measurement = band.measurement_name;
    const label = document.createElement("span");
    label.textContent = band.measurement_name;
    const lo = document.createElement("input");
    lo.type = "number";
    lo.step = "any";
    lo.className = "band-min";
    lo.value = String(band.min);
    const hi = document.createElement("input");
    hi.type = "number";
    hi.step = "any";
    hi.className = "band-max";
    hi.value = String(band.max);
    // tolerance tweaks re-issue a dryrun; they never save the recipe
    const tweak = async () => {
      band.min = Number(lo.value);
      band.max = Number(hi.value);
      if (state.image) {
        await dryrunOnce(state);
        rerender();
      }
    };
    lo.addEventListener("change", tweak);
    hi.addEventListener("change", tweak);
    row.append(label, lo, hi);
    pane.appendChild(row);
  }
  return pane;
}

export function renderBadges(state: RunViewState): HTMLElement {
  const pane = document.createElement("div");
  pane.className = "badges";
  const report = state.report;
  if (!report) {
    pane.textContent = "no run yet";
    return pane;
  }
  const overall = document.createElement("div");
  overall.className = `overall overall-${report.overall.toLowerCase()}`;
  overall.dataset.overall = report.overall;
  if (report.overall === "REJECT-NO-REGISTRATION") {
    const score = report.registration.score;
    overall.textContent = `REJECTED: registration failed (score ${score === null ? "n/a" : score.toFixed(3)})`;
  } else {
    overall.textContent = `${report.overall}${state.dryrun ? " (dryrun)" : ""}`;
  }
  pane.appendChild(overall);
  for (const m of report.measurements) {
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.dataset.measurement = m.name;
    badge.dataset.verdict = m.verdict ?? "none";
    const value = m.value === null ? (m.error ?? "error") : m.value.toFixed(3);
    badge.textContent = `${m.name}: ${value}${m.verdict ? ` ${m.verdict}` : ""}`;
    if (m.verdict) badge.classList.add(m.verdict === "PASS" ? "badge-pass" : "badge-fail");
    pane.appendChild(badge);
  }
  return pane;
}

function renderResultImage(state: RunViewState): HTMLElement {
  const pane = document.createElement("div");
  pane.className = "result-image";
  if (!state.lastRunId) return pane;
  // client-drawn annotations over the raw target, overlay.png as fallback
  const canvas = document.createElement("canvas");
  canvas.width = 640;
  canvas.height = 480;
  const ctx = canvas.getContext("2d");
  const img = new Image();
  img.src = overlayUrl(state.lastRunId);
  img.onload = async () => {
    if (!ctx) return;
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    ctx.drawImage(img, 0, 0);
    const annotations = await getRunAnnotations(state.lastRunId!);
    drawAnnotations(ctx, annotations);
  };
  pane.appendChild(canvas);
  return pane;
}
