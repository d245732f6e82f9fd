/** Typed client for the inspection service. Every number the UI shows
 * comes back through these calls; the UI never computes vision results
 * itself. */

import type {
  AnnotationJson,
  Diagnostic,
  RecipeJson,
  ReportJson,
  RunListEntry,
  RunRecordJson,
  StatsJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public diagnostics: Diagnostic[] = [],
  ) {
    super(message);
  }
}

async function fail(resp: Response): Promise<never> {
  let diagnostics: Diagnostic[] = [];
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (Array.isArray(body.diagnostics)) diagnostics = body.diagnostics;
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail, diagnostics);
}

export async function listRecipes(): Promise<{ id: string; revision: number }[]> {
  const resp = await fetch("/recipes");
  if (!resp.ok) return fail(resp);
  return (await resp.json()).recipes;
}

export async function getRecipe(
  id: string,
): Promise<{ id: string; revision: number; recipe: RecipeJson }> {
  const resp = await fetch(`/recipes/${id}`);
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export async function putRecipe(
  id: string,
  recipeJson: string,
  sourceImage: Blob,
  revision: number | null,
): Promise<{ id: string; revision: number; created: boolean }> {
  const form = new FormData();
  form.append("recipe", new Blob([recipeJson], { type: "application/json" }), "recipe.json");
  form.append("source_image", sourceImage, "source.png");
  if (revision !== null) form.append("revision", String(revision));
  const resp = await fetch(`/recipes/${id}`, { method: "PUT", body: form });
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export async function postRun(recipeId: string, image: Blob, name: string): Promise<RunRecordJson> {
  const form = new FormData();
  form.append("image", image, name);
  const resp = await fetch(`/recipes/${recipeId}/runs`, { method: "POST", body: form });
  if (!resp.ok) return fail(resp);
  return resp.json();
}

/** The tweak loop: run a transient recipe against the stored reference
 * image without persisting anything on the server. */
export async function postDryrun(
  recipeId: string,
  image: Blob,
  name: string,
  transientRecipe?: string,
): Promise<{ report: ReportJson; dryrun: boolean }> {
  const form = new FormData();
  form.append("image", image, name);
  if (transientRecipe !== undefined) {
    form.append("recipe", new Blob([transientRecipe], { type: "application/json" }), "recipe.json");
  }
  const resp = await fetch(`/recipes/${recipeId}/dryrun`, { method: "POST", body: form });
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export async function getStats(recipeId: string): Promise<StatsJson> {
  const resp = await fetch(`/recipes/${recipeId}/stats`);
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export async function listRuns(recipeId: string): Promise<RunListEntry[]> {
  const resp = await fetch(`/recipes/${recipeId}/runs`);
  if (!resp.ok) return fail(resp);
  return (await resp.json()).runs;
}

export async function getRunReport(runId: string): Promise<ReportJson> {
  const resp = await fetch(`/runs/${runId}/report.json`);
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export async function getRunAnnotations(runId: string): Promise<AnnotationJson[]> {
  const resp = await fetch(`/runs/${runId}/annotations.json`);
  if (!resp.ok) return fail(resp);
  return resp.json();
}

export function overlayUrl(runId: string): string {
  return `/runs/${runId}/overlay.png`;
}

export function sourceImageUrl(recipeId: string): string {
  return `/recipes/${recipeId}/source.png`;
}
