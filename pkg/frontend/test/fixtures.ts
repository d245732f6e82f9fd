/** A recipe fixture structurally identical to the server's demo recipe. */

import type { RecipeJson, ReportJson } from "../src/types.js";

export function demoRecipe(): RecipeJson {
  return {
    version: 1,
    id: "demo",
    source_image: "source.png",
    registration: {
      template_roi: { origin: [80, 80], width: 120, height: 120, theta_deg: 0 },
      search: {
        theta_range_deg: 10.0,
        theta_step_deg: 1.0,
        theta_fine_step_deg: 0.1,
        scale_range: [0.9, 1.1],
        scale_step: 0.02,
        scale_fine_step: 0.005,
        pyramid_levels: 3,
        min_score: 0.6,
      },
    },
    graph: {
      blocks: [
        { id: "in", kind: "input", params: {} },
        { id: "reg", kind: "registration", params: {} },
        {
          id: "line_a",
          kind: "extract_line",
          params: {
            name: null,
            polarity: "dark_to_light",
            min_contrast: 0.1,
            num_scanlines: 16,
            smoothing: "3tap",
          },
          roi: { origin: [218.0, 172.0], width: 60, height: 100, theta_deg: 120.0 },
        },
        {
          id: "line_b",
          kind: "extract_line",
          params: {
            name: null,
            polarity: "dark_to_light",
            min_contrast: 0.1,
            num_scanlines: 16,
            smoothing: "3tap",
          },
          roi: { origin: [240.0, 360.0], width: 60, height: 100, theta_deg: 165.0 },
        },
        { id: "angle", kind: "measure_angle", params: { name: null, mode: "undirected" } },
        { id: "dist", kind: "measure_distance", params: { name: null } },
        {
          id: "bright",
          kind: "measure_intensity",
          params: { name: null },
          roi: { origin: [370, 100], width: 60, height: 60, theta_deg: 0 },
        },
        {
          id: "blobs",
          kind: "extract_blobs",
          params: { name: null, threshold: 0.5, polarity: "bright", keep_border: true },
          roi: { origin: [370, 260], width: 160, height: 140, theta_deg: 0 },
        },
        { id: "tol_angle", kind: "tolerance_check", params: { name: "angle" } },
        { id: "out", kind: "output", params: {} },
      ],
      connections: [
        { from: ["in", "image"], to: ["reg", "image"] },
        { from: ["reg", "image"], to: ["line_a", "image"] },
        { from: ["reg", "image"], to: ["line_b", "image"] },
        { from: ["reg", "image"], to: ["bright", "image"] },
        { from: ["reg", "image"], to: ["blobs", "image"] },
        { from: ["line_a", "line"], to: ["angle", "a"] },
        { from: ["line_b", "line"], to: ["angle", "b"] },
        { from: ["line_a", "line"], to: ["dist", "a"] },
        { from: ["line_b", "point"], to: ["dist", "b"] },
        { from: ["angle", "value"], to: ["tol_angle", "value"] },
        { from: ["tol_angle", "verdict"], to: ["out", "angle"] },
      ],
    },
    tolerances: [{ measurement_name: "angle", min: 43.0, max: 47.0 }],
  };
}

export function report(overall: string, measurements: ReportJson["measurements"]): ReportJson {
  return {
    recipe_id: "demo",
    image: "t.png",
    overall,
    registration: {
      score: overall === "REJECT-NO-REGISTRATION" ? 0.31 : 0.999,
      transform:
        overall === "REJECT-NO-REGISTRATION"
          ? null
          : { tx: 0.1, ty: -0.2, theta_deg: 0.05, scale: 1.001 },
    },
    measurements,
  };
}
