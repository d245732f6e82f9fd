/** Block catalog mirroring the engine's port and parameter tables.
 *
 * The registration transform and the per-ROI display transforms are
 * context the engine wires automatically; they are deliberately absent
 * from every port list here, so the editor can never render or connect
 * them.
 */

export type PortType = "image" | "line" | "point" | "scalar" | "blob_list" | "verdict";

export interface InPort {
  name: string;
  accepts: PortType[];
}

export interface OutPort {
  name: string;
  type: PortType;
}

export interface ParamDef {
  name: string;
  input: "text" | "number" | "int" | "bool" | "choice";
  choices?: string[];
  fallback?: unknown;
  required?: boolean;
  min?: number;
  max?: number;
}

export interface KindSpec {
  inputs: InPort[];
  outputs: OutPort[];
  params: ParamDef[];
  needsRoi: boolean;
  variadicSink?: boolean;
}

const NAME: ParamDef = { name: "name", input: "text", fallback: null };

export const KIND_SPECS: Record<string, KindSpec> = {
  input: { inputs: [], outputs: [{ name: "image", type: "image" }], params: [], needsRoi: false },
  registration: {
    inputs: [{ name: "image", accepts: ["image"] }],
    outputs: [{ name: "image", type: "image" }],
    params: [],
    needsRoi: false,
  },
  extract_line: {
    inputs: [{ name: "image", accepts: ["image"] }],
    outputs: [
      { name: "line", type: "line" },
      { name: "point", type: "point" },
    ],
    params: [
      NAME,
      {
        name: "polarity",
        input: "choice",
        choices: ["dark_to_light", "light_to_dark", "any"],
        fallback: "any",
      },
      { name: "min_contrast", input: "number", fallback: 0.1, min: 0, max: 1 },
      { name: "num_scanlines", input: "int", fallback: 16, min: 2 },
      { name: "smoothing", input: "choice", choices: ["3tap", "none"], fallback: "3tap" },
    ],
    needsRoi: true,
  },
  measure_angle: {
    inputs: [
      { name: "a", accepts: ["line"] },
      { name: "b", accepts: ["line"] },
    ],
    outputs: [{ name: "value", type: "scalar" }],
    params: [
      NAME,
      { name: "mode", input: "choice", choices: ["undirected", "directed"], fallback: "undirected" },
    ],
    needsRoi: false,
  },
  measure_distance: {
    inputs: [
      { name: "a", accepts: ["line", "point"] },
      { name: "b", accepts: ["line", "point"] },
    ],
    outputs: [{ name: "value", type: "scalar" }],
    params: [NAME],
    needsRoi: false,
  },
  measure_intensity: {
    inputs: [{ name: "image", accepts: ["image"] }],
    outputs: [{ name: "value", type: "scalar" }],
    params: [NAME],
    needsRoi: true,
  },
  extract_blobs: {
    inputs: [{ name: "image", accepts: ["image"] }],
    outputs: [
      { name: "blobs", type: "blob_list" },
      { name: "count", type: "scalar" },
      { name: "area", type: "scalar" },
    ],
    params: [
      NAME,
      { name: "threshold", input: "number", fallback: 0.5, min: 0, max: 1 },
      { name: "polarity", input: "choice", choices: ["bright", "dark"], fallback: "bright" },
      { name: "keep_border", input: "bool", fallback: true },
    ],
    needsRoi: true,
  },
  tolerance_check: {
    inputs: [{ name: "value", accepts: ["scalar"] }],
    outputs: [{ name: "verdict", type: "verdict" }],
    params: [{ name: "name", input: "text", required: true }],
    needsRoi: false,
  },
  output: { inputs: [], outputs: [], params: [], needsRoi: false, variadicSink: true },
};

export const PALETTE_KINDS = Object.keys(KIND_SPECS);

/** Params object with every field present (engine-canonical form). */
export function defaultParams(kind: string): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const p of KIND_SPECS[kind].params) {
    out[p.name] = p.fallback ?? null;
  }
  return out;
}

export function outputType(kind: string, port: string): PortType | null {
  const spec = KIND_SPECS[kind];
  const found = spec?.outputs.find((o) => o.name === port);
  return found ? found.type : null;
}

export function inputAccepts(kind: string, port: string): PortType[] | "any" | null {
  const spec = KIND_SPECS[kind];
  if (!spec) return null;
  if (spec.variadicSink) return "any";
  const found = spec.inputs.find((i) => i.name === port);
  return found ? found.accepts : null;
}
