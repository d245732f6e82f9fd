/** JSON shapes exchanged with the inspection service (the single source
 * of truth for every number the UI displays). */

export interface RoiJson {
  origin: [number, number];
  width: number;
  height: number;
  theta_deg: number;
}

export interface SearchJson {
  theta_range_deg: number;
  theta_step_deg: number;
  theta_fine_step_deg: number;
  scale_range: [number, number];
  scale_step: number;
  scale_fine_step: number;
  pyramid_levels: number;
  min_score: number;
}

export interface BlockJson {
  id: string;
  kind: string;
  params: Record<string, unknown>;
  roi?: RoiJson;
  display?: { x: number; y: number };
}

export interface ConnectionJson {
  from: [string, string];
  to: [string, string];
}

export interface GraphJson {
  blocks: BlockJson[];
  connections: ConnectionJson[];
}

export interface ToleranceJson {
  measurement_name: string;
  min: number;
  max: number;
}

export interface RecipeJson {
  version: number;
  id?: string;
  source_image: string;
  registration: { template_roi: RoiJson; search: SearchJson };
  graph: GraphJson;
  tolerances: ToleranceJson[];
  units_per_px?: number;
}

export interface MeasurementJson {
  name: string;
  kind: string;
  value: number | null;
  verdict: string | null;
  block_id: string;
  tolerance?: { min: number; max: number };
  stats?: { min: number; max: number };
  error?: string;
  value_units?: number;
}

export interface ReportJson {
  recipe_id: string;
  image: string;
  overall: string;
  registration: {
    score: number | null;
    transform: { tx: number; ty: number; theta_deg: number; scale: number } | null;
  };
  measurements: MeasurementJson[];
  units_per_px?: number;
  timing_ms?: Record<string, number>;
}

export interface AnnotationJson {
  shape: "segment" | "marker" | "polyline" | "label";
  points: [number, number][];
  style: "pass" | "fail" | "info";
  block_id: string;
  text?: string;
}

export interface RunRecordJson {
  run_id: string;
  recipe_id: string;
  report: ReportJson;
  links: { report: string; overlay: string; annotations: string };
}

export interface RunListEntry {
  run_id: string;
  recipe_id: string;
  image: string;
  created_at: string;
  overall: string;
}

export interface StatsJson {
  total: number;
  pass: number;
  fail: number;
  reject: number;
  io_error: number;
  per_measurement: Record<
    string,
    { mean: number; min: number; max: number; stddev: number; count: number }
  >;
}

export interface Diagnostic {
  code: string;
  message: string;
  blocks: string[];
}
