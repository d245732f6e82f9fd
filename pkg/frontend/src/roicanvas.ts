/** Rotated-rectangle ROI drawing over the reference image.
 *
 * The math is kept separate from the canvas wiring so drag behavior is
 * unit-testable; the serialized form is exactly the recipe's ROI schema.
 */

import type { RoiJson } from "./types.js";

const DEG = Math.PI / 180;
export const HANDLE_RADIUS = 6;
export const ROTATE_HANDLE_OFFSET = 24;

export type Grip =
  | { kind: "move" }
  | { kind: "corner"; index: 0 | 1 | 2 | 3 }
  | { kind: "rotate" };

/** Local-frame corners mapped to image coordinates, CCW from the origin. */
export function roiCorners(roi: RoiJson): [number, number][] {
  const c = Math.cos(roi.theta_deg * DEG);
  const s = Math.sin(roi.theta_deg * DEG);
  const [ox, oy] = roi.origin;
  const local: [number, number][] = [
    [0, 0],
    [roi.width, 0],
    [roi.width, roi.height],
    [0, roi.height],
  ];
  return local.map(([x, y]) => [ox + c * x - s * y, oy + s * x + c * y]);
}

export function roiCenter(roi: RoiJson): [number, number] {
  const corners = roiCorners(roi);
  return [(corners[0][0] + corners[2][0]) / 2, (corners[0][1] + corners[2][1]) / 2];
}

export function rotateHandlePos(roi: RoiJson): [number, number] {
  const [c0, c1] = [roiCorners(roi)[0], roiCorners(roi)[1]];
  const mx = (c0[0] + c1[0]) / 2;
  const my = (c0[1] + c1[1]) / 2;
  const nx = Math.sin(roi.theta_deg * DEG);
  const ny = -Math.cos(roi.theta_deg * DEG);
  return [mx + nx * ROTATE_HANDLE_OFFSET, my + ny * ROTATE_HANDLE_OFFSET];
}

export function hitTest(roi: RoiJson, x: number, y: number): Grip | null {
  const [rx, ry] = rotateHandlePos(roi);
  if (Math.hypot(x - rx, y - ry) <= HANDLE_RADIUS) return { kind: "rotate" };
  const corners = roiCorners(roi);
  for (let i = 0; i < 4; i++) {
    if (Math.hypot(x - corners[i][0], y - corners[i][1]) <= HANDLE_RADIUS) {
      return { kind: "corner", index: i as 0 | 1 | 2 | 3 };
    }
  }
  // point-in-rectangle in the ROI's local frame
  const c = Math.cos(-roi.theta_deg * DEG);
  const s = Math.sin(-roi.theta_deg * DEG);
  const dx = x - roi.origin[0];
  const dy = y - roi.origin[1];
  const lx = c * dx - s * dy;
  const ly = s * dx + c * dy;
  if (lx >= 0 && lx <= roi.width && ly >= 0 && ly <= roi.height) return { kind: "move" };
  return null;
}

export function moveRoi(roi: RoiJson, dx: number, dy: number): RoiJson {
  return { ...roi, origin: [roi.origin[0] + dx, roi.origin[1] + dy] };
}

/** Drag a corner: the opposite corner stays pinned, theta is kept. */
export function resizeRoi(roi: RoiJson, index: 0 | 1 | 2 | 3, x: number, y: number): RoiJson {
  const corners = roiCorners(roi);
  const opposite = corners[(index + 2) % 4];
  const c = Math.cos(-roi.theta_deg * DEG);
  const s = Math.sin(-roi.theta_deg * DEG);
  const lx = c * (x - opposite[0]) - s * (y - opposite[1]);
  const ly = s * (x - opposite[0]) + c * (y - opposite[1]);
  const width = Math.max(Math.abs(lx), 4);
  const height = Math.max(Math.abs(ly), 4);
  // rebuild the origin so the dragged/opposite pair spans the new box
  const signX = index === 1 || index === 2 ? 1 : -1;
  const signY = index === 2 || index === 3 ? 1 : -1;
  const localOrigin: [number, number] = [
    signX > 0 ? 0 : -width,
    signY > 0 ? 0 : -height,
  ];
  const cc = Math.cos(roi.theta_deg * DEG);
  const ss = Math.sin(roi.theta_deg * DEG);
  return {
    origin: [
      opposite[0] + cc * localOrigin[0] - ss * localOrigin[1],
      opposite[1] + ss * localOrigin[0] + cc * localOrigin[1],
    ],
    width,
    height,
    theta_deg: roi.theta_deg,
  };
}

/** Rotate about the ROI center toward the pointer. */
export function rotateRoi(roi: RoiJson, x: number, y: number): RoiJson {
  const [cx, cy] = roiCenter(roi);
  const theta = Math.atan2(y - cy, x - cx) / DEG + 90;
  const normalized = ((theta + 180) % 360 + 360) % 360 - 180;
  const c = Math.cos(normalized * DEG);
  const s = Math.sin(normalized * DEG);
  const hw = roi.width / 2;
  const hh = roi.height / 2;
  return {
    origin: [cx - (c * hw - s * hh), cy - (s * hw + c * hh)],
    width: roi.width,
    height: roi.height,
    theta_deg: normalized,
  };
}

export function drawRoi(
  ctx: CanvasRenderingContext2D,
  roi: RoiJson,
  options: { color?: string; withHandles?: boolean; label?: string } = {},
): void {
  const color = options.color ?? "#2b8a3e";
  const corners = roiCorners(roi);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(corners[0][0], corners[0][1]);
  for (const [x, y] of corners.slice(1)) ctx.lineTo(x, y);
  ctx.closePath();
  ctx.stroke();
  if (options.label) {
    ctx.fillStyle = color;
    ctx.font = "11px sans-serif";
    ctx.fillText(options.label, corners[0][0] + 3, corners[0][1] - 4);
  }
  if (options.withHandles) {
    ctx.fillStyle = color;
    for (const [x, y] of corners) {
      ctx.fillRect(x - 3, y - 3, 6, 6);
    }
    const [rx, ry] = rotateHandlePos(roi);
    ctx.beginPath();
    ctx.arc(rx, ry, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}
