/** Client-side graph validation mirroring the server's checks, so the
 * editor can reject bad edits inline before a round trip. The server's
 * verdict still wins: its 422 diagnostics render in the same list. */

import { inputAccepts, KIND_SPECS, outputType } from "./blocks.js";
import type { Diagnostic, GraphJson } from "./types.js";

export function validateGraph(graph: GraphJson): Diagnostic[] {
  const diags: Diagnostic[] = [];
  const byId = new Map(graph.blocks.map((b) => [b.id, b]));

  const seen = new Set<string>();
  for (const b of graph.blocks) {
    if (seen.has(b.id)) diags.push({ code: "DuplicateId", message: `duplicate block id '${b.id}'`, blocks: [b.id] });
    seen.add(b.id);
    if (!KIND_SPECS[b.kind]) {
      diags.push({ code: "UnknownKind", message: `unknown kind '${b.kind}'`, blocks: [b.id] });
    }
  }

  const inputs = graph.blocks.filter((b) => b.kind === "input");
  const regs = graph.blocks.filter((b) => b.kind === "registration");
  const outputs = graph.blocks.filter((b) => b.kind === "output");
  if (inputs.length !== 1) {
    diags.push({
      code: inputs.length ? "MultipleInput" : "MissingInput",
      message: `graph must have exactly one input block, found ${inputs.length}`,
      blocks: inputs.map((b) => b.id),
    });
  }
  if (regs.length !== 1) {
    diags.push({
      code: regs.length ? "MultipleRegistration" : "MissingRegistration",
      message: `graph must have exactly one registration block, found ${regs.length}`,
      blocks: regs.map((b) => b.id),
    });
  }
  if (!outputs.length) {
    diags.push({ code: "MissingOutput", message: "graph has no output block", blocks: [] });
  }
  if (inputs.length === 1 && regs.length === 1) {
    const wired = graph.connections.some(
      (c) =>
        c.from[0] === inputs[0].id &&
        c.from[1] === "image" &&
        c.to[0] === regs[0].id &&
        c.to[1] === "image",
    );
    if (!wired) {
      diags.push({
        code: "RegistrationNotAfterInput",
        message: "registration block must consume the input block's image",
        blocks: [regs[0].id],
      });
    }
  }

  const usedInputs = new Set<string>();
  for (const c of graph.connections) {
    const [fb, fp] = c.from;
    const [tb, tp] = c.to;
    const src = byId.get(fb);
    const dst = byId.get(tb);
    if (!src || !dst) {
      diags.push({ code: "UnknownBlock", message: `connection references unknown block`, blocks: [fb, tb] });
      continue;
    }
    const srcType = outputType(src.kind, fp);
    if (srcType === null) {
      diags.push({ code: "UnknownPort", message: `${fb} has no output port '${fp}'`, blocks: [fb] });
      continue;
    }
    const accepts = inputAccepts(dst.kind, tp);
    if (accepts === null) {
      diags.push({ code: "UnknownPort", message: `${tb} has no input port '${tp}'`, blocks: [tb] });
      continue;
    }
    if (accepts !== "any" && !accepts.includes(srcType)) {
      diags.push({
        code: "TypeMismatch",
        message: `${fb}.${fp} (${srcType}) cannot feed ${tb}.${tp} (accepts ${accepts.join(", ")})`,
        blocks: [fb, tb],
      });
    }
    const key = `${tb}.${tp}`;
    if (usedInputs.has(key)) {
      diags.push({
        code: "DuplicateInputConnection",
        message: `input port ${key} has multiple connections`,
        blocks: [tb],
      });
    }
    usedInputs.add(key);
  }

  const cycle = cycleMembers(graph);
  if (cycle.length) {
    diags.push({
      code: "Cycle",
      message: `graph contains a cycle through: ${cycle.join(", ")}`,
      blocks: cycle,
    });
  }
  return diags;
}

/** Ids of blocks on cycles (Kahn leftover, trimmed of dead ends). */
export function cycleMembers(graph: GraphJson): string[] {
  const adj = new Map<string, Set<string>>(graph.blocks.map((b) => [b.id, new Set<string>()]));
  const indeg = new Map<string, number>(graph.blocks.map((b) => [b.id, 0]));
  for (const c of graph.connections) {
    const from = adj.get(c.from[0]);
    if (!from || !indeg.has(c.to[0]) || from.has(c.to[0])) continue;
    from.add(c.to[0]);
    indeg.set(c.to[0], (indeg.get(c.to[0]) ?? 0) + 1);
  }
  const ready = [...indeg.entries()].filter(([, n]) => n === 0).map(([b]) => b);
  let done = 0;
  while (ready.length) {
    ready.sort();
    const node = ready.shift()!;
    done += 1;
    for (const next of adj.get(node) ?? []) {
      const n = indeg.get(next)! - 1;
      indeg.set(next, n);
      if (n === 0) ready.push(next);
    }
  }
  if (done === indeg.size) return [];
  let leftover = new Set([...indeg.entries()].filter(([, n]) => n > 0).map(([b]) => b));
  let changed = true;
  while (changed) {
    changed = false;
    for (const b of [...leftover]) {
      const hasSuccessor = [...(adj.get(b) ?? [])].some((d) => leftover.has(d));
      if (!hasSuccessor) {
        leftover.delete(b);
        changed = true;
      }
    }
  }
  return [...leftover].sort();
}
