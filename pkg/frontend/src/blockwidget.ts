/** Flowchart block rendering.
 *
 * Layout contract (asserted by tests): the block name sits above the
 * body, input ports render in the left column, output ports in the
 * right column, and parameters along the bottom.  The auto-wired
 * context transforms have no ports here at all.
 */

import { KIND_SPECS, type ParamDef } from "./blocks.js";
import type { BlockJson } from "./types.js";

export interface BlockWidgetHandlers {
  onPortClick?: (blockId: string, port: string, side: "in" | "out") => void;
  onParamChange?: (blockId: string, param: string, value: unknown) => void;
  onSelect?: (blockId: string) => void;
}

export function renderBlock(block: BlockJson, handlers: BlockWidgetHandlers = {}): HTMLElement {
  const spec = KIND_SPECS[block.kind];
  const root = document.createElement("div");
  root.className = "block";
  root.dataset.blockId = block.id;
  root.dataset.kind = block.kind;
  if (block.display) {
    root.style.left = `${block.display.x}px`;
    root.style.top = `${block.display.y}px`;
  }
  root.addEventListener("click", () => handlers.onSelect?.(block.id));

  const name = document.createElement("div");
  name.className = "block-name";
  name.textContent = block.id;
  root.appendChild(name);

  const body = document.createElement("div");
  body.className = "block-body";

  const inCol = document.createElement("div");
  inCol.className = "ports ports-in";
  for (const port of spec.inputs) {
    inCol.appendChild(portEl(block.id, port.name, "in", port.accepts.join(" "), handlers));
  }
  body.appendChild(inCol);

  const center = document.createElement("div");
  center.className = "block-center";
  center.textContent = block.kind;
  body.appendChild(center);

  const outCol = document.createElement("div");
  outCol.className = "ports ports-out";
  for (const port of spec.outputs) {
    outCol.appendChild(portEl(block.id, port.name, "out", port.type, handlers));
  }
  body.appendChild(outCol);
  root.appendChild(body);

  const params = document.createElement("div");
  params.className = "block-params";
  for (const p of spec.params) {
    params.appendChild(paramEl(block, p, handlers));
  }
  root.appendChild(params);
  return root;
}

function portEl(
  blockId: string,
  port: string,
  side: "in" | "out",
  types: string,
  handlers: BlockWidgetHandlers,
): HTMLElement {
  const el = document.createElement("div");
  el.className = `port port-${side}`;
  el.dataset.port = port;
  el.dataset.types = types;
  el.textContent = port;
  el.addEventListener("click", (ev) => {
    ev.stopPropagation();
    handlers.onPortClick?.(blockId, port, side);
  });
  return el;
}

function paramEl(block: BlockJson, p: ParamDef, handlers: BlockWidgetHandlers): HTMLElement {
  const label = document.createElement("label");
  label.className = "param";
  label.textContent = p.name;
  const current = block.params[p.name];
  let input: HTMLInputElement | HTMLSelectElement;
  if (p.input === "choice") {
    input = document.createElement("select");
    for (const choice of p.choices ?? []) {
      const opt = document.createElement("option");
      opt.value = choice;
      opt.textContent = choice;
      if (choice === current) opt.selected = true;
      input.appendChild(opt);
    }
  } else if (p.input === "bool") {
    input = document.createElement("input");
    input.type = "checkbox";
    input.checked = Boolean(current);
  } else {
    input = document.createElement("input");
    input.type = p.input === "text" ? "text" : "number";
    if (p.input === "number") input.step = "any";
    input.value = current === null || current === undefined ? "" : String(current);
  }
  input.name = p.name;
  input.addEventListener("change", () => {
    let value: unknown;
    if (p.input === "bool") value = (input as HTMLInputElement).checked;
    else if (p.input === "number") value = input.value === "" ? null : Number(input.value);
    else if (p.input === "int") value = input.value === "" ? null : Math.trunc(Number(input.value));
    else value = input.value === "" ? null : input.value;
    handlers.onParamChange?.(block.id, p.name, value);
  });
  label.appendChild(input);
  return label;
}
