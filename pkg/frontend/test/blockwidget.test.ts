// Block rendering conventions: name above, inputs left, outputs right,
// params on the bottom; the context transforms have no ports anywhere.

import { describe, expect, it } from "vitest";
import { defaultParams, KIND_SPECS, PALETTE_KINDS } from "../src/blocks.js";
import { renderBlock } from "../src/blockwidget.js";

function widget(kind: string) {
  return renderBlock({
    id: `${kind}_w`,
    kind,
    params: defaultParams(kind),
    roi: KIND_SPECS[kind].needsRoi
      ? { origin: [0, 0], width: 10, height: 10, theta_deg: 0 }
      : undefined,
  });
}

describe("block widget layout", () => {
  it.each(PALETTE_KINDS)("renders %s with inputs left, outputs right, params bottom", (kind) => {
    const el = widget(kind);
    const children = [...el.children];
    expect(children[0].className).toBe("block-name");

    const body = el.querySelector(".block-body")!;
    const cols = [...body.children].map((c) => c.className);
    expect(cols[0]).toContain("ports-in");
    expect(cols[cols.length - 1]).toContain("ports-out");

    // every declared input is in the left column, every output in the right
    const spec = KIND_SPECS[kind];
    const inNames = [...el.querySelectorAll(".ports-in .port")].map((p) => p.textContent);
    const outNames = [...el.querySelectorAll(".ports-out .port")].map((p) => p.textContent);
    expect(inNames).toEqual(spec.inputs.map((p) => p.name));
    expect(outNames).toEqual(spec.outputs.map((p) => p.name));

    // params are the last section of the block
    expect(children[children.length - 1].className).toBe("block-params");
    const paramNames = [...el.querySelectorAll(".block-params [name]")].map((i) =>
      i.getAttribute("name"),
    );
    expect(paramNames).toEqual(spec.params.map((p) => p.name));
  });

  it.each(PALETTE_KINDS)("never renders a context-transform port on %s", (kind) => {
    const el = widget(kind);
    for (const port of el.querySelectorAll("[data-port]")) {
      const name = port.getAttribute("data-port")!;
      expect(["T", "D", "transform"]).not.toContain(name);
      expect(port.getAttribute("data-types")).not.toContain("transform");
    }
  });

  it("no kind declares a transform-typed port at all", () => {
    for (const spec of Object.values(KIND_SPECS)) {
      for (const p of spec.inputs) expect(p.accepts).not.toContain("transform" as never);
      for (const p of spec.outputs) expect(p.type).not.toBe("transform");
    }
  });
});
