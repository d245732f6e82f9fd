// The tweak loop: widening a band re-issues a dryrun (never a PUT) and
// flips the failing badge to PASS from the server's response.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { newRunViewState, renderBadges, renderRunView } from "../src/runview.js";
import type { ReportJson } from "../src/types.js";
import { demoRecipe, report } from "./fixtures.js";

const failing = (): ReportJson =>
  report("FAIL", [
    {
      name: "angle",
      kind: "angle_deg",
      value: 52.1,
      verdict: "FAIL",
      block_id: "angle",
      tolerance: { min: 43, max: 47 },
    },
  ]);

let calls: { url: string; method: string; form?: FormData }[] = [];

beforeEach(() => {
  calls = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      const method = init?.method ?? "GET";
      const form = init?.body instanceof FormData ? init.body : undefined;
      calls.push({ url: String(url), method, form });
      if (String(url).endsWith("/dryrun")) {
        // the mock server evaluates the transient bands it was sent
        // (jsdom's File has no .text(); go through FileReader)
        const recipeBlob = form?.get("recipe") as Blob | null;
        const text = recipeBlob
          ? await new Promise<string>((resolve) => {
              const reader = new FileReader();
              reader.onload = () => resolve(String(reader.result));
              reader.readAsText(recipeBlob);
            })
          : "{}";
        const bands = (JSON.parse(text).tolerances ?? []) as {
          measurement_name: string;
          min: number;
          max: number;
        }[];
        const band = bands.find((b) => b.measurement_name === "angle");
        const pass = band !== undefined && band.min <= 52.1 && 52.1 <= band.max;
        const doc = report(pass ? "PASS" : "FAIL", [
          {
            name: "angle",
            kind: "angle_deg",
            value: 52.1,
            verdict: pass ? "PASS" : "FAIL",
            block_id: "angle",
            tolerance: band ? { min: band.min, max: band.max } : undefined,
          },
        ]);
        return new Response(JSON.stringify({ report: doc, dryrun: true }), { status: 200 });
      }
      throw new Error(`unexpected request ${method} ${url}`);
    }),
  );
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("tolerance tweak loop", () => {
  it("slider change issues a dryrun and flips the badge, without any PUT", async () => {
    const state = newRunViewState("demo", demoRecipe());
    state.image = new Blob([new Uint8Array([1, 2, 3])], { type: "image/png" });
    state.report = failing();

    const container = document.createElement("div");
    renderRunView(container, state, () => renderRunView(container, state, () => {}));

    let badge = container.querySelector('.badge[data-measurement="angle"]')!;
    expect(badge.getAttribute("data-verdict")).toBe("FAIL");

    const row = container.querySelector('.band-row[data-measurement="angle"]')!;
    const hi = row.querySelector("input.band-max") as HTMLInputElement;
    hi.value = "60";
    hi.dispatchEvent(new Event("change"));
    await vi.waitFor(() => {
      const b = container.querySelector('.badge[data-measurement="angle"]');
      expect(b?.getAttribute("data-verdict")).toBe("PASS");
    });

    expect(calls.length).toBe(1);
    expect(calls[0].method).toBe("POST");
    expect(calls[0].url).toBe("/recipes/demo/dryrun");
    expect(calls.some((c) => c.method === "PUT")).toBe(false);

    const overall = container.querySelector(".overall")!;
    expect(overall.getAttribute("data-overall")).toBe("PASS");
    expect(overall.textContent).toContain("dryrun");
  });

  it("a reject verdict renders as its own state with the score", () => {
    const state = newRunViewState("demo", demoRecipe());
    state.report = report("REJECT-NO-REGISTRATION", []);
    const pane = renderBadges(state);
    const overall = pane.querySelector(".overall")!;
    expect(overall.getAttribute("data-overall")).toBe("REJECT-NO-REGISTRATION");
    expect(overall.textContent).toContain("0.310");
  });
});
