/** Application shell: the four operator tabs (run & tweak, process
 * monitoring, calibration, flowchart editor) over one selected recipe. */

import { getRecipe, listRecipes } from "./api.js";
import { loadRecipe, newRecipe, renderEditor, setUnitsPerPx, type EditorState } from "./editor.js";
import { loadMonitorData, renderMonitor } from "./monitor.js";
import { newRunViewState, renderRunView, type RunViewState } from "./runview.js";

const TABS = ["Run & Tweak", "Monitoring", "Calibration", "Flowchart Editor"] as const;
type Tab = (typeof TABS)[number];

interface AppState {
  recipeId: string | null;
  editor: EditorState | null;
  runView: RunViewState | null;
  tab: Tab;
}

const state: AppState = { recipeId: null, editor: null, runView: null, tab: "Run & Tweak" };

async function selectRecipe(id: string): Promise<void> {
  const fetched = await getRecipe(id);
  state.recipeId = id;
  state.editor = loadRecipe(id, fetched.revision, fetched.recipe);
  state.runView = newRunViewState(id, fetched.recipe);
  render();
}

function render(): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.innerHTML = "";
  root.appendChild(renderHeader());
  const body = document.createElement("main");
  body.id = "tab-body";
  root.appendChild(body);
  if (!state.recipeId || !state.editor || !state.runView) {
    body.textContent = "Select or create a recipe to begin.";
    return;
  }
  switch (state.tab) {
    case "Run & Tweak":
      renderRunView(body, state.runView, render);
      break;
    case "Monitoring":
      loadMonitorData(state.recipeId).then((data) => renderMonitor(body, data));
      break;
    case "Calibration":
      renderCalibration(body, state.editor);
      break;
    case "Flowchart Editor":
      renderEditor(body, state.editor, render);
      break;
  }
}

function renderHeader(): HTMLElement {
  const header = document.createElement("header");
  const title = document.createElement("h1");
  title.textContent = "registra";
  header.appendChild(title);

  const picker = document.createElement("select");
  picker.id = "recipe-picker";
  listRecipes().then((recipes) => {
    for (const r of recipes) {
      const opt = document.createElement("option");
      opt.value = r.id;
      opt.textContent = `${r.id} (rev ${r.revision})`;
      if (r.id === state.recipeId) opt.selected = true;
      picker.appendChild(opt);
    }
  });
  picker.addEventListener("change", () => void selectRecipe(picker.value));
  header.appendChild(picker);

  const newBtn = document.createElement("button");
  newBtn.textContent = "New recipe";
  newBtn.addEventListener("click", () => {
    const id = window.prompt("recipe id");
    if (!id) return;
    state.recipeId = id;
    state.editor = loadRecipe(id, null, newRecipe(id));
    state.runView = newRunViewState(id, state.editor.recipe);
    state.tab = "Flowchart Editor";
    render();
  });
  header.appendChild(newBtn);

  const nav = document.createElement("nav");
  for (const tab of TABS) {
    const btn = document.createElement("button");
    btn.textContent = tab;
    btn.className = tab === state.tab ? "tab active" : "tab";
    btn.addEventListener("click", () => {
      state.tab = tab;
      render();
    });
    nav.appendChild(btn);
  }
  header.appendChild(nav);
  return header;
}

function renderCalibration(body: HTMLElement, editor: EditorState): void {
  const pane = document.createElement("div");
  pane.className = "calibration";
  const label = document.createElement("label");
  label.textContent = "units per pixel (applied at report time)";
  const input = document.createElement("input");
  input.type = "number";
  input.step = "any";
  input.value = editor.recipe.units_per_px === undefined ? "" : String(editor.recipe.units_per_px);
  input.addEventListener("change", () => {
    setUnitsPerPx(editor, input.value === "" ? null : Number(input.value));
  });
  label.appendChild(input);
  pane.appendChild(label);
  const note = document.createElement("p");
  note.textContent =
    "Geometry is measured in reference-image pixels; this constant only adds converted values to reports.";
  pane.appendChild(note);
  body.appendChild(pane);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  render();
}
