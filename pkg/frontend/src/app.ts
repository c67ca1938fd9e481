/**
 * Application shell: login, the query panel, the track map, batch
 * verification, and the iteration dashboard.
 */

import { ApiClient, loadConfig, type TrackFilters, type UiConfig } from "./api.js";
import { batchAnnotateAction, singleAnnotateAction } from "./annotate.js";
import { loadDashboard, renderDashboard } from "./dashboard.js";
import { TrackLayer } from "./map.js";
import { QueryPanel } from "./query.js";
import { ViewStore, type ColorMode } from "./state.js";

const DASHBOARD_POLL_MS = 5000;

export async function startApp(root: HTMLElement): Promise<void> {
  const config = await loadConfig();
  const client = new ApiClient(config.api_base_url);
  const store = new ViewStore();
  client.onUnauthorized = () => {
    store.update({ session: null });
    renderLogin(root, client, store, config);
  };
  renderLogin(root, client, store, config);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLogin(
  root: HTMLElement,
  client: ApiClient,
  store: ViewStore,
  config: UiConfig,
): void {
  root.innerHTML = "";
  const form = el("form", { class: "login" });
  const user = el("input", { placeholder: "username", name: "username" });
  const pass = el("input", { placeholder: "password", type: "password", name: "password" });
  const project = el("input", { placeholder: "project", name: "project" });
  const button = el("button", { type: "submit" }, "Sign in");
  const error = el("p", { class: "error" });
  form.append(user, pass, project, button, error);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    try {
      await client.login(user.value, pass.value);
      store.update({
        session: { username: user.value },
        project: project.value,
      });
      renderMain(root, client, store, config);
    } catch {
      error.textContent = "login failed";
    }
  });
  root.appendChild(form);
}

export function renderMain(
  root: HTMLElement,
  client: ApiClient,
  store: ViewStore,
  config: UiConfig,
): void {
  root.innerHTML = "";
  const banner = el("div", { class: "banner" });
  const controls = el("div", { class: "controls" });
  const labelInput = el("input", { placeholder: "label" });
  const annotatorInput = el("input", { placeholder: "annotator" });
  const runwayInput = el("input", { placeholder: "runway" });
  const verifiedSelect = el("select");
  for (const option of ["any", "true", "false"]) {
    verifiedSelect.appendChild(el("option", { value: option }, option));
  }
  const setInput = el("input", { placeholder: "set", type: "number" });
  const applyButton = el("button", {}, "Query");
  const clearButton = el("button", {}, "Clear");
  const count = el("span", { class: "count" }, "0 tracks");
  controls.append(labelInput, annotatorInput, runwayInput, verifiedSelect,
                  setInput, applyButton, clearButton, count);

  const colorSelect = el("select", { class: "color-mode" });
  for (const mode of ["label", "runway", "annotator"]) {
    colorSelect.appendChild(el("option", { value: mode }, `color by ${mode}`));
  }

  const canvas = el("canvas", { width: "900", height: "600" }) as HTMLCanvasElement;
  const hover = el("div", { class: "hover-info" });

  const batchBar = el("div", { class: "batch-bar" });
  const batchLabel = el("input", { placeholder: "label for all matched" });
  const batchButton = el("button", {}, "Batch annotate result set");
  batchBar.append(batchLabel, batchButton);

  const detail = el("div", { class: "detail" });
  const dashboard = el("div", { class: "dashboard" });

  root.append(banner, controls, colorSelect, canvas, hover, batchBar, detail, dashboard);

  const layer = new TrackLayer();
  const panel = new QueryPanel(client, store);

  function redraw() {
    const state = store.get();
    const ctx = canvas.getContext("2d");
    if (ctx) {
      layer.render(ctx, state.tracks, canvas.width, canvas.height,
                   state.colorMode);
    }
    count.textContent = `${state.resultIds.length} tracks`;
    banner.textContent = state.banner ?? "";
    batchButton.toggleAttribute(
      "disabled", !store.canMutate() || state.resultIds.length === 0,
    );
  }
  store.subscribe(redraw);

  function currentFilters(): TrackFilters {
    const filters: TrackFilters = {};
    if (labelInput.value) filters.label = labelInput.value;
    if (annotatorInput.value) filters.annotator = annotatorInput.value;
    if (runwayInput.value) filters.runway = runwayInput.value;
    if (verifiedSelect.value !== "any") filters.verified = verifiedSelect.value === "true";
    if (setInput.value) filters.set = Number(setInput.value);
    return filters;
  }

  applyButton.addEventListener("click", () => void panel.apply(currentFilters()));
  clearButton.addEventListener("click", () => {
    labelInput.value = annotatorInput.value = runwayInput.value = "";
    verifiedSelect.value = "any";
    setInput.value = "";
    void panel.clear();
  });
  colorSelect.addEventListener("change", () => {
    store.update({ colorMode: colorSelect.value as ColorMode });
  });

  canvas.addEventListener("mousemove", (event) => {
    const rect = canvas.getBoundingClientRect();
    const id = layer.hitTest(event.clientX - rect.left, event.clientY - rect.top);
    if (!id) {
      hover.textContent = "";
      return;
    }
    const track = store.get().tracks.find((t) => t.track_id === id);
    const current = track?.annotations[track.annotations.length - 1];
    hover.textContent = current
      ? `${id}: ${current.label} (${current.annotator}${current.verified ? ", verified" : ""})`
      : id ?? "";
  });

  canvas.addEventListener("click", (event) => {
    const rect = canvas.getBoundingClientRect();
    const id = layer.hitTest(event.clientX - rect.left, event.clientY - rect.top);
    if (!id) return;
    store.update({ selection: [id] });
    renderDetail(id);
  });

  function renderDetail(id: string) {
    detail.innerHTML = "";
    detail.append(el("strong", {}, id));
    const input = el("input", { placeholder: "label" });
    const save = el("button", {}, "Annotate");
    save.addEventListener("click", async () => {
      const done = await singleAnnotateAction(client, store, id, input.value);
      if (done) await panel.apply(store.get().filters);
    });
    detail.append(input, save);
  }

  batchButton.addEventListener("click", async () => {
    await batchAnnotateAction(
      client, store, batchLabel.value,
      (n) => window.confirm(`Annotate all ${n} matched tracks as "${batchLabel.value}"?`),
      () => panel.apply(store.get().filters),
    );
  });

  async function refreshDashboard() {
    const project = store.get().project;
    if (!project) return;
    try {
      const data = await loadDashboard(client, project);
      renderDashboard(dashboard, data);
    } catch {
      // dashboard is best-effort; the next poll retries
    }
  }
  void refreshDashboard();
  const timer = setInterval(refreshDashboard, DASHBOARD_POLL_MS);
  store.subscribe((state) => {
    if (!state.session) clearInterval(timer);
  });

  void panel.clear();
}
