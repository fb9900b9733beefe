import { RatingApi } from "./api.js";
import {
  renderBlockedMessage,
  renderProgress,
  renderRubric,
  renderStarPicker,
  renderSummaryTable,
} from "./dom.js";
import {
  activeOverlays,
  focusChannel,
  handleKey,
  setAxis,
  setIndex,
  setSequence,
  setStars,
  toggleOverlay,
} from "./state.js";
import type { ViewState } from "./state.js";
import { Walkthrough } from "./walkthrough.js";
import { AXES, CHANNELS } from "./types.js";
import type { Axis, Channel, ScaleEntry } from "./types.js";

interface AppContext {
  api: RatingApi;
  walkthrough: Walkthrough;
  scale: ScaleEntry[];
  state: ViewState | null;
  sliceObjectUrl: string | null;
}

const root = () => document.getElementById("app")!;

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

async function refreshSlice(ctx: AppContext, img: HTMLImageElement): Promise<void> {
  const state = ctx.state;
  if (!state) return;
  const bytes = await ctx.api.fetchSlice(
    state.key,
    state.sequence,
    state.axis,
    state.index,
    activeOverlays(state),
  );
  const url = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
  if (ctx.sliceObjectUrl) URL.revokeObjectURL(ctx.sliceObjectUrl);
  ctx.sliceObjectUrl = url;
  img.src = url;
}

function renderCase(ctx: AppContext): void {
  const container = root();
  clear(container);
  const state = ctx.state!;
  const next = ctx.walkthrough.current!;

  container.appendChild(renderProgress(next));
  container.appendChild(renderRubric(ctx.scale));

  const viewer = document.createElement("div");
  viewer.className = "viewer";
  const img = document.createElement("img");
  img.alt = "slice";
  viewer.appendChild(img);

  const controls = document.createElement("div");
  controls.className = "controls";

  const seqSelect = document.createElement("select");
  for (const seq of state.sequences) {
    const option = document.createElement("option");
    option.value = seq;
    option.textContent = seq;
    option.selected = seq === state.sequence;
    seqSelect.appendChild(option);
  }
  seqSelect.addEventListener("change", () => {
    ctx.state = setSequence(ctx.state!, seqSelect.value);
    void refreshSlice(ctx, img);
  });
  controls.appendChild(seqSelect);

  const axisSelect = document.createElement("select");
  for (const axis of AXES) {
    const option = document.createElement("option");
    option.value = axis;
    option.textContent = axis;
    option.selected = axis === state.axis;
    axisSelect.appendChild(option);
  }
  axisSelect.addEventListener("change", () => {
    ctx.state = setAxis(ctx.state!, axisSelect.value as Axis);
    slider.max = String(ctx.state.sliceCounts[ctx.state.axis] - 1);
    slider.value = String(ctx.state.index);
    void refreshSlice(ctx, img);
  });
  controls.appendChild(axisSelect);

  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = String(state.sliceCounts[state.axis] - 1);
  slider.value = String(state.index);
  slider.addEventListener("input", () => {
    ctx.state = setIndex(ctx.state!, Number(slider.value));
    void refreshSlice(ctx, img);
  });
  controls.appendChild(slider);

  for (const channel of CHANNELS) {
    const toggle = document.createElement("label");
    toggle.className = "overlay-toggle";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = state.overlays[channel];
    box.addEventListener("change", () => {
      ctx.state = toggleOverlay(ctx.state!, channel);
      void refreshSlice(ctx, img);
    });
    toggle.appendChild(box);
    toggle.appendChild(document.createTextNode(channel));
    controls.appendChild(toggle);
  }

  viewer.appendChild(controls);
  container.appendChild(viewer);

  const stars = document.createElement("div");
  stars.className = "stars";
  for (const channel of CHANNELS) {
    stars.appendChild(
      renderStarPicker(channel, state, (ch, value) => {
        ctx.state = setStars(focusChannel(ctx.state!, ch), ch, value);
        renderCase(ctx);
      }),
    );
  }
  container.appendChild(stars);

  const messageSlot = document.createElement("div");
  messageSlot.id = "message";
  container.appendChild(messageSlot);

  const advance = document.createElement("button");
  advance.type = "button";
  advance.id = "advance";
  advance.textContent = "Submit ratings and continue";
  advance.addEventListener("click", () => void onAdvance(ctx, messageSlot));
  container.appendChild(advance);

  void refreshSlice(ctx, img);
}

async function onAdvance(ctx: AppContext, messageSlot: HTMLElement): Promise<void> {
  const result = await ctx.walkthrough.advance(ctx.state!);
  if (result.kind === "blocked") {
    clear(messageSlot);
    messageSlot.appendChild(renderBlockedMessage(result.message));
    return;
  }
  if (result.kind === "case") {
    ctx.state = result.state;
    renderCase(ctx);
    return;
  }
  await renderDone(ctx);
}

async function renderDone(ctx: AppContext): Promise<void> {
  const container = root();
  clear(container);
  container.appendChild(
    Object.assign(document.createElement("h2"), { textContent: "All cases rated" }),
  );
  const summary = await ctx.api.getSummary();
  container.appendChild(
    renderSummaryTable(summary.rows, ctx.walkthrough.session.rater_id, ctx.walkthrough.localMeans()),
  );
}

function installKeyboard(ctx: AppContext): void {
  document.addEventListener("keydown", (event) => {
    if (!ctx.state) return;
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
      return;
    }
    const before = ctx.state;
    ctx.state = handleKey(ctx.state, event.key);
    if (ctx.state !== before) renderCase(ctx);
  });
}

export async function startApp(
  baseUrl: string,
  token: string,
  raterId: string,
  seed: number,
): Promise<void> {
  const api = new RatingApi(baseUrl, token);
  const scale = await api.getScale();
  const session = await api.createSession(raterId, seed);
  const walkthrough = new Walkthrough(api, session);
  const ctx: AppContext = { api, walkthrough, scale, state: null, sliceObjectUrl: null };

  installKeyboard(ctx);
  const first = await walkthrough.start();
  if (first.kind === "case") {
    ctx.state = first.state;
    renderCase(ctx);
  } else {
    await renderDone(ctx);
  }
}

function wireLoginForm(): void {
  const form = document.getElementById("login") as HTMLFormElement | null;
  if (!form) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = (name: string) =>
      (form.elements.namedItem(name) as HTMLInputElement).value;
    form.hidden = true;
    void startApp(
      value("server") || window.location.origin,
      value("token"),
      value("rater"),
      Number(value("seed")),
    );
  });
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  wireLoginForm();
}
