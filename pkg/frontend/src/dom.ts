import type { ViewState } from "./state.js";
import { CHANNELS } from "./types.js";
import type { Channel, NextCase, ScaleEntry, SummaryRow } from "./types.js";

export const OVERLAY_LEGEND: Record<Channel, string> = {
  T2H: "#00c850",
  ET: "#e63c28",
  CC: "#3c78ff",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** The rubric is displayed exactly as served; never re-worded locally. */
export function renderRubric(entries: ScaleEntry[]): HTMLElement {
  const panel = el("section", "rubric");
  panel.appendChild(el("h2", undefined, "Rating scale"));
  const list = el("dl");
  for (const entry of entries) {
    list.appendChild(el("dt", undefined, `${entry.stars} star${entry.stars > 1 ? "s" : ""}`));
    list.appendChild(el("dd", undefined, entry.description));
  }
  panel.appendChild(list);
  return panel;
}

export function renderProgress(next: NextCase): HTMLElement {
  return el(
    "p",
    "progress",
    `Case ${next.index + 1} of ${next.total} (${next.remaining} remaining)`,
  );
}

export function renderBlockedMessage(message: string): HTMLElement {
  const node = el("p", "blocked", message);
  node.setAttribute("role", "alert");
  return node;
}

export function renderStarPicker(
  channel: Channel,
  state: ViewState,
  onSelect: (channel: Channel, stars: number) => void,
): HTMLElement {
  const row = el("div", "star-row");
  row.dataset.channel = channel;
  if (state.focusedChannel === channel) row.classList.add("focused");
  const label = el("span", "channel-label", channel);
  label.style.color = OVERLAY_LEGEND[channel];
  row.appendChild(label);
  for (let stars = 1; stars <= 4; stars++) {
    const button = el("button", "star", "★".repeat(stars));
    button.type = "button";
    if (state.pendingStars[channel] === stars) button.classList.add("selected");
    button.addEventListener("click", () => onSelect(channel, stars));
    row.appendChild(button);
  }
  return row;
}

export function renderSummaryTable(
  rows: SummaryRow[],
  raterId: string,
  localMeans: Record<Channel, number | null>,
): HTMLElement {
  const section = el("section", "summary");
  section.appendChild(el("h2", undefined, "Your session summary"));
  const table = el("table");
  const head = el("tr");
  for (const title of ["Channel", "n", "Mean", "SD", "Local mean"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  const mine = rows.filter((r) => r.rater_id === raterId);
  for (const channel of CHANNELS) {
    const row = mine.find((r) => r.channel === channel);
    const tr = el("tr");
    tr.appendChild(el("td", undefined, channel));
    tr.appendChild(el("td", undefined, row ? String(row.n) : "0"));
    tr.appendChild(el("td", undefined, row?.mean != null ? row.mean.toFixed(2) : "-"));
    tr.appendChild(el("td", undefined, row?.sd != null ? row.sd.toFixed(2) : "-"));
    const local = localMeans[channel];
    tr.appendChild(el("td", undefined, local != null ? local.toFixed(2) : "-"));
    table.appendChild(tr);
  }
  section.appendChild(table);
  return section;
}
