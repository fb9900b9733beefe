import { AXES, CHANNELS } from "./types.js";
import type { Axis, Channel, NextCase } from "./types.js";

/** Everything the viewer shows for the current case; updated immutably. */
export interface ViewState {
  key: string;
  sequences: string[];
  sequence: string;
  axis: Axis;
  index: number;
  sliceCounts: Record<Axis, number>;
  overlays: Record<Channel, boolean>;
  pendingStars: Partial<Record<Channel, number>>;
  focusedChannel: Channel;
}

export function middleSlice(count: number): number {
  return Math.floor(count / 2);
}

function clampIndex(index: number, count: number): number {
  return Math.min(Math.max(index, 0), count - 1);
}

export function createViewState(next: NextCase): ViewState {
  const axis: Axis = "axial";
  return {
    key: next.blinded_case_key,
    sequences: next.sequences,
    sequence: next.sequences[0],
    axis,
    index: middleSlice(next.slice_counts[axis]),
    sliceCounts: next.slice_counts,
    overlays: { T2H: true, ET: true, CC: true },
    pendingStars: {},
    focusedChannel: "T2H",
  };
}

/** Axis change resets the index to the middle slice of the new axis. */
export function setAxis(state: ViewState, axis: Axis): ViewState {
  if (!AXES.includes(axis)) return state;
  return { ...state, axis, index: middleSlice(state.sliceCounts[axis]) };
}

/** Sequence change keeps axis and index (clamped if out of range). */
export function setSequence(state: ViewState, sequence: string): ViewState {
  if (!state.sequences.includes(sequence)) return state;
  return { ...state, sequence, index: clampIndex(state.index, state.sliceCounts[state.axis]) };
}

export function setIndex(state: ViewState, index: number): ViewState {
  return { ...state, index: clampIndex(index, state.sliceCounts[state.axis]) };
}

export function stepIndex(state: ViewState, delta: number): ViewState {
  return setIndex(state, state.index + delta);
}

export function toggleOverlay(state: ViewState, channel: Channel): ViewState {
  return { ...state, overlays: { ...state.overlays, [channel]: !state.overlays[channel] } };
}

export function activeOverlays(state: ViewState): Channel[] {
  return CHANNELS.filter((c) => state.overlays[c]);
}

export function setStars(state: ViewState, channel: Channel, stars: number): ViewState {
  if (!Number.isInteger(stars) || stars < 1 || stars > 4) return state;
  return { ...state, pendingStars: { ...state.pendingStars, [channel]: stars } };
}

export function focusChannel(state: ViewState, channel: Channel): ViewState {
  return { ...state, focusedChannel: channel };
}

export function missingChannels(state: ViewState): Channel[] {
  return CHANNELS.filter((c) => state.pendingStars[c] === undefined);
}

export function starsComplete(state: ViewState): boolean {
  return missingChannels(state).length === 0;
}

/**
 * Keyboard contract: digits 1-4 rate the focused channel, arrow keys
 * scrub slices, Tab-like channel cycling via "c".
 */
export function handleKey(state: ViewState, key: string): ViewState {
  if (key >= "1" && key <= "4") {
    return setStars(state, state.focusedChannel, Number(key));
  }
  if (key === "ArrowUp" || key === "ArrowRight") return stepIndex(state, 1);
  if (key === "ArrowDown" || key === "ArrowLeft") return stepIndex(state, -1);
  if (key === "c") {
    const order = CHANNELS.indexOf(state.focusedChannel);
    return focusChannel(state, CHANNELS[(order + 1) % CHANNELS.length]);
  }
  return state;
}
