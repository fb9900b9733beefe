export type Channel = "T2H" | "ET" | "CC";
export type Axis = "axial" | "coronal" | "sagittal";

export const CHANNELS: readonly Channel[] = ["T2H", "ET", "CC"];
export const AXES: readonly Axis[] = ["axial", "coronal", "sagittal"];

export interface ScaleEntry {
  stars: number;
  description: string;
}

export interface SessionInfo {
  session_id: string;
  rater_id: string;
  case_count: number;
  keys: string[];
}

export interface NextCase {
  done: false;
  blinded_case_key: string;
  index: number;
  total: number;
  remaining: number;
  sequences: string[];
  slice_counts: Record<Axis, number>;
  rated_channels: Channel[];
}

export interface SessionDone {
  done: true;
  total: number;
  remaining: 0;
}

export type NextResponse = NextCase | SessionDone;

export interface SummaryRow {
  rater_id: string;
  channel: Channel;
  n: number;
  mean: number | null;
  sd: number | null;
  histogram: Record<string, number>;
}

export interface Summary {
  variant: string;
  rows: SummaryRow[];
  cases?: { rater_id: string; case_id: string; channel: Channel; stars: number }[];
}

export interface RatingAck {
  status: string;
  key: string;
  channel: Channel;
  stars: number;
}
