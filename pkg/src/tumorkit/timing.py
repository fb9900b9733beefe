"""Contouring-time analysis: manual vs AI-adjusted segmentation times."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .metrics import summarise_values
from .volume import CHANNELS

TIMING_CSV_HEADER = "case_id,channel,t_manual_s,t_ai_adjusted_s"


@dataclass(frozen=True)
class TimingRecord:
    case_id: str
    channel: str
    t_manual_s: float
    t_ai_adjusted_s: float

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.t_manual_s <= 0 or self.t_ai_adjusted_s <= 0:
            raise ValueError("times must be positive")

    @property
    def saving_fraction(self) -> float:
        return compute_time_saving(self.t_manual_s, self.t_ai_adjusted_s)


def compute_time_saving(t_manual_s: float, t_ai_adjusted_s: float) -> float:
    """Relative reduction (manual - adjusted) / manual.

    Negative when reviewing and fixing the automatic contours takes
    longer than contouring from scratch.
    """
    if t_manual_s <= 0:
        raise ValueError(f"manual time must be positive, got {t_manual_s}")
    return (t_manual_s - t_ai_adjusted_s) / t_manual_s


@dataclass(frozen=True)
class ChannelTimingSummary:
    channel: str
    n: int
    median_saving: float | None


def ingest_timing_csv(path):
    """Parse a timing CSV.

    Returns (records, summaries, rejects) where rejects is a list of
    (line_number, reason) for malformed rows.  A bad header raises.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not body or body[0][1] != TIMING_CSV_HEADER:
        raise ValueError(f"bad timing CSV header in {path}; expected {TIMING_CSV_HEADER!r}")

    records: list[TimingRecord] = []
    rejects: list[tuple[int, str]] = []
    for line_no, line in body[1:]:
        row = next(csv.reader([line]))
        if len(row) != 4:
            rejects.append((line_no, f"expected 4 fields, got {len(row)}"))
            continue
        case_id, channel, manual, adjusted = row
        try:
            record = TimingRecord(case_id, channel, float(manual), float(adjusted))
        except ValueError as exc:
            rejects.append((line_no, str(exc)))
            continue
        records.append(record)

    summaries = []
    for channel in CHANNELS:
        fractions = [r.saving_fraction for r in records if r.channel == channel]
        median, _, _ = summarise_values(fractions)
        summaries.append(ChannelTimingSummary(channel=channel, n=len(fractions), median_saving=median))
    return records, summaries, rejects
