"""Append-only ratings log and summary statistics.

One JSON object per line; the log is the source of truth and replaying
it reconstructs every summary.  Each line records the resolved case_id
alongside the blinded key: the log lives server-side, so this does not
weaken blinding, and it makes replay self-contained.  Later submissions
for the same (rater, case, channel) supersede earlier ones in summaries
while the log keeps the full history.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from ..metrics import summarise_values
from ..volume import CHANNELS
from .scale import MAX_STARS, MIN_STARS


@dataclass(frozen=True)
class RatingRecord:
    session_id: str
    rater_id: str
    blinded_case_key: str
    case_id: str
    channel: str
    stars: int
    timestamp: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if not (MIN_STARS <= self.stars <= MAX_STARS):
            raise ValueError(f"stars must be in {MIN_STARS}..{MAX_STARS}, got {self.stars}")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class RatingStore:
    """Durable ratings log with a single serialized writer."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[RatingRecord] = []
        if self.path.exists():
            self._records = load_ratings_log(self.path)

    def append(self, record: RatingRecord) -> None:
        line = json.dumps(asdict(record), sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self._records.append(record)

    def records(self) -> list[RatingRecord]:
        with self._lock:
            return list(self._records)


def load_ratings_log(path) -> list[RatingRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        records.append(RatingRecord(**json.loads(line)))
    return records


def latest_ratings(records: list[RatingRecord]) -> dict[tuple[str, str, str], RatingRecord]:
    """Latest record per (rater, case, channel), by log order."""
    latest: dict[tuple[str, str, str], RatingRecord] = {}
    for record in records:
        latest[(record.rater_id, record.case_id, record.channel)] = record
    return latest


@dataclass(frozen=True)
class SummaryRow:
    rater_id: str
    channel: str
    n: int
    mean: float | None
    sd: float | None
    histogram: dict[int, int]


def summarize(records: list[RatingRecord]) -> list[SummaryRow]:
    """Per rater and channel: mean, sample SD (n >= 2), n, star histogram."""
    latest = latest_ratings(records)
    raters = sorted({r.rater_id for r in latest.values()})
    rows = []
    for rater_id in raters:
        for channel in CHANNELS:
            stars = [
                r.stars
                for (rid, _, ch), r in latest.items()
                if rid == rater_id and ch == channel
            ]
            if not stars:
                rows.append(SummaryRow(rater_id, channel, 0, None, None, {s: 0 for s in range(1, 5)}))
                continue
            _, mean, sd = summarise_values([float(s) for s in stars])
            histogram = {s: stars.count(s) for s in range(MIN_STARS, MAX_STARS + 1)}
            rows.append(SummaryRow(rater_id, channel, len(stars), mean, sd, histogram))
    return rows
