"""HTTP service for blinded randomized acceptability rating.

Raters authenticate with pre-shared bearer tokens, receive cases in a
seeded random order under opaque keys, view slice renderings with
channel overlays, and submit 1-4 star ratings per channel.  No
client-visible payload ever contains a case_id or manifest metadata;
unblinded per-case detail is available only for finalized sessions.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import uvicorn
from fastapi import Depends, FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from ..nifti import load_intensity, load_label
from ..phantom import PRED_LABEL_FILE, REF_LABEL_FILE, SEQUENCE_FILES
from ..volume import CHANNELS, IntensityVolume, LabelVolume
from .blinding import BlindedSession, create_session
from .render import AXES, render_slice, slice_counts, volume_window
from .scale import MAX_STARS, MIN_STARS, STAR_SCALE
from .store import RatingRecord, RatingStore, SummaryRow, summarize, utc_now_iso

Channel = Literal["T2H", "ET", "CC"]


@dataclass
class ServiceConfig:
    cohort_root: Path
    tokens: dict[str, str]            # token -> rater_id
    ratings_log: Path
    sessions_log: Path
    seed_policy: str = "client"       # "client": seed from request; "fixed": configured seed
    fixed_seed: int = 0

    @staticmethod
    def load_tokens(path) -> dict[str, str]:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise ValueError(f"token file {path} must map token -> rater_id")
        return data


class Cohort:
    """Lazy-loading view over a cohort directory tree."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.cases: dict[str, Path] = {}
        variants = set()
        for case_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            for name, variant in ((PRED_LABEL_FILE, "pred"), (REF_LABEL_FILE, "seg")):
                if (case_dir / name).is_file():
                    self.cases[case_dir.name] = case_dir / name
                    variants.add(variant)
                    break
        if not self.cases:
            raise ValueError(f"no rateable cases under {self.root}")
        # Which segmentation variant this cohort holds (raw model output
        # vs curated labels) is recorded with every summary.
        self.variant = "+".join(sorted(variants))
        self._lock = threading.Lock()
        self._labels: dict[str, LabelVolume] = {}
        self._intensities: dict[tuple[str, str], IntensityVolume] = {}
        self._windows: dict[tuple[str, str], tuple[float, float]] = {}

    def case_ids(self) -> list[str]:
        return sorted(self.cases)

    def sequences_for(self, case_id: str) -> list[str]:
        case_dir = self.cases[case_id].parent
        return [seq for seq, fname in SEQUENCE_FILES.items() if (case_dir / fname).is_file()]

    def label(self, case_id: str) -> LabelVolume:
        with self._lock:
            if case_id not in self._labels:
                self._labels[case_id] = load_label(self.cases[case_id])
            return self._labels[case_id]

    def intensity(self, case_id: str, seq: str) -> IntensityVolume:
        key = (case_id, seq)
        with self._lock:
            if key not in self._intensities:
                path = self.cases[case_id].parent / SEQUENCE_FILES[seq]
                if not path.is_file():
                    raise KeyError(seq)
                vol = load_intensity(path, seq)
                self._intensities[key] = vol
                self._windows[key] = volume_window(vol)
            return self._intensities[key]

    def window(self, case_id: str, seq: str) -> tuple[float, float]:
        self.intensity(case_id, seq)
        with self._lock:
            return self._windows[(case_id, seq)]


class SessionRegistry:
    """Sessions plus the server-side key -> case mapping, persisted as JSONL."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.sessions: dict[str, BlindedSession] = {}
        self.key_to_case: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["type"] == "session":
                    session = BlindedSession(
                        session_id=event["session_id"],
                        rater_id=event["rater_id"],
                        seed=event["seed"],
                        keys=tuple(event["keys"]),
                        key_to_case=event["key_to_case"],
                    )
                    self._register(session)
                elif event["type"] == "finalize" and event["session_id"] in self.sessions:
                    self.sessions[event["session_id"]].finalized = True

    def _register(self, session: BlindedSession) -> None:
        self.sessions[session.session_id] = session
        self.key_to_case.update(session.key_to_case)

    def add(self, session: BlindedSession) -> None:
        event = {
            "type": "session",
            "session_id": session.session_id,
            "rater_id": session.rater_id,
            "seed": session.seed,
            "keys": list(session.keys),
            "key_to_case": session.key_to_case,
        }
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._register(session)

    def finalize(self, session_id: str) -> None:
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"type": "finalize", "session_id": session_id}) + "\n")
            self.sessions[session_id].finalized = True


class CreateSessionRequest(BaseModel):
    rater_id: str
    seed: int | None = None


class RatingRequest(BaseModel):
    session_id: str
    key: str
    channel: Channel
    stars: int = Field(ge=MIN_STARS, le=MAX_STARS)


def create_app(config: ServiceConfig) -> FastAPI:
    cohort = Cohort(config.cohort_root)
    registry = SessionRegistry(config.sessions_log)
    store = RatingStore(config.ratings_log)
    app = FastAPI(title="segmentation acceptability rating service")
    # The browser UI may be served from another origin; access control is
    # the bearer token, not the origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def authenticate(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            token = header[7:].strip()
            if token in config.tokens:
                return config.tokens[token]
        raise HTTPException(status_code=401, detail="missing or invalid token")

    def owned_session(session_id: str, rater_id: str) -> BlindedSession:
        session = registry.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if session.rater_id != rater_id:
            raise HTTPException(status_code=403, detail="session belongs to another rater")
        return session

    @app.get("/scale")
    def get_scale():
        return [
            {"stars": stars, "description": STAR_SCALE[stars]}
            for stars in sorted(STAR_SCALE)
        ]

    @app.post("/sessions")
    def post_session(body: CreateSessionRequest, rater_id: str = Depends(authenticate)):
        if body.rater_id != rater_id:
            raise HTTPException(status_code=403, detail="rater_id does not match token")
        if config.seed_policy == "fixed":
            seed = config.fixed_seed
        else:
            if body.seed is None:
                raise HTTPException(status_code=422, detail="seed required under client seed policy")
            seed = body.seed
        session = create_session(cohort.case_ids(), rater_id, seed)
        registry.add(session)
        return {
            "session_id": session.session_id,
            "rater_id": rater_id,
            "case_count": len(session.keys),
            "keys": list(session.keys),
        }

    def _rated_channels(rater_id: str, case_id: str) -> list[str]:
        rated = set()
        for record in store.records():
            if record.rater_id == rater_id and record.case_id == case_id:
                rated.add(record.channel)
        return [c for c in CHANNELS if c in rated]

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str, rater_id: str = Depends(authenticate)):
        session = owned_session(session_id, rater_id)
        total = len(session.keys)
        for index, key in enumerate(session.keys):
            case_id = session.key_to_case[key]
            rated = _rated_channels(rater_id, case_id)
            if len(rated) < len(CHANNELS):
                shape = cohort.label(case_id).geometry.shape
                return {
                    "done": False,
                    "blinded_case_key": key,
                    "index": index,
                    "total": total,
                    "remaining": sum(
                        1
                        for k in session.keys[index:]
                        if len(_rated_channels(rater_id, session.key_to_case[k])) < len(CHANNELS)
                    ),
                    "sequences": cohort.sequences_for(case_id),
                    "slice_counts": slice_counts(shape),
                    "rated_channels": rated,
                }
        return {"done": True, "total": total, "remaining": 0}

    @app.get("/cases/{key}/slice")
    def get_slice(
        key: str,
        seq: str = Query(...),
        axis: str = Query(...),
        i: int = Query(...),
        overlay: str = Query(""),
        rater_id: str = Depends(authenticate),
    ):
        case_id = registry.key_to_case.get(key)
        if case_id is None:
            raise HTTPException(status_code=404, detail="unknown case key")
        if axis not in AXES:
            raise HTTPException(status_code=422, detail=f"axis must be one of {AXES}")
        try:
            vol = cohort.intensity(case_id, seq)
        except KeyError:
            raise HTTPException(status_code=404, detail="sequence not available for this case")
        overlays = tuple(tok for tok in overlay.split(",") if tok)
        if any(tok not in CHANNELS for tok in overlays):
            raise HTTPException(status_code=422, detail=f"overlay channels must be among {CHANNELS}")
        labels = cohort.label(case_id) if overlays else None
        try:
            png = render_slice(
                vol, labels, axis, i, overlays, window=cohort.window(case_id, seq)
            )
        except IndexError:
            raise HTTPException(status_code=422, detail="slice index out of range")
        return Response(content=png, media_type="image/png")

    @app.post("/ratings")
    def post_rating(body: RatingRequest, rater_id: str = Depends(authenticate)):
        session = owned_session(body.session_id, rater_id)
        case_id = session.key_to_case.get(body.key)
        if case_id is None:
            raise HTTPException(status_code=404, detail="key not part of this session")
        record = RatingRecord(
            session_id=body.session_id,
            rater_id=rater_id,
            blinded_case_key=body.key,
            case_id=case_id,
            channel=body.channel,
            stars=body.stars,
            timestamp=utc_now_iso(),
        )
        store.append(record)
        return {"status": "recorded", "key": body.key, "channel": body.channel, "stars": body.stars}

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str, rater_id: str = Depends(authenticate)):
        owned_session(session_id, rater_id)
        registry.finalize(session_id)
        return {"session_id": session_id, "finalized": True}

    @app.get("/summary")
    def get_summary(finalized: bool = False, rater_id: str = Depends(authenticate)):
        records = store.records()
        rows = [_summary_row_payload(row) for row in summarize(records)]
        payload = {"variant": cohort.variant, "rows": rows}
        if finalized:
            finalized_ids = {s.session_id for s in registry.sessions.values() if s.finalized}
            detail = [
                {
                    "rater_id": r.rater_id,
                    "case_id": r.case_id,
                    "channel": r.channel,
                    "stars": r.stars,
                }
                for r in records
                if r.session_id in finalized_ids
            ]
            payload["cases"] = detail
        return payload

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "cases": len(cohort.cases)}

    return app


def _summary_row_payload(row: SummaryRow) -> dict:
    return {
        "rater_id": row.rater_id,
        "channel": row.channel,
        "n": row.n,
        "mean": row.mean,
        "sd": row.sd,
        "histogram": {str(k): v for k, v in row.histogram.items()},
    }


def _env(name: str, default: str | None = None) -> str | None:
    return os.environ.get(f"TUMORKIT_RATE_{name}", default)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tumorkit-rate", description="Blinded segmentation acceptability rating service."
    )
    parser.add_argument("--listen", default=_env("LISTEN", "127.0.0.1:8077"), help="host:port")
    parser.add_argument("--cohort", default=_env("COHORT"), required=_env("COHORT") is None)
    parser.add_argument("--tokens", default=_env("TOKENS"), required=_env("TOKENS") is None,
                        help="JSON file mapping token -> rater_id")
    parser.add_argument("--ratings-log", default=_env("RATINGS_LOG", "ratings.jsonl"))
    parser.add_argument("--sessions-log", default=_env("SESSIONS_LOG", "sessions.jsonl"))
    parser.add_argument("--seed-policy", choices=("client", "fixed"),
                        default=_env("SEED_POLICY", "client"))
    parser.add_argument("--fixed-seed", type=int, default=int(_env("FIXED_SEED", "0")))
    args = parser.parse_args(argv)

    host, _, port = args.listen.rpartition(":")
    config = ServiceConfig(
        cohort_root=Path(args.cohort),
        tokens=ServiceConfig.load_tokens(args.tokens),
        ratings_log=Path(args.ratings_log),
        sessions_log=Path(args.sessions_log),
        seed_policy=args.seed_policy,
        fixed_seed=args.fixed_seed,
    )
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
