"""Blinded case keys and seeded session orderings.

A blinded key is a keyed hash of (seed, case_id): opaque to the rater,
stable for a given seed so identical (seed, cohort) pairs produce
identical sessions, and resolvable back to the case only through the
server-side mapping.
"""

from __future__ import annotations

import hashlib
import uuid
from dataclasses import dataclass

from ..rng import SplitMix64


def blinded_key(seed: int, case_id: str) -> str:
    digest = hashlib.blake2b(f"{seed}:{case_id}".encode("utf-8"), digest_size=8)
    return digest.hexdigest()


def session_order(seed: int, case_ids) -> list[str]:
    """Deterministic seeded permutation of the case set."""
    ordered = sorted(case_ids)
    SplitMix64(seed).shuffle(ordered)
    return ordered


@dataclass
class BlindedSession:
    session_id: str
    rater_id: str
    seed: int
    keys: tuple[str, ...]
    key_to_case: dict[str, str]   # server-side only, never serialized to clients
    finalized: bool = False


def create_session(case_ids, rater_id: str, seed: int) -> BlindedSession:
    """Seeded blinded session over a cohort; empty cohorts are an error."""
    case_ids = list(case_ids)
    if not case_ids:
        raise ValueError("cannot create a session over an empty cohort")
    order = session_order(seed, case_ids)
    keys = tuple(blinded_key(seed, case_id) for case_id in order)
    if len(set(keys)) != len(keys):
        raise RuntimeError("blinded key collision; change the seed")
    return BlindedSession(
        session_id=uuid.uuid4().hex,
        rater_id=rater_id,
        seed=seed,
        keys=keys,
        key_to_case=dict(zip(keys, order)),
    )
