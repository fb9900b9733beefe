"""Blinded randomized clinical-acceptability rating service."""

from .blinding import BlindedSession, create_session, session_order
from .scale import STAR_SCALE
from .store import RatingRecord, RatingStore

__all__ = [
    "BlindedSession",
    "RatingRecord",
    "RatingStore",
    "STAR_SCALE",
    "create_session",
    "session_order",
]
