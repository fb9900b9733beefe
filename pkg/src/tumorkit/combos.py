"""MRI sequence-combination study: canonical names and the built-in preset."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .volume import SEQUENCES

# Canonical ordering of sequence tokens inside a combo name.
_SEQUENCE_RANK = {seq: i for i, seq in enumerate(SEQUENCES)}
_ALIASES = {"T1C": "T1-C", "T1GD": "T1-C", "T2-FLAIR": "FLAIR"}


def parse_combo(text: str) -> tuple[str, ...]:
    """Split a '+'-separated combo string into validated sequence tags."""
    tokens = [tok.strip().upper() for tok in text.split("+")]
    sequences = []
    for tok in tokens:
        tok = _ALIASES.get(tok, tok)
        if tok not in SEQUENCES:
            raise ValueError(f"unknown sequence {tok!r} in combo {text!r}; valid: {SEQUENCES}")
        if tok not in sequences:
            sequences.append(tok)
    if not sequences:
        raise ValueError("combo must name at least one sequence")
    return tuple(sorted(sequences, key=_SEQUENCE_RANK.__getitem__))


def canonical_combo_name(combo) -> str:
    """'+'-joined sequence list in canonical order; idempotent."""
    sequences = parse_combo(combo) if isinstance(combo, str) else parse_combo("+".join(combo))
    return "+".join(sequences)


@dataclass(frozen=True)
class ComboSpec:
    name: str
    sequences: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "ComboSpec":
        sequences = parse_combo(text)
        return cls(name="+".join(sequences), sequences=sequences)


# The thirteen studied input combinations, in study order: the full
# protocol, each sequence alone, then the multi-sequence subsets.
PRESET_COMBOS = tuple(
    ComboSpec.parse(text)
    for text in (
        "T1-C+T1+T2+FLAIR",
        "T1-C",
        "T1",
        "T2",
        "FLAIR",
        "T1-C+T1+T2",
        "T1-C+T2+FLAIR",
        "T1-C+T1",
        "T1-C+T2",
        "T1+T2",
        "T1+FLAIR",
        "T1-C+FLAIR",
        "T2+FLAIR",
    )
)
_PRESET_RANK = {combo.name: i for i, combo in enumerate(PRESET_COMBOS)}


def combo_sort_key(name: str):
    """Preset combos keep study order; any extras follow alphabetically."""
    return (_PRESET_RANK.get(name, len(_PRESET_RANK)), name)


@dataclass(frozen=True)
class ComboStudy:
    """Study manifest: reference tree, manifest path, combo -> prediction tree."""

    ref_dir: Path
    manifest_path: Path | None
    combo_dirs: dict[str, Path]

    @classmethod
    def from_json(cls, path) -> "ComboStudy":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        for key in ("ref", "combos"):
            if key not in data:
                raise ValueError(f"combo study file missing {key!r}")
        base = path.parent
        combo_dirs = {}
        for raw_name, pred_dir in data["combos"].items():
            name = canonical_combo_name(raw_name)
            if name in combo_dirs:
                raise ValueError(f"duplicate combo {raw_name!r} (canonical {name!r})")
            combo_dirs[name] = base / pred_dir
        manifest = (base / data["manifest"]) if data.get("manifest") else None
        return cls(ref_dir=base / data["ref"], manifest_path=manifest, combo_dirs=combo_dirs)
