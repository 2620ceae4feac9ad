"""Puzzle iteration for training loops.

Reads the pipeline's append-only manifest and the on-disk puzzle packages
(puzzle.json + prompt.txt + clip files); yields prompt text with clip
placeholders plus media file references in shuffled order, ready for a
trainer's chat-template rendering.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple

_STAGE_ORDER = {"PROBED": 0, "S1_PASS": 1, "S1_REJECT": 1, "S2_PASS": 2,
                "S2_REJECT": 2, "DEFERRED": 2, "BUILT": 3}


class EmptyManifestError(Exception):
    pass


@dataclass(frozen=True)
class PuzzleRef:
    sample_id: str
    puzzle_dir: Path
    prompt_text: str
    media_refs: List[Path]
    ground_truth: List[int]
    strategy: str
    n_clips: int


def built_records(manifest_path) -> List[dict]:
    """Latest record per sample, restricted to BUILT, sorted by sample id."""
    manifest_path = Path(manifest_path)
    latest: dict = {}
    with open(manifest_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            prev = latest.get(doc["sample_id"])
            if prev is None or _STAGE_ORDER[doc["stage"]] >= _STAGE_ORDER[prev["stage"]]:
                latest[doc["sample_id"]] = doc
    built = [doc for doc in latest.values() if doc["stage"] == "BUILT"]
    return sorted(built, key=lambda d: d["sample_id"])


def train_val_split(ids: Sequence[str], split_seed: int,
                    val_fraction: float) -> Tuple[List[str], List[str]]:
    """Deterministic seeded split; val size is round(n * val_fraction)."""
    ordered = sorted(ids)
    rng = random.Random(split_seed)
    rng.shuffle(ordered)
    val_count = int(round(len(ordered) * val_fraction))
    val = sorted(ordered[:val_count])
    train = sorted(ordered[val_count:])
    return train, val


def load_puzzle_ref(root: Path, puzzle_path: str, sample_id: str) -> PuzzleRef:
    puzzle_dir = root / puzzle_path
    doc = json.loads((puzzle_dir / "puzzle.json").read_text(encoding="utf-8"))
    prompt_text = (puzzle_dir / "prompt.txt").read_text(encoding="utf-8")
    media_refs = sorted(puzzle_dir.glob("clip_*.npz")) + sorted(puzzle_dir.glob("clip_*.mp4"))
    return PuzzleRef(
        sample_id=sample_id,
        puzzle_dir=puzzle_dir,
        prompt_text=prompt_text,
        media_refs=media_refs,
        ground_truth=list(doc["ground_truth"]),
        strategy=doc["strategy"],
        n_clips=doc["n_clips"],
    )


def iterate_puzzles(manifest_path, split_seed: int, val_fraction: float,
                    split: str = "train") -> Iterator[PuzzleRef]:
    """Yield puzzle references for one side of a deterministic train/val split."""
    if split not in ("train", "val"):
        raise ValueError(f"split must be train or val, not {split!r}")
    manifest_path = Path(manifest_path)
    records = built_records(manifest_path)
    if not records:
        raise EmptyManifestError(f"no BUILT records in {manifest_path}")
    by_id = {doc["sample_id"]: doc for doc in records}
    train, val = train_val_split(list(by_id), split_seed, val_fraction)
    root = manifest_path.parent
    for sample_id in (train if split == "train" else val):
        doc = by_id[sample_id]
        yield load_puzzle_ref(root, doc["puzzle_path"], sample_id)
