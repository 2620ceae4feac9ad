"""Puzzle package serialization.

One directory per puzzle: ``clip_01.npz .. clip_NN.npz`` media files, a
``puzzle.json`` manifest with a fixed key order, and the rendered rollout
prompt in ``prompt.txt`` so a package is self-contained for trainers.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import media
from .prompts import render_rollout_prompt
from .types import AvJigsawError, Modality, Permutation, PuzzleInstance, SCHEMA_VERSION, Strategy

PUZZLE_JSON = "puzzle.json"
PROMPT_TXT = "prompt.txt"


class PackageError(AvJigsawError):
    pass


def clip_filename(position: int) -> str:
    return f"clip_{position:02d}.npz"


def puzzle_json_dict(puzzle: PuzzleInstance) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": puzzle.sample_id,
        "n_clips": puzzle.n_clips,
        "strategy": puzzle.strategy.value,
        "permutation": list(puzzle.permutation.forward),
        "ground_truth": puzzle.ground_truth,
    }
    if puzzle.dominance is not None:
        doc["dominance"] = puzzle.dominance.value
    if puzzle.modality_vector is not None:
        doc["modality_vector"] = [m.value for m in puzzle.modality_vector]
    doc["prompt_id"] = puzzle.prompt_id
    doc["rng_seed"] = puzzle.rng_seed
    doc["clip_meta"] = [clip.meta_dict() for clip in puzzle.shuffled_clips]
    return doc


def write_puzzle_package(puzzle: PuzzleInstance, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for pos, clip in enumerate(puzzle.shuffled_clips, start=1):
        media.save_clip(out_dir / clip_filename(pos), clip)
    doc = puzzle_json_dict(puzzle)
    (out_dir / PUZZLE_JSON).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    prompt = render_rollout_prompt(puzzle.prompt_id, puzzle.n_clips)
    (out_dir / PROMPT_TXT).write_text(prompt, encoding="utf-8")
    return out_dir


def load_puzzle_json(puzzle_dir) -> dict:
    path = Path(puzzle_dir) / PUZZLE_JSON
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise PackageError("BAD_PACKAGE", f"{path}: {e}") from e


def load_puzzle_package(puzzle_dir) -> PuzzleInstance:
    puzzle_dir = Path(puzzle_dir)
    doc = load_puzzle_json(puzzle_dir)
    clips = [media.load_clip(puzzle_dir / clip_filename(pos))
             for pos in range(1, doc["n_clips"] + 1)]
    vector = doc.get("modality_vector")
    return PuzzleInstance(
        sample_id=doc["sample_id"],
        n_clips=doc["n_clips"],
        strategy=Strategy(doc["strategy"]),
        shuffled_clips=tuple(clips),
        permutation=Permutation.from_forward(doc["permutation"]),
        prompt_id=doc["prompt_id"],
        rng_seed=doc["rng_seed"],
        dominance=Modality(doc["dominance"]) if "dominance" in doc else None,
        modality_vector=tuple(Modality(m) for m in vector) if vector is not None else None,
    )
