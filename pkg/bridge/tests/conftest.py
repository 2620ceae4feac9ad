import itertools
import json
import random
from pathlib import Path

import pytest

# Documented puzzle-package schema (puzzle.json keys) written directly; the
# bridge consumes packages only through this published format.


def write_fake_puzzle(tmp_dir: Path, sample_id: str, ground_truth, strategy="JMI"):
    n = len(ground_truth)
    puzzle_dir = tmp_dir / sample_id
    puzzle_dir.mkdir(parents=True)
    inverse = [0] * n
    for i, j in enumerate(ground_truth, start=1):
        inverse[j - 1] = i
    doc = {
        "schema_version": 1,
        "sample_id": sample_id,
        "n_clips": n,
        "strategy": strategy,
        "permutation": list(ground_truth),
        "ground_truth": list(ground_truth),
        "prompt_id": "jmi_rollout",
        "rng_seed": 7,
        "clip_meta": [
            {"orig_index": inverse[j], "duration_s": 2.0, "n_frames": 4,
             "video_present": True, "audio_present": True}
            for j in range(n)
        ],
    }
    (puzzle_dir / "puzzle.json").write_text(json.dumps(doc, indent=2) + "\n")
    (puzzle_dir / "prompt.txt").write_text(f"prompt for {sample_id}\n")
    for pos in range(1, n + 1):
        (puzzle_dir / f"clip_{pos:02d}.npz").write_bytes(b"")
    return puzzle_dir


def rollout_fixture_set(puzzle_dir: Path):
    """50 varied rollouts: perfect, partial, malformed, repetitive, errored."""
    from avjigsaw_bridge import BridgeScoreRequest

    truth = [2, 3, 1, 4, 6, 5]
    rng = random.Random(123)
    requests = []
    perms = list(itertools.permutations(range(1, 7)))
    for i in range(30):
        pred = list(rng.choice(perms))
        text = ", ".join(map(str, pred))
        requests.append(BridgeScoreRequest(
            response_text=f"<thinking>attempt {i}</thinking><answer>{text}</answer>",
            truth=truth))
    requests.append(BridgeScoreRequest(
        response_text="<thinking>t</thinking><answer>2, 3, 1, 4, 6, 5</answer>",
        truth=truth))
    phrase = " ".join(f"w{k}" for k in range(20))
    requests.append(BridgeScoreRequest(
        response_text=f"<thinking> {' '.join([phrase] * 5)} </thinking>"
                      "<answer>2, 3, 1, 4, 6, 5</answer>",
        truth=truth))
    malformed = [
        "2, 3, 1, 4, 6, 5",
        "<answer>2, 3, 1, 4, 6, 5</answer>",
        "<thinking>t</thinking><answer>two, three</answer>",
        "<answer>1</answer><thinking>x</thinking>",
        "<thinking>t</thinking><answer></answer>",
        "",
        "<thinking>t</thinking><answer>1, 2, 3</answer>",
        "<think>alias style</think><answer>5, 6, 4, 1, 3, 2</answer>",
    ]
    for text in malformed:
        requests.append(BridgeScoreRequest(response_text=text, truth=truth))
    for i in range(8):
        pred = list(rng.choice(perms))
        text = ", ".join(map(str, pred))
        requests.append(BridgeScoreRequest(
            response_text=f"<thinking>pkg {i}</thinking><answer>{text}</answer>",
            puzzle_ref=puzzle_dir))
    requests.append(BridgeScoreRequest(
        response_text="<thinking>t</thinking><answer>1, 2</answer>",
        truth=[1, 2], continuity="adjacency", tag_style="think"))
    requests.append(BridgeScoreRequest(
        response_text="<thinking>t</thinking><answer>9, 9, 9, 9, 9, 9</answer>",
        puzzle_ref=puzzle_dir / "does_not_exist"))  # per-item error path
    assert len(requests) == 50
    return requests


@pytest.fixture
def fake_puzzle(tmp_path):
    return write_fake_puzzle(tmp_path, "pz_a", [3, 1, 2, 6, 5, 4])
