"""Batch scoring through the primary CLI.

Requests are serialized to the CLI's batch JSONL format, scored in one
subprocess invocation, and read back verbatim, so bridge results are
bit-identical to what ``avjigsaw score --batch`` prints for the same
inputs.  Set ``AVJIGSAW_CMD`` to override the default ``python -m
avjigsaw`` launcher.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

CMD_ENV = "AVJIGSAW_CMD"

_ZERO_BREAKDOWN = {
    "r_pos": 0.0, "r_cont": 0.0, "lambda": 0.2, "r_fmt": 0.0, "r_rep": 0.0,
    "r_total": 0.0, "format_ok": False, "parsed_ok": False, "perfect": False,
}


class BridgeError(Exception):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


@dataclass(frozen=True)
class BridgeScoreRequest:
    """One rollout to grade: inline ground truth or a puzzle package path."""

    response_text: str
    puzzle_ref: Optional[Union[str, Path]] = None
    truth: Optional[Sequence[int]] = None
    tag_style: Optional[str] = None
    continuity: Optional[str] = None
    request_id: Optional[str] = None

    def __post_init__(self):
        if (self.puzzle_ref is None) == (self.truth is None):
            raise BridgeError("BAD_REQUEST", "exactly one of puzzle_ref / truth required")

    def to_json_obj(self) -> dict:
        doc: dict = {"response": self.response_text}
        if self.puzzle_ref is not None:
            doc["puzzle_dir"] = str(self.puzzle_ref)
        else:
            doc["truth"] = list(self.truth)
        if self.tag_style is not None:
            doc["tag_style"] = self.tag_style
        if self.continuity is not None:
            doc["continuity"] = self.continuity
        if self.request_id is not None:
            doc["id"] = self.request_id
        return doc


def _launcher() -> List[str]:
    override = os.environ.get(CMD_ENV)
    if override:
        return shlex.split(override)
    return [sys.executable, "-m", "avjigsaw"]


def requests_jsonl(requests: Sequence[BridgeScoreRequest]) -> str:
    return "".join(json.dumps(r.to_json_obj()) + "\n" for r in requests)


def score_batch_raw(requests: Sequence[BridgeScoreRequest]) -> bytes:
    """Invoke the primary score CLI once; return its results JSONL verbatim."""
    if not requests:
        return b""
    with tempfile.TemporaryDirectory(prefix="avjigsaw_bridge_") as tmp:
        req_path = Path(tmp) / "requests.jsonl"
        out_path = Path(tmp) / "results.jsonl"
        req_path.write_text(requests_jsonl(requests), encoding="utf-8")
        cmd = _launcher() + ["score", "--batch", str(req_path), "--out", str(out_path)]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=600)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise BridgeError("BRIDGE_UNAVAILABLE", str(e)) from e
        if proc.returncode != 0:
            raise BridgeError("BRIDGE_UNAVAILABLE",
                              proc.stderr.decode(errors="replace")[:300])
        return out_path.read_bytes()


def score_batch(requests: Sequence[BridgeScoreRequest]) -> List[dict]:
    """Grade a batch; one breakdown dict per request, order preserved.

    Requests the primary could not grade (bad puzzle path, missing truth)
    come back as zero breakdowns with ``parsed_ok`` false and the error
    message attached.
    """
    raw = score_batch_raw(requests)
    results = []
    for line in raw.decode("utf-8").splitlines():
        doc = json.loads(line)
        if "error" in doc:
            merged = dict(_ZERO_BREAKDOWN)
            merged["index"] = doc.get("index")
            merged["error"] = doc["error"]
            doc = merged
        results.append(doc)
    if len(results) != len(requests):
        raise BridgeError("BRIDGE_UNAVAILABLE",
                          f"expected {len(requests)} results, got {len(results)}")
    return results


# ---------------------------------------------------------------------------
# RL-trainer reward-function convention

def compute_score_with_breakdown(data_source, solution_str: str, ground_truth,
                                 extra_info: Optional[dict] = None) -> dict:
    """Reward-function entry point; returns the full component breakdown.

    ``ground_truth`` may be a list of indices or a comma-separated string.
    For throughput, prefer batching many rollouts through ``score_batch``;
    this per-sample convention entry spawns one subprocess per call.
    """
    if isinstance(ground_truth, str):
        truth = [int(tok) for tok in ground_truth.replace(" ", "").split(",") if tok]
    else:
        truth = list(ground_truth)
    extra = extra_info or {}
    request = BridgeScoreRequest(
        response_text=solution_str, truth=truth,
        tag_style=extra.get("tag_style"), continuity=extra.get("continuity"))
    return score_batch([request])[0]


def compute_score(data_source, solution_str: str, ground_truth,
                  extra_info: Optional[dict] = None) -> float:
    """Scalar reward under the common (data_source, solution, truth) convention."""
    return float(compute_score_with_breakdown(
        data_source, solution_str, ground_truth, extra_info)["r_total"])
