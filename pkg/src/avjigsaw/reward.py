"""Composite reward for graded rollouts.

    r_total = r_rep + r_fmt + lambda * (0.5 * r_pos + 0.5 * r_cont)

with r_pos the fraction of exactly placed indices, r_cont the fraction of
position-aligned adjacent pairs preserved, lambda 1.0 only for a perfect
reordering (0.2 otherwise), r_fmt +0.2 for strict tag adherence, and r_rep
-0.5 when any 20-gram repeats more than 3 times.  All terms are computed in
a fixed order so equal inputs give bit-equal totals.
"""

from __future__ import annotations

import itertools
from collections import Counter
from typing import List, Sequence, Tuple

from .rollout import parse_rollout
from .types import AvJigsawError, PuzzleInstance, RewardBreakdown

W_POS = 0.5
W_CONT = 0.5
FORMAT_BONUS = 0.2
REPETITION_PENALTY = -0.5
LAMBDA_PERFECT = 1.0
LAMBDA_DISCOUNT = 0.2
REP_NGRAM = 20
REP_THRESHOLD = 3

CONTINUITY_MODES = ("aligned", "adjacency")


def positional_accuracy(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of positions placed exactly; wrong-length predictions score 0."""
    n = len(truth)
    if len(pred) != n or n == 0:
        return 0.0
    return sum(1 for p, t in zip(pred, truth) if p == t) / n


def continuity_accuracy(pred: Sequence[int], truth: Sequence[int],
                        mode: str = "aligned") -> float:
    """Fraction of adjacent pairs preserved; wrong-length predictions score 0.

    ``aligned`` (default) compares pair i of the prediction against pair i of
    the truth, exactly as the reward formula is written.  ``adjacency`` is the
    order-free reading: a truth pair counts if it appears as an ordered
    adjacent pair anywhere in the prediction.
    """
    if mode not in CONTINUITY_MODES:
        raise AvJigsawError("BAD_CONTINUITY_MODE", mode)
    n = len(truth)
    if len(pred) != n or n < 2:
        return 0.0
    truth_pairs = list(zip(truth, truth[1:]))
    pred_pairs = list(zip(pred, pred[1:]))
    if mode == "aligned":
        hits = sum(1 for pp, tp in zip(pred_pairs, truth_pairs) if pp == tp)
    else:
        pred_set = set(pred_pairs)
        hits = sum(1 for tp in truth_pairs if tp in pred_set)
    return hits / (n - 1)


def repetition_penalty(full_response: str, n_gram: int = REP_NGRAM,
                       threshold: int = REP_THRESHOLD) -> float:
    """-0.5 when any whitespace n-gram occurs strictly more than ``threshold`` times."""
    tokens = full_response.split()
    if len(tokens) < n_gram:
        return 0.0
    counts = Counter(tuple(tokens[i:i + n_gram]) for i in range(len(tokens) - n_gram + 1))
    return REPETITION_PENALTY if max(counts.values()) > threshold else 0.0


def total_reward(raw_response: str, truth: Sequence[int], *,
                 continuity: str = "aligned", tag_style: str = "thinking",
                 n_gram: int = REP_NGRAM, rep_threshold: int = REP_THRESHOLD) -> RewardBreakdown:
    """Grade one rollout against the ground-truth answer sequence."""
    truth = [int(t) for t in truth]
    parsed = parse_rollout(raw_response, tag_style)
    r_fmt = FORMAT_BONUS if parsed.format_ok else 0.0
    r_rep = repetition_penalty(raw_response, n_gram, rep_threshold)
    if parsed.indices is not None:
        r_pos = positional_accuracy(parsed.indices, truth)
        r_cont = continuity_accuracy(parsed.indices, truth, continuity)
        exact = parsed.indices == truth
    else:
        r_pos, r_cont, exact = 0.0, 0.0, False
    lam = LAMBDA_PERFECT if exact else LAMBDA_DISCOUNT
    r_total = r_rep + r_fmt + lam * (W_POS * r_pos + W_CONT * r_cont)
    return RewardBreakdown(
        r_pos=r_pos,
        r_cont=r_cont,
        lam=lam,
        r_fmt=r_fmt,
        r_rep=r_rep,
        r_total=r_total,
        format_ok=parsed.format_ok,
        parsed_ok=parsed.indices is not None,
        perfect=exact,
    )


def grade_rollout(raw_response: str, puzzle: PuzzleInstance,
                  **kwargs) -> RewardBreakdown:
    return total_reward(raw_response, puzzle.ground_truth, **kwargs)


def synthetic_response(indices: Sequence[int], tag_style: str = "thinking") -> str:
    """A minimal well-formatted rollout carrying the given answer."""
    tag = "thinking" if tag_style == "thinking" else "think"
    body = ", ".join(str(i) for i in indices)
    return f"<{tag}>exhaustive grading probe</{tag}><answer>{body}</answer>"


MAX_EXHAUSTIVE_N = 8


def grade_exhaustive(truth: Sequence[int],
                     continuity: str = "aligned") -> List[Tuple[Tuple[int, ...], RewardBreakdown]]:
    """Grade every possible permutation prediction against one truth.

    Enumerates all n! orderings as synthetic well-formatted responses; used
    for oracle-equivalence tests and reward-landscape inspection.
    """
    n = len(truth)
    if n > MAX_EXHAUSTIVE_N:
        raise AvJigsawError("N_TOO_LARGE", f"exhaustive grading capped at n={MAX_EXHAUSTIVE_N}")
    rows = []
    for pred in itertools.permutations(range(1, n + 1)):
        breakdown = total_reward(synthetic_response(pred), truth, continuity=continuity)
        rows.append((pred, breakdown))
    return rows
