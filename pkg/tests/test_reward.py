import pytest
from hypothesis import given, settings, strategies as st

from avjigsaw.reward import (MAX_EXHAUSTIVE_N, continuity_accuracy, grade_exhaustive,
                             positional_accuracy, repetition_penalty,
                             synthetic_response, total_reward)
from avjigsaw.types import AvJigsawError


# ---------------------------------------------------------------------------
# oracles

def pos_oracle(pred, truth):
    if len(pred) != len(truth):
        return 0.0
    return sum(1 for i in range(len(truth)) if pred[i] == truth[i]) / len(truth)


def cont_oracle(pred, truth):
    if len(pred) != len(truth) or len(truth) < 2:
        return 0.0
    hits = 0
    for i in range(len(truth) - 1):
        if (pred[i], pred[i + 1]) == (truth[i], truth[i + 1]):
            hits += 1
    return hits / (len(truth) - 1)


def rep_oracle(text, n=20, threshold=3):
    tokens = text.split()
    if len(tokens) < n:
        return 0.0
    for i in range(len(tokens) - n + 1):
        gram = tokens[i:i + n]
        count = 0
        for j in range(len(tokens) - n + 1):
            if tokens[j:j + n] == gram:
                count += 1
        if count > threshold:
            return -0.5
    return 0.0


def eq6_oracle(pred, truth, format_ok=True, repetition=False):
    """Direct evaluation of the composite reward formula."""
    r_rep = -0.5 if repetition else 0.0
    r_fmt = 0.2 if format_ok else 0.0
    r_pos = pos_oracle(pred, truth)
    r_cont = cont_oracle(pred, truth)
    lam = 1.0 if list(pred) == list(truth) else 0.2
    return r_rep + r_fmt + lam * (0.5 * r_pos + 0.5 * r_cont)


# ---------------------------------------------------------------------------
# component operations

class TestPositionalAccuracy:
    def test_perfect_match(self):
        assert positional_accuracy([2, 3, 1, 4, 6, 5], [2, 3, 1, 4, 6, 5]) == 1.0

    def test_four_of_six(self):
        truth = [1, 2, 3, 4, 5, 6]
        pred = [1, 2, 3, 5, 4, 6]
        assert pos_oracle(pred, truth) == 4 / 6
        assert positional_accuracy(pred, truth) == 4 / 6

    def test_wrong_length_scores_zero(self):
        assert positional_accuracy([2, 3, 1], [1, 2, 3, 4, 5, 6]) == 0.0

    @given(st.lists(st.integers(1, 9), min_size=2, max_size=9),
           st.lists(st.integers(1, 9), min_size=2, max_size=9))
    def test_matches_oracle(self, pred, truth):
        assert positional_accuracy(pred, truth) == pos_oracle(pred, truth)

    @given(st.permutations(list(range(1, 7))), st.integers(0, 5))
    def test_flip_to_correct_never_decreases(self, pred, i):
        truth = list(range(1, 7))
        fixed = list(pred)
        fixed[i] = truth[i]
        assert positional_accuracy(fixed, truth) >= positional_accuracy(list(pred), truth)


class TestContinuityAccuracy:
    def test_perfect_match(self):
        assert continuity_accuracy([3, 1, 2], [3, 1, 2]) == 1.0

    def test_two_of_five_pairs(self):
        truth = [1, 2, 3, 4, 5, 6]
        pred = [1, 2, 3, 5, 4, 6]
        # pairs (1,2),(2,3) align; (3,5),(5,4),(4,6) do not
        assert cont_oracle(pred, truth) == 2 / 5
        assert continuity_accuracy(pred, truth) == 2 / 5

    def test_rotation_scores_zero_aligned(self):
        truth = [1, 2, 3, 4, 5, 6]
        pred = [2, 3, 4, 5, 6, 1]
        assert continuity_accuracy(pred, truth) == 0.0

    def test_rotation_scores_high_in_adjacency_mode(self):
        truth = [1, 2, 3, 4, 5, 6]
        pred = [2, 3, 4, 5, 6, 1]
        # pairs (2,3),(3,4),(4,5),(5,6) appear in pred; (1,2) does not
        assert continuity_accuracy(pred, truth, mode="adjacency") == 4 / 5

    def test_bad_mode_rejected(self):
        with pytest.raises(AvJigsawError):
            continuity_accuracy([1, 2], [1, 2], mode="fuzzy")

    @given(st.lists(st.integers(1, 8), min_size=2, max_size=8),
           st.lists(st.integers(1, 8), min_size=2, max_size=8))
    def test_matches_oracle(self, pred, truth):
        assert continuity_accuracy(pred, truth) == cont_oracle(pred, truth)


class TestRepetitionPenalty:
    def test_empty_response(self):
        assert repetition_penalty("") == 0.0

    def test_short_response(self):
        assert repetition_penalty("only a few tokens here") == 0.0

    def test_phrase_repeated_four_times_penalized(self):
        phrase = " ".join(f"w{i}" for i in range(20))
        text = " ".join([phrase] * 4)
        assert rep_oracle(text) == -0.5
        assert repetition_penalty(text) == -0.5

    def test_three_repeats_is_exactly_at_threshold(self):
        phrase = " ".join(f"w{i}" for i in range(20))
        text = " ".join([phrase] * 3)
        assert rep_oracle(text) == 0.0
        assert repetition_penalty(text) == 0.0

    def test_matches_sliding_window_oracle_on_mixed_text(self):
        text = " ".join(["alpha beta"] * 45)
        assert repetition_penalty(text) == rep_oracle(text)


# ---------------------------------------------------------------------------
# composite reward

class TestTotalReward:
    def test_perfect_formatted_rollout_scores_1_2(self):
        truth = [2, 3, 1, 4, 6, 5]
        b = total_reward("<thinking>ok</thinking><answer>2, 3, 1, 4, 6, 5</answer>", truth)
        assert b.r_total == 1.2
        assert b.perfect and b.format_ok and b.parsed_ok and b.lam == 1.0

    def test_partial_credit_example(self):
        truth = [1, 2, 3, 4, 5, 6]
        raw = "<thinking>ok</thinking><answer>1, 2, 3, 5, 4, 6</answer>"
        b = total_reward(raw, truth)
        expected = 0.2 + 0.2 * (0.5 * (4 / 6) + 0.5 * (2 / 5))
        assert abs(b.r_total - expected) < 1e-9
        assert abs(b.r_total - 0.30667) < 1e-4
        assert b.lam == 0.2

    def test_correct_answer_without_tags_scores_zero(self):
        b = total_reward("2, 3, 1, 4, 6, 5", [2, 3, 1, 4, 6, 5])
        assert b.r_total == 0.0
        assert not b.format_ok and not b.parsed_ok and not b.perfect

    def test_accounting_identity_holds_exactly(self):
        truth = [3, 1, 2, 4]
        for raw in ("<thinking>t</thinking><answer>3, 1, 2, 4</answer>",
                    "<thinking>t</thinking><answer>1, 2, 3, 4</answer>",
                    "<answer>3, 1</answer>", "junk"):
            b = total_reward(raw, truth)
            assert b.r_total == b.r_rep + b.r_fmt + b.lam * (0.5 * b.r_pos + 0.5 * b.r_cont)

    def test_perfect_equivalences(self):
        truth = [2, 1, 3]
        perfect = total_reward(synthetic_response([2, 1, 3]), truth)
        assert perfect.r_pos == 1.0 and perfect.r_cont == 1.0 and perfect.lam == 1.0
        imperfect = total_reward(synthetic_response([1, 2, 3]), truth)
        assert imperfect.lam == 0.2 and not imperfect.perfect

    def test_repetition_applies_to_full_response(self):
        phrase = " ".join(f"w{i}" for i in range(20))
        raw = f"<thinking> {' '.join([phrase] * 4)} </thinking><answer>1, 2</answer>"
        b = total_reward(raw, [1, 2])
        assert b.r_rep == -0.5
        assert b.r_total == -0.5 + 0.2 + 1.0 * (0.5 + 0.5)

    def test_think_alias_still_formatted(self):
        b = total_reward("<think>t</think><answer>1, 2</answer>", [1, 2])
        assert b.format_ok and b.r_total == 1.2

    @given(st.text(max_size=200))
    @settings(max_examples=80, deadline=None)
    def test_total_always_defined_and_bounded(self, raw):
        b = total_reward(raw, [1, 2, 3])
        assert -0.5 <= b.r_total <= 1.2
        assert b.r_total == b.r_rep + b.r_fmt + b.lam * (0.5 * b.r_pos + 0.5 * b.r_cont)


class TestGradeExhaustive:
    def test_n3_unique_perfect(self):
        rows = grade_exhaustive([1, 2, 3])
        assert len(rows) == 6
        assert sum(1 for _, b in rows if b.lam == 1.0) == 1

    def test_n2_reward_set(self):
        rows = dict(grade_exhaustive([1, 2]))
        assert rows[(1, 2)].r_total == 1.2
        # the non-identity prediction scores r_pos=0, r_cont=0
        assert rows[(2, 1)].r_total == 0.2

    def test_n6_landscape(self):
        rows = grade_exhaustive([2, 3, 1, 4, 6, 5])
        assert len(rows) == 720
        totals = sorted((b.r_total for _, b in rows), reverse=True)
        assert totals[0] == 1.2
        assert totals[1] <= 0.4

    def test_discount_gap_bound(self):
        for truth in ([1, 2, 3, 4], [4, 3, 2, 1], [2, 4, 1, 3]):
            for pred, b in grade_exhaustive(truth):
                if not b.perfect:
                    assert b.r_total <= 0.4

    def test_matches_direct_formula_bit_exact(self):
        truth = [3, 1, 4, 2]
        for pred, b in grade_exhaustive(truth):
            assert b.r_total == eq6_oracle(list(pred), truth)

    def test_n_too_large(self):
        with pytest.raises(AvJigsawError):
            grade_exhaustive(list(range(1, MAX_EXHAUSTIVE_N + 2)))
