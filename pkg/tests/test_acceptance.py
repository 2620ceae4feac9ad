"""Acceptance suite: one test per acceptance criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.  Expected values come from independent oracles implemented
here (brute-force reward formula, span arithmetic, fixture design), never
from the code paths under test.
"""

import itertools
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from avjigsaw.builder import (build_puzzle, prepare_clips, sample_permutation,
                              shuffle_and_orchestrate)
from avjigsaw.config import BuildConfig, FilterConfig, PipelineConfig
from avjigsaw.fixtures import gen_fixtures
from avjigsaw.inference import MockInferenceClient
from avjigsaw.manifest import MANIFEST_NAME, Stage, latest_stages, read_manifest
from avjigsaw.media import MediaError, load_sample, probe_media
from avjigsaw.pipeline import run_pipeline
from avjigsaw.reward import grade_exhaustive, synthetic_response, total_reward
from avjigsaw.rollout import RolloutParseError, check_format, parse_index_sequence
from avjigsaw.selectors import (SelectorParseError, parse_dominance_answer,
                                parse_modality_vector)
from avjigsaw.semantic_screen import parse_verdict
from avjigsaw.signal_filter import run_stage1
from avjigsaw.types import Modality, RejectReason, Strategy
from avjigsaw.vad import EnergyZcrDetector
from conftest import synth_sample


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


# ---------------------------------------------------------------------------
# 1. reward oracle equivalence

def brute_force_reward(pred, truth):
    """Independent evaluation of the composite reward for a well-formatted,
    non-repetitive synthetic rollout."""
    n = len(truth)
    matches = 0
    for i in range(n):
        if pred[i] == truth[i]:
            matches += 1
    r_pos = matches / n
    pair_hits = 0
    for i in range(n - 1):
        if (pred[i], pred[i + 1]) == (truth[i], truth[i + 1]):
            pair_hits += 1
    r_cont = pair_hits / (n - 1)
    lam = 1.0 if tuple(pred) == tuple(truth) else 0.2
    r_rep = 0.0
    r_fmt = 0.2
    total = r_rep + r_fmt + lam * (0.5 * r_pos + 0.5 * r_cont)
    return r_pos, r_cont, lam, total


def test_reward_oracle_equivalence():
    with criterion("reward oracle equivalence (N=2..6, bit-exact, <5s)"):
        start = time.monotonic()
        cases = 0
        for n in range(2, 7):
            truth = list(sample_permutation(n, rng_seed=n).forward)
            for pred, breakdown in grade_exhaustive(truth):
                r_pos, r_cont, lam, total = brute_force_reward(list(pred), truth)
                assert breakdown.r_pos == r_pos
                assert breakdown.r_cont == r_cont
                assert breakdown.lam == lam
                assert breakdown.r_fmt == 0.2 and breakdown.r_rep == 0.0
                assert breakdown.r_total == total
                cases += 1
        elapsed = time.monotonic() - start
        assert cases == 2 + 6 + 24 + 120 + 720
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. paper constants

def test_reward_constants():
    with criterion("reward constants (perfect=1.2, untagged=0, imperfect<=0.4)"):
        truth = [2, 3, 1, 4, 6, 5]
        perfect = total_reward("<thinking>reasoned</thinking><answer>2, 3, 1, 4, 6, 5</answer>", truth)
        assert perfect.r_total == 1.2
        untagged = total_reward("2, 3, 1, 4, 6, 5", truth)
        assert untagged.r_total == 0.0
        for pred in itertools.permutations(range(1, 7)):
            if list(pred) == truth:
                continue
            b = total_reward(synthetic_response(pred), truth)
            assert b.r_total <= 0.4


# ---------------------------------------------------------------------------
# 3. reassembly invariant

def _assert_masks(puzzle, strategy, dominance, vector):
    for j, clip in enumerate(puzzle.shuffled_clips, start=1):
        orig = puzzle.permutation.inverse[j - 1]
        assert clip.orig_index == orig
        if strategy is Strategy.JMI:
            want = Modality.VA
        elif strategy is Strategy.VIDEO:
            want = Modality.V
        elif strategy is Strategy.AUDIO:
            want = Modality.A
        elif strategy is Strategy.SMS:
            want = dominance
        else:
            want = vector[orig - 1]
        assert clip.video_present == (want in (Modality.V, Modality.VA))
        assert clip.audio_present == (want in (Modality.A, Modality.VA))
        if not clip.video_present:
            assert len(clip.frames) == 0
        if not clip.audio_present:
            assert len(clip.audio) == 0 or not np.any(clip.audio)


def test_reassembly_invariant():
    with criterion("reassembly invariant (100 puzzles x 5 strategies, <60s)"):
        start = time.monotonic()
        rng = np.random.default_rng(2024)
        samples = {n: synth_sample(f"n{n}", duration_s=3.0 * n, seed=n)
                   for n in range(2, 9)}
        clip_cache = {n: prepare_clips(samples[n], BuildConfig(n_clips=n))
                      for n in range(2, 9)}
        for strategy in Strategy:
            for i in range(100):
                n = 2 + (i % 7)
                clips = clip_cache[n]
                perm = sample_permutation(n, rng_seed=i * 31 + n)
                dominance = Modality.V if i % 2 == 0 else Modality.A
                vector = [(Modality.V, Modality.A, Modality.VA)[k]
                          for k in rng.integers(0, 3, size=n)]
                kwargs = {}
                if strategy is Strategy.SMS:
                    kwargs["dominance"] = dominance
                if strategy is Strategy.CMM:
                    kwargs["modality_vector"] = vector
                puzzle = shuffle_and_orchestrate(
                    clips, perm, strategy, sample_id=f"n{n}", rng_seed=i, **kwargs)
                restored = [puzzle.shuffled_clips[j - 1].orig_index
                            for j in puzzle.ground_truth]
                assert restored == list(range(1, n + 1))
                _assert_masks(puzzle, strategy, dominance, vector)
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 4. filter branch coverage

def test_filter_branch_coverage(tmp_path):
    with criterion("filter branch coverage (every reject branch, pipeline <5min)"):
        start = time.monotonic()
        corpus = tmp_path / "corpus"
        labels = gen_fixtures(corpus, seed=7)
        assert len(labels) == 20

        covered = set()
        cfg = FilterConfig()
        detector = EnergyZcrDetector()
        for lab in labels:
            path = corpus / lab.file
            try:
                probe_media(path)
            except MediaError:
                assert lab.expected_reason is RejectReason.INVALID
                covered.add(RejectReason.INVALID)
                continue
            report = run_stage1(load_sample(path), cfg, detector).stage1
            if lab.expected_stage1_pass:
                assert report.passed, f"{lab.fixture_id} unexpectedly rejected"
            else:
                assert report.reject_reason is lab.expected_reason, lab.fixture_id
                covered.add(report.reject_reason)
        required = {RejectReason.TOO_LONG, RejectReason.MISSING_STREAM,
                    RejectReason.STATIC_VIDEO, RejectReason.SILENCE,
                    RejectReason.LOW_FLUX, RejectReason.VAD_OUT_OF_BOUNDS,
                    RejectReason.INVALID}
        assert required <= covered

        out = tmp_path / "out"
        result = run_pipeline(corpus, out, PipelineConfig(),
                              strategy=Strategy.JMI, client=MockInferenceClient("pass"))
        latest = latest_stages(read_manifest(result.manifest_path))
        built = sorted(r.sample_id for r in latest.values() if r.stage is Stage.BUILT)
        designed = sorted(l.fixture_id for l in labels if l.expected_stage1_pass)
        assert built == designed
        elapsed = time.monotonic() - start
        assert elapsed < 300.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 5. parser golden tests

ADVERSARIAL = [
    # format violations
    "",
    "2, 3, 1, 4, 6, 5",
    "<answer>1, 2</answer><thinking>late</thinking>",
    "<thinking>only reasoning</thinking>",
    "<answer>1, 2</answer>",
    "<thinking>a</thinking><answer>1</answer><answer>2</answer>",
    "<thinking>a</thinking><thinking>b</thinking><answer>1</answer>",
    "<thinking>a</think><answer>1</answer>",
    "prefix <thinking>a</thinking><answer>1, 2</answer>",
    "<thinking>a</thinking><answer>1, 2</answer> suffix",
    # index sequence violations
    "<thinking>a</thinking><answer>2, three, 1</answer>",
    "<thinking>a</thinking><answer>2.5, 3</answer>",
    "<thinking>a</thinking><answer></answer>",
    "<thinking>a</thinking><answer>The order is 2, 3, 1</answer>",
    "<thinking>a</thinking><answer>1; 2; 3</answer>",
    # judge / selector violations
    "<answer>VA</answer>",
    "<answer></answer>",
    '<answer>{"modalities": ["V","A"]}</answer>',       # wrong length for n=6
    '<answer>{"modalities": ["V","X","A","V","A","V"]}</answer>',
    "<answer>not json at all</answer>",
]


def _fails_closed(raw: str) -> bool:
    fmt_ok = check_format(raw).ok
    idx_ok = True
    try:
        block = raw.split("<answer>")[1].split("</answer>")[0] if "<answer>" in raw else None
        if block is None:
            idx_ok = False
        else:
            parse_index_sequence(block)
    except (RolloutParseError, IndexError):
        idx_ok = False
    dom_ok = True
    try:
        parse_dominance_answer(raw)
    except SelectorParseError:
        dom_ok = False
    vec_ok = True
    try:
        parse_modality_vector(raw, 6)
    except SelectorParseError:
        vec_ok = False
    verdict_ok = parse_verdict(raw).retained
    well_formed_reward = total_reward(raw, [2, 3, 1, 4, 6, 5])
    # a malformed string must not earn the format bonus or a perfect score
    return not (fmt_ok and idx_ok) and not dom_ok and not vec_ok \
        and not verdict_ok and well_formed_reward.r_total < 1.2


def test_parser_goldens():
    with criterion("parser goldens + 20 adversarial fail-closed"):
        # documented answer-format examples
        assert parse_index_sequence("2, 3, 1, 4, 6, 5") == [2, 3, 1, 4, 6, 5]
        vec = parse_modality_vector(
            '<answer>{"modalities": ["V", "A", "VA", "V", "A", "V"]}</answer>', 6)
        assert vec == [Modality.V, Modality.A, Modality.VA,
                       Modality.V, Modality.A, Modality.V]
        assert parse_dominance_answer("<answer>V</answer>") is Modality.V
        assert parse_dominance_answer("<answer>A</answer>") is Modality.A
        ok, _, answer = check_format("<thinking>x</thinking><answer>1, 2</answer>")
        assert ok and answer == "1, 2"
        verdict = parse_verdict(
            "<think>clear causal cooking progression shown</think><answer>YES</answer>")
        assert verdict.retained

        assert len(ADVERSARIAL) == 20
        for raw in ADVERSARIAL:
            assert _fails_closed(raw), f"adversarial input not closed: {raw!r}"


# ---------------------------------------------------------------------------
# 6. determinism

def test_pipeline_determinism(tmp_path):
    with criterion("byte-identical manifests and puzzle.json across runs"):
        corpus_a = tmp_path / "corpus_a"
        corpus_b = tmp_path / "corpus_b"
        gen_fixtures(corpus_a, seed=5)
        gen_fixtures(corpus_b, seed=5)
        files_a = sorted(p.name for p in corpus_a.iterdir())
        assert files_a == sorted(p.name for p in corpus_b.iterdir())
        for name in files_a:
            assert (corpus_a / name).read_bytes() == (corpus_b / name).read_bytes()

        outs = []
        for run_dir in ("out1", "out2"):
            out = tmp_path / run_dir
            run_pipeline(corpus_a, out, PipelineConfig(), strategy=Strategy.CMM,
                         client=MockInferenceClient("pass"))
            outs.append(out)
        m1 = (outs[0] / MANIFEST_NAME).read_bytes()
        m2 = (outs[1] / MANIFEST_NAME).read_bytes()
        assert m1 == m2
        puzzles = sorted(p.name for p in (outs[0] / "puzzles").iterdir())
        assert puzzles == sorted(p.name for p in (outs[1] / "puzzles").iterdir())
        for name in puzzles:
            j1 = (outs[0] / "puzzles" / name / "puzzle.json").read_bytes()
            j2 = (outs[1] / "puzzles" / name / "puzzle.json").read_bytes()
            assert j1 == j2


# ---------------------------------------------------------------------------
# 7. preprocessing constants

def test_preprocessing_constants():
    with criterion("preprocessing constants on 50 random synthetic samples"):
        rng = np.random.default_rng(99)
        sizes = [(72, 96), (100, 100), (224, 448), (360, 640)]
        cfg = BuildConfig()
        for i in range(50):
            duration = float(rng.uniform(12.0, 40.0))
            height, width = sizes[int(rng.integers(0, len(sizes)))]
            fps = float(rng.choice([2.0, 4.0]))
            sample = synth_sample(f"r{i}", duration, fps=fps,
                                  height=height, width=width, seed=1000 + i)
            puzzle = build_puzzle(sample, cfg, Strategy.JMI)

            durations = {c.duration for c in puzzle.shuffled_clips}
            assert len(durations) == 1  # uniform, well within one frame period

            span = duration / cfg.n_clips
            want_dur = span * (1.0 - 2.0 * cfg.trim_ratio)
            got_dur = puzzle.shuffled_clips[0].duration
            assert abs(got_dur - want_dur) <= 1.0 / fps

            audio16 = sample.audio  # fixtures are generated at 16 kHz already
            for clip in puzzle.shuffled_clips:
                assert cfg.min_frames <= len(clip.frames) <= cfg.max_frames
                h, w = clip.frames.shape[1:3]
                assert w % cfg.patch == 0 and h % cfg.patch == 0
                assert w * h <= cfg.pixel_budget
                # 5% trimmed from each boundary: audio starts at (k*span + 0.05*span)
                k = clip.orig_index - 1
                start = int(round((k * span + cfg.trim_ratio * span) * 16000))
                assert np.array_equal(clip.audio,
                                      audio16[start: start + len(clip.audio)])
