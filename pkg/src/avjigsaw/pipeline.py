"""End-to-end pipeline: probe -> signal filter -> semantic screen -> build.

Stages process whatever the manifest says is eligible, so each stage is
independently runnable and a killed run resumes where it stopped.  Worker
results are appended to the manifest in sorted sample order, which together
with the fixed clock makes two identical runs byte-identical.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import media
from .builder import (build_puzzle, derive_seed, prepare_clips,
                      sample_permutation, shuffle_and_orchestrate)
from .config import PipelineConfig
from .inference import InferenceClient
from .manifest import (MANIFEST_NAME, ManifestRecord, ManifestWriter, Stage,
                       latest_stages, read_manifest)
from .package import write_puzzle_package
from .selectors import decide_dominance, select_modalities
from .semantic_screen import run_stage2 as screen_batch
from .signal_filter import run_stage1
from .types import (AvJigsawError, FilterReport, OmniSample, RejectReason,
                    Stage1Report, Strategy)
from .vad import EnergyZcrDetector, SpeechActivityDetector

log = logging.getLogger(__name__)

MEDIA_SUFFIXES = (".npz", ".mp4", ".mkv", ".mov", ".webm", ".avi")
PUZZLES_DIRNAME = "puzzles"
SCREEN_LOG_NAME = "screening_log.jsonl"

ALL_STAGES = ("probe", "filter", "screen", "build")


class PipelineError(AvJigsawError):
    pass


@dataclass
class PipelineResult:
    manifest_path: Path
    stage_counts: Dict[str, int] = field(default_factory=dict)
    deferred: int = 0
    build_failures: int = 0


def discover_inputs(input_dir) -> List[Path]:
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise PipelineError("BAD_INPUT_DIR", str(input_dir))
    files = [p for p in sorted(input_dir.rglob("*"))
             if p.is_file() and p.suffix.lower() in MEDIA_SUFFIXES]
    return files


def _source_tag(path: Path, input_dir: Path, meta_source: Optional[str]) -> str:
    if meta_source:
        return meta_source
    rel = path.relative_to(input_dir)
    return rel.parts[0] if len(rel.parts) > 1 else input_dir.name


class Pipeline:
    def __init__(self, input_dir, output_dir, config: PipelineConfig,
                 strategy: Strategy = Strategy.JMI,
                 client: Optional[InferenceClient] = None,
                 detector: Optional[SpeechActivityDetector] = None):
        self.input_dir = Path(input_dir)
        self.output_dir = Path(output_dir)
        self.config = config
        self.strategy = strategy
        self.client = client
        self.detector = detector or EnergyZcrDetector()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.output_dir / MANIFEST_NAME
        self.writer = ManifestWriter(self.manifest_path, fixed_clock=config.fixed_clock)

    # -- helpers ------------------------------------------------------------

    def _state(self) -> Dict[str, ManifestRecord]:
        if not self.manifest_path.exists():
            return {}
        return latest_stages(read_manifest(self.manifest_path))

    def _map(self, fn, items: Sequence) -> List:
        if len(items) <= 1 or self.config.workers <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(fn, items))

    def _append_sorted(self, records: List[ManifestRecord]) -> None:
        for rec in sorted(records, key=lambda r: r.sample_id):
            self.writer.append(rec)

    def _load(self, rec: ManifestRecord) -> OmniSample:
        return media.load_any(rec.source_path, ffmpeg_path=self.config.transcoder_path)

    # -- stages -------------------------------------------------------------

    def probe(self) -> int:
        state = self._state()
        pending = [p for p in discover_inputs(self.input_dir) if p.stem not in state]
        now = self.writer.now()

        def job(path: Path) -> ManifestRecord:
            try:
                meta = media.probe_media(path)
                return ManifestRecord(
                    sample_id=path.stem, source_path=str(path), stage=Stage.PROBED,
                    timestamp=now, source=_source_tag(path, self.input_dir, meta.source),
                    meta=meta)
            except media.MediaError as e:
                log.info("probe rejected %s: %s", path.name, e)
                report = FilterReport(sample_id=path.stem, stage1=Stage1Report(
                    duration_ok=False, streams_ok=False, passed=False,
                    reject_reason=RejectReason.INVALID))
                return ManifestRecord(
                    sample_id=path.stem, source_path=str(path), stage=Stage.S1_REJECT,
                    timestamp=now, source=_source_tag(path, self.input_dir, None),
                    report=report)

        records = self._map(job, pending)
        self._append_sorted(records)
        return len(records)

    def filter_stage1(self) -> Tuple[int, int]:
        state = self._state()
        eligible = sorted((r for r in state.values() if r.stage is Stage.PROBED),
                          key=lambda r: r.sample_id)
        now = self.writer.now()

        def job(rec: ManifestRecord) -> ManifestRecord:
            try:
                sample = self._load(rec)
                report = run_stage1(sample, self.config.filter, self.detector)
            except (media.MediaError, AvJigsawError) as e:
                log.warning("stage1 failed to process %s: %s", rec.sample_id, e)
                report = FilterReport(sample_id=rec.sample_id, stage1=Stage1Report(
                    duration_ok=False, streams_ok=False, passed=False,
                    reject_reason=RejectReason.INVALID))
            stage = Stage.S1_PASS if report.stage1.passed else Stage.S1_REJECT
            if stage is Stage.S1_PASS:
                media.standardize(rec.source_path, self.output_dir / "standardized",
                                  self.config.transcoder_path)
            return ManifestRecord(sample_id=rec.sample_id, source_path=rec.source_path,
                                  stage=stage, timestamp=now, source=rec.source,
                                  meta=rec.meta, report=report)

        records = self._map(job, eligible)
        self._append_sorted(records)
        return (sum(1 for r in records if r.stage is Stage.S1_PASS),
                sum(1 for r in records if r.stage is Stage.S1_REJECT))

    def screen_stage2(self) -> Tuple[int, int, int]:
        if self.client is None:
            raise PipelineError("NO_CLIENT", "semantic screening requires an endpoint client")
        state = self._state()
        eligible = sorted((r for r in state.values()
                           if r.stage in (Stage.S1_PASS, Stage.DEFERRED)),
                          key=lambda r: r.sample_id)
        samples = []
        records_in = []
        for rec in eligible:
            try:
                samples.append(self._load(rec))
                records_in.append(rec)
            except media.MediaError as e:
                log.warning("stage2 cannot load %s: %s", rec.sample_id, e)
        outcomes = screen_batch(samples, self.config.inference, self.client)
        now = self.writer.now()
        records, audit = [], []
        for rec, outcome in zip(records_in, outcomes):
            if outcome.deferred:
                stage, report = Stage.DEFERRED, rec.report
            else:
                stage = Stage.S2_PASS if outcome.retained else Stage.S2_REJECT
                stage1 = rec.report.stage1 if rec.report else None
                report = FilterReport(sample_id=rec.sample_id, stage1=stage1,
                                      stage2=outcome.report)
            records.append(ManifestRecord(
                sample_id=rec.sample_id, source_path=rec.source_path, stage=stage,
                timestamp=now, source=rec.source, meta=rec.meta, report=report))
            audit.append({
                "sample_id": rec.sample_id,
                "deferred": outcome.deferred,
                "decision": outcome.report.decision if outcome.report else None,
                "coherent": outcome.report.coherent if outcome.report else None,
                "response": outcome.raw,
                "timestamp": now,
            })
        order = sorted(range(len(records)), key=lambda i: records[i].sample_id)
        with open(self.output_dir / SCREEN_LOG_NAME, "a", encoding="utf-8") as fh:
            for i in order:
                fh.write(json.dumps(audit[i]) + "\n")
        self._append_sorted(records)
        return (sum(1 for r in records if r.stage is Stage.S2_PASS),
                sum(1 for r in records if r.stage is Stage.S2_REJECT),
                sum(1 for r in records if r.stage is Stage.DEFERRED))

    def build(self) -> Tuple[int, int]:
        state = self._state()
        eligible = sorted((r for r in state.values() if r.stage is Stage.S2_PASS),
                          key=lambda r: r.sample_id)
        now = self.writer.now()
        built_records = []
        failures = 0

        def job(rec: ManifestRecord) -> Optional[ManifestRecord]:
            try:
                sample = self._load(rec)
                puzzle = self._build_one(sample)
                rel_dir = Path(PUZZLES_DIRNAME) / rec.sample_id
                write_puzzle_package(puzzle, self.output_dir / rel_dir)
                return ManifestRecord(
                    sample_id=rec.sample_id, source_path=rec.source_path,
                    stage=Stage.BUILT, timestamp=now, source=rec.source,
                    meta=rec.meta, report=rec.report, puzzle_path=str(rel_dir))
            except (AvJigsawError, OSError) as e:
                log.warning("build failed for %s: %s", rec.sample_id, e)
                return None

        for result in self._map(job, eligible):
            if result is None:
                failures += 1
            else:
                built_records.append(result)
        self._append_sorted(built_records)
        return len(built_records), failures

    def _build_one(self, sample: OmniSample):
        cfg = self.config.build
        strategy = self.strategy
        seed = derive_seed(cfg.rng_seed, sample.id)
        if strategy is Strategy.SMS:
            if self.client is None:
                raise PipelineError("NO_CLIENT", "SMS needs a judge endpoint")
            dominance, _ = decide_dominance(sample, cfg, self.config.inference, self.client)
            return build_puzzle(sample, cfg, strategy, rng_seed=seed, dominance=dominance)
        if strategy is Strategy.CMM:
            if self.client is None:
                raise PipelineError("NO_CLIENT", "CMM needs a selector endpoint")
            clips = prepare_clips(sample, cfg)
            vector, _ = select_modalities(sample, clips, cfg, self.config.inference, self.client)
            permutation = sample_permutation(len(clips), seed)
            return shuffle_and_orchestrate(clips, permutation, strategy,
                                           sample_id=sample.id, rng_seed=seed,
                                           modality_vector=vector)
        return build_puzzle(sample, cfg, strategy, rng_seed=seed)

    # -- entry point ----------------------------------------------------------

    def run(self, stages: Sequence[str] = ALL_STAGES, resume: bool = False) -> PipelineResult:
        if "probe" in stages and self.manifest_path.exists() and not resume:
            raise PipelineError("OUTPUT_EXISTS",
                                f"{self.manifest_path} exists; pass resume=True to continue")
        result = PipelineResult(manifest_path=self.manifest_path)
        if "probe" in stages:
            result.stage_counts["probed"] = self.probe()
        if "filter" in stages:
            passed, rejected = self.filter_stage1()
            result.stage_counts["s1_pass"] = passed
            result.stage_counts["s1_reject"] = rejected
        if "screen" in stages:
            passed, rejected, deferred = self.screen_stage2()
            result.stage_counts["s2_pass"] = passed
            result.stage_counts["s2_reject"] = rejected
            result.deferred = deferred
        if "build" in stages:
            built, failures = self.build()
            result.stage_counts["built"] = built
            result.build_failures = failures
        return result


def run_pipeline(input_dir, output_dir, config: PipelineConfig,
                 strategy: Strategy = Strategy.JMI,
                 client: Optional[InferenceClient] = None,
                 detector: Optional[SpeechActivityDetector] = None,
                 stages: Sequence[str] = ALL_STAGES,
                 resume: bool = False) -> PipelineResult:
    pipe = Pipeline(input_dir, output_dir, config, strategy, client, detector)
    return pipe.run(stages=stages, resume=resume)


# ---------------------------------------------------------------------------
# statistics

_PAST_S1 = frozenset({Stage.S1_PASS, Stage.S2_PASS, Stage.S2_REJECT,
                      Stage.DEFERRED, Stage.BUILT})
_PAST_S2 = frozenset({Stage.S2_PASS, Stage.BUILT})


@dataclass
class StageCounts:
    raw: int = 0
    after_stage1: int = 0
    after_stage2: int = 0
    built: int = 0


def aggregate_stats(records: List[ManifestRecord]) -> Dict[str, StageCounts]:
    """Per-source funnel counts from the latest stage of every sample."""
    table: Dict[str, StageCounts] = {}
    for rec in latest_stages(records).values():
        tag = rec.source or "unknown"
        counts = table.setdefault(tag, StageCounts())
        counts.raw += 1
        if rec.stage in _PAST_S1:
            counts.after_stage1 += 1
        if rec.stage in _PAST_S2:
            counts.after_stage2 += 1
        if rec.stage is Stage.BUILT:
            counts.built += 1
    return dict(sorted(table.items()))


def stats_totals(table: Dict[str, StageCounts]) -> StageCounts:
    total = StageCounts()
    for counts in table.values():
        total.raw += counts.raw
        total.after_stage1 += counts.after_stage1
        total.after_stage2 += counts.after_stage2
        total.built += counts.built
    return total


def format_stats_table(table: Dict[str, StageCounts]) -> str:
    """Render the per-source funnel the way the curation statistics are reported."""
    headers = ("Source Dataset", "Raw Samples", "After Stage 1", "After Stage 2", "Built")
    rows = [(tag, f"{c.raw:,}", f"{c.after_stage1:,}", f"{c.after_stage2:,}", f"{c.built:,}")
            for tag, c in table.items()]
    total = stats_totals(table)
    rows.append(("Total", f"{total.raw:,}", f"{total.after_stage1:,}",
                 f"{total.after_stage2:,}", f"{total.built:,}"))
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(5)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
