"""End-to-end run orchestration and artifact persistence.

Stage order: ingest -> extract -> evolve -> summarize -> evaluate.  The
extract and evolve stages only run when the pattern-guided system (nsg) is
requested.  Every artifact is written atomically in a canonical JSON form
(sorted keys, fixed indentation, UTF-8) so reruns with the same seed are
byte-identical; wall-clock timings go to the log, never into artifacts.

Resume reuses whatever per-fragment artifacts already exist in the output
directory: finished pools and summaries are loaded back, interrupted
evolution continues from its checkpoint, and only the missing pieces are
recomputed.
"""
from __future__ import annotations

import json
import logging
import os
import time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .baselines import baseline_textrank_summary, baseline_tfidf_summary, corpus_term_stats
from .config import ConfigError, PipelineConfig, config_snapshot
from .corpus import Corpus, CorpusError, NewsFragment, load_corpus
from .event_model import (
    PatternPool,
    build_pool,
    pool_from_dict,
    pool_to_dict,
    serialize_pattern,
)
from .evolution import EvolutionResult, evolve, resume_evolution
from .fitness import combined_fitness, compute_role_stats
from .gateway import (
    CompletionClient,
    GatewayError,
    GenerationParams,
    MockCompletionClient,
    NoValidPatterns,
    RemoteCompletionClient,
    SummaryRecord,
    extract_patterns,
    generate_digest,
    generate_summary,
    generate_summary_direct,
    summary_record_from_dict,
)
from .metrics import EvaluationReport, evaluate

logger = logging.getLogger(__name__)

STAGES = ("ingest", "extract", "evolve", "summarize", "evaluate")
SKIPPED_MARKER = "_skipped.json"


class StageFailure(Exception):
    """A pipeline stage could not produce its artifact."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class PipelineResult:
    corpus: Corpus | None = None
    pools: dict[str, PatternPool] | None = None
    evolved: dict[str, EvolutionResult] | None = None
    records: list[SummaryRecord] | None = None
    report: EvaluationReport | None = None
    manifest: dict | None = None
    skipped: tuple[str, ...] = ()


def canonical_json(payload: object) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, data: str) -> None:
    """Write via a sibling temp file and rename, so readers never see halves."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, payload: object) -> None:
    write_atomic(path, canonical_json(payload))


def write_jsonl(path: Path, rows: Sequence[Mapping]) -> None:
    lines = [json.dumps(row, ensure_ascii=False, sort_keys=True) for row in rows]
    write_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def fragment_filename(fragment_id: str) -> str:
    """Filesystem-safe, reversible file name for a fragment id."""
    return urllib.parse.quote(fragment_id, safe="") + ".json"


def make_client(config: PipelineConfig) -> CompletionClient:
    if config.llm.mock:
        return MockCompletionClient(seed=config.llm.seed)
    if not config.llm.endpoint or not config.llm.model:
        raise ConfigError("remote runs need llm.endpoint and llm.model (or set llm.mock)")
    api_key = os.environ.get(config.llm.api_key_env) or None
    return RemoteCompletionClient(
        config.llm.endpoint,
        config.llm.model,
        api_key=api_key,
        max_concurrency=config.llm.max_concurrency,
    )


def generation_params(config: PipelineConfig) -> GenerationParams:
    try:
        return GenerationParams(
            max_tokens=config.llm.max_tokens,
            temperature=config.llm.temperature,
            timeout=config.llm.timeout_ms / 1000.0,
            retries=config.llm.retries,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _fragment_payload(fragment: NewsFragment) -> dict:
    payload = {"id": fragment.id, "title": fragment.title, "body": fragment.body}
    if fragment.category is not None:
        payload["category"] = fragment.category
    return payload


def stage_ingest(config: PipelineConfig, out: Path, *, resume: bool) -> Corpus:
    artifact = out / "corpus.jsonl"
    if resume and artifact.exists():
        logger.info("ingest: reusing %s", artifact)
        return load_corpus(artifact)
    if not config.corpus_path:
        raise ConfigError("corpus.path is required")
    try:
        corpus = load_corpus(config.corpus_path, pens_mapping=config.pens_mapping)
    except (CorpusError, OSError) as exc:
        raise StageFailure("ingest", str(exc))
    write_jsonl(artifact, [_fragment_payload(f) for f in corpus])
    return corpus


def stage_extract(
    config: PipelineConfig,
    corpus: Corpus,
    client: CompletionClient,
    out: Path,
    *,
    resume: bool,
) -> tuple[dict[str, PatternPool], tuple[str, ...]]:
    """Pattern pools per fragment; fragments yielding nothing are skipped.

    Pools are persisted one file per fragment under pools/gen0, plus a
    marker listing skipped fragment ids once the stage has covered the
    whole corpus.
    """
    gen0 = out / "pools" / "gen0"
    marker = gen0 / SKIPPED_MARKER
    pools: dict[str, PatternPool] = {}
    known_skipped: set[str] = set()
    if resume and marker.exists():
        known_skipped = set(json.loads(marker.read_text(encoding="utf-8")))
    pending: list[NewsFragment] = []
    for fragment in corpus:
        pool_path = gen0 / fragment_filename(fragment.id)
        if resume and pool_path.exists():
            pools[fragment.id] = pool_from_dict(json.loads(pool_path.read_text(encoding="utf-8")))
        elif fragment.id not in known_skipped:
            pending.append(fragment)
    params = generation_params(config)
    skipped = [fid for fid in known_skipped]

    def extract_one(fragment: NewsFragment) -> PatternPool | None:
        try:
            patterns = extract_patterns(
                client,
                fragment,
                per_fragment_target=config.per_fragment_target,
                params=params,
            )
        except NoValidPatterns:
            logger.warning("extract: skipping fragment %s (no parseable patterns)", fragment.id)
            return None
        return build_pool(fragment.id, patterns)

    try:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(extract_one, pending))
    except GatewayError as exc:
        raise StageFailure("extract", str(exc))
    for fragment, pool in zip(pending, outcomes):
        if pool is None:
            skipped.append(fragment.id)
            continue
        pools[fragment.id] = pool
        write_json(gen0 / fragment_filename(fragment.id), pool_to_dict(pool))
    if not pools:
        raise StageFailure("extract", "every fragment was skipped")
    write_json(marker, sorted(skipped))
    return pools, tuple(sorted(skipped))


def stage_evolve(
    config: PipelineConfig,
    corpus: Corpus,
    pools: dict[str, PatternPool],
    out: Path,
    *,
    resume: bool,
) -> dict[str, EvolutionResult]:
    """Evolve each pool independently; persist final pools and the winners."""
    final_dir = out / "pools" / "final"
    checkpoint_dir = out / "pools" / "checkpoints"
    stats = compute_role_stats([pools[f.id] for f in corpus if f.id in pools])
    evolution_config = config.evolution_config()

    def evolve_one(fragment_id: str) -> tuple[str, EvolutionResult]:
        final_path = final_dir / fragment_filename(fragment_id)
        checkpoint_path = checkpoint_dir / fragment_filename(fragment_id)
        sink = None
        if config.checkpoint_every > 0:
            sink = lambda payload: write_json(checkpoint_path, payload)
        if resume and final_path.exists():
            final_pool = pool_from_dict(json.loads(final_path.read_text(encoding="utf-8")))
            table = combined_fitness(
                final_pool,
                stats[fragment_id],
                alpha=config.alpha,
                beta=config.beta,
                d=config.damping,
            )
            best = min(
                final_pool.patterns,
                key=lambda p: (-table.q_pattern[p], serialize_pattern(p)),
            )
            result = EvolutionResult(
                best=best,
                best_fitness=table.q_pattern[best],
                history=(),
                generations_run=final_pool.generation,
                final_pool=final_pool,
            )
            return fragment_id, result
        if resume and checkpoint_path.exists():
            checkpoint = json.loads(checkpoint_path.read_text(encoding="utf-8"))
            result = resume_evolution(
                checkpoint,
                stats[fragment_id],
                evolution_config,
                checkpoint_every=config.checkpoint_every,
                checkpoint_sink=sink,
            )
        else:
            result = evolve(
                pools[fragment_id],
                stats[fragment_id],
                evolution_config,
                checkpoint_every=config.checkpoint_every,
                checkpoint_sink=sink,
            )
        write_json(final_path, pool_to_dict(result.final_pool))
        return fragment_id, result

    ordered_ids = [f.id for f in corpus if f.id in pools]
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        rows = list(executor.map(evolve_one, ordered_ids))
    evolved = {fid: result for fid, result in rows}
    best_payload = {
        fid: {
            "pattern": {"type": result.best.event_type, "roles": list(result.best.roles)},
            "fitness": result.best_fitness,
            "generations": result.generations_run,
        }
        for fid, result in evolved.items()
    }
    write_json(out / "best_patterns.json", best_payload)
    return evolved


def stage_summarize(
    config: PipelineConfig,
    corpus: Corpus,
    evolved: dict[str, EvolutionResult] | None,
    client: CompletionClient | None,
    out: Path,
    *,
    skipped: tuple[str, ...],
    resume: bool,
) -> list[SummaryRecord]:
    """One summary per (surviving fragment, requested system).

    Fragments skipped at extraction are excluded from every system so the
    evaluation compares identical fragment sets.
    """
    summaries_dir = out / "summaries"
    params = generation_params(config)
    skipped_set = set(skipped)
    fragments = [f for f in corpus if f.id not in skipped_set]
    if not fragments:
        raise StageFailure("summarize", "no fragments left to summarize")
    term_stats = corpus_term_stats(corpus) if "tfidf_baseline" in config.systems else None

    def summarize_system(system: str) -> list[SummaryRecord]:
        path = summaries_dir / f"{system}.jsonl"
        if resume and path.exists():
            with path.open(encoding="utf-8") as handle:
                return [summary_record_from_dict(json.loads(line)) for line in handle if line.strip()]

        def one(fragment: NewsFragment) -> SummaryRecord:
            if system == "nsg":
                assert evolved is not None
                return generate_summary(client, fragment, evolved[fragment.id].best, params)
            if system == "glm_direct":
                return generate_summary_direct(client, fragment, params)
            if system == "tfidf_baseline":
                return baseline_tfidf_summary(fragment, term_stats, config.max_sentences)
            return baseline_textrank_summary(fragment, config.max_sentences)

        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            records = list(executor.map(one, fragments))
        write_jsonl(path, [r.to_dict() for r in records])
        return records

    all_records: list[SummaryRecord] = []
    try:
        for system in config.systems:
            all_records.extend(summarize_system(system))
    except GatewayError as exc:
        raise StageFailure("summarize", str(exc))
    if config.digest:
        assert evolved is not None and client is not None
        patterns = [evolved[f.id].best for f in fragments]
        digest = generate_digest(client, patterns, params)
        write_atomic(out / "digest.txt", digest + "\n")
    return all_records


def stage_evaluate(
    config: PipelineConfig,
    corpus: Corpus,
    records: list[SummaryRecord],
    out: Path,
) -> EvaluationReport:
    report = evaluate(
        records,
        corpus,
        overlap_comparand=config.overlap_comparand,
        bleu_smoothing=config.bleu_smoothing,
    )
    write_json(out / "report.json", report.to_dict())
    write_atomic(out / "report.txt", emit_report(report, "table").decode("utf-8"))
    return report


def emit_report(report: EvaluationReport, format: str) -> bytes:
    """Render a report as canonical JSON or a fixed-width text table."""
    if format == "json":
        return canonical_json(report.to_dict()).encode("utf-8")
    if format != "table":
        raise ValueError("format must be 'json' or 'table'")
    header = f"{'system':<20}{'R-1':>8}{'R-2':>8}{'R-L':>8}{'B-1':>8}{'B-2':>8}{'B-3':>8}{'B-4':>8}{'Overlap':>9}"
    lines = [header]
    for name in sorted(report.systems):
        s = report.systems[name]
        lines.append(
            f"{name:<20}"
            f"{s.rouge1:>8.3f}{s.rouge2:>8.3f}{s.rougeL:>8.3f}"
            f"{s.bleu[0]:>8.3f}{s.bleu[1]:>8.3f}{s.bleu[2]:>8.3f}{s.bleu[3]:>8.3f}"
            f"{s.overlap:>9.1f}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def run_pipeline(
    config: PipelineConfig,
    *,
    upto: str = "evaluate",
    resume: bool = False,
) -> PipelineResult:
    """Run the pipeline through ``upto`` (inclusive) and write artifacts.

    Raises ConfigError for unusable configuration and StageFailure when a
    stage cannot complete; a run that merely skipped fragments still
    finishes, with the skips listed in the result and the manifest.
    """
    if upto not in STAGES:
        raise ConfigError(f"unknown stage {upto!r}")
    limit = STAGES.index(upto)
    needs_patterns = "nsg" in config.systems
    if config.digest and not needs_patterns:
        raise ConfigError("pipeline.digest requires the nsg system")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult()

    started = time.perf_counter()
    result.corpus = stage_ingest(config, out, resume=resume)
    logger.info("ingest: %d fragments (%.2fs)", len(result.corpus), time.perf_counter() - started)

    client: CompletionClient | None = None
    if limit >= 1 and needs_patterns:
        client = make_client(config)
        started = time.perf_counter()
        result.pools, result.skipped = stage_extract(
            config, result.corpus, client, out, resume=resume
        )
        logger.info(
            "extract: %d pools, %d skipped (%.2fs)",
            len(result.pools),
            len(result.skipped),
            time.perf_counter() - started,
        )
    if limit >= 2 and needs_patterns:
        started = time.perf_counter()
        result.evolved = stage_evolve(config, result.corpus, result.pools, out, resume=resume)
        logger.info("evolve: %d pools (%.2fs)", len(result.evolved), time.perf_counter() - started)
    if limit >= 3:
        if client is None and any(s in config.systems for s in ("nsg", "glm_direct")):
            client = make_client(config)
        started = time.perf_counter()
        result.records = stage_summarize(
            config,
            result.corpus,
            result.evolved,
            client,
            out,
            skipped=result.skipped,
            resume=resume,
        )
        logger.info(
            "summarize: %d records (%.2fs)", len(result.records), time.perf_counter() - started
        )

    # The manifest is durable before the report so an interrupted run still
    # documents itself; it is written exactly once per invocation.
    result.manifest = _build_manifest(config, result, upto)
    write_json(out / "manifest.json", result.manifest)

    if limit >= 4:
        started = time.perf_counter()
        result.report = stage_evaluate(config, result.corpus, result.records, out)
        logger.info("evaluate: done (%.2fs)", time.perf_counter() - started)
    return result


def _build_manifest(config: PipelineConfig, result: PipelineResult, upto: str) -> dict:
    limit = STAGES.index(upto)
    needs_patterns = "nsg" in config.systems
    artifacts: dict[str, object] = {"corpus": "corpus.jsonl"}
    if limit >= 1 and needs_patterns:
        artifacts["pools_gen0"] = "pools/gen0"
    if limit >= 2 and needs_patterns:
        artifacts["pools_final"] = "pools/final"
        artifacts["best_patterns"] = "best_patterns.json"
    if limit >= 3:
        artifacts["summaries"] = {s: f"summaries/{s}.jsonl" for s in sorted(config.systems)}
        if config.digest:
            artifacts["digest"] = "digest.txt"
    if limit >= 4:
        artifacts["report_json"] = "report.json"
        artifacts["report_table"] = "report.txt"
    manifest: dict = {
        "version": __version__,
        "seed": config.seed,
        "systems": list(config.systems),
        "requested_stage": upto,
        "config": config_snapshot(config),
        "artifacts": artifacts,
        "skipped_fragments": sorted(result.skipped),
    }
    if result.corpus is not None:
        manifest["fragment_ids"] = [f.id for f in result.corpus]
    if result.pools is not None:
        manifest["pattern_counts"] = {fid: len(pool) for fid, pool in result.pools.items()}
    if result.evolved is not None:
        manifest["generations_run"] = {
            fid: res.generations_run for fid, res in result.evolved.items()
        }
        manifest["best_fitness"] = {fid: res.best_fitness for fid, res in result.evolved.items()}
    if result.records is not None:
        counts: dict[str, int] = {}
        for record in result.records:
            counts[record.system] = counts.get(record.system, 0) + 1
        manifest["summary_counts"] = counts
    return manifest
