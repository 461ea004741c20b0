"""End-to-end benchmark runs: split, translate, classify, evaluate."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .classifier import classify_report
from .core import ClinicalReport, Prediction, RunConfig, stable_hash, validate_corpus
from .corpus import (
    append_prediction,
    atomic_write_text,
    load_corpus,
    load_predictions,
    safe_name,
    save_predictions,
)
from .evaluate import (
    ConfusionMatrix,
    MetricsSummary,
    RankEntry,
    TimingStats,
    build_confusion,
    compute_metrics,
    markdown_table,
    rank_models,
    summary_json,
    timing_summary,
)
from .inference import HttpBackend, InferenceError
from .prompts import load_template
from .report import SplitConfig, detect_language, split_report
from .translate import TRANSLATION_TEMPLATE_ID, translate_narrative

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
TRANSLATIONS = "translations.jsonl"


class HarnessError(Exception):
    """The run cannot start or continue (invalid corpus, unhealthy backend, ...)."""


class ConfigMismatch(HarnessError):
    pass


@dataclass
class RunResult:
    manifest: dict
    predictions: dict[str, list[Prediction]]
    summaries: dict[str, MetricsSummary]
    confusions: dict[str, ConfusionMatrix]
    timings: dict[str, TimingStats]
    ranking: list[RankEntry]
    aborted: dict[str, list[str]] = field(default_factory=dict)
    translation_requests: int = 0

    @property
    def aborted_count(self) -> int:
        return sum(len(v) for v in self.aborted.values())


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: RunConfig) -> str:
    """Hash of everything that determines predictions; output_dir and parallelism are excluded."""
    template = load_template(config.prompt_template_id)
    payload = config.to_dict()
    for key in ("output_dir", "parallel_models", "request_timeout", "max_retries", "endpoint"):
        payload.pop(key)
    payload["template_fingerprint"] = template.fingerprint()
    payload["translation_template"] = load_template(TRANSLATION_TEMPLATE_ID).fingerprint()
    payload["corpus_sha256"] = _file_sha256(config.corpus_path)
    return stable_hash(payload)


def _build_backend(config: RunConfig):
    return HttpBackend(config.endpoint, max_retries=config.max_retries)


def _prepare(
    reports: list[ClinicalReport], config: RunConfig, backend, out_dir: Path
) -> tuple[list[ClinicalReport], dict[str, str], int]:
    """Split every report and translate non-English narratives.

    Translations are cached in ``translations.jsonl`` so a resumed run never
    repeats them. Returns prepared reports, ids aborted with the reason, and
    the number of translation requests issued.
    """
    split_cfg = SplitConfig.from_dict(config.split)
    cache_path = out_dir / TRANSLATIONS
    cache: dict[str, dict] = {}
    if cache_path.exists():
        for line in cache_path.read_text(encoding="utf-8").splitlines():
            try:
                row = json.loads(line)
                cache[row["id"]] = row
            except (json.JSONDecodeError, KeyError):
                continue

    prepared, aborted, requests = [], {}, 0
    for report in reports:
        sections = split_report(report.raw_text, split_cfg)
        if config.translate:
            lang = report.language if report.language != "unknown" else detect_language(sections.narrative)
            if report.id in cache:
                sections = replace(sections, narrative=cache[report.id]["text"])
            elif lang != "en":
                try:
                    outcome = translate_narrative(
                        sections.narrative, lang, backend, config.translation_model,
                        timeout=config.request_timeout,
                    )
                except InferenceError as exc:
                    requests += getattr(exc, "attempts", 1)
                    logger.error("translation failed for %s: %s", report.id, exc)
                    aborted[report.id] = f"translation: {exc}"
                    continue
                requests += 1
                with open(cache_path, "a", encoding="utf-8") as fh:
                    row = {"id": report.id, "text": outcome.text, "latency": outcome.latency}
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                sections = replace(sections, narrative=outcome.text)
        prepared.append(replace(report, sections=sections))
    return prepared, aborted, requests


def _run_model(model: str, reports, config: RunConfig, backend, template, out_dir: Path, done: dict):
    """Classify every report with one model, strictly one request at a time."""
    path = out_dir / f"predictions_{safe_name(model)}.jsonl"
    aborted = []
    for report in reports:
        if report.id in done:
            continue
        try:
            pred = classify_report(
                report, backend, model, config.label_set, template,
                include_quantitative=config.include_quantitative,
                timeout=config.request_timeout,
            )
        except InferenceError as exc:
            logger.error("aborted %s on %s: %s", model, report.id, exc)
            aborted.append(report.id)
            continue
        append_prediction(path, pred)
        done[report.id] = pred
    return aborted


def run_pipeline(config: RunConfig, backend=None, *, _resume: bool = False) -> RunResult:
    """Benchmark every configured model over the corpus and write all artifacts.

    Output layout under ``config.output_dir``: ``manifest.json``,
    ``predictions_<model>.jsonl``, ``confusion_<model>.csv``,
    ``summary.json``, ``timing.json`` and ``ranking.md``. Parse failures are
    scored as errors; transport failures abort only the affected cell.
    """
    started = datetime.now(timezone.utc).isoformat()
    backend = backend or _build_backend(config)
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise HarnessError(f"output dir {out_dir} is not writable: {exc}") from exc

    reports = load_corpus(config.corpus_path, config.label_set)
    check = validate_corpus(reports, config.label_set)
    if not check.ok or check.unlabeled:
        raise HarnessError(f"corpus invalid: {json.dumps(check.to_dict())}")
    if not reports:
        raise HarnessError("corpus is empty")

    needed = list(config.model_refs) + ([config.translation_model] if config.translate else [])
    for model in needed:
        health = backend.health_check(model)
        if not health:
            raise HarnessError(f"backend unhealthy for model {model!r}: {health.reason}")

    template = load_template(config.prompt_template_id)
    digest = config_hash(config)
    manifest_path = out_dir / MANIFEST
    if not _resume:
        # A fresh run starts from clean checkpoints.
        for model in config.model_refs:
            (out_dir / f"predictions_{safe_name(model)}.jsonl").unlink(missing_ok=True)
        (out_dir / TRANSLATIONS).unlink(missing_ok=True)
    manifest = {
        "config": config.to_dict(),
        "config_hash": digest,
        "template_id": template.id,
        "template_fingerprint": template.fingerprint(),
        "label_set_fingerprint": config.label_set.fingerprint(),
        "backend": getattr(backend, "kind", type(backend).__name__),
        "tool_version": __version__,
        "started": started,
        "finished": None,
        "status": "running",
    }
    if config.parallel_models:
        msg = "models evaluated concurrently; latency comparability across models is reduced"
        logger.warning(msg)
        manifest["warnings"] = [msg]
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    prepared, aborted_ids, translation_requests = _prepare(reports, config, backend, out_dir)

    done: dict[str, dict[str, Prediction]] = {}
    for model in config.model_refs:
        path = out_dir / f"predictions_{safe_name(model)}.jsonl"
        done[model] = {p.report_id: p for p in load_predictions(path)} if path.exists() else {}

    aborted: dict[str, list[str]] = {m: sorted(aborted_ids) for m in config.model_refs}
    jobs = {m: (m, prepared, config, backend, template, out_dir, done[m]) for m in config.model_refs}
    if config.parallel_models and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            futures = {m: pool.submit(_run_model, *args) for m, args in jobs.items()}
            for m, fut in futures.items():
                aborted[m] += fut.result()
    else:
        for m, args in jobs.items():
            aborted[m] += _run_model(*args)

    order = {r.id: i for i, r in enumerate(prepared)}
    truth = {r.id: r.ground_truth for r in prepared}
    predictions, summaries, confusions, timings = {}, {}, {}, {}
    for model in config.model_refs:
        preds = sorted((p for p in done[model].values() if p.report_id in order), key=lambda p: order[p.report_id])
        predictions[model] = preds
        save_predictions(out_dir / f"predictions_{safe_name(model)}.jsonl", preds)
        if not preds:
            logger.error("model %s produced no scorable predictions", model)
            continue
        cm = build_confusion(((truth[p.report_id], p.label) for p in preds), config.label_set)
        confusions[model] = cm
        summaries[model] = compute_metrics(cm, model, config.averaging)
        timings[model] = timing_summary(preds)
        atomic_write_text(out_dir / f"confusion_{safe_name(model)}.csv", cm.to_csv())

    ranking = rank_models(list(summaries.values()), timings)
    extra = {
        "averaging": config.averaging,
        "config_hash": digest,
        "template_id": template.id,
        "aborted": {m: len(ids) for m, ids in aborted.items()},
    }
    atomic_write_text(out_dir / "summary.json", summary_json(list(summaries.values()), extra))
    atomic_write_text(
        out_dir / "timing.json",
        json.dumps({m: t.to_dict() for m, t in timings.items()}, indent=2, sort_keys=True) + "\n",
    )
    atomic_write_text(out_dir / "ranking.md", markdown_table(list(summaries.values()), timings, ranking))

    manifest.update(
        finished=datetime.now(timezone.utc).isoformat(),
        status="complete",
        aborted={m: ids for m, ids in aborted.items() if ids},
        translation_requests=translation_requests,
    )
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(manifest, predictions, summaries, confusions, timings, ranking,
                     {m: ids for m, ids in aborted.items() if ids}, translation_requests)


def resume_run(manifest_path: str | Path, backend=None, config: Optional[RunConfig] = None) -> RunResult:
    """Continue an interrupted run, skipping (model, report) pairs already recorded.

    When ``config`` is given it must hash identically to the manifest's
    config; so must the manifest's own config against the current template,
    label set and corpus files.
    """
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    stored = RunConfig.from_dict(manifest["config"])
    current = config or stored
    try:
        digest = config_hash(current)
    except Exception as exc:
        raise ConfigMismatch(f"cannot rebuild run configuration: {exc}") from exc
    if digest != manifest["config_hash"]:
        raise ConfigMismatch("configuration, template, labels or corpus changed since the run started")
    current = replace(current, output_dir=str(Path(manifest_path).parent))
    return run_pipeline(current, backend, _resume=True)

