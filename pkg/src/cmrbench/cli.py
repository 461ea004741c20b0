"""Command-line front end.

Every subcommand accepts the same flag set; values resolve as
flag > environment > config file (``--config``) > built-in default.
Data goes to files or stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

from .classifier import classify_report
from .core import LabelSet, RunConfig, default_label_set, validate_corpus
from .corpus import (
    COHORT_COUNTS,
    CorpusFormatError,
    CorpusSpec,
    demo_mock_profiles,
    generate_synthetic_corpus,
    load_corpus,
    save_corpus,
    safe_name,
)
from .harness import HarnessError, resume_run, run_pipeline
from .inference import DEFAULT_ENDPOINT, HttpBackend, InferenceError, MockBackend
from .prompts import TemplateError, load_template
from .report import SplitConfig, UnsplittableReport, detect_language, split_report
from .translate import translate_narrative

logger = logging.getLogger("cmrbench")

SUBCOMMANDS = ("gen-corpus", "split", "translate", "classify", "run", "report", "validate")

# flag dest -> (config-file key, environment variable, default)
SETTINGS: dict[str, tuple[str, Optional[str], Any]] = {
    "corpus": ("corpus_path", None, None),
    "models": ("model_refs", None, None),
    "endpoint": ("endpoint", "HARNESS_ENDPOINT", DEFAULT_ENDPOINT),
    "out": ("output_dir", None, None),
    "translate": ("translate", None, False),
    "translation_model": ("translation_model", None, "llama3.3"),
    "template": ("prompt_template_id", None, "cmr-dx-v1"),
    "labels": ("labels", None, None),
    "seed": ("seed", None, 0),
    "timeout_secs": ("request_timeout", None, 120.0),
    "max_retries": ("max_retries", None, 2),
    "mock": ("mock", None, False),
    "mock_profile": ("mock_profile", None, None),
    "parallel_models": ("parallel_models", None, False),
    "format": ("format", None, "json"),
    "counts": ("counts", None, None),
    "language": ("language", None, "en"),
    "noise_rate": ("noise_rate", None, 0.0),
    "resume": ("resume", None, False),
}


class UsageError(Exception):
    pass


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file mirroring RunConfig")
    common.add_argument("--corpus", help="corpus JSONL path")
    common.add_argument("--models", type=_csv_list, help="comma-separated model names")
    common.add_argument("--endpoint", help=f"inference server URL (default {DEFAULT_ENDPOINT})")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--translate", action="store_const", const=True, default=None)
    common.add_argument("--translation-model")
    common.add_argument("--template", help="prompt template id")
    common.add_argument("--labels", help="label set JSON file")
    common.add_argument("--seed", type=int)
    common.add_argument("--timeout-secs", type=float)
    common.add_argument("--max-retries", type=int)
    common.add_argument("--mock", action="store_const", const=True, default=None,
                        help="use the deterministic in-process mock backend")
    common.add_argument("--mock-profile", help="mock answer-table JSON file")
    common.add_argument("--parallel-models", action="store_const", const=True, default=None)
    common.add_argument("--format", choices=("json", "md", "csv"))
    common.add_argument("--counts", help="gen-corpus class counts, e.g. HCM=15,CA=14")
    common.add_argument("--language", choices=("en", "de", "mixed"))
    common.add_argument("--noise-rate", type=float)
    common.add_argument("--resume", action="store_const", const=True, default=None,
                        help="run: continue the run recorded in --out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cmrbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_settings(args: argparse.Namespace, environ=os.environ) -> dict[str, Any]:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        translation = file_cfg.get("translation") or {}
        file_cfg.setdefault("translate", translation.get("enabled"))
        file_cfg.setdefault("translation_model", translation.get("model"))
    resolved = {}
    for dest, (key, env, default) in SETTINGS.items():
        value = getattr(args, dest, None)
        if value is None and env:
            value = environ.get(env) or None
        if value is None:
            value = file_cfg.get(key)
        if value is None:
            value = default
        resolved[dest] = value
    if isinstance(resolved["models"], str):
        resolved["models"] = _csv_list(resolved["models"])
    resolved["split"] = file_cfg.get("split")
    resolved["label_set_inline"] = file_cfg.get("label_set")
    resolved["include_quantitative"] = bool(file_cfg.get("include_quantitative", False))
    resolved["averaging"] = file_cfg.get("averaging", "macro")
    return resolved


def _labels(s: dict) -> LabelSet:
    if s["labels"]:
        return LabelSet.load(s["labels"])
    if s["label_set_inline"]:
        return LabelSet.from_dict(s["label_set_inline"])
    return default_label_set()


def _backend(s: dict):
    if s["mock"] or s["mock_profile"]:
        if s["mock_profile"]:
            return MockBackend.from_file(s["mock_profile"])
        return MockBackend(demo_mock_profiles())
    return HttpBackend(s["endpoint"], max_retries=int(s["max_retries"]))


def _require(s: dict, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if not s.get(n)]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows)


def cmd_gen_corpus(s: dict) -> int:
    _require(s, "out")
    counts = dict(COHORT_COUNTS)
    if isinstance(s["counts"], dict):
        counts = dict(s["counts"])
    elif s["counts"]:
        counts = {}
        for item in _csv_list(s["counts"]):
            code, _, n = item.partition("=")
            try:
                counts[code.strip()] = int(n)
            except ValueError:
                raise UsageError(f"bad --counts entry {item!r}") from None
    spec = CorpusSpec(counts, s["language"], int(s["seed"]), float(s["noise_rate"]))
    reports = generate_synthetic_corpus(spec, _labels(s))
    save_corpus(s["out"], reports)
    logger.info("wrote %d reports to %s", len(reports), s["out"])
    return 0


def cmd_validate(s: dict) -> int:
    _require(s, "corpus")
    labels = _labels(s)
    try:
        reports = load_corpus(s["corpus"])
    except CorpusFormatError as exc:
        logger.error("%s: %s", s["corpus"], exc)
        return 1
    check = validate_corpus(reports, labels)
    for warning in check.warnings:
        logger.warning(warning)
    sys.stdout.write(json.dumps(check.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if check.ok else 1


def cmd_split(s: dict) -> int:
    _require(s, "corpus")
    cfg = SplitConfig.from_dict(s["split"])
    rows = []
    for report in load_corpus(s["corpus"]):
        sec = split_report(report.raw_text, cfg)
        rows.append({"id": report.id, "quantitative": sec.quantitative, "narrative": sec.narrative,
                     "split_marker": sec.split_marker, "language": detect_language(sec.narrative)})
    _emit(_jsonl(rows), s["out"])
    return 0


def cmd_translate(s: dict) -> int:
    _require(s, "corpus")
    backend = _backend(s)
    cfg = SplitConfig.from_dict(s["split"])
    rows = []
    for report in load_corpus(s["corpus"]):
        narrative = split_report(report.raw_text, cfg).narrative
        lang = report.language if report.language != "unknown" else detect_language(narrative)
        outcome = translate_narrative(narrative, lang, backend, s["translation_model"],
                                      timeout=float(s["timeout_secs"]))
        rows.append({"id": report.id, "language": lang, "skipped": outcome.skipped,
                     "text": outcome.text, "latency": outcome.latency})
    _emit(_jsonl(rows), s["out"])
    return 0


def cmd_classify(s: dict) -> int:
    _require(s, "corpus", "models")
    backend = _backend(s)
    labels = _labels(s)
    template = load_template(s["template"])
    cfg = SplitConfig.from_dict(s["split"])
    reports = load_corpus(s["corpus"])
    rows = []
    for model in s["models"]:
        for report in reports:
            prepared = report if report.sections else _with_sections(report, cfg)
            pred = classify_report(prepared, backend, model, labels, template,
                                   include_quantitative=s["include_quantitative"],
                                   timeout=float(s["timeout_secs"]))
            rows.append(pred.to_dict())
    _emit(_jsonl(rows), s["out"])
    return 0


def _with_sections(report, cfg):
    return replace(report, sections=split_report(report.raw_text, cfg))


def _run_config(s: dict) -> RunConfig:
    return RunConfig(
        corpus_path=s["corpus"],
        model_refs=tuple(s["models"]),
        output_dir=s["out"],
        endpoint=s["endpoint"],
        label_set=_labels(s),
        translate=bool(s["translate"]),
        translation_model=s["translation_model"],
        prompt_template_id=s["template"],
        seed=int(s["seed"]),
        request_timeout=float(s["timeout_secs"]),
        max_retries=int(s["max_retries"]),
        include_quantitative=s["include_quantitative"],
        averaging=s["averaging"],
        parallel_models=bool(s["parallel_models"]),
        split=s["split"],
    )


def cmd_run(s: dict) -> int:
    if s["resume"]:
        _require(s, "out")
        manifest = Path(s["out"]) / "manifest.json"
        config = _run_config(s) if s["corpus"] and s["models"] else None
        result = resume_run(manifest, _backend(s), config)
    else:
        _require(s, "corpus", "models", "out")
        result = run_pipeline(_run_config(s), _backend(s))
    for entry in result.ranking:
        logger.info("%s: mean score %.4f", entry.model_ref, entry.mean_score)
    if result.aborted_count:
        logger.error("%d (model, report) cells aborted by transport failures", result.aborted_count)
        return 1
    return 0


def cmd_report(s: dict) -> int:
    _require(s, "out")
    out = Path(s["out"])
    fmt = s["format"]
    if fmt == "json":
        sys.stdout.write((out / "summary.json").read_text(encoding="utf-8"))
    elif fmt == "md":
        sys.stdout.write((out / "ranking.md").read_text(encoding="utf-8"))
    else:
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        models = s["models"] or [m["model_ref"] for m in summary["models"]]
        first = True
        for model in models:
            lines = (out / f"confusion_{safe_name(model)}.csv").read_text(encoding="utf-8").splitlines()
            if first:
                sys.stdout.write("model," + lines[0] + "\n")
                first = False
            for line in lines[1:]:
                sys.stdout.write(f"{model},{line}\n")
    return 0


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "split": cmd_split,
    "translate": cmd_translate,
    "classify": cmd_classify,
    "run": cmd_run,
    "report": cmd_report,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cmrbench {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CorpusFormatError, HarnessError, InferenceError, TemplateError,
            UnsplittableReport, FileNotFoundError, ValueError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
