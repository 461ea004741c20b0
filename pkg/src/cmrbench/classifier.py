"""Diagnostic prompt construction and label extraction from model output."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .core import ClinicalReport, LabelSet, Prediction, _fold, normalize_label
from .inference import GenerationRequest
from .prompts import PromptTemplate, TemplateError, load_template

DEFAULT_TEMPLATE_ID = "cmr-dx-v1"
LADDER = ("verbatim-json", "think-block-strip", "first-json-object-scan", "synonym-normalize")

_THINK_BLOCK = re.compile(r"<think>.*?</think>", re.DOTALL | re.IGNORECASE)
_THINK_CLOSE = re.compile(r"</think>", re.IGNORECASE)
_MAX_SCAN_CHARS = 200_000


@dataclass(frozen=True)
class RepairTrace:
    steps: tuple[str, ...] = ()
    succeeded_at: Optional[str] = None


@dataclass(frozen=True)
class ParseResult:
    label: str
    parse_status: str
    trace: RepairTrace = field(default_factory=RepairTrace)


class ParseFailure(ValueError):
    """No diagnosis could be recovered; ``raw_response`` keeps the input for audit."""

    def __init__(self, raw_response: str, trace: RepairTrace):
        super().__init__("no diagnosis could be extracted from the model response")
        self.raw_response = raw_response
        self.trace = trace


def render_labels(labels: LabelSet) -> str:
    return "\n".join(f"- {label.code}: {label.display_name}" for label in labels)


def build_prompt(narrative: str, labels: LabelSet, template: PromptTemplate | None = None) -> str:
    template = template or load_template(DEFAULT_TEMPLATE_ID)
    if template.kind != "classification":
        raise TemplateError(f"template {template.id!r} is not a classification template")
    if not narrative or not narrative.strip():
        raise ValueError("narrative must be non-empty")
    if labels is None or len(labels) == 0:
        raise TemplateError("cannot render a prompt without labels")
    return template.render(context=narrative.strip(), labels=render_labels(labels))


def _diagnosis_value(obj) -> Optional[str]:
    if not isinstance(obj, dict):
        return None
    for key, value in obj.items():
        if isinstance(key, str) and key.strip().casefold() == "diagnosis" and isinstance(value, str):
            return value
    return None


def _resolve(value: str, labels: LabelSet) -> tuple[Optional[str], bool]:
    """Return (code, used_synonym)."""
    folded = _fold(value)
    for label in labels:
        if _fold(label.code) == folded:
            return label.code, False
    code = normalize_label(value, labels)
    return code, code is not None


def _loads(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, RecursionError):
        return None


def _strip_think(text: str) -> str:
    text = _THINK_BLOCK.sub("", text)
    # Some servers drop the opening tag; keep only what follows the last close tag.
    closes = list(_THINK_CLOSE.finditer(text))
    if closes:
        text = text[closes[-1].end():]
    return text.strip()


def _balanced_objects(text: str):
    """Yield every balanced ``{...}`` substring in order of its start index."""
    text = text[:_MAX_SCAN_CHARS]
    for start, ch in enumerate(text):
        if ch != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for pos in range(start, len(text)):
            c = text[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : pos + 1]
                    break


def parse_prediction(response: str, labels: LabelSet) -> ParseResult:
    """Recover a diagnosis code from a model response.

    Steps run in ladder order and the first success wins: the whole response
    as JSON (``ok``), the response with reasoning ``<think>`` blocks removed
    (``repaired``), then the first balanced JSON object carrying a usable
    ``diagnosis`` key (``repaired``). Values resolve against codes first and
    the synonym table second; a synonym hit adds ``synonym-normalize`` to the
    trace. Raises ``ParseFailure`` when every step fails.
    """
    steps: list[str] = []

    def attempt(candidate, step: str) -> Optional[ParseResult]:
        value = _diagnosis_value(candidate)
        if value is None:
            return None
        code, via_synonym = _resolve(value, labels)
        if code is None:
            return None
        done = tuple(steps) + (("synonym-normalize",) if via_synonym else ())
        status = "ok" if step == "verbatim-json" else "repaired"
        return ParseResult(code, status, RepairTrace(done, step))

    steps.append("verbatim-json")
    found = attempt(_loads(response.strip()), "verbatim-json")
    if found:
        return found

    steps.append("think-block-strip")
    stripped = _strip_think(response)
    if stripped != response.strip():
        found = attempt(_loads(stripped), "think-block-strip")
        if found:
            return found

    steps.append("first-json-object-scan")
    for chunk in _balanced_objects(stripped):
        found = attempt(_loads(chunk), "first-json-object-scan")
        if found:
            return found

    raise ParseFailure(response, RepairTrace(tuple(steps), None))


def classify_report(
    report: ClinicalReport,
    backend,
    model_ref: str,
    labels: LabelSet,
    template: PromptTemplate | None = None,
    include_quantitative: bool = False,
    timeout: float = 120.0,
) -> Prediction:
    """Classify one report with one model call.

    Parse failures come back as a ``failed`` Prediction; transport errors
    from the backend propagate.
    """
    if report.sections is None:
        raise ValueError(f"report {report.id!r} has not been split")
    context = report.sections.narrative
    if include_quantitative and report.sections.quantitative:
        context = f"{report.sections.quantitative}\n\n{context}"
    prompt = build_prompt(context, labels, template)
    result = backend.generate(GenerationRequest(model_ref=model_ref, prompt=prompt, timeout=timeout))
    try:
        parsed = parse_prediction(result.text, labels)
    except ParseFailure:
        return Prediction(report.id, model_ref, None, result.text, "failed", result.wall_latency)
    return Prediction(report.id, model_ref, parsed.label, result.text, parsed.parse_status, result.wall_latency)
