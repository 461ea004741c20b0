"""Narrative translation to English through a designated translation model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .inference import GenerationRequest, InferenceError
from .prompts import PromptTemplate, load_template

TRANSLATION_TEMPLATE_ID = "translate-de-en-v1"


class EmptyTranslation(InferenceError):
    """The translation model returned blank text."""


@dataclass(frozen=True)
class TranslationOutcome:
    text: str
    skipped: bool
    model_ref: Optional[str]
    latency: float

    def __post_init__(self) -> None:
        if self.skipped and self.model_ref is not None:
            raise ValueError("skipped translations carry no model_ref")


def translate_narrative(
    narrative: str,
    detected_lang: str,
    backend,
    model_ref: str,
    template: PromptTemplate | None = None,
    timeout: float = 120.0,
) -> TranslationOutcome:
    """Translate ``narrative`` unless it is already English.

    English input is returned untouched without contacting the backend.
    Any other language (including ``unknown``) costs exactly one request.
    """
    if not narrative:
        raise ValueError("narrative must be non-empty")
    if detected_lang == "en":
        return TranslationOutcome(narrative, True, None, 0.0)
    template = template or load_template(TRANSLATION_TEMPLATE_ID)
    prompt = template.render(context=narrative)
    result = backend.generate(GenerationRequest(model_ref=model_ref, prompt=prompt, timeout=timeout))
    text = result.text.strip()
    if not text:
        raise EmptyTranslation(f"{model_ref} returned an empty translation", result.attempts)
    return TranslationOutcome(text, False, model_ref, result.wall_latency)
