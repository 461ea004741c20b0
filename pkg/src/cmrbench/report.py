"""Report segmentation into quantitative/narrative parts and language detection."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .core import ReportSections

FALLBACKS = ("whole-text-as-narrative", "last-paragraph-block")


class UnsplittableReport(ValueError):
    """Raised when a report is too short to yield any narrative section."""


def _default_markers() -> tuple[str, ...]:
    text = resources.files("cmrbench.data").joinpath("config.json").read_text(encoding="utf-8")
    return tuple(json.loads(text)["split"]["markers"])


@dataclass(frozen=True)
class SplitConfig:
    markers: tuple[str, ...] = field(default_factory=_default_markers)
    fallback: str = "whole-text-as-narrative"
    min_narrative_chars: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "markers", tuple(self.markers))
        if self.fallback not in FALLBACKS:
            raise ValueError(f"unknown fallback {self.fallback!r}")
        if self.min_narrative_chars < 1:
            raise ValueError("min_narrative_chars must be >= 1")
        if any(not m.strip() for m in self.markers):
            raise ValueError("markers must be non-empty strings")

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "SplitConfig":
        if not data:
            return cls()
        kwargs = {}
        if "markers" in data:
            kwargs["markers"] = tuple(data["markers"])
        if "fallback" in data:
            kwargs["fallback"] = data["fallback"]
        if "min_narrative_chars" in data:
            kwargs["min_narrative_chars"] = int(data["min_narrative_chars"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "markers": list(self.markers),
            "fallback": self.fallback,
            "min_narrative_chars": self.min_narrative_chars,
        }


def split_report(raw_text: str, config: SplitConfig | None = None) -> ReportSections:
    """Split a report at the first configured marker found at the start of a line.

    Markers are tried in config order, so an earlier marker wins even when a
    later one appears higher up in the text. The marker itself is consumed.
    When no marker yields a long enough narrative, the configured fallback
    applies and ``split_marker`` reads ``"fallback:<rule>"``.
    """
    config = config or SplitConfig()
    body = raw_text.strip()
    if len(body) < config.min_narrative_chars:
        raise UnsplittableReport(
            f"report has {len(body)} chars, need at least {config.min_narrative_chars}"
        )

    for marker in config.markers:
        pattern = re.compile(r"^[ \t]*" + re.escape(marker), re.IGNORECASE | re.MULTILINE)
        match = pattern.search(raw_text)
        if match is None:
            continue
        narrative = raw_text[match.end():].strip()
        if len(narrative) < config.min_narrative_chars:
            continue
        return ReportSections(raw_text[: match.start()].strip(), narrative, marker)

    if config.fallback == "last-paragraph-block":
        blocks = [b.strip() for b in re.split(r"\n[ \t]*\n", body) if b.strip()]
        if len(blocks) > 1 and len(blocks[-1]) >= config.min_narrative_chars:
            head = body[: body.rfind(blocks[-1])].strip()
            return ReportSections(head, blocks[-1], "fallback:last-paragraph-block")
    return ReportSections("", body, "fallback:whole-text-as-narrative")


# Words shared by both languages ("in", "an", "so", "was", "die", ...) are left out.
_GERMAN = frozenset(
    """
    der das den dem des ein eine einer eines einem einen kein keine keiner keinen
    und oder mit ohne bei von vom zum zur ist sind wird werden wurde wurden nicht
    nach auf aus sich im als auch noch nur für über unter zwischen eher sowie
    vereinbar hinweis nachweis regelrecht regelrechte unauffällig unauffälliger
    linksventrikulär linksventrikuläre rechtsventrikulär beurteilung befund deutlich
    leicht leichte mittelgradig hochgradig diffus betont
    """.split()
)
_ENGLISH = frozenset(
    """
    the of and or with without no not is are was were be been this that these those
    there which from for by at on to of as than into within consistent evidence
    findings finding left right ventricle ventricular function enhancement
    mild moderate severe suggestive likely compatible pattern wall walls
    """.split()
)
_UMLAUT = re.compile(r"[äöüß]")
_WORD = re.compile(r"[^\W\d_]+", re.UNICODE)


def detect_language(text: str) -> str:
    """Return ``"de"``, ``"en"`` or ``"unknown"`` from a stop-word tally.

    German umlauts and sharp s count as one extra German vote each.
    """
    lowered = text.lower()
    words = _WORD.findall(lowered)
    de = sum(w in _GERMAN for w in words) + len(_UMLAUT.findall(lowered))
    en = sum(w in _ENGLISH for w in words)
    if de > en:
        return "de"
    if en > de:
        return "en"
    return "unknown"
