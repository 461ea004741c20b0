"""Shared domain vocabulary: diagnosis labels, reports, predictions, run configs."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

# Failed parses carry ``None`` as their label. It can never be a LabelSet member.
NONE = None
UNPARSED = "unparsed"
PARSE_STATUSES = ("ok", "repaired", "failed")
LANGUAGES = ("de", "en", "unknown")

_PUNCT = re.compile(r"[\W_]+", re.UNICODE)
_RESERVED_CODES = {"NONE", "UNPARSED"}


def _fold(text: str) -> str:
    """Trim, case-fold and replace punctuation runs with a single space."""
    return " ".join(_PUNCT.sub(" ", text.casefold()).split())


@dataclass(frozen=True)
class DiagnosisLabel:
    code: str
    display_name: str

    def __post_init__(self) -> None:
        if not self.code or not self.code.strip():
            raise ValueError("label code must be non-empty")


@dataclass(frozen=True)
class LabelSet:
    """Ordered closed vocabulary of diagnosis labels plus a synonym table.

    Label order is significant: it fixes confusion-matrix rows and columns
    and the order labels are rendered into prompts.
    """

    labels: tuple[DiagnosisLabel, ...]
    synonyms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "synonyms", dict(self.synonyms))
        if len(self.labels) < 2:
            raise ValueError("a label set needs at least 2 labels")
        seen: set[str] = set()
        for label in self.labels:
            key = label.code.casefold()
            if key in seen:
                raise ValueError(f"duplicate label code {label.code!r}")
            if label.code.upper() in _RESERVED_CODES:
                raise ValueError(f"label code {label.code!r} is reserved")
            seen.add(key)
        for surface, code in self.synonyms.items():
            if code.casefold() not in seen:
                raise ValueError(f"synonym {surface!r} maps to unknown code {code!r}")

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(label.code for label in self.labels)

    def get(self, code: str) -> Optional[DiagnosisLabel]:
        """Case-insensitive lookup by code."""
        key = code.casefold()
        for label in self.labels:
            if label.code.casefold() == key:
                return label
        return None

    def canonical(self, code: str) -> Optional[str]:
        label = self.get(code)
        return label.code if label else None

    def to_dict(self) -> dict:
        return {
            "labels": [{"code": l.code, "display_name": l.display_name} for l in self.labels],
            "synonyms": dict(self.synonyms),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabelSet":
        labels = tuple(DiagnosisLabel(d["code"], d.get("display_name", d["code"])) for d in data["labels"])
        return cls(labels, dict(data.get("synonyms", {})))

    @classmethod
    def load(cls, path: str | Path) -> "LabelSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_label_set() -> LabelSet:
    """The seven cohort categories plus OTHER, with the shipped synonym table."""
    text = resources.files("cmrbench.data").joinpath("labels.json").read_text(encoding="utf-8")
    return LabelSet.from_dict(json.loads(text))


def normalize_label(surface: str, labels: LabelSet) -> Optional[str]:
    """Map free text onto a label code, or return None when nothing matches.

    Exact code matches win over synonym and display-name matches.
    """
    if not isinstance(surface, str):
        return None
    key = _fold(surface)
    if not key:
        return None
    for label in labels:
        if _fold(label.code) == key:
            return label.code
    for surf, code in labels.synonyms.items():
        if _fold(surf) == key:
            return labels.canonical(code)
    for label in labels:
        if _fold(label.display_name) == key:
            return label.code
    return None


@dataclass(frozen=True)
class ReportSections:
    quantitative: str
    narrative: str
    split_marker: str

    def __post_init__(self) -> None:
        if not self.narrative.strip():
            raise ValueError("narrative section must be non-empty")


@dataclass(frozen=True)
class ClinicalReport:
    id: str
    raw_text: str
    language: str = "unknown"
    sections: Optional[ReportSections] = None
    ground_truth: Optional[str] = None

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "language": self.language,
            "raw_text": self.raw_text,
            "ground_truth": self.ground_truth,
        }
        if self.sections is not None:
            out["sections"] = asdict(self.sections)
        return out


@dataclass(frozen=True)
class Prediction:
    report_id: str
    model_ref: str
    label: Optional[str]
    raw_response: str
    parse_status: str
    latency: float

    def __post_init__(self) -> None:
        if self.parse_status not in PARSE_STATUSES:
            raise ValueError(f"unknown parse status {self.parse_status!r}")
        if (self.parse_status == "failed") != (self.label is None):
            raise ValueError("parse_status 'failed' iff label is NONE")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Prediction":
        return cls(
            report_id=data["report_id"],
            model_ref=data["model_ref"],
            label=data.get("label"),
            raw_response=data.get("raw_response", ""),
            parse_status=data["parse_status"],
            latency=float(data["latency"]),
        )


@dataclass(frozen=True)
class RunConfig:
    corpus_path: str
    model_refs: tuple[str, ...]
    output_dir: str
    endpoint: str = "http://localhost:11434"
    label_set: LabelSet = field(default_factory=default_label_set)
    translate: bool = False
    translation_model: str = "llama3.3"
    prompt_template_id: str = "cmr-dx-v1"
    seed: int = 0
    request_timeout: float = 120.0
    max_retries: int = 2
    include_quantitative: bool = False
    averaging: str = "macro"
    parallel_models: bool = False
    split: Optional[dict] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_refs", tuple(self.model_refs))
        if not self.model_refs:
            raise ValueError("model_refs must be non-empty")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.averaging not in ("macro", "micro"):
            raise ValueError("averaging must be 'macro' or 'micro'")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model_refs"] = list(self.model_refs)
        out["label_set"] = self.label_set.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        data = dict(data)
        if isinstance(data.get("label_set"), Mapping):
            data["label_set"] = LabelSet.from_dict(data["label_set"])
        return cls(**data)


@dataclass
class CorpusValidation:
    total: int
    counts: dict[str, int]
    unlabeled: int
    duplicate_ids: list[str]
    empty_texts: list[str]
    unknown_labels: list[tuple[str, str]]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return not (self.duplicate_ids or self.empty_texts or self.unknown_labels)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        out["unknown_labels"] = [list(pair) for pair in self.unknown_labels]
        return out


def validate_corpus(reports: Sequence[ClinicalReport], labels: LabelSet) -> CorpusValidation:
    counts = {code: 0 for code in labels.codes}
    unlabeled = 0
    seen: set[str] = set()
    duplicates: list[str] = []
    empty: list[str] = []
    unknown: list[tuple[str, str]] = []
    warnings: list[str] = []

    for report in reports:
        if not report.id:
            empty.append(report.id)
        if report.id in seen and report.id not in duplicates:
            duplicates.append(report.id)
        seen.add(report.id)
        if not report.raw_text.strip():
            empty.append(report.id)
        if report.ground_truth is None:
            unlabeled += 1
            continue
        code = labels.canonical(report.ground_truth)
        if code is None:
            unknown.append((report.id, report.ground_truth))
            unlabeled += 1
        else:
            counts[code] += 1

    if not reports:
        warnings.append("empty corpus")
    elif unlabeled:
        warnings.append(f"{unlabeled} report(s) without a usable ground-truth label")
    return CorpusValidation(len(reports), counts, unlabeled, duplicates, empty, unknown, warnings)


def stable_hash(payload: object) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()

