"""Prompt template registry.

Templates are JSON documents addressed by id. The package ships its own
under ``cmrbench/templates``; extra directories can be searched first.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .core import stable_hash

# Golden-tested; changing a single byte changes every template fingerprint.
FORMAT_DIRECTIVE = (
    'Respond with a single JSON object and nothing else, exactly in the form '
    '{"diagnosis":"<code>"} where <code> is one of the category codes listed above.'
)

_SLOT = re.compile(r"\{(instruction|question|context|labels|format)\}")
_REQUIRED = {"classification": ("context", "labels"), "translation": ("context",)}


class TemplateError(ValueError):
    """Malformed template or unusable inputs for rendering."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    instruction: str
    question: str
    frame: str
    kind: str = "classification"

    def __post_init__(self) -> None:
        if self.kind not in _REQUIRED:
            raise TemplateError(f"unknown template kind {self.kind!r}")
        slots = _SLOT.findall(self.frame)
        for slot in _REQUIRED[self.kind]:
            if slots.count(slot) != 1:
                raise TemplateError(
                    f"template {self.id!r}: placeholder {{{slot}}} must occur exactly once"
                )

    def render(self, **values: str) -> str:
        values = {"instruction": self.instruction, "question": self.question,
                  "format": FORMAT_DIRECTIVE, **values}
        # Single pass, so placeholder-like text inside a narrative is left alone.
        return _SLOT.sub(lambda m: values.get(m.group(1), ""), self.frame)

    def fingerprint(self) -> str:
        return stable_hash({"template": asdict(self), "format": FORMAT_DIRECTIVE})

    @classmethod
    def from_dict(cls, data: Mapping) -> "PromptTemplate":
        try:
            return cls(
                id=data["id"],
                instruction=data.get("instruction", ""),
                question=data.get("question", ""),
                frame=data["frame"],
                kind=data.get("kind", "classification"),
            )
        except KeyError as exc:
            raise TemplateError(f"template missing field {exc}") from exc


def load_template(template_id: str, search_dirs: Iterable[str | Path] = ()) -> PromptTemplate:
    name = f"{template_id}.json"
    for directory in search_dirs:
        path = Path(directory) / name
        if path.is_file():
            return PromptTemplate.from_dict(json.loads(path.read_text(encoding="utf-8")))
    shipped = resources.files("cmrbench.templates").joinpath(name)
    if not shipped.is_file():
        raise TemplateError(f"no template with id {template_id!r}")
    return PromptTemplate.from_dict(json.loads(shipped.read_text(encoding="utf-8")))


def available_templates() -> list[str]:
    root = resources.files("cmrbench.templates")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
