"""Corpus persistence and seeded synthetic report generation.

All phrase material below is fictional and written for testing; no real
report text ships with the package.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .core import ClinicalReport, LabelSet, Prediction, ReportSections, default_label_set
from .inference import MockProfile

COHORT_COUNTS = {"HCM": 15, "CA": 14, "CS": 14, "MYO": 14, "ICM": 17, "DCM": 16, "NORMAL": 19}

# Parallel English/German finding sentences, index-aligned per diagnosis.
PHRASES: dict[str, list[tuple[str, str]]] = {
    "HCM": [
        ("Asymmetric septal hypertrophy with a maximal wall thickness of {wt} mm.",
         "Asymmetrische septale Hypertrophie mit einer maximalen Wanddicke von {wt} mm."),
        ("Patchy midwall fibrosis at the right ventricular insertion points.",
         "Fleckige intramurale Fibrose an den rechtsventrikulären Insertionsstellen."),
        ("Systolic anterior motion of the mitral valve with outflow tract acceleration.",
         "Systolische Vorwärtsbewegung der Mitralklappe mit Flussbeschleunigung im Ausflusstrakt."),
    ],
    "CA": [
        ("Diffuse circumferential subendocardial enhancement with difficult myocardial nulling.",
         "Diffuse zirkumferentielle subendokardiale Anreicherung mit erschwerter Myokard-Nullung."),
        ("Markedly elevated native T1 and extracellular volume of {ecv} %.",
         "Deutlich erhöhte native T1-Zeit und extrazelluläres Volumen von {ecv} %."),
        ("Concentric biventricular wall thickening with atrial septal involvement.",
         "Konzentrische biventrikuläre Wandverdickung mit Beteiligung des Vorhofseptums."),
    ],
    "CS": [
        ("Patchy multifocal enhancement of the basal septum extending to the right ventricular side.",
         "Fleckige multifokale Anreicherung des basalen Septums mit Ausdehnung zur rechtsventrikulären Seite."),
        ("Hilar and mediastinal lymphadenopathy noted on localizer images.",
         "Hiläre und mediastinale Lymphadenopathie in den Übersichtsaufnahmen."),
        ("Focal basal septal thinning with adjacent granulomatous-appearing enhancement.",
         "Fokale basale septale Ausdünnung mit angrenzender granulomatös imponierender Anreicherung."),
    ],
    "MYO": [
        ("Subepicardial enhancement of the inferolateral wall in a non-ischemic pattern.",
         "Subepikardiale Anreicherung der inferolateralen Wand in nicht-ischämischem Muster."),
        ("Regional myocardial edema on T2-weighted imaging.",
         "Regionales myokardiales Ödem in der T2-Wichtung."),
        ("Small pericardial effusion with pericardial enhancement.",
         "Kleiner Perikarderguss mit perikardialer Anreicherung."),
    ],
    "ICM": [
        ("Transmural scar in the anterior descending territory.",
         "Transmurale Narbe im Versorgungsgebiet des Ramus interventricularis anterior."),
        ("Regional akinesia of the inferior wall matching the scar.",
         "Regionale Akinesie der Hinterwand korrespondierend zur Narbe."),
        ("Subendocardial infarct scar in a coronary distribution.",
         "Subendokardiale Infarktnarbe in koronarem Verteilungsmuster."),
    ],
    "DCM": [
        ("Dilated left ventricle with globally reduced systolic function, LVEF {ef} %.",
         "Dilatierter linker Ventrikel mit global reduzierter systolischer Funktion, LVEF {ef} %."),
        ("Linear midwall septal stripe of enhancement.",
         "Lineare intramurale septale Streifenanreicherung."),
        ("Biatrial enlargement with functional mitral regurgitation.",
         "Biatriale Vergrößerung mit funktioneller Mitralinsuffizienz."),
    ],
    "NORMAL": [
        ("Normal biventricular size and systolic function.",
         "Normale biventrikuläre Größe und systolische Funktion."),
        ("No myocardial scar or fibrosis detected.",
         "Kein Nachweis einer myokardialen Narbe oder Fibrose."),
        ("Unremarkable native T1 and T2 mapping values.",
         "Unauffällige native T1- und T2-Mapping-Werte."),
    ],
    "OTHER": [
        ("Thickened pericardium without constrictive physiology.",
         "Verdicktes Perikard ohne konstriktive Physiologie."),
        ("Left ventricular non-compaction pattern of the apical segments.",
         "Non-Compaction-Muster der apikalen Segmente."),
    ],
}

_MARKER = {"en": "Assessment:", "de": "Beurteilung:"}
_TITLE = {"en": "Cardiac MRI report", "de": "Kardio-MRT Bericht"}
_DISTRACTOR = {
    "en": "Differential consideration: {phrase}",
    "de": "Differentialdiagnostisch zu erwägen: {phrase}",
}


class CorpusFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class CorpusSpec:
    class_counts: Mapping[str, int] = field(default_factory=lambda: dict(COHORT_COUNTS))
    language: str = "en"
    seed: int = 0
    noise_rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "class_counts", dict(self.class_counts))
        if any(c < 0 for c in self.class_counts.values()):
            raise ValueError("class counts must be >= 0")
        if not any(c > 0 for c in self.class_counts.values()):
            raise ValueError("at least one class count must be positive")
        if self.language not in ("en", "de", "mixed"):
            raise ValueError("language must be en, de or mixed")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def _fill(template: str, rng: random.Random) -> str:
    return template.format(wt=rng.randint(16, 28), ecv=rng.randint(45, 65), ef=rng.randint(18, 38))


def _quantitative_block(code: str, lang: str, rng: random.Random) -> str:
    ef = rng.randint(20, 38) if code in ("DCM", "ICM") else rng.randint(52, 68)
    edv = rng.randint(220, 320) if code == "DCM" else rng.randint(110, 190)
    rows = [
        ("LVEDV", f"{edv} ml"),
        ("LVESV", f"{round(edv * (100 - ef) / 100)} ml"),
        ("LVEF", f"{ef} %"),
        ("RVEF", f"{rng.randint(45, 65)} %"),
        ("LV mass" if lang == "en" else "LV-Masse", f"{rng.randint(80, 210)} g"),
        ("T1 native", f"{rng.randint(940, 1180)} ms"),
        ("T2", f"{rng.randint(44, 58)} ms"),
        ("Aorta ascendens", f"{rng.randint(6, 13)} cm2"),
    ]
    return "\n".join(f"{name}: {value}" for name, value in rows)


def generate_synthetic_corpus(spec: CorpusSpec, labels: LabelSet | None = None) -> list[ClinicalReport]:
    """Build a labelled synthetic corpus that is a pure function of ``spec``.

    Ids, report order and base findings come from one random stream and
    distractor phrases from a second one, so changing ``noise_rate`` never
    changes ids or class assignment.
    """
    labels = labels or default_label_set()
    for code in spec.class_counts:
        if labels.canonical(code) is None:
            raise ValueError(f"unknown label code {code!r}")
        if code not in PHRASES:
            raise ValueError(f"no phrase templates for {code!r}")

    rng = random.Random(spec.seed)
    noise_rng = random.Random(f"noise:{spec.seed}")
    codes = [code for code, count in spec.class_counts.items() for _ in range(count)]
    rng.shuffle(codes)
    width = max(4, len(str(len(codes))))

    reports = []
    for i, code in enumerate(codes, 1):
        lang = spec.language if spec.language != "mixed" else rng.choice(("en", "de"))
        column = 0 if lang == "en" else 1
        picks = rng.sample(range(len(PHRASES[code])), k=min(2, len(PHRASES[code])))
        sentences = [_fill(PHRASES[code][j][column], rng) for j in picks]
        quantitative = _quantitative_block(code, lang, rng)

        if noise_rng.random() < spec.noise_rate:
            other = noise_rng.choice(sorted(c for c in PHRASES if c != code))
            phrase = _fill(noise_rng.choice(PHRASES[other])[column], noise_rng)
            distractor = _DISTRACTOR[lang].format(phrase=phrase)
            sentences.insert(noise_rng.randint(0, len(sentences)), distractor)

        raw = f"{_TITLE[lang]}\n{quantitative}\n{_MARKER[lang]}\n{' '.join(sentences)}\n"
        reports.append(ClinicalReport(id=f"syn-{i:0{width}d}", raw_text=raw, language=lang, ground_truth=code))
    return reports


def translation_answers() -> dict[str, str]:
    """Keyword table mapping each German finding sentence stem to its English twin."""
    table = {}
    for pairs in PHRASES.values():
        for en, de in pairs:
            table[de.split("{")[0].rstrip(" ,")] = _fill(en, random.Random(0))
    return table


def _answer(code: str, style: int) -> str:
    styles = (
        '{{"diagnosis": "{code}"}}',
        '<think>Weighing the findings against the listed categories.</think>\n{{"diagnosis":"{code}"}}',
        'Based on the findings, my answer is:\n```json\n{{"diagnosis": "{code}"}}\n```',
        '{{"diagnosis": "{name}"}}',
    )
    name = {label.code: label.display_name for label in default_label_set()}[code]
    return styles[style % len(styles)].format(code=code, name=name)


def demo_mock_profiles(latency: float = 0.0) -> dict[str, MockProfile]:
    """Three mock classifier models of decreasing keyword coverage plus a translator.

    ``mock-full`` knows every English finding sentence; ``mock-partial`` knows
    the first sentence of each diagnosis; ``mock-sparse`` knows only HCM and
    NORMAL findings and sometimes answers in prose without JSON.
    """
    full, partial, sparse = {}, {}, {}
    for i, (code, pairs) in enumerate(PHRASES.items()):
        for j, (en, _) in enumerate(pairs):
            key = en.split("{")[0].rstrip(" ,.")
            full[key] = _answer(code, i + j)
            if j == 0:
                partial[key] = _answer(code, i)
            if code in ("HCM", "NORMAL"):
                sparse[key] = _answer(code, 0) if j < 2 else f"This looks like {code} to me."
    return {
        "mock-full": MockProfile(full, latency),
        "mock-partial": MockProfile(partial, latency),
        "mock-sparse": MockProfile(sparse, latency, default="I cannot tell from this report."),
        "mock-translator": MockProfile(translation_answers(), latency, default="No translation available."),
    }


# --- persistence ------------------------------------------------------------

def atomic_write_text(path: str | Path, text: str) -> None:
    """Write ``text`` via a temp file in the same directory and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _jsonl(records: Iterable[Mapping]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def save_corpus(path: str | Path, reports: Sequence[ClinicalReport]) -> None:
    atomic_write_text(path, _jsonl(r.to_dict() for r in reports))


def load_corpus(path: str | Path, labels: LabelSet | None = None) -> list[ClinicalReport]:
    """Read a JSONL corpus, raising ``CorpusFormatError`` with the line number."""
    reports: list[ClinicalReport] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", lineno) from exc
            if not isinstance(data, dict):
                raise CorpusFormatError("expected a JSON object", lineno)
            for key in ("id", "raw_text"):
                if not isinstance(data.get(key), str) or not data[key]:
                    raise CorpusFormatError(f"missing or empty {key!r}", lineno)
            if data["id"] in seen:
                raise CorpusFormatError(f"duplicate id {data['id']!r}", lineno)
            seen.add(data["id"])
            truth = data.get("ground_truth")
            if truth is not None and labels is not None:
                if labels.canonical(truth) is None:
                    raise CorpusFormatError(f"unknown label code {truth!r}", lineno)
                truth = labels.canonical(truth)
            sections = data.get("sections")
            try:
                reports.append(
                    ClinicalReport(
                        id=data["id"],
                        raw_text=data["raw_text"],
                        language=data.get("language") or "unknown",
                        sections=ReportSections(**sections) if sections else None,
                        ground_truth=truth,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise CorpusFormatError(str(exc), lineno) from exc
    return reports


def save_predictions(path: str | Path, predictions: Sequence[Prediction]) -> None:
    atomic_write_text(path, _jsonl(p.to_dict() for p in predictions))


def load_predictions(path: str | Path) -> list[Prediction]:
    """Read predictions, tolerating a torn final line left by an interrupted append."""
    out = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(Prediction.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if lineno == len(lines):
                break
            raise CorpusFormatError(f"bad prediction record ({exc})", lineno) from exc
    return out


def append_prediction(path: str | Path, prediction: Prediction) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(prediction.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        fh.flush()


def save_results(out_dir: str | Path, predictions: Sequence[Prediction], summaries, timings=None) -> None:
    """Write per-model predictions, confusion CSVs and ``summary.json`` atomically.

    ``summaries`` maps model_ref to ``(MetricsSummary, ConfusionMatrix)``.
    """
    from .evaluate import summary_json  # local: evaluate does not depend on corpus

    out_dir = Path(out_dir)
    by_model: dict[str, list[Prediction]] = {}
    for p in predictions:
        by_model.setdefault(p.model_ref, []).append(p)
    for model, preds in by_model.items():
        save_predictions(out_dir / f"predictions_{safe_name(model)}.jsonl", preds)
    for model, (_, cm) in summaries.items():
        atomic_write_text(out_dir / f"confusion_{safe_name(model)}.csv", cm.to_csv())
    atomic_write_text(out_dir / "summary.json", summary_json([s for s, _ in summaries.values()]))
    if timings:
        payload = {m: t.to_dict() for m, t in timings.items()}
        atomic_write_text(out_dir / "timing.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


def safe_name(model_ref: str) -> str:
    """File-system safe form of a model name (``qwen2.5:32b`` -> ``qwen2.5_32b``)."""
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in model_ref)
