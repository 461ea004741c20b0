"""Splitting a German report and translating its narrative with a mock translator.

Run: python demos/02_split_and_translate.py
"""

from cmrbench.corpus import CorpusSpec, demo_mock_profiles, generate_synthetic_corpus
from cmrbench.inference import MockBackend
from cmrbench.report import detect_language, split_report
from cmrbench.translate import translate_narrative

report = generate_synthetic_corpus(CorpusSpec({"CA": 1}, language="de", seed=3))[0]
print(report.raw_text)

sections = split_report(report.raw_text)
print("quantitative block:", len(sections.quantitative.splitlines()), "lines")
print("narrative:", sections.narrative)

lang = detect_language(sections.narrative)
print("detected language:", lang)

backend = MockBackend(demo_mock_profiles())
out = translate_narrative(sections.narrative, lang, backend, "mock-translator")
print("translated:", out.text)
print("requests so far:", backend.request_count())

# English text is passed through without touching the backend.
same = translate_narrative("Normal biventricular size.", "en", backend, "mock-translator")
print("english passthrough:", same.text, "| requests:", backend.request_count())
