"""Exit criteria for the harness, one test per criterion.

Each test prints a single ``[ACCEPTANCE] PASS|FAIL <criterion>`` line.
Run on its own with ``pytest tests/test_acceptance.py -s -v``.
"""

import contextlib
import json
import os
import random
import time
from collections import Counter
from pathlib import Path

import pytest

from cmrbench.classifier import ParseFailure, classify_report, parse_prediction
from cmrbench.core import RunConfig, default_label_set
from cmrbench.corpus import COHORT_COUNTS, CorpusSpec, demo_mock_profiles, generate_synthetic_corpus
from cmrbench.evaluate import build_confusion, compute_metrics
from cmrbench.harness import resume_run, run_pipeline
from cmrbench.inference import HttpBackend, MockBackend, MockProfile
from cmrbench.report import split_report

from helpers import CLASSIFIERS, Interrupt, InterruptingBackend, answer_codes, write_corpus
from oracles import brute_force_metrics, random_prediction_set

HERE = Path(__file__).parent
CODES = ["HCM", "CA", "CS", "MYO", "ICM", "DCM", "NORMAL", "OTHER"]


@contextlib.contextmanager
def criterion(name, capsys):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"\n[ACCEPTANCE] FAIL {name}")
        raise
    with capsys.disabled():
        print(f"\n[ACCEPTANCE] PASS {name}")


def _seeded_sets(count=1000, seed=20250101):
    rng = random.Random(seed)
    for _ in range(count):
        k = rng.randint(2, 8)
        codes = CODES[:k]
        truths, preds = random_prediction_set(rng, codes, max_n=200, none_rate=rng.choice([0.0, 0.05, 0.3]))
        yield codes, truths, preds


def test_metrics_oracle_equivalence(capsys):
    with criterion("metrics match brute-force oracle on 1000 seeded sets (tol 1e-12, < 10 s)", capsys):
        start = time.perf_counter()
        saw_none = 0
        for codes, truths, preds in _seeded_sets():
            saw_none += None in preds
            m = compute_metrics(build_confusion(zip(truths, preds), codes))
            ref = brute_force_metrics(truths, preds, codes)
            for key in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
                assert abs(getattr(m, key) - ref[key]) <= 1e-12, (key, codes, truths, preds)
        assert saw_none > 0
        assert time.perf_counter() - start < 10


def test_confusion_conservation(capsys):
    with criterion("confusion matrix conservation on every generated set (exact)", capsys):
        for codes, truths, preds in _seeded_sets():
            cm = build_confusion(zip(truths, preds), codes)
            assert cm.n == len(truths)
            assert cm.row_sums() == [truths.count(c) for c in codes]
            assert compute_metrics(cm).accuracy == cm.trace() / len(truths)


def test_hand_worked_fixture(capsys):
    with criterion("hand-worked fixture A,A,B,B,C vs A,B,B,B,C (tol 5e-5)", capsys):
        m = compute_metrics(build_confusion(zip("AABBC", "ABBBC"), ["A", "B", "C"]))
        assert abs(m.accuracy - 0.8000) <= 5e-5
        assert abs(m.macro_precision - 0.8889) <= 5e-5
        assert abs(m.macro_recall - 0.8333) <= 5e-5
        assert abs(m.macro_f1 - 0.8222) <= 5e-5


def test_end_to_end_deterministic_run(tmp_path, capsys):
    with criterion("109-report mock run is byte-identical across runs and matches oracle (< 30 s)", capsys):
        start = time.perf_counter()
        corpus = tmp_path / "corpus.jsonl"
        reports = write_corpus(corpus, class_counts=COHORT_COUNTS, seed=42, noise_rate=0.2)
        assert len(reports) == 109
        assert Counter(r.ground_truth for r in reports) == Counter(COHORT_COUNTS)

        outs = []
        for name in ("run1", "run2"):
            cfg = RunConfig(str(corpus), CLASSIFIERS, str(tmp_path / name), seed=42)
            result = run_pipeline(cfg, MockBackend(demo_mock_profiles()))
            assert sum(len(p) for p in result.predictions.values()) == 327
            outs.append(tmp_path / name)
        a, b = outs
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
        for model in CLASSIFIERS:
            assert (a / f"confusion_{model}.csv").read_bytes() == (b / f"confusion_{model}.csv").read_bytes()

        # Oracle: the mock's canned answer for each narrative, decoded by lookup table.
        profiles, decode = demo_mock_profiles(), answer_codes()
        summary = {m["model_ref"]: m for m in json.loads((a / "summary.json").read_text())["models"]}
        truths = [r.ground_truth for r in reports]
        for model in CLASSIFIERS:
            narratives = [r.raw_text.partition("Assessment:")[2] for r in reports]
            preds = [decode[profiles[model].respond(n)] for n in narratives]
            ref = brute_force_metrics(truths, preds, CODES)
            for key, value in ref.items():
                assert abs(summary[model][key] - value) <= 1e-12, (model, key)
            rows = (a / f"confusion_{model}.csv").read_text().splitlines()[1:]
            for row, code in zip(rows, CODES):
                cells = [int(x) for x in row.split(",")[1:]]
                expected = [sum(1 for t, p in zip(truths, preds) if t == code and p == c) for c in CODES]
                expected.append(sum(1 for t, p in zip(truths, preds) if t == code and p is None))
                assert cells == expected
        assert time.perf_counter() - start < 30


def test_latency_fidelity(tmp_path, capsys):
    with criterion("mean latency within injected delay +0/+25 ms; latency tie-break", capsys):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, class_counts={"HCM": 3, "CA": 3, "CS": 3, "MYO": 3, "ICM": 3, "DCM": 3, "NORMAL": 2})
        full = demo_mock_profiles()["mock-full"]
        backend = MockBackend({
            "fast": MockProfile(full.answers, latency=0.05),
            "slow": MockProfile(full.answers, latency=0.2),
        })
        # "slow" listed first so the ranking cannot pass by input order.
        result = run_pipeline(RunConfig(str(corpus), ("slow", "fast"), str(tmp_path / "o")), backend)
        for model, delay in (("fast", 0.05), ("slow", 0.2)):
            t = result.timings[model]
            assert t.n == 20
            assert delay <= t.mean_seconds_per_case <= delay + 0.025, (model, t)
        assert result.summaries["fast"].mean_score == result.summaries["slow"].mean_score
        assert [e.model_ref for e in result.ranking] == ["fast", "slow"]


def test_repair_ladder_fixture_suite(capsys):
    with criterion("50 curated malformed outputs give the expected (label, status)", capsys):
        cases = json.loads((HERE / "fixtures" / "repair_cases.json").read_text(encoding="utf-8"))
        assert len(cases) == 50
        labels = default_label_set()
        for case in cases:
            try:
                result = parse_prediction(case["response"], labels)
                got = (result.label, result.parse_status)
            except ParseFailure as exc:
                assert exc.raw_response == case["response"]
                got = (None, "failed")
            assert got == (case["label"], case["status"]), case["name"]


def test_translation_gating(tmp_path, capsys):
    with criterion("translation: 0 requests for English corpus, 1 per report for German", capsys):
        for language, expected in (("en", 0), ("de", 109)):
            corpus = tmp_path / f"{language}.jsonl"
            write_corpus(corpus, language=language)
            backend = MockBackend(demo_mock_profiles())
            cfg = RunConfig(str(corpus), ("mock-full",), str(tmp_path / language),
                            translate=True, translation_model="mock-translator")
            run_pipeline(cfg, backend)
            assert backend.request_count("mock-translator") == expected


def test_resume_idempotence(tmp_path, capsys):
    with criterion("interrupt at 50/109 then resume: summary.json byte-identical", capsys):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, noise_rate=0.2)
        run_pipeline(RunConfig(str(corpus), CLASSIFIERS, str(tmp_path / "full")), MockBackend(demo_mock_profiles()))
        cut = tmp_path / "cut"
        with pytest.raises(Interrupt):
            run_pipeline(RunConfig(str(corpus), CLASSIFIERS, str(cut)),
                         InterruptingBackend(MockBackend(demo_mock_profiles()), limit=50))
        resume_run(cut / "manifest.json", MockBackend(demo_mock_profiles()))
        assert (cut / "summary.json").read_bytes() == (tmp_path / "full" / "summary.json").read_bytes()


def _live_endpoint():
    endpoint = os.environ.get("HARNESS_ENDPOINT")
    if not endpoint:
        return None, "HARNESS_ENDPOINT not set"
    try:
        backend = HttpBackend(endpoint, max_retries=1)
    except ValueError as exc:
        return None, str(exc)
    health = backend.health_check()
    if not health:
        return None, f"server unreachable: {health.reason}"
    models = backend.list_models()
    if not models:
        return None, "server lists no models"
    return (backend, os.environ.get("HARNESS_LIVE_MODEL") or models[0]), None


@pytest.mark.live
def test_live_smoke(capsys):
    found, reason = _live_endpoint()
    if found is None:
        with capsys.disabled():
            print(f"\n[ACCEPTANCE] SKIP live smoke test ({reason})")
        pytest.skip(reason)
    backend, model = found
    with criterion(f"live smoke: >= 6/8 structured answers from {model}", capsys):
        labels = default_label_set()
        spec = CorpusSpec({code: 1 for code in CODES}, language="en", seed=8)
        reports = generate_synthetic_corpus(spec)
        parsed = 0
        for report in reports:
            prepared = report.__class__(report.id, report.raw_text, report.language,
                                        split_report(report.raw_text), report.ground_truth)
            pred = classify_report(prepared, backend, model, labels, timeout=300)
            parsed += pred.parse_status in ("ok", "repaired")
        assert parsed >= 6, parsed
