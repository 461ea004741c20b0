"""Shared builders for pipeline-level tests."""

import threading

from cmrbench.core import default_label_set
from cmrbench.corpus import PHRASES, CorpusSpec, _answer, generate_synthetic_corpus, save_corpus
from cmrbench.inference import InferenceError, MockBackend

CLASSIFIERS = ("mock-full", "mock-partial", "mock-sparse")


def write_corpus(path, **spec):
    spec.setdefault("seed", 42)
    reports = generate_synthetic_corpus(CorpusSpec(**spec))
    save_corpus(path, reports)
    return reports


def answer_codes():
    """Map every canned demo answer back to the code it encodes (None for prose)."""
    table = {}
    for code in PHRASES:
        for style in range(4):
            table[_answer(code, style)] = code
    for code in ("HCM", "NORMAL"):
        table[f"This looks like {code} to me."] = None
    table["I cannot tell from this report."] = None
    table['{"diagnosis":"OTHER"}'] = "OTHER"
    return table


class Interrupt(BaseException):
    """Simulates the process being killed mid-run."""


class InterruptingBackend:
    """Delegates to a mock and raises ``Interrupt`` once ``limit`` classify calls have been made."""

    kind = "mock"

    def __init__(self, inner, limit):
        self.inner = inner
        self.limit = limit
        self.classify_calls = 0

    def generate(self, req):
        if req.model_ref != "mock-translator":
            if self.classify_calls >= self.limit:
                raise Interrupt()
            self.classify_calls += 1
        return self.inner.generate(req)

    def health_check(self, model_ref=None):
        return self.inner.health_check(model_ref)

    def list_models(self):
        return self.inner.list_models()


class FailingBackend(InterruptingBackend):
    """Raises a transport-level InferenceError for prompts containing ``needle``."""

    def __init__(self, inner, needle):
        super().__init__(inner, limit=None)
        self.needle = needle

    def generate(self, req):
        if self.needle in req.prompt and req.model_ref != "mock-translator":
            raise InferenceError("connection reset", attempts=3)
        return self.inner.generate(req)


class ConcurrencyProbe(InterruptingBackend):
    """Tracks the peak number of in-flight requests per model and overall."""

    def __init__(self, inner):
        super().__init__(inner, limit=None)
        self.lock = threading.Lock()
        self.active = {}
        self.peak = {}
        self.total_active = 0
        self.peak_total = 0

    def generate(self, req):
        with self.lock:
            self.active[req.model_ref] = self.active.get(req.model_ref, 0) + 1
            self.peak[req.model_ref] = max(self.peak.get(req.model_ref, 0), self.active[req.model_ref])
            self.total_active += 1
            self.peak_total = max(self.peak_total, self.total_active)
        try:
            return self.inner.generate(req)
        finally:
            with self.lock:
                self.active[req.model_ref] -= 1
                self.total_active -= 1


def labels():
    return default_label_set()
