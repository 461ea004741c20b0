"""Killing a run halfway and picking it up again from its checkpoints.

Run: python demos/05_interrupt_and_resume.py
"""

import shutil
from pathlib import Path

from cmrbench.core import RunConfig
from cmrbench.corpus import CorpusSpec, demo_mock_profiles, generate_synthetic_corpus, save_corpus
from cmrbench.harness import resume_run, run_pipeline
from cmrbench.inference import MockBackend


class Killed(BaseException):
    pass


class DiesAfter(MockBackend):
    """Mock backend that stops the process after a fixed number of requests."""

    def __init__(self, profiles, limit):
        super().__init__(profiles)
        self.limit = limit

    def generate(self, req):
        if self.request_count() >= self.limit:
            raise Killed()
        return super().generate(req)


root = Path("demo-out/resume")
shutil.rmtree(root, ignore_errors=True)
root.mkdir(parents=True)
save_corpus(root / "corpus.jsonl", generate_synthetic_corpus(CorpusSpec(seed=7)))
models = ("mock-full", "mock-partial")

run_pipeline(RunConfig(str(root / "corpus.jsonl"), models, str(root / "clean")), MockBackend(demo_mock_profiles()))

try:
    run_pipeline(RunConfig(str(root / "corpus.jsonl"), models, str(root / "cut")), DiesAfter(demo_mock_profiles(), 150))
except Killed:
    print("run killed after 150 requests")

backend = MockBackend(demo_mock_profiles())
resume_run(root / "cut" / "manifest.json", backend)
print("resume issued", backend.request_count(), "requests instead of", 2 * 109)

same = (root / "cut" / "summary.json").read_bytes() == (root / "clean" / "summary.json").read_bytes()
print("summary identical to uninterrupted run:", same)
