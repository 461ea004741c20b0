"""Classifying a few synthetic reports with a real Ollama server.

Needs a running server. Set HARNESS_ENDPOINT (default http://localhost:11434)
and optionally pass a model name: python demos/06_live_ollama.py llama3.1:8b
"""

import sys
from dataclasses import replace

from cmrbench.classifier import classify_report
from cmrbench.core import default_label_set
from cmrbench.corpus import CorpusSpec, generate_synthetic_corpus
from cmrbench.inference import HttpBackend, resolve_endpoint
from cmrbench.report import split_report

backend = HttpBackend(resolve_endpoint())
health = backend.health_check()
if not health:
    sys.exit(f"no server at {backend.endpoint}: {health.reason}")

model = sys.argv[1] if len(sys.argv) > 1 else backend.list_models()[0]
labels = default_label_set()
spec = CorpusSpec({c: 1 for c in ("HCM", "CA", "MYO", "DCM", "NORMAL")}, seed=1)

for report in generate_synthetic_corpus(spec):
    report = replace(report, sections=split_report(report.raw_text))
    pred = classify_report(report, backend, model, labels, timeout=300)
    print(f"{report.id} truth={report.ground_truth:7} pred={str(pred.label):7} "
          f"{pred.parse_status:9} {pred.latency:.1f}s")
