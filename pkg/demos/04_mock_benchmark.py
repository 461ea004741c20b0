"""A full benchmark over a synthetic 109-report cohort with three mock models.

Nothing here needs a model server. Outputs go to ./demo-out/benchmark.
Run: python demos/04_mock_benchmark.py
"""

from pathlib import Path

from cmrbench.core import RunConfig
from cmrbench.corpus import CorpusSpec, demo_mock_profiles, generate_synthetic_corpus, save_corpus
from cmrbench.harness import run_pipeline
from cmrbench.inference import MockBackend

out = Path("demo-out/benchmark")
out.mkdir(parents=True, exist_ok=True)

# Same seed, same corpus, byte for byte.
reports = generate_synthetic_corpus(CorpusSpec(seed=42, noise_rate=0.2))
save_corpus(out / "corpus.jsonl", reports)
print(len(reports), "reports written")

# A little injected latency makes the timing columns meaningful.
backend = MockBackend(demo_mock_profiles(latency=0.002))
config = RunConfig(str(out / "corpus.jsonl"), ("mock-full", "mock-partial", "mock-sparse"), str(out))
result = run_pipeline(config, backend)

print((out / "ranking.md").read_text())
for entry in result.ranking:
    s = result.summaries[entry.model_ref]
    print(f"{entry.model_ref}: {s.parse_failure_count} unparsed of {s.n}")
print("artifacts:", sorted(p.name for p in out.iterdir()))
