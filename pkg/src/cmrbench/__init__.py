"""Benchmark locally served language models on CMR report diagnosis classification."""

__version__ = "0.1.0"

from .classifier import ParseFailure, build_prompt, classify_report, parse_prediction
from .core import (
    ClinicalReport,
    DiagnosisLabel,
    LabelSet,
    Prediction,
    ReportSections,
    RunConfig,
    default_label_set,
    normalize_label,
    validate_corpus,
)
from .corpus import CorpusSpec, generate_synthetic_corpus, load_corpus, save_corpus
from .evaluate import build_confusion, compute_metrics, rank_models, timing_summary
from .harness import resume_run, run_pipeline
from .inference import GenerationRequest, HttpBackend, MockBackend, MockProfile
from .report import SplitConfig, detect_language, split_report
from .translate import translate_narrative
