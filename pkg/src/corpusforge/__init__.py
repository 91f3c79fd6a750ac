"""corpusforge: refine noisy speech corpora into timestamped ASR training data."""

from .manifest import (
    AlignedWord,
    NumericSpanMapping,
    StageStatus,
    UtteranceRecord,
    read_manifest,
    stage_report,
    write_manifest,
)
from .pipeline import PipelineConfig, merge_minimal, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AlignedWord",
    "NumericSpanMapping",
    "PipelineConfig",
    "StageStatus",
    "UtteranceRecord",
    "merge_minimal",
    "read_manifest",
    "run_pipeline",
    "stage_report",
    "write_manifest",
    "__version__",
]
