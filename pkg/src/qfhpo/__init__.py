"""Hyperparameter search with a data-reuploading quantum Fourier surrogate."""

from .encoding import DimensionSpec, SearchSpace, decode, encode
from .pipeline import (
    Objective,
    SamplingPlan,
    generate_sample_table,
    run_classical_baseline,
    run_quantum_hpo,
)
from .report import RunReport
from .search import SearchConfig, SearchResult, search
from .surrogate import SampleTable, SurrogateModel, TrainConfig, evaluate, init_model, train

__version__ = "0.1.0"

__all__ = [
    "DimensionSpec",
    "Objective",
    "RunReport",
    "SampleTable",
    "SamplingPlan",
    "SearchConfig",
    "SearchResult",
    "SearchSpace",
    "SurrogateModel",
    "TrainConfig",
    "decode",
    "encode",
    "evaluate",
    "generate_sample_table",
    "init_model",
    "run_classical_baseline",
    "run_quantum_hpo",
    "search",
    "train",
]
