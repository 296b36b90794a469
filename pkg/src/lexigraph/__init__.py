"""Cross-lingual document classification over dictionary graphs.

The package builds a directed multilingual graph from bilingual
dictionaries, learns target-language word features with a two-stage
graph attention network over pretrained source embeddings, and trains a
document classifier on top. A synthetic benchmark with a known concept
space and a CLI for runs, sweeps and inspection round out the toolkit.
"""

from .autodiff import FdReport, Tape, Var, fd_check
from .classifier import (
    TrainResult,
    TrainSettings,
    TrainingDiverged,
    TrainingState,
    accuracy_and_macro_f1,
    evaluate,
    train,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .graph import DictionaryGraph, build_dhg, graph_stats, inject_noise
from .ingest import (
    BilingualDictionary,
    Document,
    EmbeddingTable,
    LabeledCorpus,
    ParseError,
    Vocabulary,
    load_corpus,
    load_dictionary,
    load_embeddings,
)
from .model import (
    MODEL_KINDS,
    HyperParams,
    ModelParams,
    attention_report,
    build_layout,
    forward,
)
from .optim import Adam, load_params, save_params
from .synth import SynthConfig, generate, oracle_bound, write_task

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BilingualDictionary",
    "ConfigError",
    "DictionaryGraph",
    "Document",
    "EmbeddingTable",
    "ExperimentConfig",
    "FdReport",
    "HyperParams",
    "LabeledCorpus",
    "MODEL_KINDS",
    "ModelParams",
    "ParseError",
    "SynthConfig",
    "Tape",
    "TrainResult",
    "TrainSettings",
    "TrainingDiverged",
    "TrainingState",
    "Var",
    "Vocabulary",
    "accuracy_and_macro_f1",
    "attention_report",
    "build_dhg",
    "build_layout",
    "evaluate",
    "fd_check",
    "forward",
    "generate",
    "graph_stats",
    "inject_noise",
    "load_config",
    "load_corpus",
    "load_dictionary",
    "load_embeddings",
    "load_params",
    "oracle_bound",
    "save_config",
    "save_params",
    "train",
    "write_task",
]
