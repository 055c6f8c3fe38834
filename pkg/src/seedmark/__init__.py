"""Seed-induced decision-boundary watermarking for detecting extracted models."""

from .bim import BimConfig, bim, bim_batch
from .datasets import Dataset, GenSpec, generate, split
from .harness import EvaluationConfig, run_raw_evaluation
from .metrics import RocCurve, roc_auc
from .nnet import Model, ModelSpec, TrainConfig, forward, init_model, predict, train
from .watermark import KeySet, VerificationModel, build_verifier, generate_keyset, verify

__all__ = [
    "BimConfig",
    "bim",
    "bim_batch",
    "Dataset",
    "GenSpec",
    "generate",
    "split",
    "EvaluationConfig",
    "run_raw_evaluation",
    "RocCurve",
    "roc_auc",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "forward",
    "init_model",
    "predict",
    "train",
    "KeySet",
    "VerificationModel",
    "build_verifier",
    "generate_keyset",
    "verify",
]

__version__ = "0.1.0"
