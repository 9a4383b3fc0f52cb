"""Spectrogram-image audio classification toolkit (Python bindings)."""

from ._core import *  # noqa: F401,F403
from ._core import (
    ChecksumError,
    ConfigError,
    DataError,
    Error,
    FingerprintMismatch,
    InvariantError,
    Model,
)

__all__ = [
    "ChecksumError",
    "ConfigError",
    "DataError",
    "Error",
    "FingerprintMismatch",
    "InvariantError",
    "Model",
    "bootstrap_ci",
    "chunk_signal",
    "count_flops",
    "count_params",
    "describe",
    "load_model",
    "load_wav",
    "policy_lambda",
    "predict_file",
    "render_chunk",
    "run_cli",
    "save_wav",
    "uar",
]
