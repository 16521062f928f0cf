"""Sentence-level repair: transformer correction + evaluation networks."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .layers import attention_head, encoder_block, multi_head, softmax
from .model import (
    SPECIAL_TOKENS,
    ModelConfig,
    correction_forward,
    decode_correction,
    detect_errors,
    evaluation_forward,
    fuse,
    infer,
    init_params,
)

__all__ = [
    "SPECIAL_TOKENS",
    "Checkpoint",
    "ModelConfig",
    "attention_head",
    "correction_forward",
    "decode_correction",
    "detect_errors",
    "encoder_block",
    "evaluation_forward",
    "fuse",
    "infer",
    "init_params",
    "load_checkpoint",
    "multi_head",
    "save_checkpoint",
    "softmax",
]
