"""Span-masked fine-tuning of a small causal language model.

Consumes instance files in the documented line-delimited format
({"task", "text", "loss_spans", "example_count"}), trains with
cross-entropy restricted to the loss-span tokens, and serves the
resulting checkpoint over a line-delimited JSON scorer protocol.
"""

from spanlm.data import InstanceRecord, SpanAlignmentError, encode_instance, load_instances
from spanlm.model import TinyCausalLM, build_model
from spanlm.tokenizer import WordTokenizer
from spanlm.train import TrainConfig, load_checkpoint, span_nll, train

__version__ = "0.1.0"

__all__ = [
    "InstanceRecord",
    "SpanAlignmentError",
    "TinyCausalLM",
    "TrainConfig",
    "WordTokenizer",
    "build_model",
    "encode_instance",
    "load_checkpoint",
    "load_instances",
    "span_nll",
    "train",
]
