"""Corpus-to-few-shot-data pipeline.

Turns raw text corpora into self-supervised input/output task examples,
packs them into loss-masked training instances, renders few-shot
evaluation prompts from downstream task templates, and evaluates
perplexity-ranking / greedy-generation protocols over a pluggable scorer.
"""

from icldata.corpus import (
    CorpusSampleConfig,
    Document,
    Sentence,
    SentenceWindow,
    ingest,
    sample_documents,
    segment,
    windows,
)
from icldata.packer import Instance, TokenBudget, pack, subsample
from icldata.taskgen import Example, LabelPool, Task
from icldata.templates import EvalItem, TaskTemplate, assemble_prompt, render

__version__ = "0.1.0"

__all__ = [
    "CorpusSampleConfig",
    "Document",
    "EvalItem",
    "Example",
    "Instance",
    "LabelPool",
    "Sentence",
    "SentenceWindow",
    "Task",
    "TaskTemplate",
    "TokenBudget",
    "assemble_prompt",
    "ingest",
    "pack",
    "render",
    "sample_documents",
    "segment",
    "subsample",
    "windows",
]
