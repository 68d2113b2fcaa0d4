"""Instance file loading and span-to-token alignment."""

import json
from dataclasses import dataclass

import numpy as np
import torch

from spanlm.tokenizer import WordTokenizer


class SpanAlignmentError(ValueError):
    """A loss span does not line up with the instance text or its tokens."""


@dataclass(frozen=True)
class InstanceRecord:
    text: str
    spans: tuple[tuple[int, int], ...]
    source: str  # "<file>:<line>", used in error messages
    task: str = ""

    def __post_init__(self) -> None:
        for start, end in self.spans:
            if not (0 <= start < end <= len(self.text)):
                raise SpanAlignmentError(f"{self.source}: span [{start}, {end}) outside text")


def load_instances(paths, tasks=None) -> list[InstanceRecord]:
    """Read instance files; `tasks` optionally restricts to those task ids."""
    wanted = set(tasks) if tasks else None
    records = []
    for path in paths:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                payload = json.loads(line)
                if wanted is not None and payload.get("task") not in wanted:
                    continue
                records.append(
                    InstanceRecord(
                        text=payload["text"],
                        spans=tuple((int(s), int(e)) for s, e in payload["loss_spans"]),
                        source=f"{path}:{lineno}",
                        task=str(payload.get("task", "")),
                    )
                )
    return records


def encode_instance(
    record: InstanceRecord, tokenizer: WordTokenizer, max_seq: int
) -> tuple[list[int], list[bool]]:
    """Token ids (BOS-prefixed, truncated) and per-target loss mask.

    Targets are the tokens themselves (position t predicts token t given
    everything before it, BOS included). A token is in the mask iff its
    character interval overlaps any loss span. Every span must cover at
    least one surviving token.
    """
    token_ids, offsets = tokenizer.encode(record.text)
    token_ids = token_ids[: max_seq - 1]
    offsets = offsets[: max_seq - 1]
    mask = []
    covered = [False] * len(record.spans)
    for start, end in offsets:
        hit = False
        for index, (span_start, span_end) in enumerate(record.spans):
            if start < span_end and end > span_start:
                hit = True
                covered[index] = True
        mask.append(hit)
    for index, ok in enumerate(covered):
        if not ok and record.spans[index][0] < (offsets[-1][1] if offsets else 0):
            raise SpanAlignmentError(
                f"{record.source}: span {record.spans[index]} maps to no token"
            )
    return [tokenizer.bos_id] + token_ids, mask


def make_batches(
    records,
    tokenizer: WordTokenizer,
    batch_size: int,
    max_seq: int,
    rng: np.random.Generator | None = None,
):
    """Padded (inputs, targets, loss_mask) tensors, optionally shuffled."""
    order = range(len(records)) if rng is None else rng.permutation(len(records))
    encoded = []
    for index in order:
        ids, mask = encode_instance(records[int(index)], tokenizer, max_seq)
        encoded.append((ids, mask))
    batches = []
    for at in range(0, len(encoded), batch_size):
        chunk = encoded[at : at + batch_size]
        width = max(len(ids) for ids, _ in chunk)
        inputs = torch.full((len(chunk), width - 1), tokenizer.pad_id, dtype=torch.long)
        targets = torch.full((len(chunk), width - 1), tokenizer.pad_id, dtype=torch.long)
        loss_mask = torch.zeros((len(chunk), width - 1), dtype=torch.bool)
        for row, (ids, mask) in enumerate(chunk):
            seq = torch.tensor(ids, dtype=torch.long)
            inputs[row, : len(ids) - 1] = seq[:-1]
            targets[row, : len(ids) - 1] = seq[1:]
            loss_mask[row, : len(mask)] = torch.tensor(mask, dtype=torch.bool)
        batches.append((inputs, targets, loss_mask))
    return batches
