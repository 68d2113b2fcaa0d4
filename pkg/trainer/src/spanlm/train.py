"""Training loop, checkpointing, and span-NLL evaluation."""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from spanlm.data import load_instances, make_batches
from spanlm.model import TinyCausalLM, build_model, masked_cross_entropy
from spanlm.tokenizer import WordTokenizer

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    instances: tuple[str, ...]
    out_dir: str
    preset: str = "tiny"
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    max_seq: int = 256
    tasks: tuple[str, ...] | None = None  # restrict to these task ids

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.instances:
            raise ValueError("no instance files given")

    def fingerprint(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "out_dir"}
        canonical = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def span_nll(model: TinyCausalLM, tokenizer: WordTokenizer, records, max_seq: int) -> float:
    """Mean negative log-likelihood over loss-span tokens."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for inputs, targets, mask in make_batches(records, tokenizer, 16, max_seq):
            logits = model(inputs)
            _, per_token = masked_cross_entropy(logits, targets, mask)
            total += float(per_token.sum())
            count += int(mask.sum())
    if count == 0:
        raise ValueError("no span tokens to evaluate")
    return total / count


def train(cfg: TrainConfig) -> str:
    """Fine-tune on the instance files; returns the checkpoint directory.

    Loss is cross-entropy restricted to loss-span tokens, so everything
    before an example's output (including whole earlier examples in the
    instance) conditions the prediction without being trained on.
    """
    records = load_instances(cfg.instances, cfg.tasks)
    if not records:
        raise ValueError("instance files are empty (or the task filter matched nothing)")
    tokenizer = WordTokenizer.fit(r.text for r in records)
    model = build_model(len(tokenizer), cfg.preset, cfg.max_seq, cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    model.train()
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng((cfg.seed, epoch))
        epoch_loss, steps = 0.0, 0
        for inputs, targets, mask in make_batches(records, tokenizer, cfg.batch_size, cfg.max_seq, rng):
            optimizer.zero_grad()
            loss, _ = masked_cross_entropy(model(inputs), targets, mask)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            steps += 1
        logger.info("epoch %d/%d: span loss %.4f", epoch + 1, cfg.epochs, epoch_loss / max(steps, 1))

    os.makedirs(cfg.out_dir, exist_ok=True)
    tokenizer.save(os.path.join(cfg.out_dir, "vocab.json"))
    torch.save(model.state_dict(), os.path.join(cfg.out_dir, "model.pt"))
    with open(os.path.join(cfg.out_dir, "config.json"), "w", encoding="utf-8") as handle:
        json.dump(
            {
                "preset": cfg.preset,
                "max_seq": cfg.max_seq,
                "vocab_size": len(tokenizer),
                "seed": cfg.seed,
                "epochs": cfg.epochs,
                "batch_size": cfg.batch_size,
                "lr": cfg.lr,
                "fingerprint": cfg.fingerprint(),
            },
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")
    return cfg.out_dir


def load_checkpoint(checkpoint_dir: str) -> tuple[TinyCausalLM, WordTokenizer, dict]:
    with open(os.path.join(checkpoint_dir, "config.json"), encoding="utf-8") as handle:
        config = json.load(handle)
    tokenizer = WordTokenizer.load(os.path.join(checkpoint_dir, "vocab.json"))
    if len(tokenizer) != config["vocab_size"]:
        raise ValueError(f"{checkpoint_dir}: vocab size mismatch with config")
    model = build_model(len(tokenizer), config["preset"], config["max_seq"], config["seed"])
    state = torch.load(os.path.join(checkpoint_dir, "model.pt"), weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, tokenizer, config
