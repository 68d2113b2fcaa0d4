"""A tiny causal transformer language model."""

import torch
from torch import nn

PRESETS = {
    "tiny": {"d_model": 64, "n_layer": 2, "n_head": 2, "d_ff": 256},
    "small": {"d_model": 128, "n_layer": 4, "n_head": 4, "d_ff": 512},
}


class _Block(nn.Module):
    def __init__(self, d_model: int, n_head: int, d_ff: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(d_model, n_head, batch_first=True)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(nn.Linear(d_model, d_ff), nn.GELU(), nn.Linear(d_ff, d_model))

    def forward(self, x, attn_mask):
        h = self.ln1(x)
        attended, _ = self.attn(h, h, h, attn_mask=attn_mask, need_weights=False)
        x = x + attended
        return x + self.mlp(self.ln2(x))


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, d_model: int, n_layer: int, n_head: int, d_ff: int, max_seq: int):
        super().__init__()
        self.max_seq = max_seq
        self.token_embedding = nn.Embedding(vocab_size, d_model)
        self.position_embedding = nn.Embedding(max_seq, d_model)
        self.blocks = nn.ModuleList(_Block(d_model, n_head, d_ff) for _ in range(n_layer))
        self.ln_f = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, vocab_size, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        batch, length = ids.shape
        if length > self.max_seq:
            raise ValueError(f"sequence of {length} tokens exceeds max_seq {self.max_seq}")
        positions = torch.arange(length, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)[None, :, :]
        causal = torch.triu(torch.full((length, length), float("-inf"), device=ids.device), diagonal=1)
        for block in self.blocks:
            x = block(x, causal)
        return self.head(self.ln_f(x))


def build_model(vocab_size: int, preset: str = "tiny", max_seq: int = 256, seed: int = 0) -> TinyCausalLM:
    if preset not in PRESETS:
        raise ValueError(f"unknown model preset {preset!r} (have {sorted(PRESETS)})")
    generator_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        model = TinyCausalLM(vocab_size=vocab_size, max_seq=max_seq, **PRESETS[preset])
    finally:
        torch.random.set_rng_state(generator_state)
    return model


def masked_cross_entropy(
    logits: torch.Tensor, targets: torch.Tensor, loss_mask: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """(mean loss over masked tokens, per-token loss * mask).

    Tokens outside the mask contribute exactly zero; an all-False mask
    yields a zero loss with zero gradients.
    """
    per_token = nn.functional.cross_entropy(
        logits.transpose(1, 2), targets, reduction="none"
    )
    masked = per_token * loss_mask
    count = loss_mask.sum()
    if int(count) == 0:
        return logits.sum() * 0.0, masked
    return masked.sum() / count, masked


def sequence_logprob(model: TinyCausalLM, ids: list[int], score_from: int) -> float:
    """Total log-probability of ids[score_from:] given the preceding tokens."""
    if score_from < 1 or score_from >= len(ids):
        raise ValueError("score_from must leave at least one conditioning and one scored token")
    with torch.no_grad():
        tensor = torch.tensor([ids], dtype=torch.long)
        logits = model(tensor[:, :-1])
        logprobs = torch.log_softmax(logits, dim=-1)
        total = 0.0
        for position in range(score_from, len(ids)):
            total += float(logprobs[0, position - 1, ids[position]])
    return total


def greedy_generate(model: TinyCausalLM, ids: list[int], max_new_tokens: int, banned: set[int]) -> list[int]:
    """Greedy decoding; `banned` ids (specials) are never emitted."""
    if max_new_tokens < 1:
        raise ValueError("max_new_tokens must be >= 1")
    out = list(ids)
    with torch.no_grad():
        for _ in range(max_new_tokens):
            window = out[-model.max_seq :]
            logits = model(torch.tensor([window], dtype=torch.long))[0, -1]
            order = torch.argsort(logits, descending=True)
            pick = next(int(i) for i in order if int(i) not in banned)
            out.append(pick)
    return out[len(ids):]
