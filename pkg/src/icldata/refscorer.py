"""Built-in deterministic scorer: an add-k n-gram language model.

Whitespace-tokenized counts up to a fixed order; conditionals are add-k
smoothed at the longest context actually observed (backing off to shorter
contexts, ultimately the unigram distribution). Out-of-vocabulary tokens
map to a reserved UNK symbol. The model is immutable after fitting and
safe for concurrent scoring.

NgramScorer adds an optional prompt-adaptation mode: tokens of the prefix
(and of the continuation, as it is consumed) are counted into a
per-request cache that is merged with the fitted counts. That gives the
scorer a primitive form of in-context learning -- label strings shown in
demonstrations become likelier after the same marker tokens -- while
keeping scoring deterministic and additive under the chain rule.
"""

import json
import math
import os
from collections.abc import Iterable

from icldata.evaluator import ScorerInterface

UNK = "\x00unk\x00"
_CTX_SEP = "\x1f"
_FORMAT = "icldata-ngram"
_VERSION = 1

__all__ = ["NgramModel", "NgramScorer", "UNK", "fit", "generate", "load_model", "save_model", "score"]


class NgramModel:
    """Counts and smoothing state for an order-n language model."""

    def __init__(self, order: int, k: float):
        if order < 1:
            raise ValueError("order must be >= 1")
        if k <= 0:
            raise ValueError("smoothing constant k must be > 0")
        self.order = order
        self.k = k
        self.vocab: set[str] = set()
        # counts[n][context (n-1 tokens)][token] -> occurrences
        self.counts: dict[int, dict[tuple[str, ...], dict[str, int]]] = {
            n: {} for n in range(1, order + 1)
        }
        self.totals: dict[int, dict[tuple[str, ...], int]] = {n: {} for n in range(1, order + 1)}

    def _add(self, context: tuple[str, ...], token: str) -> None:
        n = len(context) + 1
        bucket = self.counts[n].setdefault(context, {})
        bucket[token] = bucket.get(token, 0) + 1
        self.totals[n][context] = self.totals[n].get(context, 0) + 1

    def observe(self, tokens: list[str]) -> None:
        for i, token in enumerate(tokens):
            self.vocab.add(token)
            for n in range(1, self.order + 1):
                if i - n + 1 < 0:
                    break
                self._add(tuple(tokens[i - n + 1 : i]), token)

    def map_token(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def conditional(self, context: tuple[str, ...], token: str) -> float:
        """P(token | context) at the longest observed context suffix."""
        vocab_size = len(self.vocab) + 1  # + UNK
        token = self.map_token(token)
        context = tuple(self.map_token(t) for t in context[max(0, len(context) - self.order + 1) :])
        for width in range(len(context), -1, -1):
            ctx = context[len(context) - width :]
            total = self.totals[width + 1].get(ctx)
            if total:
                count = self.counts[width + 1][ctx].get(token, 0)
                return (count + self.k) / (total + self.k * vocab_size)
        raise ValueError("model has no unigram counts; was it fitted on an empty corpus?")


def fit(corpus: Iterable[str], order: int = 3, k: float = 0.1) -> NgramModel:
    """Count all n-grams up to `order` over whitespace tokens."""
    model = NgramModel(order=order, k=k)
    for text in corpus:
        model.observe(text.split())
    if not model.vocab:
        raise ValueError("cannot fit an n-gram model on an empty corpus")
    return model


def score(model: NgramModel, prefix: str, continuation: str) -> tuple[float, int]:
    """Total natural-log probability and token count of `continuation`."""
    tokens = continuation.split()
    if not tokens:
        raise ValueError("continuation must contain at least one token")
    stream = prefix.split()
    total = 0.0
    for token in tokens:
        total += math.log(model.conditional(tuple(stream), token))
        stream.append(token)
    return total, len(tokens)


def _greedy_step(model: NgramModel, stream: list[str]) -> str:
    """Most probable next token; ties broken lexicographically."""
    context = tuple(model.map_token(t) for t in stream[max(0, len(stream) - model.order + 1) :])
    for width in range(len(context), -1, -1):
        ctx = context[len(context) - width :]
        bucket = {tok: c for tok, c in model.counts[width + 1].get(ctx, {}).items() if tok != UNK}
        if bucket:
            best_count = max(bucket.values())
            return min(tok for tok, c in bucket.items() if c == best_count)
    return min(model.vocab)


def generate(model: NgramModel, prefix: str, max_new_tokens: int, stop_token: str | None = None) -> str:
    """Greedy decoding: argmax token per step, lexicographic tie-break."""
    if max_new_tokens < 1:
        raise ValueError("max_new_tokens must be >= 1")
    stream = prefix.split()
    out: list[str] = []
    for _ in range(max_new_tokens):
        token = _greedy_step(model, stream)
        if stop_token is not None and token == stop_token:
            break
        out.append(token)
        stream.append(token)
    return " ".join(out)


def save_model(model: NgramModel, path: str | os.PathLike) -> None:
    """Serialize counts to a versioned, byte-stable JSON file."""
    levels = {
        str(n): {_CTX_SEP.join(ctx): dict(sorted(bucket.items())) for ctx, bucket in table.items()}
        for n, table in model.counts.items()
    }
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "order": model.order,
        "k": model.k,
        "vocab": sorted(model.vocab),
        "levels": levels,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, ensure_ascii=True, separators=(",", ":"))


def load_model(path: str | os.PathLike) -> NgramModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != _FORMAT or payload.get("version") != _VERSION:
        raise ValueError(f"{path}: not a {_FORMAT} v{_VERSION} model file")
    model = NgramModel(order=payload["order"], k=payload["k"])
    model.vocab = set(payload["vocab"])
    for n_str, table in payload["levels"].items():
        n = int(n_str)
        for ctx_str, bucket in table.items():
            ctx = tuple(ctx_str.split(_CTX_SEP)) if ctx_str else ()
            model.counts[n][ctx] = dict(bucket)
            model.totals[n][ctx] = sum(bucket.values())
    return model


class _PromptCache:
    """Per-request counts over the tokens consumed so far."""

    def __init__(self, order: int, weight: float):
        self.order = order
        self.weight = weight
        self.types: set[str] = set()
        self.counts: dict[int, dict[tuple[str, ...], dict[str, float]]] = {
            n: {} for n in range(1, order + 1)
        }
        self.totals: dict[int, dict[tuple[str, ...], float]] = {n: {} for n in range(1, order + 1)}
        self.stream: list[str] = []

    def consume(self, token: str) -> None:
        self.types.add(token)
        for n in range(1, self.order + 1):
            if len(self.stream) - n + 1 < 0:
                break
            ctx = tuple(self.stream[len(self.stream) - n + 1 :])
            bucket = self.counts[n].setdefault(ctx, {})
            bucket[token] = bucket.get(token, 0.0) + self.weight
            self.totals[n][ctx] = self.totals[n].get(ctx, 0.0) + self.weight
        self.stream.append(token)


class NgramScorer(ScorerInterface):
    """ScorerInterface over a fitted NgramModel.

    With adapt=True every request first counts the prefix into a fresh
    cache; each continuation token is scored against base + cache counts
    and then consumed into the cache. Prompt tokens thereby extend the
    effective vocabulary for the duration of the request.
    """

    concurrent_safe = True

    def __init__(self, model: NgramModel, adapt: bool = False, cache_weight: float = 1.0):
        self.model = model
        self.adapt = adapt
        self.cache_weight = cache_weight

    # -- plain delegation -------------------------------------------------

    def score(self, prefix: str, continuation: str) -> tuple[float, int]:
        if not self.adapt:
            return score(self.model, prefix, continuation)
        tokens = continuation.split()
        if not tokens:
            raise ValueError("continuation must contain at least one token")
        cache = self._cache_for(prefix)
        total = 0.0
        for token in tokens:
            total += math.log(self._adaptive_conditional(cache, token))
            cache.consume(token)
        return total, len(tokens)

    def generate(self, prefix: str, max_new_tokens: int) -> str:
        if not self.adapt:
            return generate(self.model, prefix, max_new_tokens)
        if max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        cache = self._cache_for(prefix)
        out: list[str] = []
        for _ in range(max_new_tokens):
            token = self._adaptive_greedy(cache)
            out.append(token)
            cache.consume(token)
        return " ".join(out)

    # -- adaptive internals ------------------------------------------------

    def _cache_for(self, prefix: str) -> _PromptCache:
        cache = _PromptCache(self.model.order, self.cache_weight)
        for token in prefix.split():
            cache.consume(token)
        return cache

    def _known(self, cache: _PromptCache, token: str) -> str:
        if token in self.model.vocab or token in cache.types:
            return token
        return UNK

    def _adaptive_conditional(self, cache: _PromptCache, token: str) -> float:
        model = self.model
        vocab_size = len(model.vocab | cache.types) + 1
        token = self._known(cache, token)
        stream = cache.stream
        context = tuple(self._known(cache, t) for t in stream[max(0, len(stream) - model.order + 1) :])
        for width in range(len(context), -1, -1):
            ctx = context[len(context) - width :]
            base_total = model.totals[width + 1].get(ctx, 0)
            cache_total = cache.totals[width + 1].get(ctx, 0.0)
            total = base_total + cache_total
            if total:
                count = model.counts[width + 1].get(ctx, {}).get(token, 0) + cache.counts[
                    width + 1
                ].get(ctx, {}).get(token, 0.0)
                return (count + model.k) / (total + model.k * vocab_size)
        raise ValueError("model has no unigram counts")

    def _adaptive_greedy(self, cache: _PromptCache) -> str:
        model = self.model
        stream = cache.stream
        context = tuple(self._known(cache, t) for t in stream[max(0, len(stream) - model.order + 1) :])
        for width in range(len(context), -1, -1):
            ctx = context[len(context) - width :]
            merged: dict[str, float] = {
                tok: float(c)
                for tok, c in model.counts[width + 1].get(ctx, {}).items()
                if tok != UNK
            }
            for tok, c in cache.counts[width + 1].get(ctx, {}).items():
                if tok != UNK:
                    merged[tok] = merged.get(tok, 0.0) + c
            if merged:
                best_count = max(merged.values())
                return min(tok for tok, c in merged.items() if c == best_count)
        return min(model.vocab | cache.types)
