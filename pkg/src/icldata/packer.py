"""Pack same-task examples into token-budgeted training instances.

An instance is a newline-joined run of rendered examples from one task,
with character spans marking each example's output text (the only region
a trainer computes loss on). Examples are drawn in random order without
replacement; the first example that would overflow the budget seeds the
next instance. Examples that declare meta["pack_group"] are kept together
as one unit, and examples with different meta["pack_key"] values (label
maps) never share an instance.
"""

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from icldata.errors import ConfigError
from icldata.taskgen import Example, render_example

logger = logging.getLogger(__name__)

__all__ = [
    "Instance",
    "PackDecision",
    "TokenBudget",
    "count_tokens",
    "pack",
    "register_counter",
    "resolve_counter",
    "subsample",
    "vocab_counter",
]


def _whitespace_tokens(text: str) -> int:
    return len(text.split())


def _byte_tokens(text: str) -> int:
    return len(text.encode("utf-8"))


_COUNTERS: dict[str, Callable[[str], int]] = {
    "whitespace": _whitespace_tokens,
    "bytes": _byte_tokens,
}


def register_counter(tag: str, fn: Callable[[str], int]) -> None:
    """Register a token-counting function under a budget tag."""
    _COUNTERS[tag] = fn


def vocab_counter(vocab: Iterable[str]) -> Callable[[str], int]:
    """Counter for an external subword vocabulary (one unit per line file).

    Each whitespace word is segmented by greedy longest-prefix match
    against the vocabulary; unmatched characters count one token each.
    """
    units = {u for u in vocab if u}
    max_len = max((len(u) for u in units), default=1)

    def count(text: str) -> int:
        total = 0
        for word in text.split():
            i = 0
            while i < len(word):
                for j in range(min(len(word), i + max_len), i, -1):
                    if word[i:j] in units:
                        total += 1
                        i = j
                        break
                else:
                    total += 1
                    i += 1
        return total

    return count


def resolve_counter(tag: str) -> Callable[[str], int]:
    if tag in _COUNTERS:
        return _COUNTERS[tag]
    if tag.startswith("vocab:"):
        path = tag.split(":", 1)[1]
        with open(path, encoding="utf-8") as handle:
            fn = vocab_counter(line.rstrip("\n") for line in handle)
        _COUNTERS[tag] = fn
        return fn
    raise ConfigError(f"unknown token counter {tag!r}")


def count_tokens(text: str, tag: str = "whitespace") -> int:
    return resolve_counter(tag)(text)


@dataclass(frozen=True)
class TokenBudget:
    """Maximum tokens per instance plus the counter that measures them."""

    max_tokens: int = 2048
    counter: str = "whitespace"

    def __post_init__(self) -> None:
        if self.max_tokens < 8:
            raise ConfigError("max_tokens must be >= 8")

    @property
    def counter_fn(self) -> Callable[[str], int]:
        return resolve_counter(self.counter)


@dataclass(frozen=True)
class Instance:
    """A packed training sequence.

    spans are (start, end) character offsets (Unicode scalar values) into
    text; text[start:end] is exactly one member example's output text.
    """

    task: str
    text: str
    spans: tuple[tuple[int, int], ...]
    example_count: int
    seed_trace: tuple[int, ...] = ()


@dataclass
class PackDecision:
    """Why one instance was closed: the overflow candidate, or exhaustion."""

    instance_index: int
    next_candidate: str | None  # rendered text of the unit that overflowed


@dataclass
class _Draft:
    examples: list[Example] = field(default_factory=list)
    text: str = ""

    def extended_text(self, unit_text: str) -> str:
        return unit_text if not self.text else f"{self.text}\n{unit_text}"


def _finish(draft: _Draft, task: str, trace: tuple[int, ...]) -> Instance:
    spans = []
    offset = 0
    for example in draft.examples:
        rendered = render_example(example)
        start = offset + len(f"Input: {example.input_text}\nOutput: ")
        spans.append((start, offset + len(rendered)))
        offset += len(rendered) + 1  # separating newline
    return Instance(
        task=task,
        text=draft.text,
        spans=tuple(spans),
        example_count=len(draft.examples),
        seed_trace=trace,
    )


def pack(
    examples: Iterable[Example],
    budget: TokenBudget,
    rng: np.random.Generator,
    log: list[PackDecision] | None = None,
    counters: dict | None = None,
) -> list[Instance]:
    """Pack a pool of same-task examples into instances.

    Deterministic given (pool order, rng state). A unit that alone exceeds
    the budget is dropped with a counted warning
    (counters["oversize_examples"]).
    """
    pool = list(examples)
    if not pool:
        return []
    tasks = {e.task for e in pool}
    if len(tasks) != 1:
        raise ValueError(f"pack expects a single task, got {sorted(t.value for t in tasks)}")
    task = pool[0].task.value
    counter = budget.counter_fn

    # Atomic units: examples sharing meta["pack_group"] stay together.
    units: list[list[Example]] = []
    group_index: dict[str, int] = {}
    for example in pool:
        group = example.meta.get("pack_group")
        if group is None:
            units.append([example])
        elif group in group_index:
            units[group_index[group]].append(example)
        else:
            group_index[group] = len(units)
            units.append([example])

    # Partitions: one instance never mixes pack_key values (label maps).
    partitions: dict[str, list[list[Example]]] = {}
    for unit in units:
        partitions.setdefault(unit[0].meta.get("pack_key", ""), []).append(unit)

    instances: list[Instance] = []
    for part_index, key in enumerate(sorted(partitions)):
        part_units = partitions[key]
        order = rng.permutation(len(part_units))
        draft = _Draft()
        for position in order:
            unit = part_units[int(position)]
            unit_text = "\n".join(render_example(e) for e in unit)
            if counter(unit_text) > budget.max_tokens:
                if counters is not None:
                    counters["oversize_examples"] = counters.get("oversize_examples", 0) + 1
                logger.warning("dropping unit exceeding the token budget (%s)", task)
                continue
            candidate = draft.extended_text(unit_text)
            if counter(candidate) <= budget.max_tokens:
                draft.examples.extend(unit)
                draft.text = candidate
            else:
                instances.append(_finish(draft, task, (part_index, len(instances))))
                if log is not None:
                    log.append(PackDecision(len(instances) - 1, unit_text))
                draft = _Draft(examples=list(unit), text=unit_text)
        if draft.examples:
            instances.append(_finish(draft, task, (part_index, len(instances))))
            if log is not None:
                log.append(PackDecision(len(instances) - 1, None))
    return instances


def subsample(
    instances: Sequence[Instance],
    ratio: float,
    rng: np.random.Generator,
) -> list[Instance]:
    """Keep round(ratio * n) instances.

    ratio <= 1 samples without replacement; ratio > 1 keeps every original
    once and fills the excess by re-sampling with replacement.
    """
    if ratio <= 0:
        raise ConfigError("subsample ratio must be > 0")
    n = len(instances)
    if n == 0:
        return []
    target = int(round(ratio * n))
    if ratio <= 1:
        chosen = rng.permutation(n)[:target]
        return [instances[int(i)] for i in chosen]
    extra = rng.integers(0, n, size=target - n)
    kept = [instances[int(i)] for i in rng.permutation(n)]
    kept.extend(instances[int(i)] for i in extra)
    return kept
