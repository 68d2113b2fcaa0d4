"""Self-supervised task constructors.

Each constructor turns a SentenceWindow into one or more input/output
Examples, rendered downstream as "Input: ...\\nOutput: ...". Six task
families are supported:

  NSG      next sentence generation: context in, last sentence out.
  MWP      masked word prediction: 1-20 words replaced by one mask symbol.
  LPP      last phrase prediction, generative (LPP_GEN) and binary
           classification (LPP_CLS) variants, anchored on function words.
  CL       classification over input provenance (original / shuffled /
           different-document / multi-document sentence blocks) with
           per-instance random label assignment.
  DAE      denoising autoencoding: reconstruct the window from a copy
           corrupted by word deletion and local swaps.
  GSG      gap sentence generation: recover one masked-out sentence.

Constructors are pure functions of (window, rng); shared lookup
structures (the LPP phrase bank, the CL foreign-window sampler) are built
once in a sequential pass and read-only afterwards, so windows can be
processed on any number of workers without changing output.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from icldata.corpus import Sentence, SentenceWindow
from icldata.errors import ConstructorError

__all__ = [
    "BINARY_LABEL_POOLS",
    "CLInputType",
    "Example",
    "FUNCTION_WORDS",
    "LabelPool",
    "MASK_SYMBOLS",
    "TERNARY_LABEL_POOLS",
    "Task",
    "WindowSampler",
    "build_cl",
    "build_dae",
    "build_gsg",
    "build_lpp_cls",
    "build_lpp_gen",
    "build_mwp",
    "build_nsg",
    "build_phrase_bank",
    "corrupt_labels",
    "extract_last_phrase",
    "render_example",
    "window_text",
]


class Task(str, Enum):
    NSG = "NSG"
    MWP = "MWP"
    LPP_GEN = "LPP_GEN"
    LPP_CLS = "LPP_CLS"
    CL = "CL"
    DAE = "DAE"
    GSG = "GSG"


class CLInputType(str, Enum):
    ORIGINAL = "ORIGINAL"
    SHUFFLED = "SHUFFLED"
    DIFFERENT_DOC = "DIFFERENT_DOC"
    MULTI_DOC = "MULTI_DOC"


# Mask symbols for MWP and GSG; one symbol is drawn per example.
MASK_SYMBOLS: tuple[str, ...] = (
    "___", "⟨⟨⟩⟩", "@@@", "(())", "$$$", "%%%", "###", "***", "+++",
)

# Function words anchoring the "last phrase" of a sentence (lowercased).
FUNCTION_WORDS: frozenset[str] = frozenset(
    {
        "the", "a", "an", "for", "including", "and", "in", "is", "are",
        "were", "was", "neither", "or", "nor", "be", "at", "on", "by",
        "to", "would", "will", "before", "after", "of", "about", "from",
        "excluding", "except", "during", "under", "above", "then", "into",
        "onto", "should", "shall", "must", "may", "might", "than", "with",
        "using", "can", "could", "as", "within", "without", "have", "had",
        "been",
    }
)

# Binary pools are (positive, negative) pairs; a pool is picked uniformly
# and the positive/negative strings come from the same pair.
BINARY_LABEL_POOLS: tuple[tuple[str, str], ...] = (
    ("Yes", "No"),
    ("Y", "N"),
    ("True", "False"),
    ("T", "F"),
)

TERNARY_LABEL_POOLS: tuple[tuple[str, str, str], ...] = (
    ("Positive", "Negative", "Neutral"),
    ("True", "False", "Neither"),
    ("T", "F", "N"),
    ("Yes", "No", "Unknown"),
    ("Y", "N", "U"),
)

_PHRASE_TRAILING_PUNCT = ".!?,;:\"'"


@dataclass(frozen=True)
class LabelPool:
    """An ordered set of 2 or 3 interchangeable label strings."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels) not in (2, 3):
            raise ValueError("label pool must have 2 or 3 labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label pool has duplicate labels")


@dataclass(frozen=True)
class Example:
    """One input/output pair plus provenance metadata."""

    task: Task
    input_text: str
    output_text: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.input_text:
            raise ValueError("example input_text is empty")
        if not self.output_text:
            raise ValueError("example output_text is empty")


def render_example(example: Example) -> str:
    """Linearize an example with the Input:/Output: markers."""
    return f"Input: {example.input_text}\nOutput: {example.output_text}"


def _norm(text: str) -> str:
    return " ".join(text.split())


def window_text(window: SentenceWindow) -> str:
    """Window sentences joined by single spaces (whitespace-normalized)."""
    return " ".join(_norm(s.text) for s in window.sentences)


def _window_meta(window: SentenceWindow) -> dict:
    return {"doc_id": window.doc_id, "start": window.start}


def _require_min_size(window: SentenceWindow, task: Task) -> None:
    if len(window) < 3:
        raise ConstructorError(f"{task.value} needs a window of >= 3 sentences")


def build_nsg(window: SentenceWindow, rng: np.random.Generator) -> Example:
    """Next sentence generation: all but the last sentence in, last out."""
    _require_min_size(window, Task.NSG)
    texts = [_norm(s.text) for s in window.sentences]
    return Example(
        task=Task.NSG,
        input_text=" ".join(texts[:-1]),
        output_text=texts[-1],
        meta=_window_meta(window),
    )


def build_mwp(
    window: SentenceWindow,
    rng: np.random.Generator,
    symbols: Sequence[str] = MASK_SYMBOLS,
) -> Example:
    """Masked word prediction.

    Draws k uniformly from [1, min(20, word_count // 2)], replaces k
    distinct word positions with one symbol drawn from `symbols`, and uses
    the masked-out words (original order, space-joined) as the output.
    """
    words = window_text(window).split()
    max_k = min(20, len(words) // 2)
    if max_k < 1:
        raise ConstructorError("MWP needs a window with at least 2 words")
    k = int(rng.integers(1, max_k + 1))
    positions = sorted(int(p) for p in rng.choice(len(words), size=k, replace=False))
    symbol = symbols[int(rng.integers(len(symbols)))]

    masked = list(words)
    for pos in positions:
        masked[pos] = symbol
    meta = _window_meta(window)
    meta.update({"symbol": symbol, "positions": positions})
    return Example(
        task=Task.MWP,
        input_text=" ".join(masked),
        output_text=" ".join(words[pos] for pos in positions),
        meta=meta,
    )


def extract_last_phrase(
    sentence: Sentence | str,
    table: frozenset[str] | set[str] = FUNCTION_WORDS,
) -> tuple[str, str] | None:
    """Split a sentence at its last function word.

    Finds the last word whose punctuation-stripped lowercase form is in
    `table`; if that word's 0-based position is >= ceil(word_count / 2)
    (it lies in the second half of the sentence), returns
    (prefix = words before it, phrase = that word through the end with
    final punctuation stripped). Returns None otherwise.
    """
    text = sentence.text if isinstance(sentence, Sentence) else sentence
    words = text.split()
    if not words:
        return None
    hit = -1
    for i, word in enumerate(words):
        if word.strip(_PHRASE_TRAILING_PUNCT).lower() in table:
            hit = i
    if hit < 0 or hit < math.ceil(len(words) / 2):
        return None
    phrase = " ".join(words[hit:]).rstrip(_PHRASE_TRAILING_PUNCT).rstrip()
    prefix = " ".join(words[:hit])
    if not phrase or not prefix:
        return None
    return prefix, phrase


def _phrase_head(phrase: str) -> str:
    return phrase.split()[0].strip(_PHRASE_TRAILING_PUNCT).lower()


def build_phrase_bank(
    windows: Sequence[SentenceWindow],
    table: frozenset[str] | set[str] = FUNCTION_WORDS,
) -> dict[str, list[str]]:
    """Harvest last phrases keyed by their leading function word.

    Built once per synthesis run (sequential pass); negatives for LPP_CLS
    are drawn from it. Phrases are deduplicated and sorted for determinism.
    """
    bank: dict[str, set[str]] = {}
    for window in windows:
        extracted = extract_last_phrase(window.sentences[-1], table)
        if extracted is None:
            continue
        _, phrase = extracted
        bank.setdefault(_phrase_head(phrase), set()).add(phrase)
    return {word: sorted(phrases) for word, phrases in bank.items()}


def _lpp_parts(
    window: SentenceWindow, table: frozenset[str] | set[str]
) -> tuple[str, str, str] | None:
    _require_min_size(window, Task.LPP_GEN)
    extracted = extract_last_phrase(window.sentences[-1], table)
    if extracted is None:
        return None
    prefix, phrase = extracted
    context = " ".join(_norm(s.text) for s in window.sentences[:-1])
    return context, _norm(prefix), _norm(phrase)


def build_lpp_gen(
    window: SentenceWindow,
    table: frozenset[str] | set[str],
    rng: np.random.Generator,
) -> Example | None:
    """Generative last phrase prediction; None when extraction fails."""
    parts = _lpp_parts(window, table)
    if parts is None:
        return None
    context, prefix, phrase = parts
    meta = _window_meta(window)
    meta["function_word"] = _phrase_head(phrase)
    return Example(
        task=Task.LPP_GEN,
        input_text=f"{context} Question: {prefix} ?",
        output_text=phrase,
        meta=meta,
    )


def build_lpp_cls(
    window: SentenceWindow,
    table: frozenset[str] | set[str],
    neg_bank: dict[str, list[str]],
    rng: np.random.Generator,
) -> Example | None:
    """Binary last phrase prediction.

    With probability 1/2 the rendered answer is the true phrase (positive
    label), otherwise a negative phrase sharing the same leading function
    word. Label strings come from one binary pool; the pool doubles as the
    packing key so every packed instance carries a single label map.
    """
    parts = _lpp_parts(window, table)
    if parts is None:
        return None
    context, prefix, phrase = parts
    head = _phrase_head(phrase)
    negatives = [p for p in neg_bank.get(head, ()) if p != phrase]
    if not negatives:
        return None

    pool = BINARY_LABEL_POOLS[int(rng.integers(len(BINARY_LABEL_POOLS)))]
    is_positive = bool(rng.integers(2))
    answer = phrase if is_positive else negatives[int(rng.integers(len(negatives)))]
    meta = _window_meta(window)
    meta.update(
        {
            "function_word": head,
            "is_positive": is_positive,
            "pool": list(pool),
            "pack_key": "|".join(pool),
        }
    )
    return Example(
        task=Task.LPP_CLS,
        input_text=f"{context} Question: {prefix} ? Answer: {answer}",
        output_text=pool[0] if is_positive else pool[1],
        meta=meta,
    )


class WindowSampler:
    """Uniform sampler over windows from *other* documents.

    Read-only after construction; safe to share across workers.
    """

    def __init__(self, windows: Sequence[SentenceWindow]):
        self._windows = tuple(windows)

    def sample_window(self, exclude_doc: str, rng: np.random.Generator) -> SentenceWindow:
        if not self._windows:
            raise ConstructorError("window sampler is empty")
        for _ in range(100):
            candidate = self._windows[int(rng.integers(len(self._windows)))]
            if candidate.doc_id != exclude_doc:
                return candidate
        foreign = [w for w in self._windows if w.doc_id != exclude_doc]
        if not foreign:
            raise ConstructorError(f"no window outside document {exclude_doc!r}")
        return foreign[int(rng.integers(len(foreign)))]

    def sample_run(self, length: int, exclude_doc: str, rng: np.random.Generator) -> list[str]:
        """A run of `length` consecutive sentence texts from a foreign window."""
        window = self.sample_window(exclude_doc, rng)
        if length > len(window):
            raise ConstructorError(f"no foreign run of {length} sentences available")
        offset = int(rng.integers(0, len(window) - length + 1))
        return [_norm(s.text) for s in window.sentences[offset : offset + length]]


def _shuffled_block(texts: list[str], rng: np.random.Generator) -> list[str]:
    if len(set(texts)) < 2:
        # All sentences identical: any permutation equals the identity.
        return list(texts)
    for _ in range(100):
        perm = [texts[int(i)] for i in rng.permutation(len(texts))]
        if perm != texts:
            return perm
    return list(reversed(texts))


def build_cl(
    window: SentenceWindow,
    sampler: WindowSampler,
    rng: np.random.Generator,
) -> list[Example]:
    """Classification over input provenance.

    Picks ORIGINAL plus one or two other input types, builds one sentence
    block per type, and assigns label strings to types by a fresh random
    bijection from a pool of matching arity. The returned examples share a
    group id and label map in meta; the packer keeps the group in one
    instance and never mixes label maps.
    """
    _require_min_size(window, Task.CL)
    originals = [_norm(s.text) for s in window.sentences]
    n = len(originals)

    extra_count = 1 + int(rng.integers(2))
    others = [CLInputType.SHUFFLED, CLInputType.DIFFERENT_DOC, CLInputType.MULTI_DOC]
    chosen_extra = [others[int(i)] for i in rng.choice(len(others), size=extra_count, replace=False)]
    types = [CLInputType.ORIGINAL] + chosen_extra

    pools = BINARY_LABEL_POOLS if len(types) == 2 else TERNARY_LABEL_POOLS
    pool = pools[int(rng.integers(len(pools)))]
    assignment = [int(i) for i in rng.permutation(len(types))]
    label_map = {kind.value: pool[assignment[i]] for i, kind in enumerate(types)}

    blocks: dict[CLInputType, list[str]] = {}
    for kind in types:
        if kind is CLInputType.ORIGINAL:
            blocks[kind] = originals
        elif kind is CLInputType.SHUFFLED:
            blocks[kind] = _shuffled_block(originals, rng)
        elif kind is CLInputType.DIFFERENT_DOC:
            foreign = sampler.sample_window(window.doc_id, rng)
            if len(foreign) != n:
                raise ConstructorError("foreign window length mismatch")
            blocks[kind] = [_norm(s.text) for s in foreign.sentences]
        else:  # MULTI_DOC: replace ceil(n/2) slots with a consecutive foreign run
            replaced = math.ceil(n / 2)
            run = sampler.sample_run(replaced, window.doc_id, rng)
            if int(rng.integers(2)) == 0:
                blocks[kind] = run + originals[replaced:]
            else:
                blocks[kind] = originals[: n - replaced] + run

    group = f"{window.doc_id}:{window.start}"
    pack_key = "|".join(f"{kind}={label}" for kind, label in sorted(label_map.items()))
    order = [types[int(i)] for i in rng.permutation(len(types))]

    examples = []
    for kind in order:
        meta = _window_meta(window)
        meta.update(
            {
                "kind": kind.value,
                "pool": list(pool),
                "label_map": dict(label_map),
                "pack_group": group,
                "pack_key": pack_key,
            }
        )
        examples.append(
            Example(
                task=Task.CL,
                input_text=" ".join(blocks[kind]),
                output_text=label_map[kind.value],
                meta=meta,
            )
        )
    return examples


def build_dae(
    window: SentenceWindow,
    rng: np.random.Generator,
    deletion_p: float = 0.1,
    swap_p: float = 0.1,
    swap_window: int = 3,
) -> Example:
    """Denoising autoencoding.

    The input is the window corrupted by independent word deletion
    (probability deletion_p) followed by local order swaps (each position
    swaps with a neighbor at distance < swap_window with probability
    swap_p); the output is the original window text.
    """
    _require_min_size(window, Task.DAE)
    original = window_text(window)
    words = original.split()

    kept = [w for w in words if float(rng.random()) >= deletion_p]
    if not kept:
        kept = [words[0]]
    for i in range(len(kept)):
        if float(rng.random()) < swap_p:
            j = i + 1 + int(rng.integers(swap_window - 1))
            if j < len(kept):
                kept[i], kept[j] = kept[j], kept[i]
    return Example(
        task=Task.DAE,
        input_text=" ".join(kept),
        output_text=original,
        meta=_window_meta(window),
    )


def build_gsg(
    window: SentenceWindow,
    rng: np.random.Generator,
    symbols: Sequence[str] = MASK_SYMBOLS,
) -> Example:
    """Gap sentence generation: one sentence slot becomes a mask symbol."""
    _require_min_size(window, Task.GSG)
    texts = [_norm(s.text) for s in window.sentences]
    gap = int(rng.integers(len(texts)))
    symbol = symbols[int(rng.integers(len(symbols)))]
    masked = list(texts)
    masked[gap] = symbol
    meta = _window_meta(window)
    meta.update({"symbol": symbol, "gap_index": gap})
    return Example(
        task=Task.GSG,
        input_text=" ".join(masked),
        output_text=texts[gap],
        meta=meta,
    )


def corrupt_labels(
    example: Example,
    rng: np.random.Generator,
    donor_outputs: Sequence[str] | None = None,
) -> Example:
    """Random-label corruption.

    Classification tasks (LPP_CLS, CL) resample the label uniformly from
    the example's own pool; generation tasks replace the output with a
    random same-task output drawn from `donor_outputs`.
    """
    if example.task in (Task.LPP_CLS, Task.CL):
        pool = example.meta.get("pool")
        if not pool:
            raise ConstructorError("classification example lacks a label pool in meta")
        new_output = pool[int(rng.integers(len(pool)))]
    else:
        if not donor_outputs:
            raise ConstructorError("empty donor pool for label corruption")
        new_output = donor_outputs[int(rng.integers(len(donor_outputs)))]
    meta = dict(example.meta)
    meta["corrupted"] = True
    return replace(example, output_text=new_output, meta=meta)
