"""Corpus ingestion, sentence segmentation, document sampling, windowing.

Documents come in as plain text files (one document per file) or as
line-delimited JSON records {"id": ..., "text": ...}. They are segmented
into sentences by a deterministic rule-based splitter, sampled per domain
with a reservoir, and cut into consecutive non-overlapping sentence
windows that feed the task constructors.
"""

import json
import logging
import os
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

from icldata.errors import ConfigError
from icldata.seeding import derive_rng

logger = logging.getLogger(__name__)

# Trailing tokens that end with '.' but do not end a sentence.
ABBREVIATIONS = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "sr.", "jr.", "rev.",
        "gen.", "sen.", "rep.", "gov.", "capt.", "sgt.", "col.", "lt.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "fig.", "no.", "vol.",
        "inc.", "ltd.", "co.", "corp.", "dept.", "est.", "approx.", "jan.",
        "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.",
        "oct.", "nov.", "dec.", "u.s.", "u.k.", "a.m.", "p.m.",
    }
)

# Candidate boundary: sentence-final punctuation (plus optional closing
# quotes/brackets), whitespace, then something that looks like a sentence
# start (uppercase, digit, or opening quote/bracket).
_BOUNDARY = re.compile(r'([.!?]+["\')\]]*)\s+(?=["\'(\[“‘]*[A-Z0-9])')
_INITIAL = re.compile(r"^[A-Z]\.$")
_CLOSERS = "\"')]"


@dataclass(frozen=True)
class Sentence:
    """One sentence with its position in the source document."""

    text: str
    index: int
    word_count: int

    @classmethod
    def from_text(cls, text: str, index: int) -> "Sentence":
        return cls(text=text, index=index, word_count=len(text.split()))

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sentence text is empty")
        if self.word_count < 1:
            raise ValueError("sentence has no words")


@dataclass(frozen=True)
class Document:
    """An ordered list of sentences under a stable id and a domain label."""

    id: str
    domain: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError(f"document {self.id!r} has no sentences")
        for prev, cur in zip(self.sentences, self.sentences[1:]):
            if cur.index != prev.index + 1:
                raise ValueError(f"document {self.id!r} sentence indices not consecutive")


@dataclass(frozen=True)
class SentenceWindow:
    """Consecutive sentences from one document."""

    doc_id: str
    start: int
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if len(self.sentences) < 3:
            raise ValueError("window shorter than 3 sentences")
        for prev, cur in zip(self.sentences, self.sentences[1:]):
            if cur.index != prev.index + 1:
                raise ValueError("window sentences not consecutive")
        if self.sentences[0].index != self.start:
            raise ValueError("window start does not match first sentence index")

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class CorpusSampleConfig:
    """Sampling and windowing knobs.

    docs_per_domain maps each expected domain label to the number of
    documents kept for it (a per-domain reservoir sample).
    """

    docs_per_domain: dict[str, int] = field(default_factory=dict)
    seed: int = 0
    min_sentence_words: int = 4
    min_window_sentences: int = 3

    def __post_init__(self) -> None:
        if self.min_window_sentences < 3:
            raise ConfigError("min_window_sentences must be >= 3")
        if self.min_sentence_words < 1:
            raise ConfigError("min_sentence_words must be >= 1")
        for domain, count in self.docs_per_domain.items():
            if count < 0:
                raise ConfigError(f"negative document count for domain {domain!r}")


def segment(text: str) -> list[Sentence]:
    """Split text into sentences with a deterministic rule-based splitter.

    Splits on . ! ? followed by whitespace and an uppercase letter, digit,
    or opening quote, unless the token carrying the punctuation is a known
    abbreviation or a single-letter initial ("E."). Original spelling is
    preserved; joining the sentences with single spaces reproduces the
    input modulo whitespace normalization.
    """
    pieces: list[str] = []
    last = 0
    for match in _BOUNDARY.finditer(text):
        if match.start() < last:
            continue
        punct_end = match.end(1)
        token_start = punct_end
        while token_start > last and not text[token_start - 1].isspace():
            token_start -= 1
        token = text[token_start:punct_end].rstrip(_CLOSERS)
        if token.lower() in ABBREVIATIONS or _INITIAL.match(token):
            continue
        pieces.append(text[last:punct_end])
        last = match.end()
    pieces.append(text[last:])

    sentences = []
    for piece in pieces:
        trimmed = piece.strip()
        if trimmed:
            sentences.append(Sentence.from_text(trimmed, index=len(sentences)))
    return sentences


def _document_from_text(text: str, doc_id: str, domain: str) -> Document | None:
    sentences = segment(text)
    if not sentences:
        return None
    return Document(id=doc_id, domain=domain, sentences=tuple(sentences))


def ingest(path: str | os.PathLike, domain: str, counters: dict | None = None) -> Iterator[Document]:
    """Yield Documents from a corpus file.

    Plain-text files (anything not named *.jsonl / *.ndjson) become a
    single document; JSONL files contribute one document per record with
    a required "text" field. Document ids are "<domain>/<file>#<ordinal>".
    Empty documents are skipped and counted under counters["empty_documents"].
    """
    path = os.fspath(path)
    base = os.path.basename(path)
    is_jsonl = base.endswith((".jsonl", ".ndjson"))
    ordinal = 0
    with open(path, encoding="utf-8") as handle:
        if is_jsonl:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}: malformed JSON record at line {lineno}: {exc}") from exc
                if not isinstance(record, dict) or not isinstance(record.get("text"), str):
                    raise ValueError(f"{path}: record at line {lineno} lacks a string 'text' field")
                doc = _document_from_text(record["text"], f"{domain}/{base}#{ordinal}", domain)
                ordinal += 1
                if doc is None:
                    _count(counters, "empty_documents")
                    logger.warning("skipping empty document %s line %d", path, lineno)
                    continue
                yield doc
        else:
            doc = _document_from_text(handle.read(), f"{domain}/{base}#0", domain)
            if doc is None:
                _count(counters, "empty_documents")
                logger.warning("skipping empty document %s", path)
            else:
                yield doc


def _count(counters: dict | None, key: str) -> None:
    if counters is not None:
        counters[key] = counters.get(key, 0) + 1


def sample_documents(docs: Iterable[Document], cfg: CorpusSampleConfig) -> list[Document]:
    """Reservoir-sample docs_per_domain[domain] documents per domain.

    Deterministic given (cfg.seed, stream order); a domain with fewer
    documents than requested keeps them all. Documents from a domain not
    present in cfg.docs_per_domain are a configuration error. The result
    preserves stream order.
    """
    reservoirs: dict[str, list[tuple[int, Document]]] = {d: [] for d in cfg.docs_per_domain}
    seen: dict[str, int] = {d: 0 for d in cfg.docs_per_domain}
    rngs = {d: derive_rng(cfg.seed, "sample_documents", d) for d in cfg.docs_per_domain}

    for position, doc in enumerate(docs):
        if doc.domain not in reservoirs:
            raise ConfigError(f"document domain {doc.domain!r} has no docs_per_domain entry")
        want = cfg.docs_per_domain[doc.domain]
        reservoir = reservoirs[doc.domain]
        i = seen[doc.domain]
        if want > 0:
            if len(reservoir) < want:
                reservoir.append((position, doc))
            else:
                j = int(rngs[doc.domain].integers(0, i + 1))
                if j < want:
                    reservoir[j] = (position, doc)
        seen[doc.domain] += 1

    kept = [entry for reservoir in reservoirs.values() for entry in reservoir]
    kept.sort(key=lambda entry: entry[0])
    return [doc for _, doc in kept]


def windows(doc: Document, cfg: CorpusSampleConfig) -> Iterator[SentenceWindow]:
    """Yield non-overlapping windows of min_window_sentences sentences.

    A sentence shorter than min_sentence_words words invalidates the
    window being accumulated (the window is discarded, never shortened);
    accumulation restarts after it.
    """
    size = cfg.min_window_sentences
    buffer: list[Sentence] = []
    for sentence in doc.sentences:
        if sentence.word_count < cfg.min_sentence_words:
            buffer.clear()
            continue
        buffer.append(sentence)
        if len(buffer) == size:
            yield SentenceWindow(doc_id=doc.id, start=buffer[0].index, sentences=tuple(buffer))
            buffer.clear()
