import pytest

from icldata.corpus import CorpusSampleConfig, Document, Sentence, SentenceWindow, segment, windows
from icldata.seeding import derive_rng
from icldata.toytext import document_text


def make_window(texts, doc_id="doc/one#0", start=0):
    sentences = tuple(Sentence.from_text(t, index=start + i) for i, t in enumerate(texts))
    return SentenceWindow(doc_id=doc_id, start=start, sentences=sentences)


def make_document(texts, doc_id="doc/one#0", domain="doc"):
    sentences = tuple(Sentence.from_text(t, index=i) for i, t in enumerate(texts))
    return Document(id=doc_id, domain=domain, sentences=sentences)


@pytest.fixture(scope="session")
def toy_windows():
    """A few hundred topic-structured windows across two synthetic domains."""
    cfg = CorpusSampleConfig(docs_per_domain={"alpha": 100, "beta": 100})
    out = []
    topics = ("river", "forest", "desert", "city", "farm", "coast")
    for domain in ("alpha", "beta"):
        for i in range(60):
            rng = derive_rng("toy", domain, i)
            text = document_text(topics[i % len(topics)], 12, rng)
            doc = Document(
                id=f"{domain}/docs.jsonl#{i}",
                domain=domain,
                sentences=tuple(segment(text)),
            )
            out.extend(windows(doc, cfg))
    return out
