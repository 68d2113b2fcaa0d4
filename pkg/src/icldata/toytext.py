"""Deterministic synthetic English-like corpus.

Small topic-structured documents for demos, tests, and self-contained
end-to-end runs: every document sticks to one topic vocabulary, and every
sentence ends with a "the <noun>" phrase, so last-phrase classification
has a learnable correctness signal (does the answer's noun belong to the
context's topic?) while staying segmenter- and window-friendly.
"""

import json
import os

from icldata.seeding import derive_rng

TOPICS: dict[str, tuple[str, ...]] = {
    "river": ("river", "stream", "boat", "ferry", "shore", "current", "bridge", "harbor"),
    "forest": ("forest", "pine", "trail", "clearing", "thicket", "canopy", "moss", "grove"),
    "desert": ("desert", "dune", "oasis", "canyon", "mesa", "cactus", "ridge", "basin"),
    "city": ("city", "street", "market", "station", "tower", "plaza", "alley", "tramline"),
    "farm": ("farm", "barn", "meadow", "fence", "orchard", "silo", "pasture", "furrow"),
    "coast": ("coast", "cliff", "lagoon", "jetty", "tide", "cove", "dockyard", "breaker"),
    "mountain": ("mountain", "summit", "glacier", "slope", "pass", "ledge", "scree", "saddle"),
    "village": ("village", "chapel", "well", "granary", "lane", "hedge", "mill", "square"),
}

VERBS = ("moved", "rested", "turned", "stayed", "drifted", "settled", "waited", "lingered", "shifted", "paused")
ADJECTIVES = ("quiet", "bright", "narrow", "distant", "heavy", "pale", "warm", "steep")
CONNECTORS = ("near", "beside", "behind", "beyond", "under", "past")


def _sentence(nouns: tuple[str, ...], rng) -> str:
    n1 = nouns[int(rng.integers(len(nouns)))]
    n2 = nouns[int(rng.integers(len(nouns)))]
    verb = VERBS[int(rng.integers(len(VERBS)))]
    conn = CONNECTORS[int(rng.integers(len(CONNECTORS)))]
    form = int(rng.integers(3))
    if form == 0:
        return f"The {n1} {verb} {conn} the {n2}."
    if form == 1:
        adj = ADJECTIVES[int(rng.integers(len(ADJECTIVES)))]
        return f"The {adj} {n1} {verb} {conn} the {n2}."
    verb2 = VERBS[int(rng.integers(len(VERBS)))]
    return f"The {n1} {verb} and {verb2} {conn} the {n2}."


def document_text(topic: str, n_sentences: int, rng) -> str:
    nouns = TOPICS[topic]
    return " ".join(_sentence(nouns, rng) for _ in range(n_sentences))


def write_corpus(
    out_dir: str | os.PathLike,
    domains: tuple[str, ...] = ("alpha", "beta"),
    docs_per_domain: int = 50,
    sentences_per_doc: tuple[int, int] = (9, 24),
    target_bytes: int | None = None,
    seed: int = 0,
) -> dict[str, str]:
    """Write one JSONL corpus file per domain; returns domain -> path.

    With target_bytes set, each domain grows until it holds roughly
    target_bytes / len(domains) bytes of text (docs_per_domain ignored).
    """
    os.makedirs(out_dir, exist_ok=True)
    topics = sorted(TOPICS)
    paths = {}
    per_domain_bytes = None if target_bytes is None else target_bytes // len(domains)
    for domain in domains:
        rng = derive_rng(seed, "toytext", domain)
        path = os.path.join(os.fspath(out_dir), f"{domain}.jsonl")
        written = 0
        count = 0
        with open(path, "w", encoding="utf-8") as handle:
            while True:
                if per_domain_bytes is None:
                    if count >= docs_per_domain:
                        break
                elif written >= per_domain_bytes:
                    break
                topic = topics[int(rng.integers(len(topics)))]
                n = int(rng.integers(sentences_per_doc[0], sentences_per_doc[1] + 1))
                text = document_text(topic, n, rng)
                line = json.dumps({"id": f"{domain}-{count:05d}", "text": text}) + "\n"
                handle.write(line)
                written += len(line.encode("utf-8"))
                count += 1
        paths[domain] = path
    return paths
