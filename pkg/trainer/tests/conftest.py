import json
import subprocess
import sys

import numpy as np
import pytest

from spanlm.train import TrainConfig, train

# Standalone topic-structured corpus generator (the data pipeline is only
# used through its CLI and file formats, never imported).
TOPICS = {
    "river": ("river", "stream", "boat", "ferry", "shore", "current", "bridge", "harbor"),
    "forest": ("forest", "pine", "trail", "clearing", "thicket", "canopy", "moss", "grove"),
    "desert": ("desert", "dune", "oasis", "canyon", "mesa", "cactus", "ridge", "basin"),
    "city": ("city", "street", "market", "station", "tower", "plaza", "alley", "tramline"),
    "farm": ("farm", "barn", "meadow", "fence", "orchard", "silo", "pasture", "furrow"),
    "coast": ("coast", "cliff", "lagoon", "jetty", "tide", "cove", "dockyard", "breaker"),
}
VERBS = ("moved", "rested", "turned", "stayed", "drifted", "settled", "waited", "lingered")
CONNECTORS = ("near", "beside", "behind", "beyond", "under", "past")


def _sentence(nouns, rng):
    # the object repeats the subject, so "is this the sentence's true last
    # phrase" reduces to a repetition check a tiny model can learn
    pick = lambda seq: seq[int(rng.integers(len(seq)))]
    noun = pick(nouns)
    return f"The {noun} {pick(VERBS)} {pick(CONNECTORS)} the {noun}."


def write_corpus(path, n_docs, seed):
    topics = sorted(TOPICS)
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as handle:
        for i in range(n_docs):
            nouns = TOPICS[topics[i % len(topics)]]
            text = " ".join(_sentence(nouns, rng) for _ in range(12))
            handle.write(json.dumps({"id": f"doc-{i:05d}", "text": text}) + "\n")
    return path


def run_pipeline(out_dir, corpus_path, seed, random_label=False):
    """Drive the data pipeline through its CLI (its external interface)."""
    base = [sys.executable, "-m", "icldata.cli"]
    synthesize = base + [
        "synthesize",
        "--corpus", f"alpha={corpus_path}",
        "--tasks", "lpp",
        "--seed", str(seed),
        "--holdout-fraction", "0.25",
        "--min-sentence-words", "4",
        "--out-dir", str(out_dir),
    ]
    if random_label:
        synthesize.append("--random-label")
    pack = base + [
        "pack",
        "--tasks", "lpp",
        "--seed", str(seed),
        "--max-tokens", "40",
        "--instances-per-task", "2000",
        "--out-dir", str(out_dir),
    ]
    for cmd in (synthesize, pack):
        result = subprocess.run(cmd, capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
    return {
        "instances": str(out_dir / "instances" / "lpp.jsonl"),
        "heldout": str(out_dir / "examples" / "lpp.heldout.jsonl"),
    }


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    corpus = write_corpus(root / "corpus.jsonl", n_docs=600, seed=3)
    true_files = run_pipeline(root / "true", corpus, seed=19)
    random_files = run_pipeline(root / "random", corpus, seed=19, random_label=True)
    return {"true": true_files, "random": random_files}


def write_mini_instances(path, n=40, seed=0):
    """Schema-conformant instance file written directly (the file format
    is the contract)."""
    rng = np.random.default_rng(seed)
    nouns = TOPICS["river"]
    rows = []
    for _ in range(n):
        pieces = []
        spans = []
        offset = 0
        for _ in range(2):
            prompt = _sentence(nouns, rng)
            answer = f"the {nouns[int(rng.integers(len(nouns)))]}"
            rendered = f"Input: {prompt}\nOutput: {answer}"
            start = offset + len(f"Input: {prompt}\nOutput: ")
            spans.append([start, offset + len(rendered)])
            pieces.append(rendered)
            offset += len(rendered) + 1
        rows.append(
            {"task": "LPP_GEN", "text": "\n".join(pieces), "loss_spans": spans, "example_count": 2}
        )
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def mini_instances(tmp_path_factory):
    return write_mini_instances(tmp_path_factory.mktemp("mini") / "mini.jsonl")


@pytest.fixture(scope="session")
def mini_checkpoint(mini_instances, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    cfg = TrainConfig(instances=(mini_instances,), out_dir=str(out), epochs=2, seed=1, max_seq=64)
    return train(cfg)
