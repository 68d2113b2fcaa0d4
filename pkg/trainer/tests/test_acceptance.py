"""Acceptance suite for the trainer.

Fixture data is produced by the data pipeline's CLI (tasks=lpp, 40-token
budget -> 1000 single-example classification instances after filtering),
in a true-label and a random-label variant. One PASS line per criterion;
run with `pytest tests/test_acceptance.py -v -s`.
"""

import json

import pytest

from spanlm.data import InstanceRecord, load_instances, make_batches
from spanlm.model import build_model, masked_cross_entropy
from spanlm.serve import CheckpointScorer
from spanlm.tokenizer import WordTokenizer
from spanlm.train import TrainConfig, load_checkpoint, span_nll, train

EPOCHS = 10
SEED = 7
CLS = "LPP_CLS"


def _ok(name):
    print(f"\n[acceptance] {name}: PASS")


def _heldout_cls(path, limit=300):
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            record = json.loads(line)
            if record["task"] != CLS:
                continue
            rows.append(record)
            if len(rows) >= limit:
                break
    return rows


def _single_render(record, index):
    text = f"Input: {record['input']}\nOutput: {record['output']}"
    start = len(f"Input: {record['input']}\nOutput: ")
    return InstanceRecord(text=text, spans=((start, len(text)),), source=f"heldout:{index}")


def _train(files, out_dir):
    cfg = TrainConfig(
        instances=(files["instances"],),
        out_dir=str(out_dir),
        preset="tiny",
        epochs=EPOCHS,
        batch_size=16,
        lr=3e-3,
        seed=SEED,
        max_seq=64,
        tasks=(CLS,),
    )
    return train(cfg)


def _ranking_accuracy(checkpoint, heldout_path):
    scorer = CheckpointScorer(checkpoint)
    rows = _heldout_cls(heldout_path)
    correct = 0
    for record in rows:
        prefix = f"Input: {record['input']}\nOutput: "
        pool = record["meta"]["pool"]
        nlls = []
        for candidate in pool:
            logprob, tokens = scorer.score(prefix, candidate)
            nlls.append(-logprob / tokens)
        correct += int(pool[nlls.index(min(nlls))] == record["output"])
    return correct / len(rows)


class TestLossMask:
    def test_loss_nonzero_exactly_on_spans(self, pipeline):
        records = load_instances([pipeline["true"]["instances"]], tasks=(CLS,))[:64]
        tokenizer = WordTokenizer.fit(r.text for r in records)
        model = build_model(len(tokenizer), "tiny", 64, seed=SEED)
        checked = 0
        for inputs, targets, mask in make_batches(records, tokenizer, 16, 64):
            _, per_token = masked_cross_entropy(model(inputs), targets, mask)
            assert (per_token[mask] > 0).all()
            assert (per_token[~mask] == 0).all()
            checked += int(mask.sum())
        assert checked > 0
        _ok(f"loss mask (nonzero exactly on {checked} span tokens of a fixture batch)")


@pytest.fixture(scope="module")
def checkpoints(pipeline, tmp_path_factory):
    root = tmp_path_factory.mktemp("checkpoints")
    true_ck = _train(pipeline["true"], root / "true")
    random_ck = _train(pipeline["random"], root / "random")
    return true_ck, random_ck


class TestTraining:
    def test_trains_on_1k_instances(self, pipeline):
        records = load_instances([pipeline["true"]["instances"]], tasks=(CLS,))
        assert len(records) == 1000
        assert all(len(record.spans) == 1 for record in records)

    def test_heldout_span_nll_reduced_10_percent(self, pipeline, checkpoints):
        true_ck, _ = checkpoints
        model, tokenizer, config = load_checkpoint(true_ck)
        heldout = [
            _single_render(record, index)
            for index, record in enumerate(_heldout_cls(pipeline["true"]["heldout"]))
        ]
        init = build_model(len(tokenizer), config["preset"], config["max_seq"], config["seed"])
        before = span_nll(init, tokenizer, heldout, config["max_seq"])
        after = span_nll(model, tokenizer, heldout, config["max_seq"])
        reduction = 1 - after / before
        assert reduction >= 0.10, f"NLL {before:.3f} -> {after:.3f} ({reduction:.1%})"
        _ok(f"held-out span NLL {before:.3f} -> {after:.3f} ({reduction:.0%} reduction, 10 epochs, 1k instances)")

    def test_random_labels_hurt_ranking_accuracy(self, pipeline, checkpoints):
        true_ck, random_ck = checkpoints
        accuracy_true = _ranking_accuracy(true_ck, pipeline["true"]["heldout"])
        accuracy_random = _ranking_accuracy(random_ck, pipeline["random"]["heldout"])
        assert accuracy_random < accuracy_true, (
            f"random-label {accuracy_random:.3f} !< true-label {accuracy_true:.3f}"
        )
        _ok(
            "random-label training ranks worse than true-label "
            f"({accuracy_random:.3f} < {accuracy_true:.3f})"
        )
