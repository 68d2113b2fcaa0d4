"""Serve a checkpoint over the line-delimited JSON scorer protocol.

Requests (one JSON object per line on stdin):
    {"op": "score", "prefix": ..., "continuation": ...}
        -> {"logprob": <total log-probability>, "tokens": <count>}
    {"op": "generate", "prefix": ..., "max_new_tokens": ...}
        -> {"text": ...}   (greedy decoding)

Malformed requests produce {"error": ...} and the process stays alive.
"""

import json
import sys

from spanlm.model import greedy_generate, sequence_logprob
from spanlm.tokenizer import SPECIALS
from spanlm.train import load_checkpoint


class CheckpointScorer:
    def __init__(self, checkpoint_dir: str):
        self.model, self.tokenizer, self.config = load_checkpoint(checkpoint_dir)
        self.max_seq = self.config["max_seq"]

    def _encode_pair(self, prefix: str, continuation: str) -> tuple[list[int], int]:
        prefix_ids, _ = self.tokenizer.encode(prefix)
        cont_ids, _ = self.tokenizer.encode(continuation)
        if not cont_ids:
            raise ValueError("continuation has no tokens")
        ids = [self.tokenizer.bos_id] + prefix_ids + cont_ids
        # keep the continuation and as much left context as fits
        overflow = len(ids) - self.max_seq
        if overflow > 0:
            ids = [self.tokenizer.bos_id] + ids[1 + overflow :]
        return ids, len(cont_ids)

    def score(self, prefix: str, continuation: str) -> tuple[float, int]:
        ids, n_cont = self._encode_pair(prefix, continuation)
        logprob = sequence_logprob(self.model, ids, score_from=len(ids) - n_cont)
        return logprob, n_cont

    def generate(self, prefix: str, max_new_tokens: int) -> str:
        prefix_ids, _ = self.tokenizer.encode(prefix)
        ids = [self.tokenizer.bos_id] + prefix_ids
        if len(ids) > self.max_seq - 1:
            ids = [self.tokenizer.bos_id] + ids[len(ids) - (self.max_seq - 1) :]
        banned = {self.tokenizer.token_to_id[s] for s in SPECIALS}
        out = greedy_generate(self.model, ids, max_new_tokens, banned)
        return self.tokenizer.decode(out)


def handle_request(scorer: CheckpointScorer, line: str) -> dict:
    try:
        request = json.loads(line)
        op = request.get("op")
        if op == "score":
            logprob, tokens = scorer.score(str(request["prefix"]), str(request["continuation"]))
            return {"logprob": logprob, "tokens": tokens}
        if op == "generate":
            text = scorer.generate(str(request["prefix"]), int(request["max_new_tokens"]))
            return {"text": text}
        return {"error": f"unknown op {op!r}"}
    except Exception as exc:  # noqa: BLE001 - protocol reports, never dies
        return {"error": str(exc)}


def serve(checkpoint_dir: str) -> None:
    scorer = CheckpointScorer(checkpoint_dir)
    for line in sys.stdin:
        if not line.strip():
            continue
        response = handle_request(scorer, line)
        print(json.dumps(response), flush=True)
