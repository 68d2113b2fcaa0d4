"""Evaluation protocols over a pluggable scorer.

Two protocols: perplexity ranking (pick the candidate completion with
minimum per-token negative log-likelihood) and greedy-decode generation
scored by ROUGE-L. A benchmark run repeats both over several seeds
(re-sampling demonstrations each time) and reports per-task metrics with
mean/std across runs, all on a 0-100 scale. Tasks with two metrics
contribute the average of the two to the benchmark average.
"""

import abc
import json
import subprocess
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from icldata.seeding import derive_rng
from icldata.templates import (
    EvalItem,
    TaskTemplate,
    assemble_prompt,
    render,
    render_candidates,
    render_full,
)

__all__ = [
    "BenchmarkConfig",
    "MetricSummary",
    "ProcessScorer",
    "ScoreReport",
    "ScorerInterface",
    "TaskEvalSpec",
    "benchmark_average",
    "build_eval_items",
    "eval_generation",
    "rank_classify",
    "rouge_l_score",
    "run_benchmark",
    "task_metrics",
]


class ScorerInterface(abc.ABC):
    """What the evaluator needs from a model.

    score() returns the total log-probability of `continuation` given
    `prefix` plus the continuation's token count; generate() is greedy and
    deterministic. concurrent_safe declares whether the harness may call
    the scorer from several workers; when False, calls are serialized.
    """

    concurrent_safe: bool = False

    @abc.abstractmethod
    def score(self, prefix: str, continuation: str) -> tuple[float, int]: ...

    @abc.abstractmethod
    def generate(self, prefix: str, max_new_tokens: int) -> str: ...


def rank_classify(item: EvalItem, scorer: ScorerInterface) -> int:
    """Index of the candidate with minimum per-token NLL (ties: first)."""
    if item.candidates is None:
        raise ValueError("rank_classify needs an item with candidates")
    best_index = 0
    best_nll = None
    for index, candidate in enumerate(item.candidates):
        try:
            logprob, tokens = scorer.score(item.prompt_prefix, candidate)
        except Exception as exc:
            raise RuntimeError(f"scorer failed on item {item.task}/{item.qid}: {exc}") from exc
        nll = -logprob / max(tokens, 1)
        if best_nll is None or nll < best_nll:
            best_nll = nll
            best_index = index
    return best_index


_GENERATION_STOPS = ("Input:", "\n\n")


def eval_generation(
    item: EvalItem, scorer: ScorerInterface, max_new_tokens: int = 64
) -> tuple[str, float]:
    """Greedy-decode a hypothesis and score it with ROUGE-L.

    The raw generation is truncated at the first example-boundary marker
    ("Input:" or a blank line), whichever comes first.
    """
    if item.reference is None:
        raise ValueError("eval_generation needs an item with a reference")
    raw = scorer.generate(item.prompt_prefix, max_new_tokens)
    cut = len(raw)
    for stop in _GENERATION_STOPS:
        pos = raw.find(stop)
        if pos >= 0:
            cut = min(cut, pos)
    hypothesis = raw[:cut].strip()
    return hypothesis, rouge_l_score(hypothesis, item.reference)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l_score(hyp: str, ref: str) -> float:
    """LCS-based F-measure (beta=1) over lowercased whitespace tokens."""
    hyp_tokens = hyp.lower().split()
    ref_tokens = ref.lower().split()
    if not hyp_tokens or not ref_tokens:
        return 0.0
    lcs = _lcs_length(hyp_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(hyp_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def _binary_f1(predictions: Sequence[int], golds: Sequence[int], positive: int) -> float:
    tp = sum(1 for p, g in zip(predictions, golds) if p == positive and g == positive)
    fp = sum(1 for p, g in zip(predictions, golds) if p == positive and g != positive)
    fn = sum(1 for p, g in zip(predictions, golds) if p != positive and g == positive)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def task_metrics(
    task: str,
    predictions: Sequence[int],
    golds: Sequence[int],
    qids: Sequence[str] | None = None,
) -> dict[str, float]:
    """Per-task metrics on a 0-1 scale.

    boolq/copa/rte: accuracy. multirc: F1a (micro-F1 over all answer
    options, index 0 treated as the positive class) and EM (every option
    of a question correct). cb: accuracy plus macro-F1 over 3 classes.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{task}: {len(predictions)} predictions vs {len(golds)} golds")
    accuracy = sum(1 for p, g in zip(predictions, golds) if p == g) / max(len(golds), 1)
    if task == "multirc":
        if qids is None or len(qids) != len(golds):
            raise ValueError("multirc needs one qid per answer option")
        by_question: dict[str, list[bool]] = {}
        for qid, p, g in zip(qids, predictions, golds):
            by_question.setdefault(qid, []).append(p == g)
        em = sum(1 for oks in by_question.values() if all(oks)) / max(len(by_question), 1)
        return {"f1a": _binary_f1(predictions, golds, positive=0), "em": em}
    if task == "cb":
        classes = sorted(set(golds) | set(predictions))
        per_class = [_binary_f1(predictions, golds, positive=c) for c in classes]
        macro = sum(per_class) / max(len(per_class), 1)
        return {"accuracy": accuracy, "f1": macro}
    return {"accuracy": accuracy}


@dataclass
class TaskEvalSpec:
    """One benchmark task: its template, records, and protocol kind."""

    name: str
    template: TaskTemplate
    test_records: list[dict]
    train_records: list[dict]
    kind: str = "ranking"  # or "generation"

    def __post_init__(self) -> None:
        if self.kind not in ("ranking", "generation"):
            raise ValueError(f"unknown eval kind {self.kind!r}")


@dataclass
class BenchmarkConfig:
    tasks: list[TaskEvalSpec]
    shots: int = 4
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    max_new_tokens: int = 64
    seed_namespace: str = "eval"

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seeds list must be non-empty")


_CONTROL_KEYS = {"gold", "qid", "demo_group"}


def _fields(record: dict) -> dict[str, str]:
    return {k: str(v) for k, v in record.items() if k not in _CONTROL_KEYS}


def _demo_text(record: dict, spec: TaskEvalSpec) -> str:
    fields = _fields(record)
    if spec.kind == "ranking":
        candidates = render_candidates(spec.template, fields)
        fields[spec.template.candidate_field] = candidates[int(record["gold"])]
    return render_full(fields, spec.template)


def build_eval_items(spec: TaskEvalSpec, shots: int, seed: int, namespace: str = "eval") -> list[EvalItem]:
    """Render every test record into an EvalItem with seeded demonstrations.

    Records may carry a "demo_group" key; demonstrations are then drawn
    only from training records of the same group (used when label maps
    vary per instance and demonstrations must reveal the right map).
    """
    demos_all = [_demo_text(r, spec) for r in spec.train_records]
    demos_by_group: dict[str, list[str]] = {}
    for record, text in zip(spec.train_records, demos_all):
        demos_by_group.setdefault(str(record.get("demo_group", "")), []).append(text)

    items = []
    for index, record in enumerate(spec.test_records):
        rng = derive_rng(seed, namespace, spec.name, index)
        fields = _fields(record)
        if "demo_group" in record:
            demos = demos_by_group.get(str(record["demo_group"]), [])
        else:
            demos = demos_all
        prefix, _ = render({**fields, spec.template.candidate_field: ""}, spec.template)
        if spec.kind == "ranking":
            rendered = render_candidates(spec.template, fields)
            scored = [
                render({**fields, spec.template.candidate_field: c}, spec.template)[1]
                for c in rendered
            ]
            items.append(
                assemble_prompt(
                    demos,
                    prefix,
                    shots,
                    rng,
                    candidates=scored,
                    gold=int(record["gold"]),
                    task=spec.name,
                    qid=str(record.get("qid", index)),
                )
            )
        else:
            items.append(
                assemble_prompt(
                    demos,
                    prefix,
                    shots,
                    rng,
                    reference=fields[spec.template.candidate_field],
                    task=spec.name,
                    qid=str(record.get("qid", index)),
                )
            )
    return items


def benchmark_average(metrics_by_task: dict[str, dict[str, float]]) -> float:
    """Benchmark average: tasks with two metrics contribute their mean."""
    if not metrics_by_task:
        raise ValueError("no task metrics to average")
    task_values = [sum(m.values()) / len(m) for m in metrics_by_task.values()]
    return sum(task_values) / len(task_values)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float | None
    runs: tuple[float, ...]


@dataclass
class ScoreReport:
    """Per-task metrics plus the benchmark average, across seeded runs."""

    per_task: dict[str, dict[str, MetricSummary]]
    average: MetricSummary
    seeds: tuple[int, ...]
    shots: int

    def to_json(self) -> str:
        payload = {
            "seeds": list(self.seeds),
            "shots": self.shots,
            "per_task": {
                task: {
                    metric: {"mean": s.mean, "std": s.std, "runs": list(s.runs)}
                    for metric, s in metrics.items()
                }
                for task, metrics in self.per_task.items()
            },
            "average": {
                "mean": self.average.mean,
                "std": self.average.std,
                "runs": list(self.average.runs),
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def render_table(self) -> str:
        lines = [f"{'task':<16} {'metric':<10} {'mean':>8} {'std':>8}"]
        for task in sorted(self.per_task):
            for metric, summary in sorted(self.per_task[task].items()):
                std = f"{summary.std:8.2f}" if summary.std is not None else "       -"
                lines.append(f"{task:<16} {metric:<10} {summary.mean:8.2f} {std}")
        std = f"{self.average.std:8.2f}" if self.average.std is not None else "       -"
        lines.append(f"{'average':<16} {'':<10} {self.average.mean:8.2f} {std}")
        return "\n".join(lines)


def _summarize(runs: list[float]) -> MetricSummary:
    std = float(np.std(runs)) if len(runs) >= 2 else None
    return MetricSummary(mean=float(np.mean(runs)), std=std, runs=tuple(runs))


def run_benchmark(config: BenchmarkConfig, scorer: ScorerInterface) -> ScoreReport:
    """Evaluate every task under every seed and aggregate mean/std.

    Items are independent; this harness calls the scorer sequentially,
    which is valid for any scorer regardless of its concurrent_safe flag.
    """
    task_runs: dict[str, dict[str, list[float]]] = {}
    average_runs: list[float] = []
    for seed in config.seeds:
        run_metrics: dict[str, dict[str, float]] = {}
        for spec in config.tasks:
            items = build_eval_items(spec, config.shots, seed, config.seed_namespace)
            if spec.kind == "ranking":
                predictions = [rank_classify(item, scorer) for item in items]
                golds = [item.gold for item in items]
                qids = [item.qid for item in items]
                metrics = task_metrics(spec.name, predictions, golds, qids)
            else:
                scores = [eval_generation(item, scorer, config.max_new_tokens)[1] for item in items]
                metrics = {"rouge_l": sum(scores) / max(len(scores), 1)}
            run_metrics[spec.name] = {name: 100.0 * value for name, value in metrics.items()}
            bucket = task_runs.setdefault(spec.name, {})
            for name, value in run_metrics[spec.name].items():
                bucket.setdefault(name, []).append(value)
        average_runs.append(benchmark_average(run_metrics))

    per_task = {
        task: {metric: _summarize(runs) for metric, runs in metrics.items()}
        for task, metrics in task_runs.items()
    }
    return ScoreReport(
        per_task=per_task,
        average=_summarize(average_runs),
        seeds=tuple(config.seeds),
        shots=config.shots,
    )


class ProcessScorer(ScorerInterface):
    """Client for an external scorer speaking line-delimited JSON.

    Requests: {"op": "score", "prefix": ..., "continuation": ...} ->
    {"logprob": ..., "tokens": ...}; {"op": "generate", "prefix": ...,
    "max_new_tokens": ...} -> {"text": ...}. Error responses carry an
    "error" key; the process stays alive across requests.
    """

    concurrent_safe = False

    def __init__(self, cmd: Sequence[str]):
        self._proc = subprocess.Popen(
            list(cmd),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def _request(self, payload: dict) -> dict:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(payload) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError("scorer process closed its output stream")
        response = json.loads(line)
        if "error" in response:
            raise RuntimeError(f"scorer error: {response['error']}")
        return response

    def score(self, prefix: str, continuation: str) -> tuple[float, int]:
        response = self._request({"op": "score", "prefix": prefix, "continuation": continuation})
        return float(response["logprob"]), int(response["tokens"])

    def generate(self, prefix: str, max_new_tokens: int) -> str:
        response = self._request(
            {"op": "generate", "prefix": prefix, "max_new_tokens": max_new_tokens}
        )
        return str(response["text"])

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=10)

    def __enter__(self) -> "ProcessScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
