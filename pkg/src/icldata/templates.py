"""Prompt templates and few-shot prompt assembly.

Templates are data, not code: each is a pattern with ${Field}
placeholders plus an answer slot marking the scored segment (the suffix
whose likelihood ranks candidate completions, or that a generator must
produce). Two template styles ship for the SuperGLUE tasks -- "ours"
(Input:/Output: markers matching the self-supervised training format) and
"gpt3" (bare context/question lines) -- loaded from a line-delimited JSON
file so new tasks need no code changes.
"""

import json
from collections.abc import Sequence
from dataclasses import dataclass
from importlib import resources
from string import Template

import numpy as np

from icldata.errors import RenderError

STYLE_OURS = "ours"
STYLE_GPT3 = "gpt3"

__all__ = [
    "EvalItem",
    "STYLE_GPT3",
    "STYLE_OURS",
    "TaskTemplate",
    "assemble_prompt",
    "default_templates",
    "load_templates",
    "render",
    "render_candidates",
    "render_full",
]


@dataclass(frozen=True)
class TaskTemplate:
    """A prompt pattern plus the sub-pattern that gets scored.

    candidate_field names the placeholder that candidate completions bind
    to; candidates are themselves mini-patterns (fixed label strings, or
    field references like "${Choice1}"). An empty candidate list marks a
    generation template.
    """

    name: str
    style: str
    pattern: str
    answer_slot: str
    candidate_field: str = "Answer"
    candidates: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.style not in (STYLE_OURS, STYLE_GPT3):
            raise ValueError(f"unknown template style {self.style!r}")


@dataclass(frozen=True)
class EvalItem:
    """One evaluation prompt: demonstrations plus the test example.

    Exactly one of candidates (ranking) / reference (generation) is set;
    the test example is always the last segment of prompt_prefix.
    """

    prompt_prefix: str
    shots: int
    candidates: tuple[str, ...] | None = None
    gold: int | None = None
    reference: str | None = None
    task: str = ""
    qid: str | None = None

    def __post_init__(self) -> None:
        if (self.candidates is None) == (self.reference is None):
            raise ValueError("exactly one of candidates/reference must be set")


def _substitute(pattern: str, fields: dict[str, str]) -> str:
    try:
        return Template(pattern).substitute(fields)
    except KeyError as exc:
        raise RenderError(f"missing field {exc.args[0]!r} for pattern {pattern!r}") from exc
    except ValueError as exc:
        raise RenderError(f"malformed pattern {pattern!r}: {exc}") from exc


def render(fields: dict[str, str], tpl: TaskTemplate) -> tuple[str, str]:
    """Render a template, returning (conditioning prefix, scored segment)."""
    scored = _substitute(tpl.answer_slot, fields)
    full = _substitute(tpl.pattern, fields)
    if not full.endswith(scored):
        raise RenderError(f"template {tpl.name!r}: pattern does not end with its answer slot")
    return full[: len(full) - len(scored)], scored


def render_full(fields: dict[str, str], tpl: TaskTemplate) -> str:
    """Render a complete example (used for demonstrations)."""
    prefix, scored = render(fields, tpl)
    return prefix + scored


def render_candidates(tpl: TaskTemplate, fields: dict[str, str]) -> list[str]:
    """Candidate completion strings for a ranking item."""
    return [_substitute(candidate, fields) for candidate in tpl.candidates]


def assemble_prompt(
    demos: Sequence[str],
    test_prefix: str,
    shots: int,
    rng: np.random.Generator,
    candidates: Sequence[str] | None = None,
    gold: int | None = None,
    reference: str | None = None,
    task: str = "",
    qid: str | None = None,
) -> EvalItem:
    """Draw `shots` demonstrations and join them with the test example.

    Demonstrations are drawn uniformly without replacement (the first
    `shots` entries of one seeded permutation, so a smaller shot count
    selects a subset of a larger one under the same rng). Segments are
    joined by single newlines; shots=0 yields the bare test example.
    """
    if shots < 0:
        raise ValueError("shots must be >= 0")
    if shots > len(demos):
        raise ValueError(f"requested {shots} demonstrations but only {len(demos)} available")
    chosen = [demos[int(i)] for i in rng.permutation(len(demos))[:shots]]
    prompt = "\n".join([*chosen, test_prefix])
    return EvalItem(
        prompt_prefix=prompt,
        shots=shots,
        candidates=tuple(candidates) if candidates is not None else None,
        gold=gold,
        reference=reference,
        task=task,
        qid=qid,
    )


def load_templates(path) -> dict[tuple[str, str], TaskTemplate]:
    """Load templates from a line-delimited JSON file, keyed (name, style)."""
    templates: dict[tuple[str, str], TaskTemplate] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed template at line {lineno}: {exc}") from exc
            tpl = TaskTemplate(
                name=record["name"],
                style=record["style"],
                pattern=record["pattern"],
                answer_slot=record["answer_slot"],
                candidate_field=record.get("candidate_field", "Answer"),
                candidates=tuple(record.get("candidates", ())),
            )
            templates[(tpl.name, tpl.style)] = tpl
    return templates


def default_templates() -> dict[tuple[str, str], TaskTemplate]:
    """Templates bundled with the package (SuperGLUE + built-in tasks)."""
    path = resources.files("icldata").joinpath("data/templates.jsonl")
    with resources.as_file(path) as concrete:
        return load_templates(concrete)
