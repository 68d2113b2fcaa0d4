"""Pipeline orchestration: synthesize -> pack -> render-eval -> evaluate.

Subcommands
    synthesize   build per-task example files from a corpus
    pack         assemble examples into token-budgeted instances
    render-eval  write rendered evaluation prompts for inspection
    evaluate     run the ranking/generation benchmark and report scores
    stats        summarize manifests and instance files

Configuration comes from an INI-style file ([corpus], [pipeline], [eval]
sections) and/or command-line flags (flags win). A single --seed fans out
into per-stage sub-seeds so each stage is independently reproducible; all
outputs are deterministic functions of (inputs, seed), whatever the
worker count.
"""

import argparse
import configparser
import hashlib
import itertools
import json
import logging
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dataclass_fields

from icldata import corpus as corpus_mod
from icldata import evaluator as evaluator_mod
from icldata import refscorer as refscorer_mod
from icldata import taskgen
from icldata.corpus import CorpusSampleConfig, SentenceWindow
from icldata.errors import ConfigError, PipelineError
from icldata.packer import Instance, PackDecision, TokenBudget, pack, subsample
from icldata.seeding import derive_rng, derive_seed
from icldata.taskgen import Example, Task, WindowSampler
from icldata.templates import default_templates, load_templates

logger = logging.getLogger(__name__)

FAMILIES = ("nsg", "mwp", "lpp", "cl", "dae", "gsg")
DEFAULT_FAMILIES = ("nsg", "mwp", "lpp", "cl")
FAMILY_TASKS = {
    "nsg": (Task.NSG,),
    "mwp": (Task.MWP,),
    "lpp": (Task.LPP_GEN, Task.LPP_CLS),
    "cl": (Task.CL,),
    "dae": (Task.DAE,),
    "gsg": (Task.GSG,),
}
DEFAULT_DOCS_PER_DOMAIN = 100_000

# Fields that change pipeline output; everything else (worker count,
# directories, logging) is execution detail and excluded from the hash.
_SEMANTIC_FIELDS = (
    "corpus", "docs_per_domain", "seed", "min_sentence_words", "min_window_sentences",
    "holdout_fraction", "tasks", "instances_per_task", "ratio", "random_label",
    "max_tokens", "counter", "benchmark_dir", "eval_tasks", "template_style",
    "templates_file", "shots", "few_shots", "eval_seeds", "scorer", "scorer_corpus",
    "ngram_order", "ngram_k", "ngram_adapt", "max_new_tokens", "selfsup_file",
    "eval_items",
)


@dataclass
class PipelineConfig:
    corpus: dict[str, tuple[str, ...]] = field(default_factory=dict)
    docs_per_domain: dict[str, int] = field(default_factory=dict)
    seed: int = 0
    min_sentence_words: int = 4
    min_window_sentences: int = 3
    holdout_fraction: float = 0.0
    tasks: tuple[str, ...] = DEFAULT_FAMILIES
    instances_per_task: int = 250_000
    ratio: float = 1.0
    random_label: bool = False
    max_tokens: int = 2048
    counter: str = "whitespace"
    workers: int = 1
    out_dir: str = "out"
    pack_log: bool = False
    # evaluation
    benchmark_dir: str | None = None
    eval_tasks: tuple[str, ...] = ()
    template_style: str = "ours"
    templates_file: str | None = None
    shots: str = "few"
    few_shots: int = 4
    eval_seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    scorer: str = "ngram"
    scorer_corpus: tuple[str, ...] = ()
    ngram_order: int = 3
    ngram_k: float = 0.1
    ngram_adapt: bool = True
    max_new_tokens: int = 64
    selfsup_file: str | None = None
    eval_items: int = 100

    def validate(self) -> None:
        if not self.tasks:
            raise ConfigError("enabled task list is empty")
        for family in self.tasks:
            if family not in FAMILIES:
                raise ConfigError(f"unknown task family {family!r} (expected one of {FAMILIES})")
        if self.ratio <= 0:
            raise ConfigError("ratio must be > 0")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must be in [0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.shots not in ("few",) and not self.shots.lstrip("-").isdigit():
            raise ConfigError("shots must be an integer or 'few'")

    @property
    def sample_config(self) -> CorpusSampleConfig:
        docs = dict(self.docs_per_domain)
        for domain in self.corpus:
            docs.setdefault(domain, DEFAULT_DOCS_PER_DOMAIN)
        return CorpusSampleConfig(
            docs_per_domain=docs,
            seed=derive_seed(self.seed, "corpus"),
            min_sentence_words=self.min_sentence_words,
            min_window_sentences=self.min_window_sentences,
        )

    @property
    def budget(self) -> TokenBudget:
        return TokenBudget(max_tokens=self.max_tokens, counter=self.counter)

    def resolved_shots(self) -> int:
        return self.few_shots if self.shots == "few" else int(self.shots)


def config_hash(cfg: PipelineConfig) -> str:
    payload = {}
    for name in _SEMANTIC_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, dict):
            value = {k: value[k] for k in sorted(value)}
        payload[name] = value
    canonical = json.dumps(payload, sort_keys=True, default=list)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# configuration parsing

def _parse_mapping(items: list[str], value_type=str) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value_type(value.strip())
    return out


def _csv(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def load_config_file(path: str) -> PipelineConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    cfg = PipelineConfig()
    if parser.has_section("corpus"):
        cfg.corpus = {domain: _csv(paths) for domain, paths in parser.items("corpus")}
    if parser.has_section("sample"):
        cfg.docs_per_domain = {d: int(v) for d, v in parser.items("sample")}
    known = {f.name: f for f in dataclass_fields(PipelineConfig)}
    for section in ("pipeline", "eval"):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            current = getattr(cfg, key)
            if key == "eval_seeds":
                setattr(cfg, key, tuple(int(s) for s in _csv(raw)))
            elif isinstance(current, bool):
                setattr(cfg, key, raw.strip().lower() in ("1", "true", "yes", "on"))
            elif isinstance(current, int):
                setattr(cfg, key, int(raw))
            elif isinstance(current, float):
                setattr(cfg, key, float(raw))
            elif isinstance(current, tuple):
                setattr(cfg, key, _csv(raw))
            else:
                setattr(cfg, key, raw.strip())
    return cfg


def build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config_file(args.config) if args.config else PipelineConfig()
    for item in getattr(args, "corpus", None) or ():
        mapping = _parse_mapping([item])
        for domain, path in mapping.items():
            cfg.corpus.setdefault(domain, ())
            cfg.corpus[domain] = cfg.corpus[domain] + tuple(_csv(path))
    if getattr(args, "docs_per_domain", None):
        cfg.docs_per_domain.update(_parse_mapping(args.docs_per_domain, int))
    simple = (
        "seed", "min_sentence_words", "min_window_sentences", "holdout_fraction",
        "instances_per_task", "ratio", "max_tokens", "counter", "workers", "out_dir",
        "benchmark_dir", "template_style", "templates_file", "few_shots", "scorer",
        "ngram_order", "ngram_k", "max_new_tokens", "selfsup_file", "eval_items",
    )
    for name in simple:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "tasks", None):
        cfg.tasks = _csv(args.tasks)
    if getattr(args, "eval_tasks", None):
        cfg.eval_tasks = _csv(args.eval_tasks)
    if getattr(args, "eval_seeds", None):
        cfg.eval_seeds = tuple(int(s) for s in _csv(args.eval_seeds))
    if getattr(args, "shots", None) is not None:
        cfg.shots = str(args.shots)
    if getattr(args, "scorer_corpus", None):
        cfg.scorer_corpus = cfg.scorer_corpus + tuple(args.scorer_corpus)
    if getattr(args, "random_label", False):
        cfg.random_label = True
    if getattr(args, "pack_log", False):
        cfg.pack_log = True
    if getattr(args, "no_ngram_adapt", False):
        cfg.ngram_adapt = False
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# synthesize

def _domain_of(doc_id: str) -> str:
    return doc_id.split("/", 1)[0]


_SYNTH_STATE: dict = {}


def _init_synth_worker(bank, sampler_windows, families, taskgen_seed):
    _SYNTH_STATE["bank"] = bank
    _SYNTH_STATE["sampler"] = WindowSampler(sampler_windows)
    _SYNTH_STATE["families"] = families
    _SYNTH_STATE["seed"] = taskgen_seed


def _example_record(example: Example) -> dict:
    return {
        "task": example.task.value,
        "input": example.input_text,
        "output": example.output_text,
        "meta": example.meta,
    }


def _build_for_window(window: SentenceWindow) -> dict[str, list[dict]]:
    bank = _SYNTH_STATE["bank"]
    sampler = _SYNTH_STATE["sampler"]
    seed = _SYNTH_STATE["seed"]
    out: dict[str, list[dict]] = {}
    for family in _SYNTH_STATE["families"]:
        records: list[dict] = []
        if family == "nsg":
            records.append(_example_record(taskgen.build_nsg(window, derive_rng(seed, "nsg", window.doc_id, window.start))))
        elif family == "mwp":
            records.append(_example_record(taskgen.build_mwp(window, derive_rng(seed, "mwp", window.doc_id, window.start))))
        elif family == "lpp":
            gen = taskgen.build_lpp_gen(window, taskgen.FUNCTION_WORDS, derive_rng(seed, "lpp_gen", window.doc_id, window.start))
            if gen is not None:
                records.append(_example_record(gen))
            cls = taskgen.build_lpp_cls(window, taskgen.FUNCTION_WORDS, bank, derive_rng(seed, "lpp_cls", window.doc_id, window.start))
            if cls is not None:
                records.append(_example_record(cls))
        elif family == "cl":
            for example in taskgen.build_cl(window, sampler, derive_rng(seed, "cl", window.doc_id, window.start)):
                records.append(_example_record(example))
        elif family == "dae":
            records.append(_example_record(taskgen.build_dae(window, derive_rng(seed, "dae", window.doc_id, window.start))))
        elif family == "gsg":
            records.append(_example_record(taskgen.build_gsg(window, derive_rng(seed, "gsg", window.doc_id, window.start))))
        out[family] = records
    return out


def _synth_chunk(chunk: list[SentenceWindow]) -> list[dict[str, list[dict]]]:
    return [_build_for_window(window) for window in chunk]


def _chunks(seq, size):
    it = iter(seq)
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield chunk


def _write_jsonl(path: str, records: list[dict]) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def cmd_synthesize(cfg: PipelineConfig) -> dict:
    if not cfg.corpus:
        raise ConfigError("no corpus configured (use --corpus domain=path)")
    sample_cfg = cfg.sample_config
    counters: dict = {}

    def doc_stream():
        for domain in sorted(cfg.corpus):
            for path in cfg.corpus[domain]:
                yield from corpus_mod.ingest(path, domain, counters)

    documents = corpus_mod.sample_documents(doc_stream(), sample_cfg)
    all_windows = [w for doc in documents for w in corpus_mod.windows(doc, sample_cfg)]
    logger.info("sampled %d documents, %d windows", len(documents), len(all_windows))

    corpus_seed = derive_seed(cfg.seed, "corpus")
    taskgen_seed = derive_seed(cfg.seed, "taskgen")
    train_windows, heldout_windows = [], []
    for window in all_windows:
        rng = derive_rng(corpus_seed, "holdout", window.doc_id, window.start)
        if cfg.holdout_fraction > 0 and float(rng.random()) < cfg.holdout_fraction:
            heldout_windows.append(window)
        else:
            train_windows.append(window)

    bank = taskgen.build_phrase_bank(all_windows) if "lpp" in cfg.tasks else {}
    sampler_windows = tuple(all_windows) if "cl" in cfg.tasks else ()
    families = tuple(f for f in FAMILIES if f in cfg.tasks)

    def run_split(split_windows):
        results: list[dict[str, list[dict]]] = []
        if cfg.workers == 1 or len(split_windows) < 2 * cfg.workers:
            _init_synth_worker(bank, sampler_windows, families, taskgen_seed)
            results = _synth_chunk(split_windows)
        else:
            chunk_size = max(1, len(split_windows) // (cfg.workers * 4))
            with ProcessPoolExecutor(
                max_workers=cfg.workers,
                initializer=_init_synth_worker,
                initargs=(bank, sampler_windows, families, taskgen_seed),
            ) as pool:
                for part in pool.map(_synth_chunk, _chunks(split_windows, chunk_size)):
                    results.extend(part)
        by_family: dict[str, list[dict]] = {family: [] for family in families}
        for per_window in results:
            for family, records in per_window.items():
                by_family[family].extend(records)
        return by_family

    train_by_family = run_split(train_windows)
    heldout_by_family = run_split(heldout_windows) if heldout_windows else {}

    if cfg.random_label:
        for family, records in train_by_family.items():
            donors: dict[str, list[str]] = {}
            for record in records:
                donors.setdefault(record["task"], []).append(record["output"])
            corrupted = []
            for ordinal, record in enumerate(records):
                example = Example(
                    task=Task(record["task"]),
                    input_text=record["input"],
                    output_text=record["output"],
                    meta=record["meta"],
                )
                rng = derive_rng(taskgen_seed, "corrupt", family, ordinal)
                corrupted.append(
                    _example_record(taskgen.corrupt_labels(example, rng, donors[record["task"]]))
                )
            train_by_family[family] = corrupted

    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "documents": len(documents),
        "windows": len(all_windows),
        "warnings": counters,
        "files": {},
        "counts_per_task": {},
        "counts_per_domain": {},
    }
    for family in families:
        records = train_by_family[family]
        path = os.path.join(cfg.out_dir, "examples", f"{family}.jsonl")
        _write_jsonl(path, records)
        manifest["files"][f"{family}.jsonl"] = len(records)
        if len(records) < cfg.instances_per_task:
            logger.warning(
                "family %s: %d examples cannot reach the %d-instance target",
                family, len(records), cfg.instances_per_task,
            )
        for record in records:
            manifest["counts_per_task"][record["task"]] = (
                manifest["counts_per_task"].get(record["task"], 0) + 1
            )
            domain = _domain_of(record["meta"]["doc_id"])
            manifest["counts_per_domain"][domain] = manifest["counts_per_domain"].get(domain, 0) + 1
        if heldout_by_family:
            heldout_path = os.path.join(cfg.out_dir, "examples", f"{family}.heldout.jsonl")
            _write_jsonl(heldout_path, heldout_by_family[family])
            manifest["files"][f"{family}.heldout.jsonl"] = len(heldout_by_family[family])
    manifest_path = os.path.join(cfg.out_dir, "manifest.synthesize.json")
    _write_jsonl_single(manifest_path, manifest)
    return manifest


def _write_jsonl_single(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------------------
# pack

def _example_from_record(record: dict) -> Example:
    return Example(
        task=Task(record["task"]),
        input_text=record["input"],
        output_text=record["output"],
        meta=record["meta"],
    )


def _pack_job(job) -> tuple[str, str, str, list[dict], list[dict], dict]:
    family, task_value, domain, records, budget, rng_seed, want_log = job
    examples = [_example_from_record(r) for r in records]
    log: list[PackDecision] = []
    counters: dict = {}
    instances = pack(examples, budget, derive_rng(rng_seed), log=log if want_log else None, counters=counters)
    instance_records = [
        {
            "task": inst.task,
            "text": inst.text,
            "loss_spans": [list(span) for span in inst.spans],
            "example_count": inst.example_count,
        }
        for inst in instances
    ]
    log_records = [
        {"text": instances[entry.instance_index].text, "next": entry.next_candidate}
        for entry in log
    ]
    return family, task_value, domain, instance_records, log_records, counters


def cmd_pack(cfg: PipelineConfig) -> dict:
    packer_seed = derive_seed(cfg.seed, "packer")
    budget = cfg.budget
    jobs = []
    for family in (f for f in FAMILIES if f in cfg.tasks):
        path = os.path.join(cfg.out_dir, "examples", f"{family}.jsonl")
        if not os.path.exists(path):
            raise PipelineError(f"missing example file {path!r}; run synthesize first")
        records = _read_jsonl(path)
        grouped: dict[tuple[str, str], list[dict]] = {}
        for record in records:
            key = (record["task"], _domain_of(record["meta"]["doc_id"]))
            grouped.setdefault(key, []).append(record)
        for task_value, domain in sorted(grouped):
            jobs.append(
                (
                    family,
                    task_value,
                    domain,
                    grouped[(task_value, domain)],
                    budget,
                    derive_seed(packer_seed, task_value, domain),
                    cfg.pack_log,
                )
            )

    if cfg.workers == 1 or len(jobs) < 2:
        results = [_pack_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_pack_job, jobs))

    groups_by_family: dict[str, list[list[dict]]] = {}
    logs_by_family: dict[str, list[dict]] = {}
    stats: dict[str, dict[str, dict]] = {}
    warnings: dict = {}
    for family, task_value, domain, instance_records, log_records, counters in results:
        groups_by_family.setdefault(family, []).append(instance_records)
        logs_by_family.setdefault(family, []).extend(log_records)
        for key, value in counters.items():
            warnings[key] = warnings.get(key, 0) + value
        bucket = stats.setdefault(family, {}).setdefault(domain, {"instances": 0, "examples": 0})
        bucket["instances"] += len(instance_records)
        bucket["examples"] += sum(r["example_count"] for r in instance_records)

    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "files": {},
        "warnings": warnings,
        "stats": {},
    }
    for family, groups in sorted(groups_by_family.items()):
        instance_records = [record for group in groups for record in group]
        if len(instance_records) > cfg.instances_per_task:
            # cap each (task, domain) group proportionally so the target
            # never silently drops whole sub-tasks or domains
            kept = _proportional_cap(groups, cfg.instances_per_task)
            instance_records = [record for group in kept for record in group]
        elif len(instance_records) < cfg.instances_per_task:
            logger.warning(
                "family %s: packed %d instances, target %d",
                family, len(instance_records), cfg.instances_per_task,
            )
        if cfg.ratio != 1.0:
            rng = derive_rng(packer_seed, "subsample", family)
            instances = [
                Instance(
                    task=r["task"],
                    text=r["text"],
                    spans=tuple(tuple(s) for s in r["loss_spans"]),
                    example_count=r["example_count"],
                )
                for r in instance_records
            ]
            sampled = subsample(instances, cfg.ratio, rng)
            instance_records = [
                {
                    "task": inst.task,
                    "text": inst.text,
                    "loss_spans": [list(span) for span in inst.spans],
                    "example_count": inst.example_count,
                }
                for inst in sampled
            ]
        path = os.path.join(cfg.out_dir, "instances", f"{family}.jsonl")
        _write_jsonl(path, instance_records)
        manifest["files"][f"{family}.jsonl"] = len(instance_records)
        if cfg.pack_log:
            log_path = os.path.join(cfg.out_dir, "pack_log", f"{family}.jsonl")
            _write_jsonl(log_path, logs_by_family.get(family, []))
    for family, domains in stats.items():
        manifest["stats"][family] = {
            domain: {
                "instances": bucket["instances"],
                "avg_examples_per_instance": (
                    bucket["examples"] / bucket["instances"] if bucket["instances"] else 0.0
                ),
            }
            for domain, bucket in sorted(domains.items())
        }
    _write_jsonl_single(os.path.join(cfg.out_dir, "manifest.pack.json"), manifest)
    return manifest


def _proportional_cap(groups: list[list[dict]], target: int) -> list[list[dict]]:
    """Trim groups to `target` items total, preserving their proportions.

    Within a group the kept items are strided across it, not taken from
    the front: pack() writes label-map partitions as contiguous runs, and
    a head-truncation would silently drop whole partitions.
    """
    total = sum(len(group) for group in groups)
    keep = [len(group) * target // total for group in groups]
    remainders = sorted(
        range(len(groups)),
        key=lambda i: (-(len(groups[i]) * target % total), i),
    )
    for index in remainders[: target - sum(keep)]:
        keep[index] += 1
    return [
        [group[i * len(group) // k] for i in range(k)] if k < len(group) else group
        for group, k in zip(groups, keep)
    ]


# ---------------------------------------------------------------------------
# evaluation

_SELFSUP_CANDIDATES = ["Yes", "No", "Y", "N", "True", "False", "T", "F"]


def _selfsup_spec(cfg: PipelineConfig, templates) -> evaluator_mod.TaskEvalSpec:
    """Benchmark task from a held-out synthesized LPP_CLS split.

    Each record keeps its synthesis-time label pool as demo_group, so
    demonstrations share the test item's label map while the map itself
    varies randomly across items.
    """
    records = [r for r in _read_jsonl(cfg.selfsup_file) if r["task"] == Task.LPP_CLS.value]
    if not records:
        raise PipelineError(f"no LPP_CLS examples in {cfg.selfsup_file!r}")
    rows = []
    for record in records:
        output = record["output"]
        rows.append(
            {
                "Input": record["input"],
                "Label": output,
                "gold": _SELFSUP_CANDIDATES.index(output),
                "demo_group": "|".join(record["meta"]["pool"]),
            }
        )
    rng = derive_rng(cfg.seed, "eval", "selfsup-split")
    order = [int(i) for i in rng.permutation(len(rows))]
    test_count = min(cfg.eval_items, max(1, len(rows) // 2))
    test_rows = [rows[i] for i in order[:test_count]]
    train_rows = [rows[i] for i in order[test_count:]]
    if not train_rows:
        raise PipelineError("held-out split too small to provide demonstrations")
    return evaluator_mod.TaskEvalSpec(
        name="selfsup_cls",
        template=templates[("selfsup_cls", "ours")],
        test_records=test_rows,
        train_records=train_rows,
        kind="ranking",
    )


def _benchmark_specs(cfg: PipelineConfig, templates) -> list[evaluator_mod.TaskEvalSpec]:
    specs = []
    if cfg.selfsup_file:
        specs.append(_selfsup_spec(cfg, templates))
    for entry in cfg.eval_tasks:
        parts = entry.split(":")
        name = parts[0]
        template_name = parts[1] if len(parts) > 1 and parts[1] else name
        template = templates.get((template_name, cfg.template_style))
        if template is None:
            raise ConfigError(f"no template {template_name!r} in style {cfg.template_style!r}")
        kind = parts[2] if len(parts) > 2 else ("generation" if not template.candidates else "ranking")
        if cfg.benchmark_dir is None:
            raise ConfigError("eval_tasks given but no benchmark_dir configured")
        test_path = os.path.join(cfg.benchmark_dir, f"{name}.test.jsonl")
        train_path = os.path.join(cfg.benchmark_dir, f"{name}.train.jsonl")
        if not os.path.exists(test_path):
            raise PipelineError(f"missing benchmark file for task {name!r}: {test_path}")
        specs.append(
            evaluator_mod.TaskEvalSpec(
                name=name,
                template=template,
                test_records=_read_jsonl(test_path)[: cfg.eval_items],
                train_records=_read_jsonl(train_path) if os.path.exists(train_path) else [],
                kind=kind,
            )
        )
    if not specs:
        raise ConfigError("nothing to evaluate: set eval_tasks or selfsup_file")
    return specs


def _build_scorer(cfg: PipelineConfig) -> evaluator_mod.ScorerInterface:
    spec = cfg.scorer
    if spec.startswith("process:"):
        return evaluator_mod.ProcessScorer(shlex.split(spec.split(":", 1)[1]))
    if spec == "ngram" or spec.startswith("ngram:"):
        path = spec.split(":", 1)[1] if ":" in spec else None
        if path and path.endswith(".json"):
            model = refscorer_mod.load_model(path)
        else:
            sources = [path] if path else list(cfg.scorer_corpus)
            if not sources:
                raise ConfigError("ngram scorer needs a model file or scorer_corpus paths")
            texts: list[str] = []
            for source in sources:
                with open(source, encoding="utf-8") as handle:
                    if source.endswith((".jsonl", ".ndjson")):
                        texts.extend(json.loads(line)["text"] for line in handle if line.strip())
                    else:
                        texts.append(handle.read())
            model = refscorer_mod.fit(texts, order=cfg.ngram_order, k=cfg.ngram_k)
        return refscorer_mod.NgramScorer(model, adapt=cfg.ngram_adapt)
    raise ConfigError(f"unknown scorer {spec!r}")


def _benchmark_config(cfg: PipelineConfig) -> evaluator_mod.BenchmarkConfig:
    templates = load_templates(cfg.templates_file) if cfg.templates_file else default_templates()
    return evaluator_mod.BenchmarkConfig(
        tasks=_benchmark_specs(cfg, templates),
        shots=cfg.resolved_shots(),
        seeds=cfg.eval_seeds,
        max_new_tokens=cfg.max_new_tokens,
    )


def cmd_render_eval(cfg: PipelineConfig) -> None:
    bench = _benchmark_config(cfg)
    seed = bench.seeds[0]
    for spec in bench.tasks:
        items = evaluator_mod.build_eval_items(spec, bench.shots, seed)
        rows = []
        for item in items:
            rows.append(
                {
                    "task": item.task,
                    "prompt": item.prompt_prefix,
                    "candidates": list(item.candidates) if item.candidates else None,
                    "gold": item.gold,
                    "reference": item.reference,
                    "shots": item.shots,
                    "qid": item.qid,
                }
            )
        path = os.path.join(cfg.out_dir, "eval_items", f"{spec.name}.seed{seed}.jsonl")
        _write_jsonl(path, rows)
        logger.info("wrote %d items to %s", len(rows), path)


def cmd_evaluate(cfg: PipelineConfig) -> evaluator_mod.ScoreReport:
    bench = _benchmark_config(cfg)
    scorer = _build_scorer(cfg)
    try:
        report = evaluator_mod.run_benchmark(bench, scorer)
    finally:
        if isinstance(scorer, evaluator_mod.ProcessScorer):
            scorer.close()
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(report.to_json() + "\n")
    print(report.render_table())
    logger.info("wrote %s", path)
    return report


def cmd_stats(cfg: PipelineConfig) -> None:
    for name in ("manifest.synthesize.json", "manifest.pack.json"):
        path = os.path.join(cfg.out_dir, name)
        if not os.path.exists(path):
            continue
        with open(path, encoding="utf-8") as handle:
            manifest = json.load(handle)
        print(f"== {name}")
        print(f"   config_hash: {manifest.get('config_hash')}  seed: {manifest.get('seed')}")
        for file_name, declared in sorted(manifest.get("files", {}).items()):
            subdir = "instances" if name.endswith("pack.json") else "examples"
            file_path = os.path.join(cfg.out_dir, subdir, file_name)
            actual = sum(1 for _ in open(file_path, encoding="utf-8")) if os.path.exists(file_path) else "missing"
            marker = "" if actual == declared else "  <- MISMATCH"
            print(f"   {file_name}: declared={declared} actual={actual}{marker}")
        for family, domains in manifest.get("stats", {}).items():
            for domain, bucket in domains.items():
                print(
                    f"   {family}/{domain}: {bucket['instances']} instances, "
                    f"{bucket['avg_examples_per_instance']:.2f} examples/instance"
                )


# ---------------------------------------------------------------------------
# entry point

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", dest="out_dir", default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--tasks", default=None, help="comma-separated task families")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icldata", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="build per-task example files")
    _add_common(p)
    p.add_argument("--corpus", action="append", default=None, metavar="DOMAIN=PATH[,PATH...]")
    p.add_argument("--docs-per-domain", dest="docs_per_domain", action="append", default=None, metavar="DOMAIN=N")
    p.add_argument("--min-sentence-words", dest="min_sentence_words", type=int, default=None)
    p.add_argument("--min-window-sentences", dest="min_window_sentences", type=int, default=None)
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float, default=None)
    p.add_argument("--instances-per-task", dest="instances_per_task", type=int, default=None)
    p.add_argument("--random-label", dest="random_label", action="store_true")

    p = sub.add_parser("pack", help="pack examples into instances")
    _add_common(p)
    p.add_argument("--max-tokens", dest="max_tokens", type=int, default=None)
    p.add_argument("--counter", default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--instances-per-task", dest="instances_per_task", type=int, default=None)
    p.add_argument("--pack-log", dest="pack_log", action="store_true")

    for name in ("render-eval", "evaluate"):
        p = sub.add_parser(name, help=f"{name} over benchmark or synthesized data")
        _add_common(p)
        p.add_argument("--benchmark-dir", dest="benchmark_dir", default=None)
        p.add_argument("--eval-tasks", dest="eval_tasks", default=None, help="name[:template[:kind]],...")
        p.add_argument("--style", dest="template_style", default=None, choices=("ours", "gpt3"))
        p.add_argument("--templates-file", dest="templates_file", default=None)
        p.add_argument("--shots", default=None, help="0, 1, an integer, or 'few'")
        p.add_argument("--few-shots", dest="few_shots", type=int, default=None)
        p.add_argument("--eval-seeds", dest="eval_seeds", default=None, help="comma-separated")
        p.add_argument("--scorer", default=None, help="ngram | ngram:PATH | process:CMD")
        p.add_argument("--scorer-corpus", dest="scorer_corpus", action="append", default=None)
        p.add_argument("--ngram-order", dest="ngram_order", type=int, default=None)
        p.add_argument("--ngram-k", dest="ngram_k", type=float, default=None)
        p.add_argument("--no-ngram-adapt", dest="no_ngram_adapt", action="store_true")
        p.add_argument("--max-new-tokens", dest="max_new_tokens", type=int, default=None)
        p.add_argument("--selfsup-file", dest="selfsup_file", default=None)
        p.add_argument("--eval-items", dest="eval_items", type=int, default=None)

    p = sub.add_parser("stats", help="summarize manifests and outputs")
    _add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "synthesize":
            cmd_synthesize(cfg)
        elif args.command == "pack":
            cmd_pack(cfg)
        elif args.command == "render-eval":
            cmd_render_eval(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg)
        elif args.command == "stats":
            cmd_stats(cfg)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    except PipelineError as exc:
        print(f"error: pipeline: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 - surfaced as a categorized exit
        print(f"error: internal: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
