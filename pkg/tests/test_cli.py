import json
import os

import pytest

from icldata.cli import (
    PipelineConfig,
    build_config,
    cmd_evaluate,
    cmd_pack,
    cmd_render_eval,
    cmd_synthesize,
    config_hash,
    load_config_file,
    main,
    make_parser,
)
from icldata.errors import ConfigError
from icldata.toytext import write_corpus


@pytest.fixture(scope="module")
def corpus_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return write_corpus(root, domains=("alpha", "beta"), docs_per_domain=40, seed=3)


def _config(corpus_paths, out_dir, **overrides):
    cfg = PipelineConfig(
        corpus={d: (p,) for d, p in corpus_paths.items()},
        seed=5,
        tasks=("nsg", "mwp", "lpp", "cl"),
        instances_per_task=10_000,
        max_tokens=200,
        out_dir=str(out_dir),
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _line_count(path):
    with open(path, encoding="utf-8") as handle:
        return sum(1 for _ in handle)


class TestConfigHash:
    def test_semantic_field_changes_hash(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path)
        base = config_hash(cfg)
        cfg.ratio = 0.5
        assert config_hash(cfg) != base

    def test_execution_fields_do_not(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path)
        base = config_hash(cfg)
        cfg.workers = 8
        cfg.out_dir = "elsewhere"
        cfg.pack_log = True
        assert config_hash(cfg) == base

    def test_each_semantic_field_matters(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path)
        base = config_hash(cfg)
        for name, value in (
            ("seed", 6),
            ("min_sentence_words", 5),
            ("tasks", ("nsg",)),
            ("random_label", True),
            ("max_tokens", 512),
            ("shots", "1"),
        ):
            changed = _config(corpus_paths, tmp_path)
            setattr(changed, name, value)
            assert config_hash(changed) != base, name


class TestConfigParsing:
    def test_ini_round_trip(self, tmp_path, corpus_paths):
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[corpus]\n"
            f"alpha = {corpus_paths['alpha']}\n"
            "[sample]\n"
            "alpha = 20\n"
            "[pipeline]\n"
            "seed = 9\n"
            "tasks = nsg,lpp\n"
            "ratio = 0.5\n"
            "random_label = true\n"
            "[eval]\n"
            "eval_seeds = 1,2\n"
            "shots = few\n",
            encoding="utf-8",
        )
        cfg = load_config_file(ini)
        assert cfg.seed == 9
        assert cfg.tasks == ("nsg", "lpp")
        assert cfg.ratio == 0.5
        assert cfg.random_label is True
        assert cfg.eval_seeds == (1, 2)
        assert cfg.docs_per_domain == {"alpha": 20}

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[pipeline]\nbogus = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config_file(ini)

    def test_flags_override_file(self, tmp_path, corpus_paths):
        ini = tmp_path / "run.ini"
        ini.write_text("[pipeline]\nseed = 9\n", encoding="utf-8")
        parser = make_parser()
        args = parser.parse_args(
            ["synthesize", "--config", str(ini), "--seed", "13",
             "--corpus", f"alpha={corpus_paths['alpha']}"]
        )
        cfg = build_config(args)
        assert cfg.seed == 13
        assert cfg.corpus["alpha"]

    def test_bad_task_family(self, corpus_paths, tmp_path):
        with pytest.raises(ConfigError):
            _config(corpus_paths, tmp_path, tasks=("nsg", "bogus"))

    def test_empty_tasks(self, corpus_paths, tmp_path):
        with pytest.raises(ConfigError):
            _config(corpus_paths, tmp_path, tasks=())


class TestSynthesize:
    def test_default_four_families_four_files(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "out")
        manifest = cmd_synthesize(cfg)
        files = sorted(os.listdir(tmp_path / "out" / "examples"))
        assert files == ["cl.jsonl", "lpp.jsonl", "mwp.jsonl", "nsg.jsonl"]
        assert set(manifest["files"]) == set(files)

    def test_manifest_counts_match_line_counts(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "out")
        manifest = cmd_synthesize(cfg)
        for name, declared in manifest["files"].items():
            assert declared == _line_count(tmp_path / "out" / "examples" / name)

    def test_single_task_setting(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "out", tasks=("nsg",))
        manifest = cmd_synthesize(cfg)
        assert list(manifest["files"]) == ["nsg.jsonl"]
        assert set(manifest["counts_per_task"]) == {"NSG"}

    def test_random_label_routes_all_examples(self, corpus_paths, tmp_path):
        plain = _config(corpus_paths, tmp_path / "plain")
        cmd_synthesize(plain)
        corrupted = _config(corpus_paths, tmp_path / "rand", random_label=True)
        cmd_synthesize(corrupted)
        with open(tmp_path / "rand" / "examples" / "nsg.jsonl", encoding="utf-8") as handle:
            records = [json.loads(line) for line in handle]
        assert records and all(r["meta"].get("corrupted") for r in records)
        # inputs unchanged, outputs redrawn from the task's donor pool
        with open(tmp_path / "plain" / "examples" / "nsg.jsonl", encoding="utf-8") as handle:
            plain_records = [json.loads(line) for line in handle]
        assert [r["input"] for r in records] == [r["input"] for r in plain_records]
        outputs = {r["output"] for r in plain_records}
        assert all(r["output"] in outputs for r in records)
        assert any(a["output"] != b["output"] for a, b in zip(records, plain_records))

    def test_holdout_split(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "out", holdout_fraction=0.25)
        manifest = cmd_synthesize(cfg)
        assert "nsg.heldout.jsonl" in manifest["files"]
        assert manifest["files"]["nsg.heldout.jsonl"] > 0

    def test_no_corpus_is_config_error(self, tmp_path):
        cfg = PipelineConfig(out_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            cmd_synthesize(cfg)

    def test_worker_count_does_not_change_output(self, corpus_paths, tmp_path):
        one = _config(corpus_paths, tmp_path / "w1", workers=1)
        cmd_synthesize(one)
        many = _config(corpus_paths, tmp_path / "w4", workers=4)
        cmd_synthesize(many)
        for name in os.listdir(tmp_path / "w1" / "examples"):
            a = (tmp_path / "w1" / "examples" / name).read_bytes()
            b = (tmp_path / "w4" / "examples" / name).read_bytes()
            assert a == b, name


@pytest.fixture(scope="module")
def packed(corpus_paths, tmp_path_factory):
    out = tmp_path_factory.mktemp("packed")
    cfg = _config(corpus_paths, out)
    cmd_synthesize(cfg)
    manifest = cmd_pack(cfg)
    return cfg, manifest, out


class TestPack:
    def test_one_instance_file_per_family(self, packed):
        cfg, manifest, out = packed
        assert sorted(os.listdir(out / "instances")) == ["cl.jsonl", "lpp.jsonl", "mwp.jsonl", "nsg.jsonl"]

    def test_manifest_counts_match(self, packed):
        cfg, manifest, out = packed
        for name, declared in manifest["files"].items():
            assert declared == _line_count(out / "instances" / name)

    def test_stats_include_avg_examples(self, packed):
        cfg, manifest, out = packed
        for family, domains in manifest["stats"].items():
            for domain, bucket in domains.items():
                assert bucket["avg_examples_per_instance"] >= 1.0

    def test_instances_respect_budget_and_spans(self, packed):
        cfg, manifest, out = packed
        with open(out / "instances" / "nsg.jsonl", encoding="utf-8") as handle:
            for line in handle:
                record = json.loads(line)
                assert len(record["text"].split()) <= cfg.max_tokens
                assert len(record["loss_spans"]) == record["example_count"]
                for start, end in record["loss_spans"]:
                    assert 0 <= start < end <= len(record["text"])

    def test_ratio_halves_instances(self, corpus_paths, tmp_path):
        base = _config(corpus_paths, tmp_path / "full")
        cmd_synthesize(base)
        full = cmd_pack(base)
        half_cfg = _config(corpus_paths, tmp_path / "half", ratio=0.5)
        cmd_synthesize(half_cfg)
        half = cmd_pack(half_cfg)
        for name in full["files"]:
            assert half["files"][name] == round(full["files"][name] * 0.5)

    def test_target_truncates(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "cap", instances_per_task=3)
        cmd_synthesize(cfg)
        manifest = cmd_pack(cfg)
        assert all(count == 3 for count in manifest["files"].values())

    def test_target_cap_preserves_subtask_mix(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "mix", tasks=("lpp",), instances_per_task=30)
        cmd_synthesize(cfg)
        cmd_pack(cfg)
        rows = []
        with open(tmp_path / "mix" / "instances" / "lpp.jsonl", encoding="utf-8") as handle:
            rows = [json.loads(line) for line in handle]
        assert {r["task"] for r in rows} == {"LPP_GEN", "LPP_CLS"}
        # strided truncation keeps all label pools, not just the first ones
        pool_of = {label: pair for pair in (("Yes", "No"), ("Y", "N"), ("True", "False"), ("T", "F")) for label in pair}
        seen = set()
        for row in rows:
            if row["task"] == "LPP_CLS":
                label = row["text"].rsplit("Output: ", 1)[1].split("\n")[0]
                seen.add(pool_of[label])
        assert len(seen) == 4

    def test_missing_examples_dir(self, corpus_paths, tmp_path):
        cfg = _config(corpus_paths, tmp_path / "nowhere")
        with pytest.raises(Exception):
            cmd_pack(cfg)


@pytest.fixture(scope="module")
def pipeline(corpus_paths, tmp_path_factory):
    out = tmp_path_factory.mktemp("evalrun")
    cfg = _config(
        corpus_paths,
        out,
        tasks=("lpp",),
        holdout_fraction=0.3,
    )
    cmd_synthesize(cfg)
    cfg.selfsup_file = str(out / "examples" / "lpp.heldout.jsonl")
    cfg.scorer_corpus = tuple(corpus_paths.values())
    cfg.eval_seeds = (1, 2)
    cfg.eval_items = 20
    return cfg, out


class TestEvaluateCli:
    def test_render_eval_writes_items(self, pipeline):
        cfg, out = pipeline
        cmd_render_eval(cfg)
        path = out / "eval_items" / "selfsup_cls.seed1.jsonl"
        assert path.exists()
        with open(path, encoding="utf-8") as handle:
            rows = [json.loads(line) for line in handle]
        assert rows and all(set(r["candidates"]) == {"Yes", "No", "Y", "N", "True", "False", "T", "F"} for r in rows)

    def test_evaluate_writes_report(self, pipeline):
        cfg, out = pipeline
        report = cmd_evaluate(cfg)
        assert (out / "report.json").exists()
        payload = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert "selfsup_cls" in payload["per_task"]
        assert len(report.average.runs) == 2


class TestBenchmarkDirMode:
    @pytest.fixture()
    def benchmark_dir(self, tmp_path):
        bench = tmp_path / "bench"
        bench.mkdir()
        test_rows = [
            {"Context": f"Fact {i} held.", "Question": "Did it hold?", "gold": i % 2}
            for i in range(6)
        ]
        train_rows = [
            {"Context": f"Known {i} stood.", "Question": "Did it stand?", "gold": i % 2}
            for i in range(10)
        ]
        gen_test = [{"Input": f"say word{i}", "Output": f"word{i} said"} for i in range(4)]
        gen_train = [{"Input": f"say demo{i}", "Output": f"demo{i} said"} for i in range(5)]
        for name, rows in (
            ("boolq.test", test_rows), ("boolq.train", train_rows),
            ("gen.test", gen_test), ("gen.train", gen_train),
        ):
            with open(bench / f"{name}.jsonl", "w", encoding="utf-8") as handle:
                for row in rows:
                    handle.write(json.dumps(row) + "\n")
        return bench

    @pytest.mark.parametrize("style", ["ours", "gpt3"])
    def test_styles_produce_reports(self, corpus_paths, benchmark_dir, tmp_path, style):
        cfg = PipelineConfig(
            out_dir=str(tmp_path / style),
            benchmark_dir=str(benchmark_dir),
            eval_tasks=("boolq",),
            template_style=style,
            shots="1",
            eval_seeds=(1, 2),
            scorer="ngram",
            scorer_corpus=(corpus_paths["alpha"],),
        )
        report = cmd_evaluate(cfg)
        assert "accuracy" in report.per_task["boolq"]
        assert len(report.average.runs) == 2

    def test_generation_task_through_cli(self, corpus_paths, benchmark_dir, tmp_path):
        cfg = PipelineConfig(
            out_dir=str(tmp_path / "gen"),
            benchmark_dir=str(benchmark_dir),
            eval_tasks=("gen",),
            shots="1",
            eval_seeds=(1,),
            scorer="ngram",
            scorer_corpus=(corpus_paths["alpha"],),
            max_new_tokens=8,
        )
        report = cmd_evaluate(cfg)
        assert "rouge_l" in report.per_task["gen"]

    def test_missing_task_file_names_task(self, corpus_paths, benchmark_dir, tmp_path):
        cfg = PipelineConfig(
            out_dir=str(tmp_path / "miss"),
            benchmark_dir=str(benchmark_dir),
            eval_tasks=("rte",),
            scorer="ngram",
            scorer_corpus=(corpus_paths["alpha"],),
        )
        with pytest.raises(Exception, match="rte"):
            cmd_evaluate(cfg)


class TestMainEntry:
    def test_synthesize_via_argv(self, corpus_paths, tmp_path):
        rc = main(
            [
                "synthesize",
                "--corpus", f"alpha={corpus_paths['alpha']}",
                "--corpus", f"beta={corpus_paths['beta']}",
                "--tasks", "nsg",
                "--seed", "4",
                "--out-dir", str(tmp_path / "out"),
            ]
        )
        assert rc == 0
        assert (tmp_path / "out" / "examples" / "nsg.jsonl").exists()

    def test_config_error_exit_code(self, tmp_path):
        rc = main(["synthesize", "--tasks", "nope", "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_missing_examples_exit_code(self, tmp_path):
        rc = main(["pack", "--out-dir", str(tmp_path / "missing")])
        assert rc == 4

    def test_stats_runs(self, corpus_paths, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(
            ["synthesize", "--corpus", f"alpha={corpus_paths['alpha']}",
             "--tasks", "nsg", "--out-dir", str(out)]
        ) == 0
        assert main(["pack", "--tasks", "nsg", "--out-dir", str(out), "--max-tokens", "200"]) == 0
        assert main(["stats", "--out-dir", str(out)]) == 0
        captured = capsys.readouterr()
        assert "manifest.pack.json" in captured.out
        assert "MISMATCH" not in captured.out
