import pytest

from icldata.errors import ConfigError
from icldata.packer import (
    Instance,
    TokenBudget,
    count_tokens,
    pack,
    register_counter,
    resolve_counter,
    subsample,
    vocab_counter,
)
from icldata.seeding import derive_rng
from icldata.taskgen import Example, Task, render_example


def _examples(n, task=Task.NSG, words_in=6, words_out=3, **meta):
    out = []
    for i in range(n):
        out.append(
            Example(
                task=task,
                input_text=" ".join(f"in{i}w{j}" for j in range(words_in)),
                output_text=" ".join(f"out{i}w{j}" for j in range(words_out)),
                meta={"doc_id": f"d/{i % 4}", "start": i, **meta},
            )
        )
    return out


class TestCounters:
    def test_whitespace(self):
        assert count_tokens("a b  c\nd") == 4

    def test_bytes(self):
        assert count_tokens("abc", "bytes") == 3

    def test_unknown_counter(self):
        with pytest.raises(ConfigError):
            resolve_counter("nope")

    def test_registered_counter(self):
        register_counter("halves", lambda text: len(text.split()) // 2)
        assert count_tokens("a b c d", "halves") == 2

    def test_vocab_counter_greedy_longest_match(self):
        count = vocab_counter(["ab", "a", "b", "cd"])
        # "abcd" -> ab + cd; "ba" -> b + a; "xy" -> two unknown chars
        assert count("abcd ba xy") == 2 + 2 + 2

    def test_vocab_counter_from_file(self, tmp_path):
        path = tmp_path / "units.txt"
        path.write_text("ab\na\nb\ncd\n", encoding="utf-8")
        assert count_tokens("abcd ba xy", f"vocab:{path}") == 6

    def test_budget_validation(self):
        with pytest.raises(ConfigError):
            TokenBudget(max_tokens=4)


class TestPack:
    def test_singleton(self):
        budget = TokenBudget(max_tokens=64)
        [instance] = pack(_examples(1), budget, derive_rng("p", 0))
        assert instance.example_count == 1
        assert len(instance.spans) == 1

    def test_spans_decode_outputs(self):
        budget = TokenBudget(max_tokens=40)
        examples = _examples(12)
        instances = pack(examples, budget, derive_rng("p", 1))
        by_output = {e.output_text for e in examples}
        for instance in instances:
            for start, end in instance.spans:
                assert instance.text[start:end] in by_output

    def test_budget_never_exceeded(self):
        budget = TokenBudget(max_tokens=25)
        for instance in pack(_examples(50), budget, derive_rng("p", 2)):
            assert count_tokens(instance.text) <= 25

    def test_overflow_seeds_next_instance(self):
        budget = TokenBudget(max_tokens=23)  # one example is 11 tokens + markers
        log = []
        instances = pack(_examples(7), budget, derive_rng("p", 3), log=log)
        total = sum(i.example_count for i in instances)
        assert total == 7  # nothing dropped, overflow examples deferred
        closed_by_overflow = [entry for entry in log if entry.next_candidate is not None]
        for entry in closed_by_overflow:
            text = instances[entry.instance_index].text
            assert count_tokens(text) <= 23
            assert count_tokens(text + "\n" + entry.next_candidate) > 23

    def test_oversize_example_dropped_with_warning(self):
        budget = TokenBudget(max_tokens=10)
        counters = {}
        examples = _examples(3, words_in=30)
        assert pack(examples, budget, derive_rng("p", 4), counters=counters) == []
        assert counters["oversize_examples"] == 3

    def test_mixed_tasks_rejected(self):
        examples = _examples(2) + _examples(2, task=Task.MWP)
        with pytest.raises(ValueError):
            pack(examples, TokenBudget(), derive_rng("p", 5))

    def test_deterministic(self):
        examples = _examples(40)
        budget = TokenBudget(max_tokens=60)
        first = pack(examples, budget, derive_rng("p", 6))
        second = pack(examples, budget, derive_rng("p", 6))
        assert first == second

    def test_pack_groups_stay_together(self):
        examples = []
        for g in range(10):
            for member in range(2):
                examples.append(
                    Example(
                        task=Task.CL,
                        input_text=f"group {g} member {member} text here",
                        output_text="Yes" if member == 0 else "No",
                        meta={"pack_group": f"g{g}", "pack_key": "same", "doc_id": "d/0", "start": g},
                    )
                )
        budget = TokenBudget(max_tokens=25)
        instances = pack(examples, budget, derive_rng("p", 7))
        for instance in instances:
            assert instance.example_count % 2 == 0

    def test_label_maps_never_mix(self):
        examples = []
        for i in range(30):
            key = ("Yes|No", "T|F")[i % 2]
            examples.append(
                Example(
                    task=Task.LPP_CLS,
                    input_text=f"question number {i} asks something here",
                    output_text="Yes" if key == "Yes|No" else "T",
                    meta={"pack_key": key, "doc_id": "d/0", "start": i},
                )
            )
        instances = pack(examples, TokenBudget(max_tokens=40), derive_rng("p", 8))
        for instance in instances:
            outputs = {instance.text[s:e] for s, e in instance.spans}
            assert outputs <= {"Yes", "No"} or outputs <= {"T", "F"}

    def test_every_instance_nonempty(self):
        for budget_size in (25, 40, 80, 200):
            instances = pack(_examples(60), TokenBudget(max_tokens=budget_size), derive_rng("p", 9))
            assert all(i.example_count >= 1 for i in instances)

    def test_text_matches_rendered_examples(self):
        examples = _examples(5)
        [instance] = pack(examples, TokenBudget(max_tokens=2048), derive_rng("p", 10))
        # instance text is newline-joined renders of its members, in draw order
        pieces = instance.text.split("\nInput: ")
        assert len(pieces) == 5
        rendered = {render_example(e) for e in examples}
        rebuilt = [pieces[0]] + ["Input: " + p for p in pieces[1:]]
        assert set(rebuilt) == rendered


class TestSubsample:
    def _instances(self, n):
        return [
            Instance(task="NSG", text=f"text {i}", spans=((0, 1),), example_count=1)
            for i in range(n)
        ]

    def test_ratio_one_is_permutation(self):
        instances = self._instances(30)
        result = subsample(instances, 1.0, derive_rng("s", 0))
        assert sorted(i.text for i in result) == sorted(i.text for i in instances)

    def test_ratio_half(self):
        result = subsample(self._instances(100), 0.5, derive_rng("s", 1))
        assert len(result) == 50
        assert len({i.text for i in result}) == 50

    def test_ratio_two_keeps_originals(self):
        instances = self._instances(100)
        result = subsample(instances, 2.0, derive_rng("s", 2))
        assert len(result) == 200
        texts = [i.text for i in result]
        for instance in instances:
            assert instance.text in texts

    def test_bad_ratio(self):
        with pytest.raises(ConfigError):
            subsample(self._instances(5), 0.0, derive_rng("s", 3))

    def test_deterministic(self):
        instances = self._instances(50)
        a = subsample(instances, 0.3, derive_rng("s", 4))
        b = subsample(instances, 0.3, derive_rng("s", 4))
        assert a == b
